//! Replaces the matrix exponential in the switch condition by a chain of K
//! linear inequalities and watches the smallest feasible mu approach the
//! exponential route as K grows.
//!
//!     cargo run --release --example k_relaxation

use dwellcert::certify::{line_search_mu, CertifyParams, Route};
use dwellcert::system::builtin;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sys = builtin::unstable_subsystems();
    let base = CertifyParams::new(0.001, 0.6, 0.6, 0.25);
    let exact = line_search_mu(&sys, &base)?.mu_hat;
    println!("{:>8}  {:>8}", "route", "mu_hat");
    println!("{:>8}  {exact:>8.4}", "exp");
    for k in [1, 2, 4, 8, 16, 32] {
        let p = base.clone().with_route(Route::KRelax { k });
        match line_search_mu(&sys, &p) {
            Ok(s) => println!("{:>8}  {:>8.4}", format!("K={k}"), s.mu_hat),
            Err(e) => println!("{:>8}  {e}", format!("K={k}")),
        }
    }
    Ok(())
}
