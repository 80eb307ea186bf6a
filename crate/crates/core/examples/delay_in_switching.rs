//! Rotating system whose two modes stretch and compress along different axes.
//! Finds the smallest jump factor at the crossing time and the longest extra
//! delay the certificate tolerates.
//!
//!     cargo run --release --example delay_in_switching

use std::f64::consts::FRAC_PI_2;

use dwellcert::certify::{max_admissible_delay, CertifyParams};
use dwellcert::system::{builtin, zero_crossing_time};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let eps = 0.1;
    let sys = builtin::delay_in_switching(eps);
    let tau_bar = zero_crossing_time(sys.mode(0), 1, 0, 0.0, 4.0)?;
    println!("entry (2,1) of e^(A1 t) first vanishes at t = {tau_bar:.10} (pi/2 = {FRAC_PI_2:.10})");

    let params = CertifyParams::new(0.001, tau_bar, tau_bar, 1.5);
    let d = max_admissible_delay(&sys, &params)?;
    let search = d.synthesis.search.as_ref().expect("line search ran");
    println!(
        "mu_hat = {:.4} after {} solves, admissible delay = {:.4}",
        d.mu_hat,
        search.evaluations.len(),
        d.delta
    );
    println!("{}", d.synthesis.report);
    println!(
        "switching intervals in [{:.4}, {:.4}] keep the system exponentially stable",
        d.synthesis.certificate.tau1, d.synthesis.certificate.tau2
    );
    Ok(())
}
