//! Both modes are unstable on their own, yet switching between them with
//! intervals in [0.6, 2.3] is exponentially stable.
//!
//!     cargo run --release --example unstable_subsystems

use dwellcert::certify::{synthesize, CertifyParams};
use dwellcert::linalg::eigenvalues;
use dwellcert::lmi::max_window;
use dwellcert::system::{builtin, DwellClass};
use dwellcert::verify::trajectory_decrease_check;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sys = builtin::unstable_subsystems();
    for (i, a) in sys.modes().iter().enumerate() {
        let eig: Vec<String> = eigenvalues(a)?.iter().map(|e| format!("{:.4}", e.re)).collect();
        println!("mode {}: eigenvalues {}", i + 1, eig.join(", "));
    }

    let (mu, nu, rho, tau1) = (0.65, 0.25, 0.001, 0.6);
    println!("largest tau2 allowed by mu = {mu}: {:.4}", tau1 + max_window(mu, nu, rho));

    let syn = synthesize(&sys, &CertifyParams::new(rho, tau1, 2.3, nu), Some(mu))?;
    println!("{}", syn.report);

    let cert = &syn.certificate;
    let cls = DwellClass::strict(cert.tau1, cert.tau2)?;
    let tr = trajectory_decrease_check(cert, &sys, &cls, 200, 4, 20.0, 1)?;
    println!(
        "{} trajectories: {} envelope and {} chain violations (worst ratios {:.3}, {:.3})",
        tr.n_signals * tr.n_states,
        tr.envelope_violations,
        tr.chain_violations,
        tr.worst_envelope_ratio,
        tr.worst_chain_ratio
    );
    println!("M = {:.4}, rho = {}", cert.overshoot_m, cert.rho);
    Ok(())
}
