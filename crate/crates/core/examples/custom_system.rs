//! Certifies a user-supplied system read from JSON, searching over mu and a
//! few growth bounds, then checks the certificate independently.
//!
//!     cargo run --release --example custom_system [system.json [tau1]]

use dwellcert::certify::{nu_grid, search_nu, CertifyParams};
use dwellcert::system::SwitchedLinearSystem;
use dwellcert::verify::{verify_certificate, DEFAULT_GRID_POINTS};

const DEFAULT_SYSTEM: &str = r#"{
  "n": 2,
  "modes": [
    [-0.1, 1.0, -2.0, -0.1],
    [-0.1, 2.0, -1.0, -0.1]
  ]
}"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let text = match std::env::args().nth(1) {
        Some(path) => std::fs::read_to_string(path)?,
        None => DEFAULT_SYSTEM.to_owned(),
    };
    let sys = SwitchedLinearSystem::from_json(&text)?;
    println!("{} modes of dimension {}, fingerprint {}", sys.mode_count(), sys.dim(), &sys.fingerprint()[..16]);

    let tau1: f64 = match std::env::args().nth(2) {
        Some(t) => t.parse()?,
        None => 2.0,
    };
    let params = CertifyParams::new(0.01, tau1, tau1, 0.0);
    let mut best = None;
    for (nu, r) in search_nu(&sys, &params, &nu_grid(&sys)?) {
        match r {
            Ok(d) => {
                println!("nu = {nu:.3}: mu_hat = {:.4}, window [{tau1}, {:.4}]", d.mu_hat, tau1 + d.delta);
                if best.as_ref().is_none_or(|b: &dwellcert::certify::AdmissibleDelay| d.delta > b.delta) {
                    best = Some(d);
                }
            }
            Err(e) => println!("nu = {nu:.3}: {e}"),
        }
    }
    let Some(best) = best else {
        println!("no certificate found");
        return Ok(());
    };
    let cert = &best.synthesis.certificate;
    let report = verify_certificate(cert, &sys, 2 * DEFAULT_GRID_POINTS)?;
    println!("{report}");
    println!("{}", cert.to_json());
    Ok(())
}
