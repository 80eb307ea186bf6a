//! Fixed switching at the crossing time is stable, but spending 3pi/4 in each
//! mode makes the period map expand. Writes the diverging trajectory to CSV.
//!
//!     cargo run --release --example diverging_trajectory [out.csv]

use std::f64::consts::{FRAC_PI_2, PI};
use std::fs::File;
use std::io::BufWriter;

use dwellcert::system::{builtin, periodic_signal, simulate};
use dwellcert::verify::{fixed_time_product_check, period_map_radius};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let eps = 0.1;
    let sys = builtin::delay_in_switching(eps);

    let scan = fixed_time_product_check(&sys, FRAC_PI_2, 4)?;
    for c in &scan.cycles {
        let modes: Vec<String> = c.modes.iter().map(|m| (m + 1).to_string()).collect();
        println!("tau = pi/2, cycle {}: radius {:.6}", modes.join(""), c.radius);
    }

    let pattern = [(0.75 * PI, 0), (0.75 * PI, 1)];
    let r = period_map_radius(&sys, &pattern)?;
    println!("3pi/4 per mode: period radius {r:.6} (closed form {:.6})", 4.0 * (-1.5 * eps * PI).exp());

    let sig = periodic_signal(&pattern, 4.0 * 1.5 * PI)?;
    let traj = simulate(&sys, &sig, &[0.5, 0.0], 0.01)?;
    for (k, (t, n)) in traj.times.iter().zip(traj.norms()).enumerate() {
        if k % 236 == 0 {
            println!("t = {t:7.3}  |x| = {n:.4}");
        }
    }
    let path = std::env::args().nth(1).unwrap_or_else(|| "diverging.csv".into());
    traj.write_csv(BufWriter::new(File::create(&path)?))?;
    println!("wrote {} samples to {path}", traj.len());
    Ok(())
}
