//! Samples signals from each dwell-time class, validates them, and compares
//! empirical growth rates under the strict and star variants.
//!
//!     cargo run --release --example dwell_classes

use dwellcert::system::{builtin, sample_signal, validate_signal, DwellClass};
use dwellcert::verify::{empirical_growth, lemma1_equivalence_probe};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let classes = [
        ("strict [0.6, 2.3]", DwellClass::strict(0.6, 2.3)?),
        ("star [0.6, 2.3]", DwellClass::star(0.6, 2.3)?),
        ("fixed 1.0", DwellClass::fixed(1.0)?),
        ("dwell >= 0.6", DwellClass::pure_dwell(0.6)?),
    ];
    for (name, cls) in &classes {
        let sig = sample_signal(cls, 10.0, 2, 42)?;
        let gaps: Vec<String> = sig.gaps().iter().map(|g| format!("{g:.2}")).collect();
        println!(
            "{name:>18}: gaps [{}], valid = {}",
            gaps.join(", "),
            validate_signal(&sig, cls).is_valid()
        );
    }

    let sys = builtin::unstable_subsystems();
    for (name, cls) in &classes[..3] {
        let g = empirical_growth(&sys, cls, 500, 40.0, 7)?;
        println!("{name:>18}: worst rate {:.4}, mean {:.4}", g.rate, g.mean_rate);
    }
    let p = lemma1_equivalence_probe(&sys, 0.6, 2.3, 2000, 50.0, 3)?;
    println!(
        "strict vs star: rates {:.4} / {:.4}, overshoot ratio {:.3}",
        p.rate_strict, p.rate_star, p.overshoot_ratio
    );
    Ok(())
}
