use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use super::VerifyError;
use crate::certificate::QuadraticCertificate;
use crate::linalg::{mat_exp, max_eig, spectral_radius, Matrix, SymMatrix};
use crate::system::{
    sample_signal, simulate, transition_matrix, DwellClass, DwellVariant, SwitchedLinearSystem,
};

/// Sampling step of the envelope check.
pub const TRAJECTORY_SAMPLE_DT: f64 = 0.05;
const RATIO_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryReport {
    pub n_signals: usize,
    pub n_states: usize,
    pub horizon: f64,
    pub seed: u64,
    pub samples: usize,
    /// Samples with `|x(t)| > M e^{−ρt} |x0|`.
    pub envelope_violations: usize,
    /// Switching instants with `v^-(x(t_k)) > e^{−ρ(t_k − t_{k−1})} v^-(x(t_{k−1}))`.
    pub chain_violations: usize,
    pub worst_envelope_ratio: f64,
    pub worst_chain_ratio: f64,
}

fn unit_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let r = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if r > 1e-12 {
            return v.into_iter().map(|x| x / r).collect();
        }
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Per-signal seeds drawn from one master stream, so results do not depend
/// on how the work is split across threads.
fn signal_seeds(seed: u64, n: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen()).collect()
}

/// Monte-Carlo check of the stability claim carried by a certificate.
///
/// Draws `n_signals` signals from `cls` and `n_states` random unit initial
/// states per signal, then checks the envelope `M e^{−ρt}` at every sample
/// and the decrease of `v^-_{σ(t_k)}(x) = sqrt(xᵀP^-x)` between consecutive
/// switching instants (starting at `t_0 = 0`).
pub fn trajectory_decrease_check(
    cert: &QuadraticCertificate,
    sys: &SwitchedLinearSystem,
    cls: &DwellClass,
    n_signals: usize,
    n_states: usize,
    horizon: f64,
    seed: u64,
) -> Result<TrajectoryReport, VerifyError> {
    if cert.p_minus.len() != sys.mode_count() {
        return Err(VerifyError::Shape(format!(
            "{} modes in the system, {} in the certificate",
            sys.mode_count(),
            cert.p_minus.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jobs: Vec<(u64, Vec<Vec<f64>>)> = (0..n_signals)
        .map(|_| {
            let s: u64 = rng.gen();
            let xs = (0..n_states).map(|_| unit_vector(&mut rng, sys.dim())).collect();
            (s, xs)
        })
        .collect();

    let parts = jobs
        .par_iter()
        .map(|(s, xs)| -> Result<TrajectoryReport, VerifyError> {
            let sig = sample_signal(cls, horizon, sys.mode_count(), *s)?;
            let mut part = TrajectoryReport {
                n_signals: 1,
                n_states: xs.len(),
                horizon,
                seed,
                samples: 0,
                envelope_violations: 0,
                chain_violations: 0,
                worst_envelope_ratio: 0.0,
                worst_chain_ratio: 0.0,
            };
            let steps: Vec<(f64, usize, Matrix)> = sig
                .intervals()
                .map(|iv| Ok((iv.start, iv.mode, mat_exp(sys.mode(iv.mode), iv.len())?)))
                .collect::<Result<_, VerifyError>>()?;
            for x0 in xs {
                let traj = simulate(sys, &sig, x0, TRAJECTORY_SAMPLE_DT)?;
                let n0 = norm(x0);
                for (t, x) in traj.times.iter().zip(&traj.states) {
                    let r = norm(x) / (cert.overshoot_m * (-cert.rho * t).exp() * n0);
                    part.samples += 1;
                    part.worst_envelope_ratio = part.worst_envelope_ratio.max(r);
                    if r > 1.0 + RATIO_SLACK {
                        part.envelope_violations += 1;
                    }
                }

                // Chain over switching instants; the tail interval has no
                // closing switch and is skipped.
                let mut x = x0.clone();
                let mut prev: Option<(f64, f64)> = None;
                for (start, mode, e) in &steps {
                    let v = cert.p_minus[*mode].quad_form(&x).max(0.0).sqrt();
                    if let Some((t_prev, v_prev)) = prev {
                        let bound = (-cert.rho * (start - t_prev)).exp() * v_prev;
                        let r = v / bound;
                        part.worst_chain_ratio = part.worst_chain_ratio.max(r);
                        if r > 1.0 + RATIO_SLACK {
                            part.chain_violations += 1;
                        }
                    }
                    prev = Some((*start, v));
                    x = e.mul_vec(&x);
                }
            }
            Ok(part)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut out = TrajectoryReport {
        n_signals,
        n_states,
        horizon,
        seed,
        samples: 0,
        envelope_violations: 0,
        chain_violations: 0,
        worst_envelope_ratio: 0.0,
        worst_chain_ratio: 0.0,
    };
    for p in parts {
        out.samples += p.samples;
        out.envelope_violations += p.envelope_violations;
        out.chain_violations += p.chain_violations;
        out.worst_envelope_ratio = out.worst_envelope_ratio.max(p.worst_envelope_ratio);
        out.worst_chain_ratio = out.worst_chain_ratio.max(p.worst_chain_ratio);
    }
    Ok(out)
}

/// Monte-Carlo estimate of the worst exponential rate on a signal class.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthEstimate {
    /// `max ln(|Φ(T) e_k|)/T` over sampled signals and basis vectors.
    pub rate: f64,
    pub mean_rate: f64,
    pub n_signals: usize,
    pub horizon: f64,
    pub seed: u64,
}

fn upper_gap(cls: &DwellClass) -> f64 {
    match cls.variant() {
        DwellVariant::PureDwell if cls.tau1() > 0.0 => 2.0 * cls.tau1(),
        DwellVariant::PureDwell => 1.0,
        _ => cls.tau2(),
    }
}

fn basis_rate(phi: &Matrix, horizon: f64) -> f64 {
    let n = phi.cols();
    let worst = (0..n)
        .map(|k| (0..n).map(|r| phi[(r, k)].powi(2)).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    worst.ln() / horizon
}

/// Largest observed `ln(|Φ(T)x0|/|x0|)/T` over `n_signals` sampled signals
/// and the canonical basis. A lower bound on the true worst-case rate.
pub fn empirical_growth(
    sys: &SwitchedLinearSystem,
    cls: &DwellClass,
    n_signals: usize,
    horizon: f64,
    seed: u64,
) -> Result<GrowthEstimate, VerifyError> {
    if !(horizon >= 5.0 * upper_gap(cls)) || n_signals == 0 {
        return Err(VerifyError::InvalidParameter(format!(
            "need at least one signal and horizon >= 5 tau2 (horizon {horizon}, tau2 {})",
            upper_gap(cls)
        )));
    }
    let rates = signal_seeds(seed, n_signals)
        .par_iter()
        .map(|&s| {
            let sig = sample_signal(cls, horizon, sys.mode_count(), s)?;
            Ok(basis_rate(&transition_matrix(sys, &sig)?, horizon))
        })
        .collect::<Result<Vec<f64>, VerifyError>>()?;
    Ok(GrowthEstimate {
        rate: rates.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        mean_rate: rates.iter().sum::<f64>() / rates.len() as f64,
        n_signals,
        horizon,
        seed,
    })
}

/// Strict-class versus star-class comparison on coupled samples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lemma1Probe {
    pub rate_strict: f64,
    pub rate_star: f64,
    /// `max ‖Φ(t_k)‖₂ e^{−r t_k}` over switching instants, with `r` the
    /// larger of the two rates.
    pub overshoot_strict: f64,
    pub overshoot_star: f64,
    /// `overshoot_star / overshoot_strict`.
    pub overshoot_ratio: f64,
    pub n_signals: usize,
    pub horizon: f64,
}

fn spectral_norm(m: &Matrix) -> f64 {
    let gram = SymMatrix::from_matrix_sym_part(&(&m.transpose() * m)).expect("square");
    max_eig(&gram).max(0.0).sqrt()
}

/// `(ln‖Φ(T)‖-rate over the basis, [(t_k, ‖Φ(t_k)‖₂)])` for one signal.
fn norm_profile(
    sys: &SwitchedLinearSystem,
    cls: &DwellClass,
    horizon: f64,
    seed: u64,
) -> Result<(f64, Vec<(f64, f64)>), VerifyError> {
    let sig = sample_signal(cls, horizon, sys.mode_count(), seed)?;
    let mut phi = Matrix::identity(sys.dim());
    let mut profile = Vec::new();
    for iv in sig.intervals() {
        phi = &mat_exp(sys.mode(iv.mode), iv.len())? * &phi;
        profile.push((iv.end, spectral_norm(&phi)));
    }
    Ok((basis_rate(&phi, horizon), profile))
}

/// Rates under the strict and star variants of `[τ1, τ2]`, plus overshoots.
///
/// Both variants consume the same per-signal seeds, so the sampled signals
/// differ only in the first interval.
pub fn lemma1_equivalence_probe(
    sys: &SwitchedLinearSystem,
    tau1: f64,
    tau2: f64,
    n_signals: usize,
    horizon: f64,
    seed: u64,
) -> Result<Lemma1Probe, VerifyError> {
    let strict = DwellClass::strict(tau1, tau2)?;
    let star = DwellClass::star(tau1, tau2)?;
    if !(horizon >= 5.0 * tau2) || n_signals == 0 || tau2 <= 0.0 {
        return Err(VerifyError::InvalidParameter(format!(
            "need at least one signal, tau2 > 0 and horizon >= 5 tau2 (horizon {horizon}, tau2 {tau2})"
        )));
    }
    let seeds = signal_seeds(seed, n_signals);
    let run = |cls: &DwellClass| {
        seeds
            .par_iter()
            .map(|&s| norm_profile(sys, cls, horizon, s))
            .collect::<Result<Vec<_>, VerifyError>>()
    };
    let a = run(&strict)?;
    let b = run(&star)?;
    let rate = |v: &[(f64, Vec<(f64, f64)>)]| v.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let (rate_strict, rate_star) = (rate(&a), rate(&b));
    let r = rate_strict.max(rate_star);
    let overshoot = |v: &[(f64, Vec<(f64, f64)>)]| {
        v.iter()
            .flat_map(|p| p.1.iter())
            .map(|(t, n)| n * (-r * t).exp())
            .fold(1.0, f64::max)
    };
    let (overshoot_strict, overshoot_star) = (overshoot(&a), overshoot(&b));
    Ok(Lemma1Probe {
        rate_strict,
        rate_star,
        overshoot_strict,
        overshoot_star,
        overshoot_ratio: overshoot_star / overshoot_strict,
        n_signals,
        horizon,
    })
}

/// `e^{A_{m_L}τ_L} ⋯ e^{A_{m_1}τ_1}` for a pattern of `(duration, mode)`.
pub fn period_map(sys: &SwitchedLinearSystem, pattern: &[(f64, usize)]) -> Result<Matrix, VerifyError> {
    let mut phi = Matrix::identity(sys.dim());
    for &(d, m) in pattern {
        if m >= sys.mode_count() {
            return Err(VerifyError::InvalidParameter(format!(
                "mode {m} outside 0..{}",
                sys.mode_count()
            )));
        }
        phi = &mat_exp(sys.mode(m), d)? * &phi;
    }
    Ok(phi)
}

pub fn period_map_radius(sys: &SwitchedLinearSystem, pattern: &[(f64, usize)]) -> Result<f64, VerifyError> {
    Ok(spectral_radius(&period_map(sys, pattern)?)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CycleRadius {
    /// Modes in application order, 0-based.
    pub modes: Vec<usize>,
    pub radius: f64,
    /// `radius^{1/len}`, comparable across cycle lengths.
    pub radius_per_switch: f64,
}

/// Spectral radii of fixed-time periodic switching products.
///
/// A necessary-condition scan only: Schur products do not prove stability
/// under arbitrary switching, but a product with radius `≥ 1` is an
/// instability witness for its periodic signal.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProductScan {
    pub tau: f64,
    pub cycles: Vec<CycleRadius>,
    pub max_radius: f64,
    pub max_radius_per_switch: f64,
}

fn canonical_cycles(m: usize, max_len: usize) -> Vec<Vec<usize>> {
    fn extend(seq: &mut Vec<usize>, m: usize, max_len: usize, out: &mut Vec<Vec<usize>>) {
        let len = seq.len();
        if len >= 2 && seq[len - 1] != seq[0] {
            let is_min_rotation = (1..len).all(|r| {
                let rot = seq[r..].iter().chain(&seq[..r]);
                seq.iter().le(rot)
            });
            if is_min_rotation {
                out.push(seq.clone());
            }
        }
        if len == max_len {
            return;
        }
        for next in 0..m {
            if next != seq[len - 1] && next >= seq[0] {
                seq.push(next);
                extend(seq, m, max_len, out);
                seq.pop();
            }
        }
    }
    let mut out = Vec::new();
    for first in 0..m {
        extend(&mut vec![first], m, max_len, &mut out);
    }
    out
}

/// Radii of `e^{A_{m_L}τ} ⋯ e^{A_{m_1}τ}` over all switching cycles of
/// length `2..=max_len` without immediate repetition (one representative per
/// rotation class). A single-mode system reports `e^{Aτ}` itself.
pub fn fixed_time_product_check(
    sys: &SwitchedLinearSystem,
    tau: f64,
    max_len: usize,
) -> Result<ProductScan, VerifyError> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(VerifyError::InvalidParameter(format!("tau must be positive, got {tau}")));
    }
    let cycles = if sys.mode_count() == 1 {
        vec![vec![0]]
    } else {
        canonical_cycles(sys.mode_count(), max_len.max(2))
    };
    let steps: Vec<Matrix> = sys
        .modes()
        .iter()
        .map(|a| mat_exp(a, tau))
        .collect::<Result<_, _>>()?;
    let cycles = cycles
        .into_par_iter()
        .map(|c| {
            let mut phi = Matrix::identity(sys.dim());
            for &m in &c {
                phi = &steps[m] * &phi;
            }
            let radius = spectral_radius(&phi)?;
            Ok(CycleRadius {
                radius_per_switch: radius.powf(1.0 / c.len() as f64),
                modes: c,
                radius,
            })
        })
        .collect::<Result<Vec<_>, VerifyError>>()?;
    Ok(ProductScan {
        tau,
        max_radius: cycles.iter().map(|c| c.radius).fold(0.0, f64::max),
        max_radius_per_switch: cycles.iter().map(|c| c.radius_per_switch).fold(0.0, f64::max),
        cycles,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cycles_are_rotation_representatives() {
        assert_eq!(canonical_cycles(2, 2), vec![vec![0, 1]]);
        // Length 3 with two modes is impossible without a repeat.
        assert_eq!(canonical_cycles(2, 3), vec![vec![0, 1]]);
        assert_eq!(canonical_cycles(2, 4), vec![vec![0, 1], vec![0, 1, 0, 1]]);
        let three = canonical_cycles(3, 3);
        assert!(three.contains(&vec![0, 1, 2]));
        assert!(three.contains(&vec![0, 2, 1]));
        assert!(!three.contains(&vec![1, 2, 0]));
        assert_eq!(three.len(), 3 + 2);
    }
}
