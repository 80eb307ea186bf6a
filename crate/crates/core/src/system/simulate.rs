use std::io::{self, Write};

use super::{SwitchedLinearSystem, SwitchingSignal, SystemError};
use crate::linalg::{mat_exp, Matrix};

/// Sampled solution of `ẋ = A_{σ(t)} x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Mode active from `times[k]` onward (until the next sample).
    pub modes: Vec<usize>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("trajectory has at least one sample")
    }

    pub fn norms(&self) -> impl Iterator<Item = f64> + '_ {
        self.states.iter().map(|x| norm(x))
    }

    /// CSV with header `t,mode,x1,...,xn`; modes are written 1-based.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let n = self.states.first().map_or(0, Vec::len);
        write!(w, "t,mode")?;
        for i in 1..=n {
            write!(w, ",x{i}")?;
        }
        writeln!(w)?;
        for ((t, x), m) in self.times.iter().zip(&self.states).zip(&self.modes) {
            write!(w, "{t},{}", m + 1)?;
            for v in x {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn check_dims(sys: &SwitchedLinearSystem, sig: &SwitchingSignal) -> Result<(), SystemError> {
    sig.check_mode_range(sys.mode_count())?;
    Ok(())
}

/// Exact flow of the switched system along `sig`.
///
/// Each constant-mode interval is propagated with the matrix exponential
/// from its start state, so the only error is that of `mat_exp`. Samples sit
/// on the global grid `k·sample_dt`, at every switching instant and at the
/// horizon.
pub fn simulate(
    sys: &SwitchedLinearSystem,
    sig: &SwitchingSignal,
    x0: &[f64],
    sample_dt: f64,
) -> Result<Trajectory, SystemError> {
    if x0.len() != sys.dim() {
        return Err(SystemError::DimensionMismatch {
            expected: sys.dim(),
            got: x0.len(),
        });
    }
    if !(sample_dt.is_finite() && sample_dt > 0.0) {
        return Err(SystemError::InvalidParameter(format!(
            "sample_dt must be positive, got {sample_dt}"
        )));
    }
    check_dims(sys, sig)?;

    let step_maps: Vec<Matrix> = sys
        .modes()
        .iter()
        .map(|a| mat_exp(a, sample_dt))
        .collect::<Result<_, _>>()?;

    let mut traj = Trajectory {
        times: Vec::new(),
        states: Vec::new(),
        modes: Vec::new(),
    };
    let mut x = x0.to_vec();
    for iv in sig.intervals() {
        let a = sys.mode(iv.mode);
        traj.times.push(iv.start);
        traj.states.push(x.clone());
        traj.modes.push(iv.mode);

        // Interior grid points strictly inside (start, end).
        let mut k = (iv.start / sample_dt).floor() as u64 + 1;
        let mut grid_t = k as f64 * sample_dt;
        if grid_t < iv.end {
            let mut y = mat_exp(a, grid_t - iv.start)?.mul_vec(&x);
            while grid_t < iv.end {
                traj.times.push(grid_t);
                traj.states.push(y.clone());
                traj.modes.push(iv.mode);
                k += 1;
                grid_t = k as f64 * sample_dt;
                y = step_maps[iv.mode].mul_vec(&y);
            }
        }
        x = mat_exp(a, iv.len())?.mul_vec(&x);
    }
    traj.times.push(sig.horizon());
    traj.states.push(x);
    traj.modes.push(*traj.modes.last().expect("at least one interval"));
    Ok(traj)
}

/// State-transition matrix `Φ_σ(horizon, 0)`.
pub fn transition_matrix(
    sys: &SwitchedLinearSystem,
    sig: &SwitchingSignal,
) -> Result<Matrix, SystemError> {
    check_dims(sys, sig)?;
    let mut phi = Matrix::identity(sys.dim());
    for iv in sig.intervals() {
        phi = &mat_exp(sys.mode(iv.mode), iv.len())? * &phi;
    }
    Ok(phi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{builtin, periodic_signal};
    use std::f64::consts::PI;

    #[test]
    fn scalar_decay() {
        let sys = SwitchedLinearSystem::new(vec![Matrix::from_diag(&[-1.0])]).unwrap();
        let sig = SwitchingSignal::constant(0, 1.0).unwrap();
        let traj = simulate(&sys, &sig, &[1.0], 0.1).unwrap();
        assert!((traj.final_state()[0] - (-1.0f64).exp()).abs() < 1e-10);
        assert_eq!(*traj.times.last().unwrap(), 1.0);
        for (t, x) in traj.times.iter().zip(&traj.states) {
            assert!((x[0] - (-t).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_state_stays_zero() {
        let sys = builtin::delay_in_switching(0.1);
        let sig = periodic_signal(&[(1.0, 0), (0.5, 1)], 6.0).unwrap();
        let traj = simulate(&sys, &sig, &[0.0, 0.0], 0.05).unwrap();
        assert!(traj.states.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn switching_instants_are_sampled() {
        let sys = builtin::delay_in_switching(0.1);
        let sig = periodic_signal(&[(0.33, 0), (0.71, 1)], 3.0).unwrap();
        let traj = simulate(&sys, &sig, &[1.0, 0.0], 0.25).unwrap();
        for e in sig.events() {
            assert!(traj.times.contains(&e.time));
        }
        assert!(traj.times.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(traj.states[0], vec![1.0, 0.0]);
    }

    #[test]
    fn period_map_closed_form() {
        // Over one 3π/2 period: x ↦ e^{−3επ/2} diag(−4, −1/4) x.
        let eps = 0.1;
        let sys = builtin::delay_in_switching(eps);
        let tau = 0.75 * PI;
        let sig = periodic_signal(&[(tau, 0), (tau, 1)], 2.0 * tau).unwrap();
        let x = simulate(&sys, &sig, &[0.5, 0.0], 0.01).unwrap();
        let expected = -4.0 * 0.5 * (-1.5 * eps * PI).exp();
        let xf = x.final_state();
        assert!((xf[0] - expected).abs() < 1e-10 * expected.abs());
        assert!(xf[1].abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        let sys = builtin::delay_in_switching(0.1);
        let sig = SwitchingSignal::constant(0, 1.0).unwrap();
        assert!(matches!(
            simulate(&sys, &sig, &[1.0], 0.1),
            Err(SystemError::DimensionMismatch { expected: 2, got: 1 })
        ));
        let bad_mode = SwitchingSignal::constant(5, 1.0).unwrap();
        assert!(simulate(&sys, &bad_mode, &[1.0, 0.0], 0.1).is_err());
    }

    #[test]
    fn csv_header_and_rows() {
        let sys = SwitchedLinearSystem::new(vec![Matrix::from_diag(&[-1.0, -2.0])]).unwrap();
        let sig = SwitchingSignal::constant(0, 0.5).unwrap();
        let traj = simulate(&sys, &sig, &[1.0, 1.0], 0.25).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,mode,x1,x2"));
        assert_eq!(lines.next(), Some("0,1,1,1"));
        assert_eq!(text.lines().count(), 1 + traj.len());
    }

    #[test]
    fn transition_matrix_matches_simulation() {
        let sys = builtin::unstable_subsystems();
        let sig = periodic_signal(&[(0.7, 0), (1.3, 1)], 9.0).unwrap();
        let phi = transition_matrix(&sys, &sig).unwrap();
        let x = simulate(&sys, &sig, &[0.3, -1.0], 0.1).unwrap();
        let y = phi.mul_vec(&[0.3, -1.0]);
        for (a, b) in x.final_state().iter().zip(&y) {
            assert!((a - b).abs() < 1e-12 * norm(&y));
        }
    }
}
