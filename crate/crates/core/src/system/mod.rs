//! Switched linear systems `ẋ = A_{σ(t)} x`, dwell-time signal classes,
//! concrete switching signals and exact piecewise-exponential simulation.
//!
//! Mode indices are 0-based in the Rust API. The JSON signal format and the
//! trajectory CSV use 1-based mode labels.

mod crossing;
mod signal;
mod simulate;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::linalg::{LinalgError, Matrix};

pub use crossing::{zero_crossing_time, CROSSING_BISECTION_TOL, CROSSING_SCAN_STEPS};
pub use signal::{
    periodic_signal, sample_signal, validate_signal, DwellClass, DwellVariant, Interval,
    SignalValidation, SwitchEvent, SwitchingSignal, Violation, ViolationKind,
};
pub use simulate::{simulate, transition_matrix, Trajectory};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SystemError {
    #[error("a switched system needs at least one mode")]
    NoModes,
    #[error("mode {mode} is {rows}x{cols}, expected {n}x{n}")]
    ModeShape {
        mode: usize,
        rows: usize,
        cols: usize,
        n: usize,
    },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error("no sign change of entry ({row}, {col}) in ({t_min}, {t_max}]")]
    NoCrossing {
        row: usize,
        col: usize,
        t_min: f64,
        t_max: f64,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SignalError {
    #[error("horizon must be positive and finite, got {0}")]
    BadHorizon(f64),
    #[error("event {index}: time {time} is not positive and finite")]
    BadEventTime { index: usize, time: f64 },
    #[error("event {index}: time {time} does not exceed the previous event")]
    NotIncreasing { index: usize, time: f64 },
    #[error("event {index}: time {time} is not before the horizon {horizon}")]
    BeyondHorizon {
        index: usize,
        time: f64,
        horizon: f64,
    },
    #[error("event {index}: switches to the already active mode {mode}")]
    RepeatedMode { index: usize, mode: usize },
    #[error("event {index}: mode {mode} out of range for {modes} modes")]
    ModeOutOfRange {
        index: usize,
        mode: usize,
        modes: usize,
    },
    #[error("invalid dwell class: {0}")]
    BadClass(String),
    #[error("periodic pattern: {0}")]
    BadPattern(String),
}

/// The matrix family `A_1, …, A_M` of a switched linear system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SystemFile", into = "SystemFile")]
pub struct SwitchedLinearSystem {
    n: usize,
    modes: Vec<Matrix>,
}

/// On-disk form: `{"n": 2, "modes": [[a11, a12, a21, a22], ...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SystemFile {
    pub n: usize,
    pub modes: Vec<Vec<f64>>,
}

impl TryFrom<SystemFile> for SwitchedLinearSystem {
    type Error = SystemError;

    fn try_from(file: SystemFile) -> Result<Self, Self::Error> {
        let modes = file
            .modes
            .into_iter()
            .map(|d| Matrix::from_row_major(file.n, file.n, d))
            .collect::<Result<Vec<_>, _>>()?;
        SwitchedLinearSystem::new(modes)
    }
}

impl From<SwitchedLinearSystem> for SystemFile {
    fn from(sys: SwitchedLinearSystem) -> Self {
        SystemFile {
            n: sys.n,
            modes: sys.modes.into_iter().map(Matrix::into_vec).collect(),
        }
    }
}

impl SwitchedLinearSystem {
    pub fn new(modes: Vec<Matrix>) -> Result<Self, SystemError> {
        let first = modes.first().ok_or(SystemError::NoModes)?;
        let n = first.rows();
        for (mode, a) in modes.iter().enumerate() {
            if a.rows() != n || a.cols() != n {
                return Err(SystemError::ModeShape {
                    mode,
                    rows: a.rows(),
                    cols: a.cols(),
                    n,
                });
            }
            if !a.is_finite() {
                return Err(LinalgError::NonFinite { row: 0, col: 0 }.into());
            }
        }
        Ok(Self { n, modes })
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("system serializes")
    }

    /// State dimension.
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn mode_count(&self) -> usize {
        self.modes.len()
    }

    pub fn modes(&self) -> &[Matrix] {
        &self.modes
    }

    pub fn mode(&self, i: usize) -> &Matrix {
        &self.modes[i]
    }

    /// Applies the same similarity `T A_i T⁻¹` to every mode.
    pub fn similarity(&self, t: &Matrix) -> Result<Self, SystemError> {
        let ti = crate::linalg::inverse(t)?;
        Self::new(self.modes.iter().map(|a| &(t * a) * &ti).collect())
    }

    /// SHA-256 over the dimension, mode count and the little-endian bytes of
    /// every entry; hex encoded.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.n as u64).to_le_bytes());
        h.update((self.modes.len() as u64).to_le_bytes());
        for a in &self.modes {
            for v in a.as_slice() {
                h.update(v.to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }
}

/// Systems used by the worked examples.
pub mod builtin {
    use super::SwitchedLinearSystem;
    use crate::linalg::Matrix;

    /// Two Hurwitz spirals with vertical and horizontal major axes,
    /// `A_1 = [[−ε, −1], [4, −ε]]`, `A_2 = [[−ε, −4], [1, −ε]]`.
    pub fn delay_in_switching(eps: f64) -> SwitchedLinearSystem {
        SwitchedLinearSystem::new(vec![
            Matrix::from_rows(&[[-eps, -1.0], [4.0, -eps]]),
            Matrix::from_rows(&[[-eps, -4.0], [1.0, -eps]]),
        ])
        .expect("valid builtin system")
    }

    /// Two modes that each have an eigenvalue with positive real part.
    pub fn unstable_subsystems() -> SwitchedLinearSystem {
        SwitchedLinearSystem::new(vec![
            Matrix::from_rows(&[[-1.9, 0.6], [0.6, -0.1]]),
            Matrix::from_rows(&[[0.1, -0.9], [0.1, -1.4]]),
        ])
        .expect("valid builtin system")
    }
}
