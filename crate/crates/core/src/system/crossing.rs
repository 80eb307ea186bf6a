use super::SystemError;
use crate::linalg::{mat_exp, Matrix};

/// Number of scan cells across the search window.
pub const CROSSING_SCAN_STEPS: usize = 10_000;
/// Final bracket width of the bisection refinement.
pub const CROSSING_BISECTION_TOL: f64 = 1e-10;

/// First zero of `t ↦ (e^{At})[row, col]` in `(t_min, t_max]`.
///
/// A coarse sign scan at `(t_max − t_min)/10⁴` locates the first bracket,
/// then bisection narrows it to `1e-10`. Only sign changes count: a zero at
/// `t_min` (the window is open on the left) or an entry that vanishes
/// without changing sign is not a crossing. Indices are 0-based.
pub fn zero_crossing_time(
    a: &Matrix,
    row: usize,
    col: usize,
    t_min: f64,
    t_max: f64,
) -> Result<f64, SystemError> {
    let n = a.require_square()?;
    if row >= n || col >= n {
        return Err(SystemError::InvalidParameter(format!(
            "entry ({row}, {col}) outside a {n}x{n} matrix"
        )));
    }
    if !(t_min.is_finite() && t_max.is_finite() && t_max > t_min) {
        return Err(SystemError::InvalidParameter(format!(
            "bad window ({t_min}, {t_max}]"
        )));
    }
    let entry = |t: f64| -> Result<f64, SystemError> { Ok(mat_exp(a, t)?[(row, col)]) };
    let h = (t_max - t_min) / CROSSING_SCAN_STEPS as f64;

    let mut prev_t = t_min;
    let mut prev_v = entry(t_min)?;
    for k in 1..=CROSSING_SCAN_STEPS {
        let t = if k == CROSSING_SCAN_STEPS {
            t_max
        } else {
            t_min + k as f64 * h
        };
        let v = entry(t)?;
        if v == 0.0 {
            // Only a sign change counts; an identically zero entry is not a
            // crossing.
            if k == CROSSING_SCAN_STEPS && prev_v != 0.0 {
                return Ok(t);
            }
            continue;
        }
        if prev_v != 0.0 && (prev_v < 0.0) != (v < 0.0) {
            return bisect(&entry, prev_t, prev_v, t);
        }
        prev_t = t;
        prev_v = v;
    }
    Err(SystemError::NoCrossing {
        row,
        col,
        t_min,
        t_max,
    })
}

fn bisect(
    f: &impl Fn(f64) -> Result<f64, SystemError>,
    mut lo: f64,
    lo_v: f64,
    mut hi: f64,
) -> Result<f64, SystemError> {
    let lo_neg = lo_v < 0.0;
    while hi - lo > CROSSING_BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        let v = f(mid)?;
        if v == 0.0 {
            return Ok(mid);
        }
        if (v < 0.0) == lo_neg {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
