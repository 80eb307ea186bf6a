use super::decomp::Lu;
use super::{LinalgError, Matrix};

/// Degree-13 Padé numerator coefficients (Higham, 2005).
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// Matrix exponential `e^{A t}`.
///
/// Scaling and squaring with `s = ⌈log2 ‖At‖₁⌉` halvings, so the Padé core
/// always sees a matrix of 1-norm at most one, then `s` squarings.
pub fn mat_exp(a: &Matrix, t: f64) -> Result<Matrix, LinalgError> {
    let n = a.require_square()?;
    if !t.is_finite() {
        return Err(LinalgError::NonFiniteScalar);
    }
    let at = a.scale(t);
    let norm = at.norm_1();
    if norm == 0.0 {
        return Ok(Matrix::identity(n));
    }
    let squarings = if norm > 1.0 {
        norm.log2().ceil() as i32
    } else {
        0
    };
    let scaled = at.scale(0.5f64.powi(squarings));
    let mut r = pade13(&scaled)?;
    for _ in 0..squarings {
        r = &r * &r;
    }
    Ok(r)
}

fn pade13(a: &Matrix) -> Result<Matrix, LinalgError> {
    let n = a.rows();
    let b = &PADE13;
    let ident = Matrix::identity(n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;

    let mut u_inner = a6.scale(b[13]);
    u_inner.axpy(b[11], &a4);
    u_inner.axpy(b[9], &a2);
    let mut u_tail = &a6 * &u_inner;
    u_tail.axpy(b[7], &a6);
    u_tail.axpy(b[5], &a4);
    u_tail.axpy(b[3], &a2);
    u_tail.axpy(b[1], &ident);
    let u = a * &u_tail;

    let mut v_inner = a6.scale(b[12]);
    v_inner.axpy(b[10], &a4);
    v_inner.axpy(b[8], &a2);
    let mut v = &a6 * &v_inner;
    v.axpy(b[6], &a6);
    v.axpy(b[4], &a4);
    v.axpy(b[2], &a2);
    v.axpy(b[0], &ident);

    let num = &v + &u;
    let den = &v - &u;
    Ok(Lu::new(&den)?.solve(&num))
}
