use serde::{Deserialize, Serialize};

use super::{LinalgError, Matrix, SymMatrix};

/// Relative off-diagonal residual at which the Jacobi sweeps stop.
pub const JACOBI_TOL: f64 = 1e-12;
/// Sweep cap for the cyclic Jacobi method.
pub const JACOBI_MAX_SWEEPS: usize = 100;
const QR_MAX_ITS: usize = 60;

/// Eigen-decomposition of a symmetric matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    /// Column `k` is the unit eigenvector for `values[k]`.
    pub vectors: Matrix,
}

impl SymEigen {
    /// Rebuilds `V diag(f(λ)) Vᵀ`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let n = self.values.len();
        let mapped: Vec<f64> = self.values.iter().map(|&l| f(l)).collect();
        let mut out = SymMatrix::zeros(n);
        for i in 0..n {
            for j in i..n {
                let v: f64 = (0..n)
                    .map(|k| self.vectors[(i, k)] * mapped[k] * self.vectors[(j, k)])
                    .sum();
                out.set(i, j, v);
            }
        }
        out
    }
}

/// Cyclic Jacobi rotations on a dense copy of `s`.
pub fn sym_eigen(s: &SymMatrix) -> SymEigen {
    let n = s.dim();
    let mut a = s.to_matrix();
    let mut v = Matrix::identity(n);
    let scale = s.norm_fro();
    if scale > 0.0 {
        for _ in 0..JACOBI_MAX_SWEEPS {
            let off: f64 = (0..n)
                .flat_map(|p| ((p + 1)..n).map(move |q| (p, q)))
                .map(|(p, q)| 2.0 * a[(p, q)] * a[(p, q)])
                .sum::<f64>()
                .sqrt();
            if off <= JACOBI_TOL * scale {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    rotate(&mut a, &mut v, p, q);
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let values = order.iter().map(|&k| a[(k, k)]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        for i in 0..n {
            vectors[(i, dst)] = v[(i, src)];
        }
    }
    SymEigen { values, vectors }
}

fn rotate(a: &mut Matrix, v: &mut Matrix, p: usize, q: usize) {
    let apq = a[(p, q)];
    if apq == 0.0 {
        return;
    }
    let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    let n = a.rows();
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = c * akp - s * akq;
        a[(k, q)] = s * akp + c * akq;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = c * apk - s * aqk;
        a[(q, k)] = s * apk + c * aqk;
    }
    a[(p, q)] = 0.0;
    a[(q, p)] = 0.0;
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn sym_eig(s: &SymMatrix) -> Vec<f64> {
    sym_eigen(s).values
}

pub fn min_eig(s: &SymMatrix) -> f64 {
    sym_eig(s)[0]
}

pub fn max_eig(s: &SymMatrix) -> f64 {
    *sym_eig(s).last().expect("non-empty matrix")
}

/// Projection onto `{X ⪰ floor·I}` in the Frobenius norm.
pub fn clip_eigenvalues(s: &SymMatrix, floor: f64) -> SymMatrix {
    sym_eigen(s).reconstruct_with(|l| l.max(floor))
}

/// A (possibly complex) eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Eigenvalue {
    pub re: f64,
    pub im: f64,
}

impl Eigenvalue {
    pub fn modulus(&self) -> f64 {
        self.re.hypot(self.im)
    }
}

/// Eigenvalues of a general real square matrix.
///
/// `n ≤ 2` uses the trace/determinant formula; larger matrices are reduced
/// to Hessenberg form and deflated with Francis double-shift QR steps
/// (deflation at machine precision relative to the neighbouring diagonal).
pub fn eigenvalues(a: &Matrix) -> Result<Vec<Eigenvalue>, LinalgError> {
    let n = a.require_square()?;
    match n {
        1 => Ok(vec![Eigenvalue {
            re: a[(0, 0)],
            im: 0.0,
        }]),
        2 => Ok(eig2(a[(0, 0)], a[(0, 1)], a[(1, 0)], a[(1, 1)]).to_vec()),
        _ => {
            let h = hessenberg(a);
            francis_qr(h)
        }
    }
}

fn eig2(a: f64, b: f64, c: f64, d: f64) -> [Eigenvalue; 2] {
    let half_tr = 0.5 * (a + d);
    let half_diff = 0.5 * (a - d);
    let disc = half_diff * half_diff + b * c;
    if disc >= 0.0 {
        let r = disc.sqrt();
        // Larger-magnitude root first, the other via the determinant to
        // avoid cancellation.
        let big = if half_tr >= 0.0 { half_tr + r } else { half_tr - r };
        let det = a * d - b * c;
        let small = if big != 0.0 { det / big } else { half_tr - r };
        let (lo, hi) = if big < small { (big, small) } else { (small, big) };
        [
            Eigenvalue { re: lo, im: 0.0 },
            Eigenvalue { re: hi, im: 0.0 },
        ]
    } else {
        let r = (-disc).sqrt();
        [
            Eigenvalue {
                re: half_tr,
                im: -r,
            },
            Eigenvalue { re: half_tr, im: r },
        ]
    }
}

/// Similarity reduction to upper Hessenberg form by stabilized elementary
/// transformations.
fn hessenberg(a: &Matrix) -> Matrix {
    let n = a.rows();
    let mut h = a.clone();
    for m in 1..n.saturating_sub(1) {
        let mut x: f64 = 0.0;
        let mut piv = m;
        for j in m..n {
            if h[(j, m - 1)].abs() > x.abs() {
                x = h[(j, m - 1)];
                piv = j;
            }
        }
        if piv != m {
            for j in (m - 1)..n {
                let tmp = h[(piv, j)];
                h[(piv, j)] = h[(m, j)];
                h[(m, j)] = tmp;
            }
            for j in 0..n {
                let tmp = h[(j, piv)];
                h[(j, piv)] = h[(j, m)];
                h[(j, m)] = tmp;
            }
        }
        if x != 0.0 {
            for i in (m + 1)..n {
                let mut y = h[(i, m - 1)];
                if y != 0.0 {
                    y /= x;
                    h[(i, m - 1)] = 0.0;
                    for j in m..n {
                        h[(i, j)] -= y * h[(m, j)];
                    }
                    for j in 0..n {
                        h[(j, m)] += y * h[(j, i)];
                    }
                }
            }
        }
    }
    h
}

/// Double-shift QR on an upper Hessenberg matrix. Works with 1-based
/// indices internally, which keeps the deflation bookkeeping readable.
fn francis_qr(h: Matrix) -> Result<Vec<Eigenvalue>, LinalgError> {
    let n = h.rows();
    let mut a = vec![vec![0.0f64; n + 1]; n + 1];
    for i in 0..n {
        for j in 0..n {
            a[i + 1][j + 1] = h[(i, j)];
        }
    }
    let mut wr = vec![0.0; n + 1];
    let mut wi = vec![0.0; n + 1];

    let mut anorm = 0.0;
    for i in 1..=n {
        for j in (i.max(2) - 1)..=n {
            anorm += a[i][j].abs();
        }
    }
    let mut nn = n;
    let mut t = 0.0;
    let (mut p, mut q, mut r);
    let (mut x, mut y, mut z, mut w);
    let mut s;
    while nn >= 1 {
        let mut its = 0;
        loop {
            let mut l = nn;
            while l >= 2 {
                s = a[l - 1][l - 1].abs() + a[l][l].abs();
                if s == 0.0 {
                    s = anorm;
                }
                if a[l][l - 1].abs() <= f64::EPSILON * s {
                    a[l][l - 1] = 0.0;
                    break;
                }
                l -= 1;
            }
            x = a[nn][nn];
            if l == nn {
                wr[nn] = x + t;
                wi[nn] = 0.0;
                nn -= 1;
                break;
            }
            y = a[nn - 1][nn - 1];
            w = a[nn][nn - 1] * a[nn - 1][nn];
            if l == nn - 1 {
                p = 0.5 * (y - x);
                q = p * p + w;
                z = q.abs().sqrt();
                x += t;
                if q >= 0.0 {
                    z = p + z.copysign(p);
                    wr[nn - 1] = x + z;
                    wr[nn] = x + z;
                    if z != 0.0 {
                        wr[nn] = x - w / z;
                    }
                    wi[nn - 1] = 0.0;
                    wi[nn] = 0.0;
                } else {
                    wr[nn - 1] = x + p;
                    wr[nn] = x + p;
                    wi[nn - 1] = -z;
                    wi[nn] = z;
                }
                nn -= 2;
                break;
            }
            if its == QR_MAX_ITS {
                return Err(LinalgError::NoConvergence);
            }
            if its == 10 || its == 20 {
                // Exceptional shift.
                t += x;
                for i in 1..=nn {
                    a[i][i] -= x;
                }
                s = a[nn][nn - 1].abs() + a[nn - 1][nn - 2].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            its += 1;
            let mut m = nn - 2;
            loop {
                z = a[m][m];
                r = x - z;
                s = y - z;
                p = (r * s - w) / a[m + 1][m] + a[m][m + 1];
                q = a[m + 1][m + 1] - z - r - s;
                r = a[m + 2][m + 1];
                s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let u = a[m][m - 1].abs() * (q.abs() + r.abs());
                let v = p.abs() * (a[m - 1][m - 1].abs() + z.abs() + a[m + 1][m + 1].abs());
                if u <= f64::EPSILON * v {
                    break;
                }
                m -= 1;
            }
            for i in (m + 2)..=nn {
                a[i][i - 2] = 0.0;
                if i != m + 2 {
                    a[i][i - 3] = 0.0;
                }
            }
            let mut k = m;
            while k < nn {
                if k != m {
                    p = a[k][k - 1];
                    q = a[k + 1][k - 1];
                    r = 0.0;
                    if k != nn - 1 {
                        r = a[k + 2][k - 1];
                    }
                    x = p.abs() + q.abs() + r.abs();
                    if x != 0.0 {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                s = (p * p + q * q + r * r).sqrt().copysign(p);
                if s != 0.0 {
                    if k == m {
                        if l != m {
                            a[k][k - 1] = -a[k][k - 1];
                        }
                    } else {
                        a[k][k - 1] = -s * x;
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    z = r / s;
                    q /= p;
                    r /= p;
                    for j in k..=nn {
                        p = a[k][j] + q * a[k + 1][j];
                        if k != nn - 1 {
                            p += r * a[k + 2][j];
                            a[k + 2][j] -= p * z;
                        }
                        a[k + 1][j] -= p * y;
                        a[k][j] -= p * x;
                    }
                    let mmin = if nn < k + 3 { nn } else { k + 3 };
                    for i in l..=mmin {
                        p = x * a[i][k] + y * a[i][k + 1];
                        if k != nn - 1 {
                            p += z * a[i][k + 2];
                            a[i][k + 2] -= p * r;
                        }
                        a[i][k + 1] -= p * q;
                        a[i][k] -= p;
                    }
                }
                k += 1;
            }
            if l >= nn - 1 {
                break;
            }
        }
    }
    Ok((1..=n)
        .map(|i| Eigenvalue {
            re: wr[i],
            im: wi[i],
        })
        .collect())
}

/// True iff every eigenvalue has strictly negative real part.
pub fn is_hurwitz(a: &Matrix) -> Result<bool, LinalgError> {
    Ok(eigenvalues(a)?.iter().all(|e| e.re < 0.0))
}

/// Largest eigenvalue modulus.
pub fn spectral_radius(a: &Matrix) -> Result<f64, LinalgError> {
    Ok(eigenvalues(a)?
        .iter()
        .map(Eigenvalue::modulus)
        .fold(0.0, f64::max))
}

pub fn is_schur(a: &Matrix) -> Result<bool, LinalgError> {
    Ok(spectral_radius(a)? < 1.0)
}

/// Upper bound on the 2-norm logarithmic norm, `λmax((A + Aᵀ)/2)`.
pub fn log_norm(a: &Matrix) -> Result<f64, LinalgError> {
    Ok(max_eig(&SymMatrix::from_matrix_sym_part(a)?))
}
