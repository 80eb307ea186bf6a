//! The multiple-Lyapunov certificate as data: what synthesis produces and
//! what verification consumes. Depends only on `linalg`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{max_eig, min_eig, SymMatrix};

/// Which inequality links `P_i^+` to `P_j^-` across a switch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Route {
    /// Matrix exponentials evaluated directly.
    ExpSwitch,
    /// A chain of `k` LMIs linear in the mode matrix.
    KRelax { k: usize },
}

impl std::fmt::Display for Route {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Route::ExpSwitch => write!(f, "exp_switch"),
            Route::KRelax { k } => write!(f, "k_relax(K={k})"),
        }
    }
}

/// Interior links `Q_1 … Q_{K−1}` of one relaxation chain. Modes are
/// 0-based in memory and 1-based in files.
#[derive(Debug, Clone, PartialEq)]
pub struct CertificateChain {
    pub from: usize,
    pub to: usize,
    pub links: Vec<SymMatrix>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub tool_version: String,
    pub parameters: serde_json::Value,
    pub route: String,
}

/// `P_i^±` for every mode plus the parameters they were certified for.
///
/// Claims `ρ`-exponential stability on the strict dwell-time class
/// `[τ1, τ2]` with overshoot constant `overshoot_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticCertificate {
    pub fingerprint: String,
    pub rho: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub mu: f64,
    pub nu: f64,
    pub route: Route,
    pub p_plus: Vec<SymMatrix>,
    pub p_minus: Vec<SymMatrix>,
    pub chains: Option<Vec<CertificateChain>>,
    pub overshoot_m: f64,
    pub metadata: Metadata,
}

#[derive(Debug, Error)]
pub enum CertificateError {
    #[error("malformed certificate: {0}")]
    Malformed(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Overshoot constant for `|Φ(t)x| ≤ M e^{−ρt}|x|`.
///
/// `sqrt(max λmax(P) / min λmin(P))` over all `P_i^±`, times
/// `e^{max(ν+ρ, 0)·τ1}` to cover the growth allowed by the `ν` bound during
/// the last `τ1` of an interval, where the decrease is only accounted for at
/// the next switch. Infinite if some `P` is not positive definite.
pub fn overshoot_bound(
    p_plus: &[SymMatrix],
    p_minus: &[SymMatrix],
    nu: f64,
    rho: f64,
    tau1: f64,
) -> f64 {
    let all = || p_plus.iter().chain(p_minus);
    let hi = all().map(max_eig).fold(0.0, f64::max);
    let lo = all().map(min_eig).fold(f64::INFINITY, f64::min);
    if !(lo > 0.0) {
        return f64::INFINITY;
    }
    (hi / lo).sqrt() * ((nu + rho).max(0.0) * tau1).exp()
}

#[derive(Serialize, Deserialize)]
struct ChainFile {
    from: usize,
    to: usize,
    links: Vec<SymMatrix>,
}

#[derive(Serialize, Deserialize)]
struct CertificateFile {
    fingerprint: String,
    rho: f64,
    tau1: f64,
    tau2: f64,
    mu: f64,
    nu: f64,
    route: Route,
    p_plus: Vec<SymMatrix>,
    p_minus: Vec<SymMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    chains: Option<Vec<ChainFile>>,
    overshoot_m: f64,
    metadata: Metadata,
}

impl QuadraticCertificate {
    pub fn mode_count(&self) -> usize {
        self.p_plus.len()
    }

    /// Largest eigenvalue over all `P_i^±`; the scale for tolerances.
    pub fn scale(&self) -> f64 {
        self.p_plus
            .iter()
            .chain(&self.p_minus)
            .map(max_eig)
            .fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> String {
        let file = CertificateFile {
            fingerprint: self.fingerprint.clone(),
            rho: self.rho,
            tau1: self.tau1,
            tau2: self.tau2,
            mu: self.mu,
            nu: self.nu,
            route: self.route,
            p_plus: self.p_plus.clone(),
            p_minus: self.p_minus.clone(),
            chains: self.chains.as_ref().map(|cs| {
                cs.iter()
                    .map(|c| ChainFile {
                        from: c.from + 1,
                        to: c.to + 1,
                        links: c.links.clone(),
                    })
                    .collect()
            }),
            overshoot_m: self.overshoot_m,
            metadata: self.metadata.clone(),
        };
        serde_json::to_string_pretty(&file).expect("certificate serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, CertificateError> {
        let f: CertificateFile = serde_json::from_str(s)?;
        if f.p_plus.is_empty() || f.p_plus.len() != f.p_minus.len() {
            return Err(CertificateError::Malformed(format!(
                "{} P^+ and {} P^- matrices",
                f.p_plus.len(),
                f.p_minus.len()
            )));
        }
        let n = f.p_plus[0].dim();
        if f.p_plus.iter().chain(&f.p_minus).any(|p| p.dim() != n) {
            return Err(CertificateError::Malformed(
                "matrices of different sizes".into(),
            ));
        }
        let m = f.p_plus.len();
        let chains = match f.chains {
            None => None,
            Some(cs) => Some(
                cs.into_iter()
                    .map(|c| {
                        if c.from == 0 || c.to == 0 || c.from > m || c.to > m {
                            return Err(CertificateError::Malformed(format!(
                                "chain {}->{} outside modes 1..={m}",
                                c.from, c.to
                            )));
                        }
                        Ok(CertificateChain {
                            from: c.from - 1,
                            to: c.to - 1,
                            links: c.links,
                        })
                    })
                    .collect::<Result<_, _>>()?,
            ),
        };
        Ok(Self {
            fingerprint: f.fingerprint,
            rho: f.rho,
            tau1: f.tau1,
            tau2: f.tau2,
            mu: f.mu,
            nu: f.nu,
            route: f.route,
            p_plus: f.p_plus,
            p_minus: f.p_minus,
            chains,
            overshoot_m: f.overshoot_m,
            metadata: f.metadata,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> QuadraticCertificate {
        QuadraticCertificate {
            fingerprint: "abc".into(),
            rho: 0.1,
            tau1: 1.0,
            tau2: 2.0,
            mu: 0.5,
            nu: 0.2,
            route: Route::KRelax { k: 2 },
            p_plus: vec![SymMatrix::identity(2), SymMatrix::from_diag(&[4.0, 1.0])],
            p_minus: vec![SymMatrix::identity(2), SymMatrix::identity(2)],
            chains: Some(vec![CertificateChain {
                from: 1,
                to: 0,
                links: vec![SymMatrix::from_diag(&[2.0, 1.0])],
            }]),
            overshoot_m: 2.0,
            metadata: Metadata {
                tool_version: "0.0.0".into(),
                parameters: serde_json::json!({"rho": 0.1}),
                route: "k_relax".into(),
            },
        }
    }

    #[test]
    fn json_roundtrip_and_one_based_chains() {
        let c = toy();
        let s = c.to_json();
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["chains"][0]["from"], 2);
        assert_eq!(v["route"]["kind"], "k_relax");
        assert_eq!(v["route"]["k"], 2);
        assert_eq!(QuadraticCertificate::from_json(&s).unwrap(), c);
    }

    #[test]
    fn malformed_rejected() {
        let mut c = toy();
        c.p_minus.pop();
        assert!(QuadraticCertificate::from_json(&c.to_json()).is_err());
        let s = toy().to_json().replace("\"from\": 2", "\"from\": 0");
        assert!(QuadraticCertificate::from_json(&s).is_err());
    }

    #[test]
    fn overshoot_formula() {
        let c = toy();
        let m = overshoot_bound(&c.p_plus, &c.p_minus, 0.2, 0.1, 1.0);
        assert!((m - 2.0 * 0.3f64.exp()).abs() < 1e-12);
        assert!((overshoot_bound(&c.p_plus, &c.p_minus, -1.0, 0.1, 1.0) - 2.0).abs() < 1e-12);
        let bad = [SymMatrix::from_diag(&[1.0, -1.0])];
        assert_eq!(overshoot_bound(&bad, &bad, 0.0, 0.0, 1.0), f64::INFINITY);
    }
}
