use std::f64::consts::FRAC_PI_2;

use dwellcert::certify::{
    line_search_mu, max_admissible_delay, overshoot_bound, search_nu, synthesize, CertifyError,
    CertifyParams, QuadraticCertificate, Route,
};
use dwellcert::linalg::Matrix;
use dwellcert::lmi::max_window;
use dwellcert::system::{builtin, SwitchedLinearSystem};
use dwellcert::verify::{verify_certificate, DEFAULT_GRID_POINTS};

fn ex1_params() -> CertifyParams {
    CertifyParams::new(0.001, FRAC_PI_2, FRAC_PI_2, 1.5)
}

#[test]
fn example1_line_search_brackets_the_boundary() {
    let sys = builtin::delay_in_switching(0.1);
    let s = line_search_mu(&sys, &ex1_params()).unwrap();
    assert!((0.84..=0.88).contains(&s.mu_hat), "mu_hat {}", s.mu_hat);
    // Monotone in μ: comfortably above is feasible, comfortably below is not.
    assert!(synthesize(&sys, &ex1_params(), Some(0.95)).is_ok());
    assert!(matches!(
        synthesize(&sys, &ex1_params(), Some(0.75)),
        Err(CertifyError::NoCertificate { .. })
    ));
}

#[test]
fn admissible_delay_is_window_formula() {
    let sys = builtin::delay_in_switching(0.1);
    let d = max_admissible_delay(&sys, &ex1_params()).unwrap();
    assert!((d.delta - (-d.mu_hat.ln() / 1.501)).abs() < 1e-12);
    let c = &d.synthesis.certificate;
    assert!((c.tau2 - c.tau1 - d.delta).abs() < 1e-12);
    assert!(d.synthesis.report.verdict.is_verified());
}

#[test]
fn window_too_long_is_reported() {
    let sys = builtin::unstable_subsystems();
    let p = CertifyParams::new(0.001, 0.6, 2.4, 0.25);
    match synthesize(&sys, &p, Some(0.65)) {
        Err(CertifyError::WindowTooLong { max_window: w, .. }) => {
            assert!((w - max_window(0.65, 0.25, 0.001)).abs() < 1e-15);
        }
        other => panic!("expected WindowTooLong, got {:?}", other.map(|s| s.certificate.tau2)),
    }
}

#[test]
fn invalid_parameters_rejected() {
    let sys = builtin::unstable_subsystems();
    let bad = [
        CertifyParams::new(0.001, 0.6, 0.5, 0.25),
        CertifyParams::new(f64::NAN, 0.6, 1.0, 0.25),
        CertifyParams::new(0.001, 0.0, 1.0, 0.25).with_route(Route::KRelax { k: 4 }),
        CertifyParams::new(0.001, 0.6, 1.0, 0.25).with_route(Route::KRelax { k: 0 }),
    ];
    for p in &bad {
        assert!(matches!(
            synthesize(&sys, p, Some(0.7)),
            Err(CertifyError::InvalidParameter(_))
        ));
    }
    assert!(matches!(
        synthesize(&sys, &CertifyParams::new(0.001, 0.6, 1.0, 0.25), Some(1.0)),
        Err(CertifyError::InvalidParameter(_))
    ));
}

#[test]
fn certificate_json_round_trip_reverifies() {
    let sys = builtin::unstable_subsystems();
    let syn = synthesize(&sys, &CertifyParams::new(0.001, 0.6, 2.3, 0.25), Some(0.65)).unwrap();
    let back = QuadraticCertificate::from_json(&syn.certificate.to_json()).unwrap();
    assert_eq!(back.p_plus, syn.certificate.p_plus);
    assert_eq!(back.p_minus, syn.certificate.p_minus);
    assert_eq!(back.fingerprint, sys.fingerprint());
    let r = verify_certificate(&back, &sys, DEFAULT_GRID_POINTS).unwrap();
    assert!(r.verdict.is_verified());
    assert_eq!(r.grid_margin, syn.report.grid_margin);
}

#[test]
fn certificate_scaling_preserves_verdict_and_overshoot() {
    let sys = builtin::unstable_subsystems();
    let syn = synthesize(&sys, &CertifyParams::new(0.001, 0.6, 2.3, 0.25), Some(0.65)).unwrap();
    let c = &syn.certificate;
    let mut scaled = c.clone();
    scaled.p_plus = c.p_plus.iter().map(|p| p.scale(7.5)).collect();
    scaled.p_minus = c.p_minus.iter().map(|p| p.scale(7.5)).collect();
    let r = verify_certificate(&scaled, &sys, DEFAULT_GRID_POINTS).unwrap();
    assert!(r.verdict.is_verified());
    assert!((r.grid_margin - 7.5 * syn.report.grid_margin).abs() < 1e-9);
    let m = overshoot_bound(&scaled.p_plus, &scaled.p_minus, c.nu, c.rho, c.tau1);
    assert!((m - c.overshoot_m).abs() < 1e-9 * c.overshoot_m);
}

#[test]
fn k_relaxed_certificate_carries_chains() {
    let sys = builtin::unstable_subsystems();
    let p = CertifyParams::new(0.001, 0.6, 1.5, 0.25).with_route(Route::KRelax { k: 4 });
    let syn = synthesize(&sys, &p, Some(0.72)).unwrap();
    let chains = syn.certificate.chains.as_ref().unwrap();
    assert_eq!(chains.len(), 2);
    assert!(chains.iter().all(|c| c.links.len() == 3));
    let back = QuadraticCertificate::from_json(&syn.certificate.to_json()).unwrap();
    assert_eq!(back.route, Route::KRelax { k: 4 });
    assert!(verify_certificate(&back, &sys, DEFAULT_GRID_POINTS).unwrap().verdict.is_verified());
}

#[test]
fn k_relaxation_threshold_decreases_with_k() {
    let sys = builtin::unstable_subsystems();
    let base = CertifyParams::new(0.001, 0.6, 0.6, 0.25);
    let exp = line_search_mu(&sys, &base).unwrap().mu_hat;
    let k2 = line_search_mu(&sys, &base.clone().with_route(Route::KRelax { k: 2 })).unwrap().mu_hat;
    let k8 = line_search_mu(&sys, &base.clone().with_route(Route::KRelax { k: 8 })).unwrap().mu_hat;
    let tol = base.mu_tolerance;
    assert!(k8 <= k2 + tol, "K=8 {k8} vs K=2 {k2}");
    assert!(exp <= k8 + tol, "exp {exp} vs K=8 {k8}");
    assert!(k8 > 0.65, "K=8 is conservative at the exponential-route value");
}

#[test]
fn stable_common_lyapunov_system_has_unbounded_window() {
    // Two strictly dissipative modes: ν ≤ 0 works and the window is capped.
    let a1 = Matrix::from_rows(&[[-1.0, 0.2], [-0.2, -1.0]]);
    let a2 = Matrix::from_rows(&[[-2.0, 0.0], [0.5, -1.5]]);
    let sys = SwitchedLinearSystem::new(vec![a1, a2]).unwrap();
    let d = max_admissible_delay(&sys, &CertifyParams::new(0.1, 0.5, 0.5, -0.5)).unwrap();
    assert!(d.delta.is_infinite());
    assert!(d.synthesis.report.verdict.is_verified());
}

#[test]
fn nu_search_reports_every_candidate() {
    let sys = builtin::unstable_subsystems();
    let nus = [0.25, 1.0];
    let out = search_nu(&sys, &CertifyParams::new(0.001, 0.6, 0.6, 0.0), &nus);
    assert_eq!(out.len(), 2);
    for ((nu, r), want) in out.iter().zip(nus) {
        assert_eq!(*nu, want);
        let d = r.as_ref().unwrap();
        assert!((d.synthesis.certificate.nu - want).abs() < 1e-15);
    }
}
