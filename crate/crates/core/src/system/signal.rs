use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SignalError;

/// Which inter-switching constraint a signal family imposes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DwellVariant {
    /// Every interval, the first one included, lies in `[τ1, τ2]`.
    Strict,
    /// As `Strict`, except the first interval only needs to be `≤ τ2`.
    Star,
    /// Every interval is exactly `τ`.
    Fixed,
    /// Intervals at least `τ1`, no upper bound.
    PureDwell,
}

/// A dwell-time signal class with bounds `τ1 ≤ gap ≤ τ2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DwellClass {
    tau1: f64,
    tau2: f64,
    variant: DwellVariant,
}

impl DwellClass {
    pub fn new(variant: DwellVariant, tau1: f64, tau2: f64) -> Result<Self, SignalError> {
        let bad = |msg: &str| Err(SignalError::BadClass(format!("{msg} (tau1={tau1}, tau2={tau2})")));
        if !tau1.is_finite() || tau1 < 0.0 {
            return bad("tau1 must be finite and non-negative");
        }
        match variant {
            DwellVariant::Strict | DwellVariant::Star => {
                if !tau2.is_finite() || tau2 < tau1 {
                    return bad("need tau2 >= tau1 >= 0");
                }
            }
            DwellVariant::Fixed => {
                if tau1 <= 0.0 || tau1 != tau2 {
                    return bad("fixed class needs tau1 = tau2 > 0");
                }
            }
            DwellVariant::PureDwell => {}
        }
        let tau2 = if variant == DwellVariant::PureDwell {
            f64::INFINITY
        } else {
            tau2
        };
        Ok(Self {
            tau1,
            tau2,
            variant,
        })
    }

    pub fn strict(tau1: f64, tau2: f64) -> Result<Self, SignalError> {
        Self::new(DwellVariant::Strict, tau1, tau2)
    }

    pub fn star(tau1: f64, tau2: f64) -> Result<Self, SignalError> {
        Self::new(DwellVariant::Star, tau1, tau2)
    }

    pub fn fixed(tau: f64) -> Result<Self, SignalError> {
        Self::new(DwellVariant::Fixed, tau, tau)
    }

    pub fn pure_dwell(tau1: f64) -> Result<Self, SignalError> {
        Self::new(DwellVariant::PureDwell, tau1, f64::INFINITY)
    }

    pub fn tau1(&self) -> f64 {
        self.tau1
    }

    /// Upper bound; `+∞` for the pure dwell-time class.
    pub fn tau2(&self) -> f64 {
        self.tau2
    }

    pub fn variant(&self) -> DwellVariant {
        self.variant
    }

    /// Same bounds, different variant.
    pub fn with_variant(&self, variant: DwellVariant) -> Result<Self, SignalError> {
        Self::new(variant, self.tau1, self.tau2)
    }
}

/// A switch to `mode` at `time`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwitchEvent {
    pub time: f64,
    pub mode: usize,
}

/// A constant-mode stretch `[start, end)` of a signal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub start: f64,
    pub end: f64,
    pub mode: usize,
}

impl Interval {
    pub fn len(&self) -> f64 {
        self.end - self.start
    }
}

/// Piecewise-constant mode schedule on `[0, horizon]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SignalFile", into = "SignalFile")]
pub struct SwitchingSignal {
    initial_mode: usize,
    events: Vec<SwitchEvent>,
    horizon: f64,
}

/// On-disk form with 1-based modes:
/// `{"initial_mode": 1, "events": [[t, mode], ...], "horizon": T}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SignalFile {
    pub initial_mode: usize,
    pub events: Vec<(f64, usize)>,
    pub horizon: f64,
}

impl TryFrom<SignalFile> for SwitchingSignal {
    type Error = SignalError;

    fn try_from(f: SignalFile) -> Result<Self, Self::Error> {
        let one_based = |index: usize, mode: usize| {
            mode.checked_sub(1).ok_or(SignalError::ModeOutOfRange {
                index,
                mode,
                modes: 0,
            })
        };
        let initial = one_based(0, f.initial_mode)?;
        let events = f
            .events
            .iter()
            .enumerate()
            .map(|(i, &(time, mode))| Ok(SwitchEvent { time, mode: one_based(i, mode)? }))
            .collect::<Result<Vec<_>, SignalError>>()?;
        SwitchingSignal::new(initial, events, f.horizon)
    }
}

impl From<SwitchingSignal> for SignalFile {
    fn from(s: SwitchingSignal) -> Self {
        SignalFile {
            initial_mode: s.initial_mode + 1,
            events: s.events.iter().map(|e| (e.time, e.mode + 1)).collect(),
            horizon: s.horizon,
        }
    }
}

impl SwitchingSignal {
    /// Checks event times strictly increase inside `(0, horizon)` and that
    /// every event changes the mode.
    pub fn new(
        initial_mode: usize,
        events: Vec<SwitchEvent>,
        horizon: f64,
    ) -> Result<Self, SignalError> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(SignalError::BadHorizon(horizon));
        }
        let mut prev_t = 0.0;
        let mut prev_mode = initial_mode;
        for (index, e) in events.iter().enumerate() {
            if !(e.time.is_finite() && e.time > 0.0) {
                return Err(SignalError::BadEventTime {
                    index,
                    time: e.time,
                });
            }
            if e.time <= prev_t {
                return Err(SignalError::NotIncreasing {
                    index,
                    time: e.time,
                });
            }
            if e.time >= horizon {
                return Err(SignalError::BeyondHorizon {
                    index,
                    time: e.time,
                    horizon,
                });
            }
            if e.mode == prev_mode {
                return Err(SignalError::RepeatedMode {
                    index,
                    mode: e.mode,
                });
            }
            prev_t = e.time;
            prev_mode = e.mode;
        }
        Ok(Self {
            initial_mode,
            events,
            horizon,
        })
    }

    /// A signal that never switches.
    pub fn constant(mode: usize, horizon: f64) -> Result<Self, SignalError> {
        Self::new(mode, Vec::new(), horizon)
    }

    pub fn initial_mode(&self) -> usize {
        self.initial_mode
    }

    pub fn events(&self) -> &[SwitchEvent] {
        &self.events
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Fails if any mode index is `>= modes`.
    pub fn check_mode_range(&self, modes: usize) -> Result<(), SignalError> {
        if self.initial_mode >= modes {
            return Err(SignalError::ModeOutOfRange {
                index: 0,
                mode: self.initial_mode,
                modes,
            });
        }
        if let Some((index, e)) = self.events.iter().enumerate().find(|(_, e)| e.mode >= modes) {
            return Err(SignalError::ModeOutOfRange {
                index,
                mode: e.mode,
                modes,
            });
        }
        Ok(())
    }

    pub fn mode_at(&self, t: f64) -> usize {
        self.events
            .iter()
            .take_while(|e| e.time <= t)
            .last()
            .map_or(self.initial_mode, |e| e.mode)
    }

    /// Constant-mode intervals covering `[0, horizon]`; the last one is
    /// truncated by the horizon.
    pub fn intervals(&self) -> impl Iterator<Item = Interval> + '_ {
        let starts = std::iter::once((0.0, self.initial_mode))
            .chain(self.events.iter().map(|e| (e.time, e.mode)));
        let ends = self
            .events
            .iter()
            .map(|e| e.time)
            .chain(std::iter::once(self.horizon));
        starts.zip(ends).map(|((start, mode), end)| Interval { start, end, mode })
    }

    /// Complete inter-switching gaps: first event from 0, then between
    /// consecutive events. The truncated tail is excluded.
    pub fn gaps(&self) -> Vec<f64> {
        let mut prev = 0.0;
        self.events
            .iter()
            .map(|e| {
                let g = e.time - prev;
                prev = e.time;
                g
            })
            .collect()
    }

    /// Length of the final interval, from the last event to the horizon.
    pub fn tail(&self) -> f64 {
        self.horizon - self.events.last().map_or(0.0, |e| e.time)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    TooShort,
    TooLong,
    NotFixed,
    TailTooLong,
}

/// One interval that breaks the class constraints. `index` 0 is the first
/// interval `[0, t_1)`; the tail has index `events.len()`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Violation {
    pub index: usize,
    pub length: f64,
    pub kind: ViolationKind,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignalValidation {
    pub violations: Vec<Violation>,
}

impl SignalValidation {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks a signal against a dwell class.
///
/// Complete gaps are compared with the class bounds (the first gap only
/// against `τ2` for the star variant). Only the fixed class constrains the
/// truncated tail, which may not exceed `τ`. Comparisons allow `1e-12`
/// relative slack for accumulated event-time rounding.
pub fn validate_signal(sig: &SwitchingSignal, cls: &DwellClass) -> SignalValidation {
    let slack = 1e-12 * sig.horizon.max(1.0);
    let mut violations = Vec::new();
    for (index, g) in sig.gaps().into_iter().enumerate() {
        let kind = match cls.variant {
            DwellVariant::Fixed => ((g - cls.tau1).abs() > slack).then_some(ViolationKind::NotFixed),
            DwellVariant::PureDwell => (g < cls.tau1 - slack).then_some(ViolationKind::TooShort),
            DwellVariant::Strict | DwellVariant::Star => {
                let lower_applies = !(cls.variant == DwellVariant::Star && index == 0);
                if lower_applies && g < cls.tau1 - slack {
                    Some(ViolationKind::TooShort)
                } else if g > cls.tau2 + slack {
                    Some(ViolationKind::TooLong)
                } else {
                    None
                }
            }
        };
        if let Some(kind) = kind {
            violations.push(Violation {
                index,
                length: g,
                kind,
            });
        }
    }
    if cls.variant == DwellVariant::Fixed && sig.tail() > cls.tau1 + slack {
        violations.push(Violation {
            index: sig.events.len(),
            length: sig.tail(),
            kind: ViolationKind::TailTooLong,
        });
    }
    SignalValidation { violations }
}

/// Draws a random member of `cls` on `[0, horizon]`.
///
/// Gaps are uniform on `[τ1, τ2]` (the star variant's first gap uniform on
/// `(0, τ2]`); the pure dwell-time class samples gaps from `[τ1, 2τ1]`
/// (`[0, 1]` when `τ1 = 0`). Each switch picks uniformly among the other
/// `M − 1` modes. The initial mode is uniform. Deterministic in `seed`.
pub fn sample_signal(
    cls: &DwellClass,
    horizon: f64,
    modes: usize,
    seed: u64,
) -> Result<SwitchingSignal, SignalError> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(SignalError::BadHorizon(horizon));
    }
    if modes == 0 {
        return Err(SignalError::BadClass("need at least one mode".into()));
    }
    let (lo, hi) = match cls.variant {
        DwellVariant::PureDwell if cls.tau1 > 0.0 => (cls.tau1, 2.0 * cls.tau1),
        DwellVariant::PureDwell => (0.0, 1.0),
        _ => (cls.tau1, cls.tau2),
    };
    if hi <= 0.0 {
        return Err(SignalError::BadClass(
            "tau2 = 0 would demand infinitely many switches".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let initial_mode = rng.gen_range(0..modes);
    if modes == 1 {
        return SwitchingSignal::constant(initial_mode, horizon);
    }
    let mut events = Vec::new();
    let mut mode = initial_mode;
    let mut t = 0.0;
    loop {
        // Drawing from the top end keeps every gap strictly positive.
        let u: f64 = rng.gen();
        let gap = if events.is_empty() && cls.variant == DwellVariant::Star {
            hi * (1.0 - u)
        } else {
            hi - u * (hi - lo)
        };
        t += gap;
        if t >= horizon {
            break;
        }
        let pick = rng.gen_range(0..modes - 1);
        mode = if pick >= mode { pick + 1 } else { pick };
        events.push(SwitchEvent { time: t, mode });
    }
    SwitchingSignal::new(initial_mode, events, horizon)
}

/// Repeats a `(duration, mode)` pattern until `horizon`.
pub fn periodic_signal(pattern: &[(f64, usize)], horizon: f64) -> Result<SwitchingSignal, SignalError> {
    if pattern.is_empty() {
        return Err(SignalError::BadPattern("empty pattern".into()));
    }
    if let Some(i) = pattern.iter().position(|&(d, _)| !(d.is_finite() && d > 0.0)) {
        return Err(SignalError::BadPattern(format!("duration {i} is not positive")));
    }
    let k = pattern.len();
    for i in 0..k {
        if pattern[i].1 == pattern[(i + 1) % k].1 {
            return Err(SignalError::BadPattern(format!(
                "entries {i} and {} repeat mode {} (wrap-around included)",
                (i + 1) % k,
                pattern[i].1
            )));
        }
    }
    let mut events = Vec::new();
    let mut t = 0.0;
    for i in 0.. {
        t += pattern[i % k].0;
        if t >= horizon {
            break;
        }
        events.push(SwitchEvent {
            time: t,
            mode: pattern[(i + 1) % k].1,
        });
    }
    SwitchingSignal::new(pattern[0].1, events, horizon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn from_gaps(modes: &[usize], gaps: &[f64], horizon: f64) -> SwitchingSignal {
        let mut t = 0.0;
        let events = gaps
            .iter()
            .zip(&modes[1..])
            .map(|(g, &m)| {
                t += g;
                SwitchEvent { time: t, mode: m }
            })
            .collect();
        SwitchingSignal::new(modes[0], events, horizon).unwrap()
    }

    #[test]
    fn structural_errors_name_the_event() {
        let e = |time, mode| SwitchEvent { time, mode };
        assert_eq!(
            SwitchingSignal::new(0, vec![e(1.0, 1), e(0.5, 0)], 3.0),
            Err(SignalError::NotIncreasing { index: 1, time: 0.5 })
        );
        assert_eq!(
            SwitchingSignal::new(0, vec![e(1.0, 1), e(2.0, 1)], 3.0),
            Err(SignalError::RepeatedMode { index: 1, mode: 1 })
        );
        assert!(matches!(
            SwitchingSignal::new(0, vec![e(3.0, 1)], 3.0),
            Err(SignalError::BeyondHorizon { index: 0, .. })
        ));
        assert!(matches!(
            SwitchingSignal::new(0, vec![], 0.0),
            Err(SignalError::BadHorizon(_))
        ));
    }

    #[test]
    fn quarter_period_gaps_valid_for_strict() {
        let cls = DwellClass::strict(FRAC_PI_2, FRAC_PI_2 + 0.1).unwrap();
        let sig = from_gaps(&[0, 1, 0, 1], &[FRAC_PI_2; 3], 2.0 * PI);
        assert!(validate_signal(&sig, &cls).is_valid());
    }

    #[test]
    fn short_first_gap_strict_vs_star() {
        let sig = from_gaps(&[0, 1, 0, 1], &[0.05, 0.5, 0.5], 1.5);
        let strict = DwellClass::strict(0.5, 1.0).unwrap();
        let star = DwellClass::star(0.5, 1.0).unwrap();
        let report = validate_signal(&sig, &strict);
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].index, 0);
        assert_eq!(report.violations[0].kind, ViolationKind::TooShort);
        assert!(validate_signal(&sig, &star).is_valid());
    }

    #[test]
    fn three_quarter_gaps_too_long() {
        let cls = DwellClass::strict(FRAC_PI_2, FRAC_PI_2 + 0.1).unwrap();
        let sig = from_gaps(&[0, 1, 0], &[0.75 * PI, 0.75 * PI], 5.0);
        let report = validate_signal(&sig, &cls);
        assert!(!report.is_valid());
        assert!(report.violations.iter().all(|v| v.kind == ViolationKind::TooLong));
    }

    #[test]
    fn constant_signal_rules() {
        let sig = SwitchingSignal::constant(0, 10.0).unwrap();
        assert!(validate_signal(&sig, &DwellClass::strict(1.0, 2.0).unwrap()).is_valid());
        assert!(validate_signal(&sig, &DwellClass::star(1.0, 2.0).unwrap()).is_valid());
        assert!(validate_signal(&sig, &DwellClass::pure_dwell(1.0).unwrap()).is_valid());
        assert!(!validate_signal(&sig, &DwellClass::fixed(2.0).unwrap()).is_valid());
        let short = SwitchingSignal::constant(0, 1.5).unwrap();
        assert!(validate_signal(&short, &DwellClass::fixed(2.0).unwrap()).is_valid());
    }

    #[test]
    fn class_parameter_checks() {
        assert!(DwellClass::strict(2.0, 1.0).is_err());
        assert!(DwellClass::fixed(0.0).is_err());
        assert!(DwellClass::new(DwellVariant::Fixed, 1.0, 2.0).is_err());
        assert_eq!(DwellClass::pure_dwell(1.0).unwrap().tau2(), f64::INFINITY);
    }

    #[test]
    fn fixed_time_sampling_degenerates() {
        let cls = DwellClass::strict(1.0, 1.0).unwrap();
        for seed in 0..5 {
            let sig = sample_signal(&cls, 5.0, 2, seed).unwrap();
            let times: Vec<f64> = sig.events().iter().map(|e| e.time).collect();
            assert_eq!(times, vec![1.0, 2.0, 3.0, 4.0]);
            let mut mode = sig.initial_mode();
            for e in sig.events() {
                assert_ne!(e.mode, mode);
                mode = e.mode;
            }
        }
    }

    #[test]
    fn zero_width_strict_class_rejected() {
        let cls = DwellClass::strict(0.0, 0.0).unwrap();
        assert!(matches!(sample_signal(&cls, 1.0, 2, 0), Err(SignalError::BadClass(_))));
    }

    #[test]
    fn sampling_is_deterministic() {
        let cls = DwellClass::star(0.3, 0.9).unwrap();
        assert_eq!(
            sample_signal(&cls, 20.0, 3, 42).unwrap(),
            sample_signal(&cls, 20.0, 3, 42).unwrap()
        );
    }

    #[test]
    fn periodic_pattern_events() {
        let sig = periodic_signal(&[(1.0, 0), (2.0, 1)], 7.0).unwrap();
        let times: Vec<f64> = sig.events().iter().map(|e| e.time).collect();
        assert_eq!(times, vec![1.0, 3.0, 4.0, 6.0]);
        assert_eq!(sig.mode_at(0.5), 0);
        assert_eq!(sig.mode_at(3.5), 0);
        assert_eq!(sig.mode_at(6.5), 0);
        assert_eq!(sig.mode_at(4.5), 1);
    }

    #[test]
    fn periodic_single_gap_rejected() {
        assert!(matches!(
            periodic_signal(&[(1.0, 0)], 5.0),
            Err(SignalError::BadPattern(_))
        ));
        assert!(periodic_signal(&[(1.0, 0), (1.0, 1), (1.0, 0)], 5.0).is_err());
    }

    #[test]
    fn intervals_cover_horizon() {
        let sig = periodic_signal(&[(1.0, 0), (2.0, 1)], 7.0).unwrap();
        let iv: Vec<Interval> = sig.intervals().collect();
        assert_eq!(iv.first().unwrap().start, 0.0);
        assert_eq!(iv.last().unwrap().end, 7.0);
        assert!(iv.windows(2).all(|w| w[0].end == w[1].start));
        assert_eq!(sig.tail(), 1.0);
    }

    #[test]
    fn signal_json_is_one_based() {
        let sig = periodic_signal(&[(1.0, 0), (2.0, 1)], 4.0).unwrap();
        let json = serde_json::to_value(&sig).unwrap();
        assert_eq!(json["initial_mode"], 1);
        assert_eq!(json["events"][0][1], 2);
        let back: SwitchingSignal = serde_json::from_value(json).unwrap();
        assert_eq!(back, sig);
        assert!(serde_json::from_str::<SwitchingSignal>(
            r#"{"initial_mode":0,"events":[],"horizon":1}"#
        )
        .is_err());
    }
}
