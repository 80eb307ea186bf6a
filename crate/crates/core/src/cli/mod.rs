//! The `dwellcert` command line. [`run`] returns the process exit code:
//! 0 for success, 1 for a negative result, 2 for usage or I/O errors.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::certificate::{QuadraticCertificate, Route};
use crate::certify::{
    max_admissible_delay, nu_grid, search_nu, synthesize, AdmissibleDelay, CertifyError,
    CertifyParams, Synthesis,
};
use crate::reproduce::{example1, example2, Check, CheckTable};
use crate::system::{
    periodic_signal, sample_signal, simulate, validate_signal, DwellClass, DwellVariant,
    SwitchedLinearSystem, SwitchingSignal,
};
use crate::verify::{
    g6, trajectory_decrease_check, verify_certificate, Verdict, VerifyError, DEFAULT_GRID_POINTS,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NEGATIVE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
/// Caps the worker pool when set to a positive integer.
pub const THREADS_ENV: &str = "DWELLCERT_THREADS";

#[derive(Debug, Parser)]
#[command(name = "dwellcert", version, about = "Quadratic multiple-Lyapunov certificates for switched linear systems with dwell-time bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesize and verify a certificate.
    Certify(CertifyArgs),
    /// Check a certificate against a system.
    Verify(VerifyArgs),
    /// Simulate the system along a switching signal and write CSV.
    Simulate(SimulateArgs),
    /// Reproduce a built-in example (1 or 2).
    Example(ExampleArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RouteArg {
    Exp,
    Krelax,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum VariantArg {
    Strict,
    Star,
    Fixed,
    PureDwell,
}

impl From<VariantArg> for DwellVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Strict => DwellVariant::Strict,
            VariantArg::Star => DwellVariant::Star,
            VariantArg::Fixed => DwellVariant::Fixed,
            VariantArg::PureDwell => DwellVariant::PureDwell,
        }
    }
}

#[derive(Debug, Args)]
struct CertifyArgs {
    /// System JSON: {"n": .., "modes": [[row-major entries], ...]}.
    #[arg(long)]
    system: PathBuf,
    #[arg(long)]
    rho: f64,
    /// Growth bound; searched over a coarse grid when omitted.
    #[arg(long)]
    nu: Option<f64>,
    /// Fixed jump factor in (0, 1); searched for when omitted.
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    tau1: f64,
    /// Defaults to tau1.
    #[arg(long)]
    tau2: Option<f64>,
    /// Chain length of the relaxed route.
    #[arg(long = "K", default_value_t = 8)]
    k: usize,
    #[arg(long, value_enum, default_value = "exp")]
    route: RouteArg,
    #[arg(long, default_value_t = DEFAULT_GRID_POINTS)]
    grid: usize,
    /// Search for the smallest mu and report the admissible delay.
    #[arg(long)]
    search_mu: bool,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long)]
    system: PathBuf,
    #[arg(long)]
    certificate: PathBuf,
    #[arg(long, default_value_t = DEFAULT_GRID_POINTS)]
    grid: usize,
    /// Sampled signals for the trajectory check (0 skips it).
    #[arg(long, default_value_t = 500)]
    signals: usize,
    #[arg(long, default_value_t = 4)]
    states: usize,
    /// Defaults to max(20, 5 tau2).
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for report.txt and report.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    system: PathBuf,
    /// Signal JSON: {"initial_mode": 1, "events": [[t, mode], ...], "horizon": T}.
    #[arg(long, conflicts_with_all = ["sample", "fixed", "periodic"])]
    signal: Option<PathBuf>,
    /// Draw a random signal from the class given by --variant/--tau1/--tau2.
    #[arg(long)]
    sample: bool,
    /// Cycle through the modes, TAU in each.
    #[arg(long, value_name = "TAU")]
    fixed: Option<f64>,
    /// Repeat a pattern "duration:mode,duration:mode,..." (modes 1-based).
    #[arg(long)]
    periodic: Option<String>,
    #[arg(long, value_enum, default_value = "strict")]
    variant: VariantArg,
    #[arg(long)]
    tau1: Option<f64>,
    #[arg(long)]
    tau2: Option<f64>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Initial state "x1,x2,..."; defaults to the first basis vector.
    #[arg(long, allow_hyphen_values = true)]
    x0: Option<String>,
    #[arg(long, default_value_t = 0.01)]
    dt: f64,
    /// CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExampleArgs {
    which: u8,
    /// Damping of the first example.
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// A failure carrying its exit code.
struct Exit(i32, String);

impl Exit {
    fn usage(msg: impl Into<String>) -> Self {
        Exit(EXIT_USAGE, msg.into())
    }

    fn negative(msg: impl Into<String>) -> Self {
        Exit(EXIT_NEGATIVE, msg.into())
    }
}

fn io_err(path: &Path, e: io::Error) -> Exit {
    Exit::usage(format!("{}: {e}", path.display()))
}

fn read(path: &Path) -> Result<String, Exit> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

fn write(path: &Path, contents: &str) -> Result<(), Exit> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| io_err(path, e))
}

fn load_system(path: &Path) -> Result<SwitchedLinearSystem, Exit> {
    SwitchedLinearSystem::from_json(&read(path)?)
        .map_err(|e| Exit::usage(format!("{}: {e}", path.display())))
}

fn certify_exit(e: CertifyError) -> Exit {
    match e {
        CertifyError::InvalidParameter(_) => Exit::usage(e.to_string()),
        other => Exit::negative(other.to_string()),
    }
}

fn init_threads() {
    if let Some(n) = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
    {
        // A pool may already exist when run() is called repeatedly in-process.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    init_threads();
    let out = match cli.command {
        Command::Certify(a) => cmd_certify(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Example(a) => cmd_example(a),
    };
    match out {
        Ok(code) => code,
        Err(Exit(code, msg)) => {
            eprintln!("error: {msg}");
            code
        }
    }
}

fn cmd_certify(a: CertifyArgs) -> Result<i32, Exit> {
    let sys = load_system(&a.system)?;
    let tau2 = a.tau2.unwrap_or(a.tau1);
    if !(a.rho > 0.0 && a.rho.is_finite()) {
        return Err(Exit::usage(format!("--rho must be positive, got {}", a.rho)));
    }
    if !(a.tau1 >= 0.0 && tau2 >= a.tau1 && tau2.is_finite()) {
        return Err(Exit::usage(format!("need tau2 >= tau1 >= 0 (tau1={}, tau2={tau2})", a.tau1)));
    }
    if let Some(mu) = a.mu {
        if !(mu > 0.0 && mu < 1.0) {
            return Err(Exit::usage(format!("--mu must lie in (0, 1), got {mu}")));
        }
        if a.search_mu {
            return Err(Exit::usage("--mu and --search-mu are exclusive"));
        }
    }
    if a.k == 0 {
        return Err(Exit::usage("--K must be at least 1"));
    }
    let route = match a.route {
        RouteArg::Exp => Route::ExpSwitch,
        RouteArg::Krelax => Route::KRelax { k: a.k },
    };
    let mut params = CertifyParams::new(a.rho, a.tau1, tau2, a.nu.unwrap_or(0.0)).with_route(route);
    params.grid_points = a.grid;

    let syn: Synthesis = match a.mu {
        Some(mu) => {
            params.nu = a
                .nu
                .ok_or_else(|| Exit::usage("--nu is required together with --mu"))?;
            synthesize(&sys, &params, Some(mu)).map_err(certify_exit)?
        }
        None => {
            let best = search_delay(&sys, &params, a.nu)?;
            println!(
                "mu_hat {}  nu {}  delta {}  (certified window [{}, {}])",
                g6(best.mu_hat),
                g6(best.synthesis.certificate.nu),
                g6(best.delta),
                g6(a.tau1),
                g6(a.tau1 + best.delta)
            );
            if tau2 - a.tau1 > best.delta {
                return Err(Exit::negative(format!(
                    "requested tau2 - tau1 = {} exceeds the admissible delay {}",
                    g6(tau2 - a.tau1),
                    g6(best.delta)
                )));
            }
            best.synthesis
        }
    };

    println!("{}", syn.report);
    write(&a.out.join("certificate.json"), &syn.certificate.to_json())?;
    write(&a.out.join("report.txt"), &format!("{}\n", syn.report))?;
    write(&a.out.join("report.json"), &syn.report.to_json())?;
    if let Some(s) = &syn.search {
        write(
            &a.out.join("mu_search.json"),
            &serde_json::to_string_pretty(s).expect("search serializes"),
        )?;
    }
    Ok(if syn.report.verdict.is_verified() {
        EXIT_OK
    } else {
        EXIT_NEGATIVE
    })
}

fn search_delay(
    sys: &SwitchedLinearSystem,
    params: &CertifyParams,
    nu: Option<f64>,
) -> Result<AdmissibleDelay, Exit> {
    if let Some(nu) = nu {
        let p = CertifyParams { nu, ..params.clone() };
        return max_admissible_delay(sys, &p).map_err(certify_exit);
    }
    let grid = nu_grid(sys).map_err(certify_exit)?;
    let mut best: Option<AdmissibleDelay> = None;
    let mut failures = Vec::new();
    for (nu, r) in search_nu(sys, params, &grid) {
        match r {
            Ok(d) => {
                println!("  nu {:>10}: mu_hat {}, delta {}", g6(nu), g6(d.mu_hat), g6(d.delta));
                if best.as_ref().is_none_or(|b| d.delta > b.delta) {
                    best = Some(d);
                }
            }
            Err(e) => {
                println!("  nu {:>10}: {e}", g6(nu));
                failures.push(format!("nu {}: {e}", g6(nu)));
            }
        }
    }
    best.ok_or_else(|| Exit::negative(format!("no certificate on the nu grid:\n{}", failures.join("\n"))))
}

fn cmd_verify(a: VerifyArgs) -> Result<i32, Exit> {
    let sys = load_system(&a.system)?;
    let cert = QuadraticCertificate::from_json(&read(&a.certificate)?)
        .map_err(|e| Exit::usage(format!("{}: {e}", a.certificate.display())))?;
    let verify_exit = |e: VerifyError| match e {
        VerifyError::InvalidParameter(_) => Exit::usage(e.to_string()),
        other => Exit::negative(other.to_string()),
    };
    let mut report = verify_certificate(&cert, &sys, a.grid).map_err(verify_exit)?;
    let refuted = matches!(report.verdict, Verdict::Refuted { .. });
    if a.signals > 0 && !refuted {
        let cls = DwellClass::strict(cert.tau1, cert.tau2).map_err(|e| Exit::usage(e.to_string()))?;
        let horizon = a.horizon.unwrap_or_else(|| (5.0 * cert.tau2).max(20.0));
        let tr = trajectory_decrease_check(&cert, &sys, &cls, a.signals, a.states, horizon, a.seed)
            .map_err(verify_exit)?;
        report = report.with_trajectory(tr);
    }
    println!("{report}");
    if let Some(dir) = &a.out {
        write(&dir.join("report.txt"), &format!("{report}\n"))?;
        write(&dir.join("report.json"), &report.to_json())?;
    }
    Ok(if report.verdict.is_verified() {
        EXIT_OK
    } else {
        EXIT_NEGATIVE
    })
}

fn parse_list(s: &str, what: &str) -> Result<Vec<f64>, Exit> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| Exit::usage(format!("bad {what} entry '{t}': {e}")))
        })
        .collect()
}

fn parse_pattern(s: &str) -> Result<Vec<(f64, usize)>, Exit> {
    s.split(',')
        .map(|item| {
            let (d, m) = item
                .split_once(':')
                .ok_or_else(|| Exit::usage(format!("pattern item '{item}' is not duration:mode")))?;
            let d: f64 = d
                .trim()
                .parse()
                .map_err(|e| Exit::usage(format!("bad duration '{d}': {e}")))?;
            let m: usize = m
                .trim()
                .parse()
                .map_err(|e| Exit::usage(format!("bad mode '{m}': {e}")))?;
            if m == 0 {
                return Err(Exit::usage("modes are 1-based"));
            }
            Ok((d, m - 1))
        })
        .collect()
}

fn cmd_simulate(a: SimulateArgs) -> Result<i32, Exit> {
    let sys = load_system(&a.system)?;
    let need_horizon = || a.horizon.ok_or_else(|| Exit::usage("--horizon is required for generated signals"));
    let class = |tau1: f64| -> Result<DwellClass, Exit> {
        let tau2 = a.tau2.unwrap_or(tau1);
        DwellClass::new(a.variant.into(), tau1, tau2).map_err(|e| Exit::usage(e.to_string()))
    };
    let sig: SwitchingSignal = if let Some(path) = &a.signal {
        let sig: SwitchingSignal = serde_json::from_str(&read(path)?)
            .map_err(|e| Exit::usage(format!("{}: {e}", path.display())))?;
        if let Some(tau1) = a.tau1 {
            let v = validate_signal(&sig, &class(tau1)?);
            if !v.is_valid() {
                for viol in &v.violations {
                    eprintln!(
                        "interval {}: length {} is {:?}",
                        viol.index + 1,
                        g6(viol.length),
                        viol.kind
                    );
                }
                return Err(Exit::negative(format!(
                    "signal violates the declared class ({} intervals)",
                    v.violations.len()
                )));
            }
        }
        sig
    } else if a.sample {
        let tau1 = a.tau1.ok_or_else(|| Exit::usage("--sample needs --tau1"))?;
        sample_signal(&class(tau1)?, need_horizon()?, sys.mode_count(), a.seed)
            .map_err(|e| Exit::usage(e.to_string()))?
    } else if let Some(tau) = a.fixed {
        let pattern: Vec<(f64, usize)> = (0..sys.mode_count()).map(|m| (tau, m)).collect();
        periodic_signal(&pattern, need_horizon()?).map_err(|e| Exit::usage(e.to_string()))?
    } else if let Some(p) = &a.periodic {
        periodic_signal(&parse_pattern(p)?, need_horizon()?).map_err(|e| Exit::usage(e.to_string()))?
    } else {
        return Err(Exit::usage("give one of --signal, --sample, --fixed or --periodic"));
    };
    sig.check_mode_range(sys.mode_count())
        .map_err(|e| Exit::usage(e.to_string()))?;

    let x0 = match &a.x0 {
        Some(s) => parse_list(s, "x0")?,
        None => {
            let mut e = vec![0.0; sys.dim()];
            e[0] = 1.0;
            e
        }
    };
    let traj = simulate(&sys, &sig, &x0, a.dt).map_err(|e| Exit::usage(e.to_string()))?;
    match &a.out {
        Some(path) => {
            let mut buf = Vec::new();
            traj.write_csv(&mut buf).map_err(|e| io_err(path, e))?;
            write(path, &String::from_utf8(buf).expect("csv is utf-8"))?;
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            match traj.write_csv(&mut lock).and_then(|_| lock.flush()) {
                // The reader stopped early, e.g. `| head`.
                Err(e) if e.kind() == io::ErrorKind::BrokenPipe => return Ok(EXIT_OK),
                r => r.map_err(|e| Exit::usage(e.to_string()))?,
            }
        }
    }
    let n0 = x0.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nf = traj.final_state().iter().map(|v| v * v).sum::<f64>().sqrt();
    let rate = if n0 > 0.0 && nf > 0.0 {
        g6((nf / n0).ln() / sig.horizon())
    } else {
        "n/a".into()
    };
    eprintln!(
        "samples {}  final |x| {}  empirical rate {}",
        traj.len(),
        g6(nf),
        rate
    );
    Ok(EXIT_OK)
}

fn finish_example(checks: &[Check]) -> i32 {
    print!("{}", CheckTable(checks));
    if checks.iter().all(|c| c.pass) {
        EXIT_OK
    } else {
        eprintln!("some checks are outside tolerance");
        EXIT_NEGATIVE
    }
}

fn cmd_example(a: ExampleArgs) -> Result<i32, Exit> {
    let repro_exit = |e: crate::reproduce::ReproduceError| Exit::negative(e.to_string());
    match a.which {
        1 => {
            let ex = example1(a.eps).map_err(repro_exit)?;
            println!("{}", ex.report);
            if let Some(dir) = &a.out {
                write(&dir.join("system.json"), &ex.system.to_json())?;
                write(&dir.join("certificate.json"), &ex.certificate.to_json())?;
                write(&dir.join("report.txt"), &format!("{}\n", ex.report))?;
                write(&dir.join("report.json"), &ex.report.to_json())?;
                write(&dir.join("checks.json"), &serde_json::to_string_pretty(&ex.checks).expect("checks serialize"))?;
                let mut buf = Vec::new();
                ex.diverging
                    .write_csv(&mut buf)
                    .map_err(|e| Exit::usage(e.to_string()))?;
                write(&dir.join("diverging.csv"), &String::from_utf8(buf).expect("csv is utf-8"))?;
            }
            Ok(finish_example(&ex.checks))
        }
        2 => {
            let ex = example2().map_err(repro_exit)?;
            println!("{}", ex.report);
            if let Some(dir) = &a.out {
                write(&dir.join("system.json"), &ex.system.to_json())?;
                write(&dir.join("certificate.json"), &ex.certificate.to_json())?;
                write(&dir.join("report.txt"), &format!("{}\n", ex.report))?;
                write(&dir.join("report.json"), &ex.report.to_json())?;
                write(&dir.join("checks.json"), &serde_json::to_string_pretty(&ex.checks).expect("checks serialize"))?;
            }
            Ok(finish_example(&ex.checks))
        }
        n => Err(Exit::usage(format!("unknown example {n}; choose 1 or 2"))),
    }
}
