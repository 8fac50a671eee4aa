//! `ks-lab`: run closed-loop experiments and check their certificates.
//!
//! Exit status: 0 when every requested certificate passes, 1 when one
//! fails, 2 on usage or configuration errors, 3 on numerical blow-up.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use ks_adapt::config::load_document;
use ks_adapt::csv_io::{emit_csv, emit_snapshots, parse_csv};
use ks_adapt::monitor::{
    check_ges, check_gpa, check_iss, check_ultimate_bound, CertificateReport, TrajectoryLog,
};
use ks_adapt::oracles::{
    gronwall_sqrt_bound, halperin_pitt_fn, nominal_coefficients, sequence_envelope_bound,
    worst_case_recurrence, SequenceEnvelopeSpec,
};
use ks_adapt::sim::{gain_bounds, run, run_batch, ExperimentConfig, Mode};
use ks_adapt::Error;

const EXIT_FAIL: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_BLOWUP: u8 = 3;

#[derive(Parser)]
#[command(name = "ks-lab", version, about = "Adaptive boundary control experiments for the KS equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one configuration, write CSV output and print its certificate.
    Run {
        /// Config file or preset name (ges_fig2, guub_fig4, full_sensing).
        config: String,
        /// Output directory (overrides [output] dir).
        #[arg(long, short)]
        out: Option<PathBuf>,
        /// Skip snapshot files.
        #[arg(long)]
        no_snapshots: bool,
    },
    /// Run the same configuration over several initial amplitudes.
    Sweep {
        config: String,
        /// Comma-separated amplitudes; defaults to the document's sweep list.
        #[arg(long, value_delimiter = ',')]
        amplitudes: Vec<f64>,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Check a certificate on previously written trajectory CSVs.
    Certify {
        kind: CertKind,
        #[arg(required = true)]
        csv: Vec<PathBuf>,
        #[arg(long, default_value_t = 100.0)]
        sigma: f64,
        #[arg(long, default_value_t = 1.0)]
        epsilon: f64,
        #[arg(long, default_value_t = 5e-4)]
        tau: f64,
        /// Relative tolerance on the practical-attractivity bound.
        #[arg(long, default_value_t = 0.2)]
        tolerance: f64,
        /// Switching instants (comma-separated) for the decay-rate window.
        #[arg(long, value_delimiter = ',')]
        instants: Vec<f64>,
    },
    /// Evaluate one of the analytic bounds.
    Oracle {
        #[command(subcommand)]
        which: OracleCmd,
    },
    /// Print the empirical dwell bounds of a schedule and the gain bounds.
    ValidateSchedule { config: String },
}

#[derive(Clone, Copy, ValueEnum)]
enum CertKind {
    Ges,
    Gpa,
    Iss,
    Guub,
}

#[derive(Subcommand)]
enum OracleCmd {
    /// Interpolation inequality for u = sin(k pi (x - a) / (b - a)).
    Halperin {
        #[arg(long, default_value_t = 0.0)]
        a: f64,
        #[arg(long, default_value_t = 1.0)]
        b: f64,
        #[arg(long, default_value_t = 1.0)]
        k: f64,
        #[arg(long, default_value_t = 1.0)]
        epsilon: f64,
        #[arg(long, default_value_t = 2001)]
        samples: usize,
    },
    /// Bound for V' <= theta V + C sqrt(V), compared against an RK4 solve.
    Gronwall {
        #[arg(long = "V0")]
        v0: f64,
        #[arg(long)]
        theta: f64,
        #[arg(long = "C")]
        c: f64,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        t: f64,
    },
    /// Switched-sequence envelope against the worst-case recurrence.
    Envelope {
        #[arg(long = "M")]
        m: f64,
        #[arg(long)]
        psi: f64,
        #[arg(long)]
        sigma: f64,
        #[arg(long = "T-lower")]
        t_lower: f64,
        #[arg(long = "T-upper")]
        t_upper: f64,
        /// Zero-based indices of the steps allowed to grow.
        #[arg(long, value_delimiter = ',')]
        bad: Vec<usize>,
        #[arg(long = "V0", default_value_t = 1.0)]
        v0: f64,
        #[arg(long, default_value_t = 20)]
        steps: usize,
    },
}

enum Failure {
    Usage(String),
    Blowup(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::BlowUp { .. } => Failure::Blowup(e.to_string()),
            other => Failure::Usage(other.to_string()),
        }
    }
}

type CmdResult = Result<bool, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run {
            config,
            out,
            no_snapshots,
        } => cmd_run(&config, out, no_snapshots),
        Command::Sweep {
            config,
            amplitudes,
            out,
        } => cmd_sweep(&config, amplitudes, out),
        Command::Certify {
            kind,
            csv,
            sigma,
            epsilon,
            tau,
            tolerance,
            instants,
        } => cmd_certify(kind, &csv, sigma, epsilon, tau, tolerance, instants),
        Command::Oracle { which } => cmd_oracle(which),
        Command::ValidateSchedule { config } => cmd_validate(&config),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_FAIL),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Blowup(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_BLOWUP)
        }
    }
}

fn certify_run(cfg: &ExperimentConfig, log: &TrajectoryLog) -> Result<CertificateReport, Error> {
    let a = &cfg.adaptation;
    match cfg.mode {
        Mode::IntermittentGes => check_ges(log, a.sigma),
        Mode::IntermittentIss | Mode::IntermittentGuub => check_iss(log, a.sigma),
        Mode::FullSensingGpa => check_gpa(log, a.sigma, a.epsilon, a.tau, 0.2),
    }
}

fn write_outputs(log: &TrajectoryLog, dir: &Path, stem: &str, snapshots: bool) -> Result<(), Error> {
    std::fs::create_dir_all(dir)?;
    let csv = dir.join(format!("{stem}.csv"));
    emit_csv(log, &csv)?;
    println!("wrote {}", csv.display());
    if snapshots && !log.snapshots.is_empty() {
        let sdir = dir.join(format!("{stem}_snapshots"));
        let n = emit_snapshots(log, &sdir)?.len();
        println!("wrote {n} snapshots to {}", sdir.display());
    }
    Ok(())
}

fn cmd_run(config: &str, out: Option<PathBuf>, no_snapshots: bool) -> CmdResult {
    let doc = load_document(config)?;
    let cfg = doc.to_experiment()?;
    let dir = out.or(doc.output.dir.clone()).unwrap_or_else(|| PathBuf::from("."));
    let log = match run(&cfg) {
        Ok(log) => log,
        Err(Error::BlowUp { t, max_abs, cap, log }) => {
            let _ = write_outputs(&log, &dir, &cfg.name, false);
            return Err(Failure::Blowup(format!(
                "blow-up at t = {t:e}: |u| = {max_abs:e} exceeds {cap:e}"
            )));
        }
        Err(e) => return Err(e.into()),
    };
    write_outputs(&log, &dir, &cfg.name, doc.output.snapshots && !no_snapshots)?;
    let peak1 = log.rows.iter().map(|r| r.theta1_hat).fold(0.0, f64::max);
    let peak2 = log.rows.iter().map(|r| r.theta2_hat).fold(0.0, f64::max);
    println!("peak theta1_hat = {peak1:.6e}, peak theta2_hat = {peak2:.6e}");
    let report = certify_run(&cfg, &log)?;
    print!("{report}");
    Ok(report.pass)
}

fn cmd_sweep(config: &str, amplitudes: Vec<f64>, out: Option<PathBuf>) -> CmdResult {
    let doc = load_document(config)?;
    let base = doc.to_experiment()?;
    let amps = if amplitudes.is_empty() {
        doc.domain.sweep_amplitudes.clone()
    } else {
        amplitudes
    };
    if amps.len() < 2 {
        return Err(Failure::Usage("sweep needs at least two amplitudes".into()));
    }
    let dir = out.or(doc.output.dir.clone()).unwrap_or_else(|| PathBuf::from("."));
    let cfgs: Vec<ExperimentConfig> = amps.iter().map(|&a| base.with_amplitude(a)).collect();
    let mut logs = Vec::new();
    for (cfg, res) in cfgs.iter().zip(run_batch(&cfgs)) {
        match res {
            Ok(log) => {
                write_outputs(&log, &dir, &cfg.name, false)?;
                logs.push(log);
            }
            Err(Error::BlowUp { t, log, .. }) => {
                println!("{}: blow-up at t = {t:e}", cfg.name);
                logs.push(*log);
            }
            Err(e) => return Err(e.into()),
        }
    }
    let report = check_ultimate_bound(&logs)?;
    print!("{report}");
    if logs.iter().any(|l| l.meta.blowup.is_some()) {
        return Err(Failure::Blowup("at least one run diverged".into()));
    }
    Ok(report.pass)
}

fn cmd_certify(
    kind: CertKind,
    csv: &[PathBuf],
    sigma: f64,
    epsilon: f64,
    tau: f64,
    tolerance: f64,
    instants: Vec<f64>,
) -> CmdResult {
    let mut logs = Vec::with_capacity(csv.len());
    for p in csv {
        let mut log = parse_csv(p).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?;
        log.meta.instants = instants.clone();
        logs.push(log);
    }
    let reports = match kind {
        CertKind::Guub => vec![check_ultimate_bound(&logs)?],
        CertKind::Ges => logs.iter().map(|l| check_ges(l, sigma)).collect::<Result<_, _>>()?,
        CertKind::Iss => logs.iter().map(|l| check_iss(l, sigma)).collect::<Result<_, _>>()?,
        CertKind::Gpa => logs
            .iter()
            .map(|l| check_gpa(l, sigma, epsilon, tau, tolerance))
            .collect::<Result<_, _>>()?,
    };
    let mut pass = true;
    for (i, r) in reports.iter().enumerate() {
        if reports.len() > 1 {
            println!("[{}]", csv[i].display());
        }
        print!("{r}");
        pass &= r.pass;
    }
    Ok(pass)
}

/// Classical RK4 on V' = theta V + C sqrt(V).
fn rk4_sqrt_ode(v0: f64, theta: f64, c: f64, t: f64, steps: usize) -> f64 {
    let f = |v: f64| theta * v + c * v.max(0.0).sqrt();
    let h = t / steps as f64;
    let mut v = v0;
    for _ in 0..steps {
        let k1 = f(v);
        let k2 = f(v + 0.5 * h * k1);
        let k3 = f(v + 0.5 * h * k2);
        let k4 = f(v + h * k3);
        v += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    v
}

fn cmd_oracle(which: OracleCmd) -> CmdResult {
    match which {
        OracleCmd::Halperin {
            a,
            b,
            k,
            epsilon,
            samples,
        } => {
            let w = k * std::f64::consts::PI / (b - a);
            let r = halperin_pitt_fn(
                a,
                b,
                samples,
                epsilon,
                |x| (w * (x - a)).sin(),
                |x| w * (w * (x - a)).cos(),
                |x| -w * w * (w * (x - a)).sin(),
            )?;
            println!("lhs = {:.12e}\nrhs = {:.12e}\nholds = {}", r.lhs, r.rhs, r.holds);
            Ok(r.holds)
        }
        OracleCmd::Gronwall {
            v0,
            theta,
            c,
            delta,
            t,
        } => {
            if delta.is_nan() || delta <= 0.0 || v0 < 0.0 || t < 0.0 {
                return Err(Failure::Usage("need delta > 0, V0 >= 0, t >= 0".into()));
            }
            let bound = gronwall_sqrt_bound(v0, theta, c, delta, t);
            let solved = rk4_sqrt_ode(v0, theta, c, t, 1_000_000);
            let margin = (bound - solved) / solved.abs().max(1e-300);
            println!("bound = {bound:.12e}\nrk4 = {solved:.12e}\nrelative margin = {margin:.6e}");
            Ok(margin >= -1e-6)
        }
        OracleCmd::Envelope {
            m,
            psi,
            sigma,
            t_lower,
            t_upper,
            bad,
            v0,
            steps,
        } => {
            let spec = SequenceEnvelopeSpec {
                m,
                psi,
                sigma,
                n_star: bad.len(),
                t_lower,
                t_upper,
                bad_indices: bad,
            };
            let gaps: Vec<f64> = (0..steps)
                .map(|i| if i % 2 == 0 { t_upper } else { t_lower })
                .collect();
            let mut ok = true;
            for (t, v) in worst_case_recurrence(&spec, v0, &gaps) {
                let env = sequence_envelope_bound(&spec, v0, t)?;
                ok &= v <= env * (1.0 + 1e-12);
                println!("T = {t:.6e}  V = {v:.6e}  envelope = {env:.6e}");
            }
            println!("dominates = {ok}");
            Ok(ok)
        }
    }
}

fn cmd_validate(config: &str) -> CmdResult {
    let cfg = load_document(config)?.to_experiment()?;
    if cfg.schedule.is_none() {
        println!("full-sensing configuration: no switching schedule");
        return Ok(true);
    }
    let (d, (m1, m2)) = gain_bounds(&cfg)?;
    println!(
        "T1 in [{:.6e}, {:.6e}], T2 in [{:.6e}, {:.6e}]",
        d.t1_lower, d.t1_upper, d.t2_lower, d.t2_upper
    );
    let nominal =
        nominal_coefficients(cfg.lambda.sup(), cfg.lambda.prime_sup(), cfg.forcing.sup(), cfg.y)?;
    println!(
        "nominal theta1 = {:.6e}, theta2 = {:.6e}",
        nominal.theta1, nominal.theta2
    );
    println!("gain bounds M1 = {m1:.6e}, M2 = {m2:.6e}");
    Ok(true)
}
