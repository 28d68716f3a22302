//! `irtens`: run detectors, ensembles, synthetic experiments and the
//! false-positive calibration from the command line.
//!
//! Exit codes: 0 success, 1 input error, 2 numerical failure (including IRT
//! non-convergence under `--strict`).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use irt_ensemble::commands::{cmd_detect, cmd_ensemble, cmd_experiment, cmd_fp_sim, cmd_irt_report};
use irt_ensemble::config::RunConfig;
use irt_ensemble::synth::ExperimentKind;
use irt_ensemble::Error;

#[derive(Parser)]
#[command(name = "irtens", version, about = "IRT-based anomaly detection ensembles")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand. Each overrides the same key in `--config`.
#[derive(Args)]
struct Common {
    /// key = value configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Neighborhood regime: t1 or t2
    #[arg(long, global = true)]
    regime: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Margin for min-max scaling before the logit
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    /// Greedy pseudo-target size
    #[arg(long, global = true)]
    kappa: Option<usize>,
    /// Greedy-Avg κ range, e.g. 1..10
    #[arg(long, global = true)]
    kappa_range: Option<String>,
    /// EM iteration cap
    #[arg(long, global = true)]
    max_iter: Option<usize>,
    /// EM convergence threshold on parameter change
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Fail with exit code 2 when the IRT fit does not converge
    #[arg(long, global = true)]
    strict: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Score a dataset CSV with the seven detectors
    Detect { dataset: PathBuf },
    /// Combine a score CSV with one ensemble method or all of them
    Ensemble {
        scores: PathBuf,
        /// Method name or `all`
        #[arg(long)]
        method: Option<String>,
    },
    /// Run a synthetic experiment grid: EXAMPLE, EX1, EX2 or EX3
    Experiment {
        name: String,
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long)]
        repetitions: Option<usize>,
    },
    /// Fit the IRT model to a score CSV and write item parameters and traits
    IrtReport { scores: PathBuf },
    /// False-positive calibration of the best-versus-second t-test
    FpSim {
        #[arg(long, default_value_t = 1190)]
        sources: usize,
        #[arg(long, default_value_t = 100)]
        datasets: usize,
        #[arg(long, default_value_t = 7)]
        methods: usize,
        #[arg(long, default_value_t = 30)]
        reps: usize,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Numerical(_) => 2,
            _ => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Error::from(e).into()
    }
}

fn load_config(c: &Common) -> Result<RunConfig, Failure> {
    let mut cfg = match &c.config {
        Some(p) => RunConfig::parse(&fs::read_to_string(p)?)?,
        None => RunConfig::default(),
    };
    let flags: [(&str, Option<String>); 8] = [
        ("regime", c.regime.clone()),
        ("seed", c.seed.map(|v| v.to_string())),
        ("epsilon", c.epsilon.map(|v| v.to_string())),
        ("kappa", c.kappa.map(|v| v.to_string())),
        ("kappa_range", c.kappa_range.clone()),
        ("max_iter", c.max_iter.map(|v| v.to_string())),
        ("tol", c.tol.map(|v| v.to_string())),
        ("out_dir", c.out_dir.as_ref().map(|p| p.display().to_string())),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            cfg.set(key, &v)?;
        }
    }
    if c.strict {
        cfg.strict = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn check_converged(cfg: &RunConfig, converged: bool, what: &str) -> Result<(), Failure> {
    if converged {
        return Ok(());
    }
    log::warn!("IRT fit hit max_iter = {} without converging ({what})", cfg.fit.max_iter);
    if cfg.strict {
        return Err(Failure {
            code: 2,
            message: format!("IRT fit did not converge ({what})"),
        });
    }
    Ok(())
}

fn detect(cfg: &RunConfig, dataset: &Path) -> Result<(), Failure> {
    let out = cmd_detect(dataset, cfg)?;
    println!("wrote {}", out.path.display());
    Ok(())
}

fn ensemble(cfg: &RunConfig, scores: &Path, method: Option<&str>) -> Result<(), Failure> {
    let mut cfg = cfg.clone();
    if let Some(m) = method {
        cfg.set("method", m)?;
    }
    let out = cmd_ensemble(scores, &cfg)?;
    println!("wrote {}", out.path.display());
    for (method, a) in out.aucs.iter().flatten() {
        println!("{method:>10}  AUC {a:.4}");
    }
    check_converged(&cfg, out.irt_converged.unwrap_or(true), &scores.display().to_string())
}

fn experiment(
    cfg: &RunConfig,
    name: &str,
    iterations: Option<usize>,
    repetitions: Option<usize>,
) -> Result<(), Failure> {
    let mut cfg = cfg.clone();
    if let Some(v) = iterations {
        cfg.set("iterations", &v.to_string())?;
    }
    if let Some(v) = repetitions {
        cfg.set("repetitions", &v.to_string())?;
    }
    let kind: ExperimentKind = name.parse()?;
    let out = cmd_experiment(kind, &cfg)?;
    println!("{} pooled mean AUC:", kind.name());
    for (method, v) in out.run.report.pooled_means(kind.name()) {
        println!("{method:>10}  {v:.4}");
    }
    for d in out.differences.iter().filter(|d| d.iteration.is_none()) {
        println!(
            "IRT - {:<10} mean {:+.4}  t {:.3}  p {:.4}",
            d.method, d.mean_diff, d.test.t, d.test.p
        );
    }
    println!("wrote results to {}", cfg.out_dir.display());
    let unconverged = out.unconverged_cells();
    check_converged(
        &cfg,
        unconverged == 0,
        &format!("{unconverged} of {} cells", out.run.cells.len()),
    )
}

fn irt_report(cfg: &RunConfig, scores: &Path) -> Result<(), Failure> {
    let out = cmd_irt_report(scores, cfg)?;
    println!("{:>10}  {:>8} {:>8} {:>8}", "detector", "alpha", "beta", "gamma");
    for (name, it) in out.detector_names.iter().zip(&out.model.items) {
        println!("{name:>10}  {:>8.3} {:>8.3} {:>8.3}", it.alpha, it.beta, it.gamma);
    }
    println!(
        "{} iterations, converged: {}; wrote results to {}",
        out.model.iterations,
        out.model.converged,
        cfg.out_dir.display()
    );
    check_converged(cfg, out.model.converged, &scores.display().to_string())
}

fn fp_sim(
    cfg: &RunConfig,
    sources: usize,
    datasets: usize,
    methods: usize,
    reps: usize,
) -> Result<(), Failure> {
    let s = cmd_fp_sim(sources, datasets, methods, reps, cfg)?;
    println!(
        "false positives per {sources} sources: mean {:.2}, sd {:.2} over {reps} repetitions",
        s.mean, s.sd
    );
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    let cfg = load_config(&cli.common)?;
    match &cli.command {
        Command::Detect { dataset } => detect(&cfg, dataset),
        Command::Ensemble { scores, method } => ensemble(&cfg, scores, method.as_deref()),
        Command::Experiment {
            name,
            iterations,
            repetitions,
        } => experiment(&cfg, name, *iterations, *repetitions),
        Command::IrtReport { scores } => irt_report(&cfg, scores),
        Command::FpSim {
            sources,
            datasets,
            methods,
            reps,
        } => fp_sim(&cfg, *sources, *datasets, *methods, *reps),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
