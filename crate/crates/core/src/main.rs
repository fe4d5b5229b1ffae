use clap::{Args, Parser, Subcommand};
use radcmp::config::{ScenarioConfig, SweepSpec};
use radcmp::error::Result;
use radcmp::pipeline::{
    emit_reports, report_json, run_stages, write_curves, Stages, Verdict, VerdictReport,
};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Curvature comparison toolkit for pointed spheres with a single cut point.
#[derive(Parser)]
#[command(name = "radcmp", version)]
struct Cli {
    /// Seed for every sampler; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Omit wall-clock timings so reports are byte-reproducible.
    #[arg(long, global = true)]
    deterministic: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// JSON report path (stdout when absent and the config names none).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Sampled curvature gap lambda(t) and its integral.
    Lambda {
        #[arg(long)]
        config: PathBuf,
        /// Curve CSV with columns t,lambda.
        #[arg(long)]
        out: Option<PathBuf>,
        /// JSON with the integral and sampler metadata.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Constants c1, c2, c3, c, delta_n and epsilon_n of M1.
    Constants(Common),
    /// Key Lemma: deviation, Gronwall envelope and hypothesis check.
    Keylemma {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        curves: Option<PathBuf>,
    },
    /// Key Lemma plus the bi-Lipschitz estimate of F~.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        curves: Option<PathBuf>,
    },
    /// Blend F~ with its mollification and check the Jacobian (n = 2).
    MollifyCheck {
        #[command(flatten)]
        common: Common,
        /// CSV of the blended map with columns x1,x2,Fx1,Fx2.
        #[arg(long)]
        grid_dump: Option<PathBuf>,
    },
    /// Full pipeline with verdict and exit code.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        curves: Option<PathBuf>,
    },
    /// Full pipeline over a parameter range.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// key.path=start:stop:steps
        #[arg(long)]
        sweep: String,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn load(path: &Path, seed: Option<u64>) -> Result<ScenarioConfig> {
    let mut cfg = ScenarioConfig::load(path)?;
    if seed.is_some() {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn emit(
    report: &VerdictReport,
    out: Option<PathBuf>,
    cfg: &ScenarioConfig,
    curves: Option<PathBuf>,
) -> Result<()> {
    let out = out.or_else(|| cfg.output.report.as_ref().map(|p| cfg.base_dir.join(p)));
    let curves = curves.or_else(|| cfg.output.curves.as_ref().map(|p| cfg.base_dir.join(p)));
    if out.is_none() {
        print!("{}", report_json(report)?);
    }
    emit_reports(report, out.as_deref(), curves.as_deref())
}

fn staged(cli: &Cli, common: &Common, stages: Stages, curves: Option<PathBuf>) -> Result<i32> {
    let mut cfg = load(&common.config, cli.seed)?;
    if let Command::MollifyCheck { grid_dump, .. } = &cli.command {
        cfg.mollifier.get_or_insert_with(Default::default);
        if let Some(p) = grid_dump {
            cfg.output.grid_dump = Some(std::env::current_dir()?.join(p));
        }
    }
    let report = run_stages(&cfg, stages, cli.deterministic)?;
    emit(&report, common.out.clone(), &cfg, curves)?;
    Ok(report.exit_code)
}

fn sweep(cli: &Cli, config: &Path, spec: &str, out_dir: &Path) -> Result<i32> {
    let base = load(config, cli.seed)?;
    let sweep = SweepSpec::parse(spec)?;
    std::fs::create_dir_all(out_dir)?;
    let mut agg = csv::Writer::from_path(out_dir.join("sweep.csv"))?;
    agg.write_record([
        "index",
        "param",
        "value",
        "verdict",
        "exit_code",
        "lambda_integral",
        "epsilon_n",
        "max_deviation",
        "lip_b",
        "min_singular_value",
    ])?;
    let mut worst = 0;
    for (i, value) in sweep.values().into_iter().enumerate() {
        let cfg = sweep.apply(&base, value)?;
        let report = run_stages(&cfg, Stages::ALL, cli.deterministic)?;
        emit_reports(
            &report,
            Some(&out_dir.join(format!("point-{i:03}.json"))),
            None,
        )?;
        let k = report.key_lemma.as_ref();
        let fmt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        agg.write_record([
            i.to_string(),
            sweep.key(),
            format!("{value:e}"),
            report.verdict.map(|v| format!("{v:?}")).unwrap_or_default(),
            report.exit_code.to_string(),
            fmt(k.map(|k| k.lambda_integral)),
            fmt(k.map(|k| k.constants.epsilon_n)),
            fmt(k.map(|k| k.max_deviation)),
            fmt(report.lipschitz.as_ref().map(|l| l.lip_b)),
            fmt(report.mollifier.as_ref().map(|m| m.min_singular_value)),
        ])?;
        if report.verdict == Some(Verdict::InequalityViolation) {
            worst = 3;
        }
    }
    agg.flush()?;
    Ok(worst)
}

fn dispatch(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Lambda {
            config,
            out,
            report,
        } => {
            let cfg = load(config, cli.seed)?;
            let r = run_stages(&cfg, Stages::LAMBDA, cli.deterministic)?;
            if let Some(p) = out {
                write_curves(&r.curves, p)?;
            }
            match report {
                Some(p) => emit_reports(&r, Some(p), None)?,
                None => print!("{}", report_json(&r)?),
            }
            Ok(r.exit_code)
        }
        Command::Constants(common) => staged(cli, common, Stages::CONSTANTS, None),
        Command::Keylemma { common, curves } => {
            staged(cli, common, Stages::KEY_LEMMA, curves.clone())
        }
        Command::Compare { common, curves } => staged(cli, common, Stages::COMPARE, curves.clone()),
        Command::MollifyCheck { common, .. } => staged(cli, common, Stages::MOLLIFIER, None),
        Command::Run { common, curves } => staged(cli, common, Stages::ALL, curves.clone()),
        Command::Sweep {
            config,
            sweep: spec,
            out_dir,
        } => sweep(cli, config, spec, out_dir),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = std::env::var("RADCMP_WORKERS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("warning: could not size the worker pool: {e}");
        }
    }
    match dispatch(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
