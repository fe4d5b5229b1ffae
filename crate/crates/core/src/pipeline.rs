//! Orchestration: lambda, constants, Key Lemma, Lipschitz, mollifier, verdict.

use crate::config::ScenarioConfig;
use crate::curvature_compare::{check_gap_bound, lambda_integral, GapBoundSummary, LambdaCurve};
use crate::error::{Error, Result};
use crate::exp_log_maps::{build_comparison, lipschitz_estimate, ComparisonMap, LipschitzEstimate};
use crate::jacobi_gronwall::{constants, verify_key_lemma, ComparisonConstants, KeyLemmaReport};
use crate::mollify_check::{blend_and_check, blended_map, ImmersionReport};
use crate::radial_models::{GeometryKind, IsometryMatrix, RadialGeometry};
use crate::sampler::{DirectionSampler, SamplerSpec};
use serde::Serialize;
use std::path::Path;
use std::time::Instant;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    HypothesisMetAndVerified,
    HypothesisNotMet,
    InequalityViolation,
    ModelRejected,
}

impl Verdict {
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::HypothesisMetAndVerified => 0,
            Verdict::HypothesisNotMet => 2,
            Verdict::InequalityViolation => 3,
            Verdict::ModelRejected => 4,
        }
    }
}

/// Which stages to run. `run` enables all of them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stages {
    pub lambda: bool,
    pub constants: bool,
    pub key_lemma: bool,
    pub lipschitz: bool,
    pub mollifier: bool,
}

impl Stages {
    pub const ALL: Stages = Stages {
        lambda: true,
        constants: true,
        key_lemma: true,
        lipschitz: true,
        mollifier: true,
    };
    pub const LAMBDA: Stages = Stages {
        lambda: true,
        constants: false,
        key_lemma: false,
        lipschitz: false,
        mollifier: false,
    };
    pub const CONSTANTS: Stages = Stages {
        lambda: false,
        constants: true,
        key_lemma: false,
        lipschitz: false,
        mollifier: false,
    };
    pub const KEY_LEMMA: Stages = Stages {
        lambda: true,
        constants: true,
        key_lemma: true,
        lipschitz: false,
        mollifier: false,
    };
    pub const COMPARE: Stages = Stages {
        lambda: true,
        constants: true,
        key_lemma: true,
        lipschitz: true,
        mollifier: false,
    };
    pub const MOLLIFIER: Stages = Stages {
        lambda: false,
        constants: false,
        key_lemma: false,
        lipschitz: false,
        mollifier: true,
    };
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LambdaSummary {
    pub integral: f64,
    pub nodes: usize,
    pub max_value: f64,
    pub richardson_error: Option<f64>,
    pub evaluations: usize,
    pub lower_bound: bool,
    pub sampler: SamplerSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelSummary {
    pub m1: GeometryKind,
    pub m2: GeometryKind,
    pub isometry: Vec<Vec<f64>>,
    /// Worst refocusing defect when both models carry charts.
    pub refocusing_defect: Option<f64>,
}

/// Curves on the quadrature grid; the `phi_max`/`envelope_max` columns are
/// maxima over the sampled directions.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Curves {
    pub t: Vec<f64>,
    pub lambda: Vec<f64>,
    pub phi_max: Vec<f64>,
    pub envelope_max: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerdictReport {
    pub schema_version: u32,
    pub toolkit: String,
    pub version: String,
    /// Absent for partial runs that stop before the Key Lemma.
    pub verdict: Option<Verdict>,
    pub exit_code: i32,
    pub reasons: Vec<String>,
    pub config: ScenarioConfig,
    pub models: Option<ModelSummary>,
    pub lambda: Option<LambdaSummary>,
    pub gap_bound: Option<GapBoundSummary>,
    pub constants: Option<ComparisonConstants>,
    pub key_lemma: Option<KeyLemmaReport>,
    pub lipschitz: Option<LipschitzEstimate>,
    pub lipschitz_skipped: Option<String>,
    pub mollifier: Option<ImmersionReport>,
    pub mollifier_error: Option<String>,
    pub timings: Option<Vec<StageTiming>>,
    #[serde(skip)]
    pub curves: Curves,
}

impl VerdictReport {
    fn new(cfg: &ScenarioConfig) -> Self {
        VerdictReport {
            schema_version: SCHEMA_VERSION,
            toolkit: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            verdict: None,
            exit_code: 0,
            reasons: Vec::new(),
            config: cfg.clone(),
            models: None,
            lambda: None,
            gap_bound: None,
            constants: None,
            key_lemma: None,
            lipschitz: None,
            lipschitz_skipped: None,
            mollifier: None,
            mollifier_error: None,
            timings: None,
            curves: Curves::default(),
        }
    }

    fn set(&mut self, verdict: Verdict) {
        self.verdict = Some(verdict);
        self.exit_code = verdict.exit_code();
    }

    fn reject(mut self, err: &Error) -> Self {
        self.reasons.push(err.to_string());
        self.set(Verdict::ModelRejected);
        self
    }

    /// Re-derive the verdict from the sub-report flags.
    pub fn derive_verdict(&mut self) {
        let mut violations = Vec::new();
        if let Some(l) = &self.gap_bound {
            if l.violations > 0 {
                violations.push(format!(
                    "curvature-gap inequality violated at {} of {} checks",
                    l.violations, l.checks
                ));
            }
        }
        let mut hypothesis = None;
        if let Some(k) = &self.key_lemma {
            hypothesis = Some(k.hypothesis_met);
            if !k.gronwall_ok {
                violations.push("deviation exceeds its Gronwall envelope".into());
            }
            if !k.chain_ok || !k.global_chain_ok {
                violations.push("d sigma deviation exceeds phi(pi)/c3".into());
            }
            if k.hypothesis_met && !k.conclusion_met {
                violations.push(format!(
                    "hypothesis met but max deviation {:e} > delta_n/2 = {:e}",
                    k.max_deviation,
                    0.5 * k.constants.delta_n
                ));
            }
        }
        if let (Some(true), Some(l)) = (hypothesis, &self.lipschitz) {
            if !l.final_bound_ok {
                violations.push(format!(
                    "hypothesis met but Lip^b^2 = {:e} exceeds {:e}",
                    l.lip_b.max(l.lip_b_derivative).powi(2),
                    l.final_bound_rhs
                ));
            }
        }
        if !violations.is_empty() {
            self.reasons.extend(violations);
            self.set(Verdict::InequalityViolation);
        } else if hypothesis == Some(true) {
            self.set(Verdict::HypothesisMetAndVerified);
        } else if let Some(k) = &self.key_lemma {
            self.reasons.push(format!(
                "integral of lambda {:e} is not below epsilon_n {:e}",
                k.lambda_integral, k.constants.epsilon_n
            ));
            self.set(Verdict::HypothesisNotMet);
        } else {
            self.verdict = None;
            self.exit_code = 0;
        }
    }
}

struct Clock {
    enabled: bool,
    entries: Vec<StageTiming>,
}

impl Clock {
    fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        if self.enabled {
            self.entries.push(StageTiming {
                stage: stage.to_string(),
                seconds: start.elapsed().as_secs_f64(),
            });
        }
        out
    }
}

fn build_models(cfg: &ScenarioConfig) -> Result<(RadialGeometry, RadialGeometry, IsometryMatrix)> {
    let g1 = cfg.m1.build(cfg.n, &cfg.base_dir)?;
    let g2 = cfg.m2.build(cfg.n, &cfg.base_dir)?;
    let q = cfg.isometry.build(cfg.n)?;
    Ok((g1, g2, q))
}

fn comparison(
    g1: &RadialGeometry,
    g2: &RadialGeometry,
    q: &IsometryMatrix,
) -> Option<Result<ComparisonMap>> {
    match (g1.chart(), g2.chart()) {
        (Some(c1), Some(c2)) => Some(build_comparison(c1, c2, q.clone())),
        _ => None,
    }
}

fn lambda_summary(curve: &LambdaCurve) -> LambdaSummary {
    LambdaSummary {
        integral: curve.integral,
        nodes: curve.grid.len(),
        max_value: curve.values.iter().copied().fold(0.0, f64::max),
        richardson_error: curve.richardson_error,
        evaluations: curve.evaluations,
        lower_bound: curve.lower_bound,
        sampler: curve.sampler,
    }
}

/// Run the full pipeline.
pub fn run_pipeline(cfg: &ScenarioConfig, deterministic: bool) -> Result<VerdictReport> {
    run_stages(cfg, Stages::ALL, deterministic)
}

/// Run the enabled stages in order. Model rejections become a
/// `MODEL_REJECTED` report; other failures are errors.
pub fn run_stages(
    cfg: &ScenarioConfig,
    stages: Stages,
    deterministic: bool,
) -> Result<VerdictReport> {
    let mut cfg = cfg.clone();
    cfg.apply_seed();
    cfg.validate()?;
    let mut report = VerdictReport::new(&cfg);
    let mut clock = Clock {
        enabled: !deterministic,
        entries: Vec::new(),
    };

    let (g1, g2, q) = match clock.time("models", || build_models(&cfg)) {
        Ok(m) => m,
        Err(e) if e.is_model_rejection() => return Ok(report.reject(&e)),
        Err(e) => return Err(e),
    };
    if g1.dim() != cfg.n || g2.dim() != cfg.n {
        return Err(Error::DimensionMismatch(
            "model dimension differs from n".into(),
        ));
    }
    let cm = match clock.time("preflight", || comparison(&g1, &g2, &q)) {
        Some(Ok(cm)) => Some(cm),
        Some(Err(e)) if e.is_model_rejection() => return Ok(report.reject(&e)),
        Some(Err(e)) => return Err(e),
        None => None,
    };
    report.models = Some(ModelSummary {
        m1: g1.kind(),
        m2: g2.kind(),
        isometry: q
            .matrix()
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect(),
        refocusing_defect: cm.as_ref().map(|c| c.refocusing_defect),
    });

    let sampler = DirectionSampler::new(cfg.n, cfg.sampler);
    let grid = cfg.quadrature.grid();
    report.curves.t = grid.clone();

    let mut curve = None;
    if stages.lambda || stages.key_lemma {
        let c = clock.time("lambda", || {
            lambda_integral(&g1, &g2, &q, &cfg.quadrature, &sampler)
        })?;
        report.gap_bound =
            Some(clock.time("gap_bound", || check_gap_bound(&g1, &g2, &q, &c, &sampler)));
        report.lambda = Some(lambda_summary(&c));
        report.curves.lambda = c.values.clone();
        curve = Some(c);
    }

    let mut consts = None;
    if stages.constants || stages.key_lemma {
        match clock.time("constants", || {
            constants(&g1, &sampler, &cfg.integrator, &cfg.quadrature)
        }) {
            Ok(c) => consts = Some(c),
            Err(e) if e.is_model_rejection() => return Ok(report.reject(&e)),
            Err(e) => return Err(e),
        }
        report.constants = consts.clone();
    }

    if stages.key_lemma {
        let (c, l) = (consts.as_ref().unwrap(), curve.as_ref().unwrap());
        let k = clock.time("key_lemma", || {
            verify_key_lemma(
                &g1,
                &g2,
                &q,
                &sampler,
                &cfg.integrator,
                &cfg.quadrature,
                c,
                l,
            )
        })?;
        report.curves.phi_max = k.phi_max.clone();
        report.curves.envelope_max = k.envelope_max.clone();
        report.key_lemma = Some(k);
    }

    if stages.lipschitz {
        match &cm {
            Some(cm) => {
                report.lipschitz = Some(clock.time("lipschitz", || {
                    lipschitz_estimate(cm, &sampler, &cfg.lipschitz)
                })?)
            }
            None => {
                report.lipschitz_skipped = Some(
                    "the sigma map needs charted geometry (warped or charted models with n = 2, 3)"
                        .into(),
                )
            }
        }
    }

    if stages.mollifier {
        if let Some(mcfg) = &cfg.mollifier {
            let outcome = match &cm {
                Some(cm) if cfg.n == 2 => clock.time("mollifier", || blend_and_check(cm, mcfg)),
                Some(_) => Err(Error::InvalidInput(format!(
                    "mollifier check needs n = 2, got {}",
                    cfg.n
                ))),
                None => Err(Error::InvalidInput(
                    "mollifier check needs charted geometry".into(),
                )),
            };
            match outcome {
                Ok(r) => report.mollifier = Some(r),
                Err(e) => report.mollifier_error = Some(e.to_string()),
            }
            if let (Some(cm), Some(path)) = (&cm, &cfg.output.grid_dump) {
                if cfg.n == 2 {
                    let map = blended_map(cm, mcfg)?;
                    map.dump_csv(&resolve(&cfg.base_dir, path), cfg.output.grid_nodes)?;
                }
            }
        }
    }

    report.derive_verdict();
    if !deterministic {
        report.timings = Some(clock.entries);
    }
    Ok(report)
}

fn resolve(base: &Path, p: &Path) -> std::path::PathBuf {
    if p.is_absolute() || base.as_os_str().is_empty() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

pub fn report_json(report: &VerdictReport) -> Result<String> {
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    Ok(text)
}

/// Write the curves as CSV. Columns absent from the run are left out.
pub fn write_curves(curves: &Curves, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["t"];
    let mut cols: Vec<&Vec<f64>> = Vec::new();
    for (name, col) in [
        ("lambda", &curves.lambda),
        ("phi_max", &curves.phi_max),
        ("envelope_max", &curves.envelope_max),
    ] {
        if col.len() == curves.t.len() {
            header.push(name);
            cols.push(col);
        }
    }
    w.write_record(&header)?;
    for (i, t) in curves.t.iter().enumerate() {
        let mut row = vec![format!("{t:e}")];
        row.extend(cols.iter().map(|c| format!("{:e}", c[i])));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// JSON report and curves CSV to whichever paths are given.
pub fn emit_reports(
    report: &VerdictReport,
    json: Option<&Path>,
    curves: Option<&Path>,
) -> Result<()> {
    if let Some(p) = json {
        if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(p, report_json(report)?)?;
    }
    if let Some(p) = curves {
        if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        write_curves(&report.curves, p)?;
    }
    Ok(())
}
