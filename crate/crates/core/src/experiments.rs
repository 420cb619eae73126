//! End-to-end runs with serializable configs and reports.
//!
//! Every report carries a [`Meta`] block and a verbatim echo of its config.
//! Only `meta.wall_clock` varies between identical runs; see
//! [`strip_wall_clock`].

use std::path::PathBuf;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::certificates::{self, Certificate, PairBound};
use crate::dataset::{self, Dataset, SyntheticConfig};
use crate::error::{FaroError, Result};
use crate::fairness::{self, ConstraintSpec};
use crate::metrics::{self, EvalReport};
use crate::pareto::{self, ScalarizationReport, SweepGrid, SweepResult};
use crate::policy::{self, BetaReport, FinitePolicy, FiniteWorld, InequalityCheck, TransferReport, WorldConfig};
use crate::proxygda::{self, RoundRecord, SolverConfig, SolverState};
use crate::reward_model::{self, Arch, RewardParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WallClock {
    pub started_unix: f64,
    pub elapsed_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub command: String,
    pub version: String,
    pub seed: Option<u64>,
    pub wall_clock: WallClock,
}

struct Clock {
    command: &'static str,
    started: SystemTime,
    timer: Instant,
}

impl Clock {
    fn start(command: &'static str) -> Self {
        Self {
            command,
            started: SystemTime::now(),
            timer: Instant::now(),
        }
    }

    fn finish(self, seed: Option<u64>) -> Meta {
        Meta {
            command: self.command.into(),
            version: crate::VERSION.into(),
            seed,
            wall_clock: WallClock {
                started_unix: self.started.duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0),
                elapsed_secs: self.timer.elapsed().as_secs_f64(),
            },
        }
    }
}

/// Removes `meta.wall_clock` so reports of identical runs compare equal.
pub fn strip_wall_clock(mut report: serde_json::Value) -> serde_json::Value {
    if let Some(meta) = report.get_mut("meta").and_then(|m| m.as_object_mut()) {
        meta.remove("wall_clock");
    }
    report
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataSource {
    Synthetic(SyntheticConfig),
    Csv(PathBuf),
}

impl DataSource {
    pub fn load(&self) -> Result<Dataset> {
        match self {
            DataSource::Synthetic(cfg) => dataset::generate_synthetic(cfg),
            DataSource::Csv(path) => dataset::load_csv(path),
        }
    }

    fn set_seed(&mut self, seed: u64) {
        if let DataSource::Synthetic(cfg) = self {
            cfg.seed = seed;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WorldSource {
    Generate(WorldConfig),
    Path(PathBuf),
}

impl WorldSource {
    pub fn load(&self) -> Result<FiniteWorld> {
        match self {
            WorldSource::Generate(cfg) => policy::generate_world(cfg),
            WorldSource::Path(p) => FiniteWorld::load(p),
        }
    }

    fn set_seed(&mut self, seed: u64) {
        if let WorldSource::Generate(cfg) = self {
            cfg.seed = seed;
        }
    }
}

fn default_delta() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenDataConfig {
    pub dataset: SyntheticConfig,
    #[serde(default)]
    pub world: Option<WorldConfig>,
}

impl GenDataConfig {
    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        if let Some(s) = seed {
            self.dataset.seed = s;
            if let Some(w) = self.world.as_mut() {
                w.seed = s;
            }
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenDataReport {
    pub meta: Meta,
    pub config: GenDataConfig,
    pub n_examples: usize,
    pub group_counts: Vec<usize>,
}

/// Generates a dataset (and optionally a world); returns them with provenance.
pub fn run_gen_data(cfg: &GenDataConfig) -> Result<(Dataset, Option<FiniteWorld>, GenDataReport)> {
    let clock = Clock::start("gen-data");
    let ds = dataset::generate_synthetic(&cfg.dataset)?;
    let world = cfg.world.as_ref().map(policy::generate_world).transpose()?;
    let report = GenDataReport {
        n_examples: ds.len(),
        group_counts: ds.group_counts(),
        config: cfg.clone(),
        meta: clock.finish(Some(cfg.dataset.seed)),
    };
    Ok((ds, world, report))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub data: DataSource,
    /// Fraction held out for the certificate; 0 certifies on the training data.
    #[serde(default)]
    pub test_frac: f64,
    pub arch: Arch,
    pub spec: ConstraintSpec,
    pub solver: SolverConfig,
    #[serde(default = "default_delta")]
    pub delta: f64,
}

impl TrainConfig {
    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        if let Some(s) = seed {
            self.data.set_seed(s);
            self.solver.seed = s;
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateInputs {
    pub rho: f64,
    #[serde(rename = "G")]
    pub g: f64,
    #[serde(rename = "G_prepass")]
    pub g_prepass: f64,
    pub m: usize,
    #[serde(rename = "T")]
    pub t: usize,
    pub n_min: usize,
    #[serde(rename = "R")]
    pub dual_bound: f64,
    pub eta_lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterateSummary {
    pub nll: f64,
    pub true_violation: f64,
    pub anchored_gaps: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub meta: Meta,
    pub config: TrainConfig,
    pub n_train: usize,
    pub n_eval: usize,
    pub rounds: Vec<RoundRecord>,
    pub certificate_inputs: CertificateInputs,
    #[serde(rename = "epsilon_T")]
    pub epsilon_t: f64,
    pub averaged: IterateSummary,
    pub last_iterate: IterateSummary,
    pub certificate: Certificate,
    pub groupwise: Vec<PairBound>,
    pub params: RewardParams,
}

fn summarize(params: &RewardParams, data: &Dataset, spec: &ConstraintSpec) -> Result<IterateSummary> {
    let stats = fairness::proxy_for(params, data, spec.family)?;
    Ok(IterateSummary {
        nll: reward_model::nll(params, data)?,
        true_violation: stats.max_pairwise_gap(),
        anchored_gaps: stats.anchored_gaps(),
    })
}

/// Output of a train run: the report plus the solver state for callers that
/// need more than the report carries.
pub struct TrainOutcome {
    pub report: TrainReport,
    pub state: SolverState,
    pub train: Dataset,
    pub eval: Dataset,
}

pub fn run_train(cfg: &TrainConfig) -> Result<TrainOutcome> {
    let clock = Clock::start("train");
    let full = cfg.data.load()?;
    if !(0.0..1.0).contains(&cfg.test_frac) {
        return Err(FaroError::validation("test_frac", "must lie in [0, 1)"));
    }
    let (train, eval) = if cfg.test_frac > 0.0 {
        full.split(cfg.test_frac, cfg.solver.seed)?
    } else {
        (full.clone(), full)
    };
    let state = proxygda::run(&cfg.solver, &train, &cfg.spec, cfg.arch)?;
    let phi_bar = proxygda::averaged_params(&state, cfg.arch)?;
    let last = proxygda::last_params(&state, cfg.arch)?;
    let epsilon_t = certificates::epsilon_from_state(&state)?;
    let certificate = certificates::verify_certificate(&state, cfg.arch, &eval, &cfg.spec, cfg.delta)?;
    let report = TrainReport {
        n_train: train.len(),
        n_eval: eval.len(),
        rounds: state.rounds.clone(),
        certificate_inputs: CertificateInputs {
            rho: state.rho_estimate,
            g: state.g_estimate,
            g_prepass: state.g_prepass,
            m: state.n_constraints,
            t: state.outer_iters,
            n_min: certificate.n_min,
            dual_bound: state.dual_bound,
            eta_lambda: state.eta_lambda,
        },
        epsilon_t,
        averaged: summarize(&phi_bar, &train, &cfg.spec)?,
        last_iterate: summarize(&last, &train, &cfg.spec)?,
        certificate,
        groupwise: certificates::groupwise_bounds(&phi_bar, &train, &cfg.spec, epsilon_t)?,
        params: phi_bar,
        config: cfg.clone(),
        meta: clock.finish(Some(cfg.solver.seed)),
    };
    Ok(TrainOutcome {
        report,
        state,
        train,
        eval,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditConfig {
    pub params: PathBuf,
    pub data: DataSource,
    pub spec: ConstraintSpec,
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Solver diagnostics; taken from `train_report` when given.
    #[serde(default)]
    pub rho: f64,
    #[serde(default, rename = "G")]
    pub g: f64,
    #[serde(default = "one", rename = "T")]
    pub t: usize,
    #[serde(default)]
    pub train_report: Option<PathBuf>,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub meta: Meta,
    pub config: AuditConfig,
    pub certificate: Certificate,
}

pub fn run_audit(cfg: &AuditConfig) -> Result<AuditReport> {
    let clock = Clock::start("audit");
    let params = RewardParams::load(&cfg.params)?;
    let data = cfg.data.load()?;
    let (rho, g, t) = match &cfg.train_report {
        Some(path) => {
            let report: TrainReport = serde_json::from_str(&std::fs::read_to_string(path)?)?;
            let ci = report.certificate_inputs;
            (ci.rho, ci.g, ci.t)
        }
        None => (cfg.rho, cfg.g, cfg.t),
    };
    let certificate = certificates::certify_params(&params, &data, &cfg.spec, rho, g, t, cfg.delta)?;
    Ok(AuditReport {
        certificate,
        config: cfg.clone(),
        meta: clock.finish(None),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransferConfig {
    pub data: DataSource,
    pub world: WorldSource,
    pub arch: Arch,
    pub spec: ConstraintSpec,
    pub solver: SolverConfig,
    pub betas: Vec<f64>,
}

impl TransferConfig {
    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        if let Some(s) = seed {
            self.data.set_seed(s);
            self.world.set_seed(s);
            self.solver.seed = s;
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferRunReport {
    pub meta: Meta,
    pub config: TransferConfig,
    #[serde(rename = "epsilon_T")]
    pub epsilon_t: f64,
    pub reward_violation_fair: f64,
    pub reward_violation_plain: f64,
    pub rows: Vec<TransferReport>,
    pub all_hold: bool,
    /// Betas at which `Δ_fair > Δ_plain + ε_T`.
    pub counterexamples: Vec<f64>,
}

/// Trains a FARO reward and a plain reward (dual frozen at 0) on the same
/// data and compares their Gibbs policies on the world over a `β` grid.
pub fn run_transfer(cfg: &TransferConfig) -> Result<TransferRunReport> {
    let clock = Clock::start("transfer");
    if cfg.betas.is_empty() {
        return Err(FaroError::validation("betas", "must be nonempty"));
    }
    if let Some(b) = cfg.betas.iter().find(|b| !(**b > 0.0 && b.is_finite())) {
        return Err(FaroError::validation("betas", format!("{b} is not > 0")));
    }
    let data = cfg.data.load()?;
    let world = cfg.world.load()?;
    let fair_state = proxygda::run(&cfg.solver, &data, &cfg.spec, cfg.arch)?;
    let plain_cfg = SolverConfig {
        freeze_dual: true,
        outer_iters: 1,
        ..cfg.solver.clone()
    };
    let plain_state = proxygda::run(&plain_cfg, &data, &cfg.spec, cfg.arch)?;
    let fair = proxygda::averaged_params(&fair_state, cfg.arch)?;
    let plain = proxygda::averaged_params(&plain_state, cfg.arch)?;
    let epsilon_t = certificates::epsilon_from_state(&fair_state)?;
    let pi_ref = FinitePolicy::uniform(&world);
    let rows = cfg
        .betas
        .iter()
        .map(|&b| policy::transfer_experiment(&fair, &plain, &world, &pi_ref, b, epsilon_t))
        .collect::<Result<Vec<_>>>()?;
    let counterexamples: Vec<f64> = rows.iter().filter(|r| !r.holds).map(|r| r.beta).collect();
    Ok(TransferRunReport {
        epsilon_t,
        reward_violation_fair: fairness::true_violation(&fair, &data, cfg.spec.family)?,
        reward_violation_plain: fairness::true_violation(&plain, &data, cfg.spec.family)?,
        all_hold: counterexamples.is_empty(),
        counterexamples,
        rows,
        config: cfg.clone(),
        meta: clock.finish(Some(cfg.solver.seed)),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParetoConfig {
    pub data: DataSource,
    /// Without a world the sweep runs in reward-only mode.
    #[serde(default)]
    pub world: Option<WorldSource>,
    pub grid: SweepGrid,
    #[serde(default = "default_alphas")]
    pub alphas: Vec<f64>,
}

fn default_alphas() -> Vec<f64> {
    (1..=9).map(|i| i as f64 / 10.0).collect()
}

impl ParetoConfig {
    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        if let Some(s) = seed {
            self.data.set_seed(s);
            if let Some(w) = self.world.as_mut() {
                w.set_seed(s);
            }
            self.grid.solver.seed = s;
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoReport {
    pub meta: Meta,
    pub config: ParetoConfig,
    pub sweep: SweepResult,
    pub frontier: Vec<usize>,
    pub scalarization: Option<ScalarizationReport>,
}

pub fn run_pareto(cfg: &ParetoConfig, jobs: usize) -> Result<ParetoReport> {
    let clock = Clock::start("pareto");
    let data = cfg.data.load()?;
    let world = cfg.world.as_ref().map(WorldSource::load).transpose()?;
    let pi_ref = world.as_ref().map(FinitePolicy::uniform);
    let sweep = pareto::sweep(&cfg.grid, &data, world.as_ref().zip(pi_ref.as_ref()), jobs)?;
    let coords: Vec<(f64, f64)> = sweep.points.iter().map(|p| (p.error, p.fairness)).collect();
    let scalarization = if coords.is_empty() {
        None
    } else {
        Some(pareto::scalarization_check(&coords, &cfg.alphas)?)
    };
    Ok(ParetoReport {
        frontier: pareto::non_dominated(&coords),
        scalarization,
        sweep,
        config: cfg.clone(),
        meta: clock.finish(Some(cfg.grid.solver.seed)),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyEvalConfig {
    pub world: WorldSource,
    pub params: PathBuf,
    pub betas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyEvalRow {
    pub beta: f64,
    pub kl: f64,
    pub violation: f64,
    pub event_prob: f64,
    pub pinsker: InequalityCheck,
    pub drift: Vec<Option<InequalityCheck>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyEvalReport {
    pub meta: Meta,
    pub config: PolicyEvalConfig,
    pub reference_violation: f64,
    pub rows: Vec<PolicyEvalRow>,
    pub beta_monotonicity: BetaReport,
}

pub fn run_policy_eval(cfg: &PolicyEvalConfig) -> Result<PolicyEvalReport> {
    let clock = Clock::start("policy-eval");
    let world = cfg.world.load()?;
    let params = RewardParams::load(&cfg.params)?;
    let pi_ref = FinitePolicy::uniform(&world);
    let rows = cfg
        .betas
        .iter()
        .map(|&beta| {
            let pi = policy::gibbs_policy(&params, &world, &pi_ref, beta)?;
            Ok(PolicyEvalRow {
                beta,
                kl: policy::kl(&pi, &pi_ref, &world)?,
                violation: policy::policy_violation(&pi, &world)?,
                event_prob: policy::event_prob(&pi, &world),
                pinsker: policy::pinsker_check(&pi, &pi_ref, &world)?,
                drift: policy::drift_checks(&pi, &pi_ref, &world)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut sorted = cfg.betas.clone();
    sorted.sort_by(f64::total_cmp);
    Ok(PolicyEvalReport {
        reference_violation: policy::policy_violation(&pi_ref, &world)?,
        beta_monotonicity: policy::beta_monotonicity(&params, &world, &pi_ref, &sorted)?,
        rows,
        config: cfg.clone(),
        meta: clock.finish(None),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsConfig {
    pub data: DataSource,
    pub params: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub meta: Meta,
    pub config: MetricsConfig,
    pub report: EvalReport,
}

pub fn run_metrics(cfg: &MetricsConfig) -> Result<MetricsReport> {
    let clock = Clock::start("metrics");
    let data = cfg.data.load()?;
    let params = RewardParams::load(&cfg.params)?;
    Ok(MetricsReport {
        report: metrics::evaluate(&params, &data)?,
        config: cfg.clone(),
        meta: clock.finish(None),
    })
}
