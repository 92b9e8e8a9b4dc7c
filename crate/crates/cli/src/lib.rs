//! Pipeline driver behind the `survsynth` binary.
//!
//! One JSON config drives every stage. Relative paths are resolved against the
//! directory holding the config. Stage seeds are derived from the config seed:
//! the survival fit is deterministic and uses none, covariate synthesis uses
//! `seed + 1`, time simulation uses `seed + 2`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use survsynth::fcs::{self, MethodParams, SynthesisPlan};
use survsynth::simulate::{self, SimulationColumns, StudyWindow};
use survsynth::spline::KnotSet;
use survsynth::survival_model::{self, FitOptions, KnotChoice, RoystonParmarModel};
use survsynth::tabular::{self, ColumnSpec, Dataset, Kind, Role};
use survsynth::utility::{self, StratumSpec};

/// Offset added to the config seed for covariate synthesis.
pub const SYNTHESIS_SEED_OFFSET: u64 = 1;
/// Offset added to the config seed for survival-time simulation.
pub const SIMULATION_SEED_OFFSET: u64 = 2;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_MODEL: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] survsynth::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use survsynth::Error as E;
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Core(e) => match e {
                E::NonMonotone(_) => EXIT_MODEL,
                E::InsufficientEvents(_)
                | E::AllCensored
                | E::Singular(_)
                | E::NonConvergence { .. }
                | E::Numerical(_)
                | E::Degenerate(_) => EXIT_NUMERICAL,
                _ => EXIT_CONFIG,
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default)]
    pub df: Option<usize>,
    /// Explicit knots on the log-time scale.
    #[serde(default)]
    pub knots: Option<KnotSet<f64>>,
    #[serde(default)]
    pub predictors: Vec<String>,
    #[serde(default)]
    pub max_iter: Option<usize>,
    #[serde(default)]
    pub tol: Option<f64>,
}

/// Overrides applied on top of the default plan.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesisConfig {
    #[serde(default)]
    pub seq: Option<Vec<String>>,
    #[serde(default)]
    pub pred: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub method: BTreeMap<String, String>,
    #[serde(default)]
    pub method_params: BTreeMap<String, MethodParams>,
    #[serde(default)]
    pub passthrough_predictors: Vec<String>,
    #[serde(default)]
    pub n_multiplier: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    pub synthetic_csv: PathBuf,
    pub model_json: PathBuf,
    pub report_json: PathBuf,
    pub report_txt: PathBuf,
    pub km_csv: PathBuf,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub input_csv: PathBuf,
    pub schema: Vec<ColumnSpec>,
    pub model: ModelConfig,
    #[serde(default)]
    pub synthesis: SynthesisConfig,
    pub window: StudyWindow,
    pub seed: u64,
    pub outputs: Outputs,
    #[serde(default)]
    pub emit_cause: bool,
    /// Strata for the stratified log-rank comparisons.
    #[serde(default)]
    pub strata: Vec<StratumSpec>,
}

/// Name of the diagnostic cause column when `emit_cause` is set.
pub const CAUSE_COLUMN: &str = "cause";

impl PipelineConfig {
    pub fn from_json(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: PipelineConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut cfg.input_csv);
        let o = &mut cfg.outputs;
        for p in [
            &mut o.synthetic_csv,
            &mut o.model_json,
            &mut o.report_json,
            &mut o.report_txt,
            &mut o.km_csv,
        ] {
            resolve(p);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_json(&text, base)
    }

    fn validate(&self) -> Result<()> {
        tabular::validate_schema(&self.schema)?;
        StudyWindow::new(self.window.study_span)?;
        match (&self.model.df, &self.model.knots) {
            (Some(_), Some(_)) => return Err(CliError::Config("model: give either df or knots, not both".into())),
            (None, None) => return Err(CliError::Config("model: df or knots is required".into())),
            _ => {}
        }
        let known = |name: &str| self.schema.iter().any(|c| c.name == name);
        let m = &self.model;
        let sy = &self.synthesis;
        let referenced = m
            .predictors
            .iter()
            .chain(sy.seq.iter().flatten())
            .chain(sy.pred.keys())
            .chain(sy.pred.values().flatten())
            .chain(sy.method.keys())
            .chain(sy.passthrough_predictors.iter())
            .map(String::as_str)
            .chain(self.strata.iter().map(StratumSpec::column));
        for name in referenced {
            if !known(name) {
                return Err(CliError::Config(format!("column `{name}` is not in the schema")));
            }
        }
        if self.emit_cause && known(CAUSE_COLUMN) {
            return Err(CliError::Config(format!(
                "emit_cause would overwrite the schema column `{CAUSE_COLUMN}`"
            )));
        }
        Ok(())
    }

    fn knot_choice(&self) -> KnotChoice {
        match (&self.model.df, &self.model.knots) {
            (Some(df), _) => KnotChoice::Df(*df),
            (None, Some(k)) => KnotChoice::Knots(k.clone()),
            (None, None) => unreachable!("validated"),
        }
    }

    fn fit_options(&self) -> FitOptions {
        let d = FitOptions::default();
        FitOptions {
            max_iter: self.model.max_iter.unwrap_or(d.max_iter),
            tol: self.model.tol.unwrap_or(d.tol),
        }
    }

    /// Default plan for the input data with the config overrides applied.
    pub fn plan(&self, data: &Dataset) -> SynthesisPlan {
        let mut plan = fcs::default_plan(data);
        let s = &self.synthesis;
        if let Some(seq) = &s.seq {
            plan.pred = seq
                .iter()
                .enumerate()
                .map(|(i, t)| (t.clone(), seq[..i].to_vec()))
                .collect();
            plan.method.retain(|k, _| seq.contains(k));
            for t in seq {
                if let Ok(spec) = data.spec(t) {
                    plan.method
                        .entry(t.clone())
                        .or_insert_with(|| fcs::default_method(&spec.kind).to_string());
                }
            }
            plan.seq = seq.clone();
        }
        plan.pred.extend(s.pred.clone());
        plan.method.extend(s.method.clone());
        plan.method_params = s.method_params.clone();
        plan.passthrough_predictors = s.passthrough_predictors.clone();
        if let Some(m) = s.n_multiplier {
            plan.n_multiplier = m;
        }
        plan.seed = self.seed.wrapping_add(SYNTHESIS_SEED_OFFSET);
        plan
    }

    fn survival_names(&self) -> (String, String) {
        let name = |r: Role| self.schema.iter().find(|c| c.role == r).map(|c| c.name.clone()).unwrap_or_default();
        (name(Role::SurvTime), name(Role::Event))
    }

    /// Columns of the synthetic CSV, in file order.
    pub fn synthetic_schema(&self, plan: &SynthesisPlan) -> Vec<ColumnSpec> {
        let mut out: Vec<ColumnSpec> = self
            .schema
            .iter()
            .filter(|c| plan.seq.contains(&c.name) || plan.passthrough_predictors.contains(&c.name))
            .cloned()
            .collect();
        let (t, d) = self.survival_names();
        out.push(ColumnSpec::surv_time(t));
        out.push(ColumnSpec::event(d));
        if self.emit_cause {
            out.push(ColumnSpec::new(
                CAUSE_COLUMN,
                Role::Ignore,
                Kind::Categorical {
                    levels: simulate::Cause::LABELS.iter().map(|s| s.to_string()).collect(),
                },
            ));
        }
        out
    }
}

fn load_input(cfg: &PipelineConfig) -> Result<Dataset> {
    let data = tabular::load_dataset(&cfg.input_csv, &cfg.schema)?;
    if data.n_rows() == 0 {
        return Err(CliError::Config(format!("{} has no data rows", cfg.input_csv.display())));
    }
    Ok(data)
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(survsynth::Error::Io)?;
    }
    Ok(())
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    ensure_parent(path)?;
    fs::write(path, contents).map_err(|e| CliError::Core(survsynth::Error::Io(e)))
}

/// Fits the survival model, writes the model JSON and returns a text summary.
pub fn cmd_fit(cfg: &PipelineConfig) -> Result<String> {
    let data = load_input(cfg)?;
    let model = survival_model::fit(&data, cfg.knot_choice(), &cfg.model.predictors, cfg.fit_options())?;
    write_file(&cfg.outputs.model_json, &model.to_json()?)?;
    fit_summary(&model, &data)
}

pub fn fit_summary(model: &RoystonParmarModel, data: &Dataset) -> Result<String> {
    let info = &model.fit_info;
    let se = survival_model::standard_errors(model, data).unwrap_or_else(|_| vec![f64::NAN; model.n_params()]);
    let mut s = String::new();
    let _ = writeln!(s, "observations: {}  events: {}", info.n_obs, info.n_events);
    let _ = writeln!(s, "log-likelihood: {:.6}", info.log_likelihood);
    let _ = writeln!(
        s,
        "converged: {}  iterations: {}  relative gradient: {:.3e}",
        info.converged, info.iterations, info.relative_gradient
    );
    let internal: Vec<String> = model.knots.internal.iter().map(|k| format!("{k:.6}")).collect();
    let _ = writeln!(
        s,
        "knots (log t): min {:.6}, internal [{}], max {:.6}",
        model.knots.k_min,
        internal.join(", "),
        model.knots.k_max
    );
    let _ = writeln!(s, "{:<24} {:>14} {:>14}", "term", "estimate", "std.error");
    let names = (0..model.gamma.0.len())
        .map(|j| format!("gamma{j}"))
        .chain(model.design_legend.iter().cloned());
    let values = model.gamma.0.iter().chain(&model.beta);
    for ((name, v), e) in names.zip(values).zip(&se) {
        let _ = writeln!(s, "{name:<24} {v:>14.6} {e:>14.6}");
    }
    for w in &info.warnings {
        let _ = writeln!(s, "warning: {w}");
    }
    Ok(s)
}

/// Generates the synthetic cohort from the saved model and writes it as CSV.
/// Returns the number of synthetic rows.
pub fn cmd_synthesize(cfg: &PipelineConfig) -> Result<usize> {
    let data = load_input(cfg)?;
    let model = RoystonParmarModel::load(&cfg.outputs.model_json)?;
    model.ensure_monotone()?;
    let plan = cfg.plan(&data);
    let synth = fcs::fit_synthesizer(&data, &plan)?;
    let covariates = fcs::generate(&synth, plan.synthetic_n(data.n_rows()), plan.seed)?;
    let (time, status) = cfg.survival_names();
    let columns = SimulationColumns {
        time,
        status,
        cause: cfg.emit_cause.then(|| CAUSE_COLUMN.to_string()),
    };
    let seed = cfg.seed.wrapping_add(SIMULATION_SEED_OFFSET);
    let (cohort, _) = simulate::simulate_cohort(&model, &covariates, cfg.window, seed, &columns)?;
    ensure_parent(&cfg.outputs.synthetic_csv)?;
    tabular::write_dataset(&cohort, &cfg.outputs.synthetic_csv)?;
    Ok(cohort.n_rows())
}

/// Compares the synthetic CSV with the input and writes the report files.
/// Returns the threshold summary line.
pub fn cmd_evaluate(cfg: &PipelineConfig) -> Result<String> {
    let original = load_input(cfg)?;
    let plan = cfg.plan(&original);
    let synthetic = tabular::load_partial(&cfg.outputs.synthetic_csv, &cfg.synthetic_schema(&plan))?;
    let report = utility::compare_report(&original, &synthetic, &plan.seq, &cfg.strata)?;
    let json = serde_json::to_string_pretty(&report).map_err(survsynth::Error::from)?;
    write_file(&cfg.outputs.report_json, &json)?;
    let line = report.threshold_line();
    write_file(&cfg.outputs.report_txt, &format!("{}\n{line}\n", report.render_table()))?;
    let curves = utility::km_curves(&original, &synthetic, &cfg.strata)?;
    write_file(&cfg.outputs.km_csv, &utility::km_csv(&curves)?)?;
    Ok(line)
}

/// Runs fit, synthesize and evaluate in order.
pub fn cmd_pipeline(cfg: &PipelineConfig) -> Result<String> {
    let mut out = cmd_fit(cfg)?;
    let n = cmd_synthesize(cfg)?;
    let _ = writeln!(out, "synthetic rows: {n}");
    let line = cmd_evaluate(cfg)?;
    let _ = writeln!(out, "{line}");
    Ok(out)
}
