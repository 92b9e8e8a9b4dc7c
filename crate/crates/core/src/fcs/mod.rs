//! Sequential conditional synthesis of covariates, entry times and dropout flags.
//!
//! Each target in `seq` gets a regression model on its declared predictors, fitted
//! on the original data. Generation walks `seq` in order and draws every column
//! from its model given the columns already generated. Fitted models keep only
//! estimates, except for what some methods need from the original rows: donor
//! values (pmm), the sorted target values (normrank back-transform) and stratum
//! pools (separation fallback).

mod lasso;
mod methods;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::sync::Arc;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tabular::{ColumnSpec, Dataset, DesignMatrix, Kind, Role};

pub use lasso::{lasso_linear_fit, lasso_logistic_fit, LassoFit, LASSO_FOLDS, LASSO_GRID};
pub use methods::{normal_rank_scores, Constant, EmpiricalConditional, PMM_DONORS};

/// Fitted conditional distribution of one target given its predictor row.
pub trait ConditionalModel: Send + Sync {
    /// Draws a value in the target's numeric coding. `row` holds the encoded
    /// predictors, without an intercept.
    fn sample(&self, row: &[f64], rng: &mut dyn RngCore) -> f64;

    /// Warnings raised while fitting.
    fn notes(&self) -> Vec<String> {
        Vec::new()
    }
}

/// What a method sees when fitting one target.
pub struct MethodInput<'a> {
    pub target: &'a str,
    pub spec: &'a ColumnSpec,
    /// Encoded predictors, no intercept; constant columns already removed.
    pub design: &'a DesignMatrix,
    pub y: &'a [f64],
    pub params: &'a MethodParams,
}

pub type MethodFn = dyn Fn(&MethodInput) -> Result<Box<dyn ConditionalModel>> + Send + Sync;

/// Optional per-target settings.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MethodParams {
    /// linear_prior: prior mean of the coefficients (intercept first); one value
    /// is broadcast.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior_mean: Option<Vec<f64>>,
    /// linear_prior: prior precision, relative to the residual variance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior_precision: Option<Vec<f64>>,
    /// Lasso methods: fixed penalty instead of cross-validation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    /// pmm: number of donors.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub donors: Option<usize>,
    /// Anything else, for custom methods.
    #[serde(flatten)]
    pub extra: BTreeMap<String, serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisPlan {
    /// Visit sequence.
    pub seq: Vec<String>,
    /// Predictors per target. Targets without an entry use no predictors.
    #[serde(default)]
    pub pred: BTreeMap<String, Vec<String>>,
    /// Method name per target.
    pub method: BTreeMap<String, String>,
    #[serde(default)]
    pub method_params: BTreeMap<String, MethodParams>,
    /// Columns that may be used as predictors but are not synthesized. Their
    /// values are resampled with replacement from the original rows.
    #[serde(default)]
    pub passthrough_predictors: Vec<String>,
    pub n_multiplier: f64,
    pub seed: u64,
}

impl SynthesisPlan {
    pub fn predictors(&self, target: &str) -> &[String] {
        self.pred.get(target).map_or(&[], Vec::as_slice)
    }

    /// Boolean target x predictor matrix; predictor columns are `seq` followed by
    /// the passthrough columns.
    pub fn pred_matrix(&self) -> (Vec<String>, Vec<Vec<bool>>) {
        let cols: Vec<String> = self.seq.iter().chain(&self.passthrough_predictors).cloned().collect();
        let m = self
            .seq
            .iter()
            .map(|t| {
                let p = self.predictors(t);
                cols.iter().map(|c| p.contains(c)).collect()
            })
            .collect();
        (cols, m)
    }

    /// Synthetic sample size for an original of `n` rows.
    pub fn synthetic_n(&self, n: usize) -> usize {
        (self.n_multiplier * n as f64).round() as usize
    }
}

/// Default method for a column kind.
pub fn default_method(kind: &Kind) -> &'static str {
    match kind {
        Kind::Continuous => "normrank",
        Kind::Binary => "logistic",
        Kind::Categorical { .. } => "polytomous",
        Kind::Ordered { .. } => "propodds",
    }
}

fn synthesizable(role: Role) -> bool {
    matches!(role, Role::Covariate | Role::EntryTime | Role::Dropout)
}

pub fn default_plan(data: &Dataset) -> SynthesisPlan {
    let seq: Vec<String> = data
        .schema()
        .iter()
        .filter(|c| synthesizable(c.role))
        .map(|c| c.name.clone())
        .collect();
    let pred = seq
        .iter()
        .enumerate()
        .map(|(i, t)| (t.clone(), seq[..i].to_vec()))
        .collect();
    let method = data
        .schema()
        .iter()
        .filter(|c| synthesizable(c.role))
        .map(|c| (c.name.clone(), default_method(&c.kind).to_string()))
        .collect();
    SynthesisPlan {
        seq,
        pred,
        method,
        method_params: BTreeMap::new(),
        passthrough_predictors: Vec::new(),
        n_multiplier: 2.0,
        seed: 0,
    }
}

#[derive(Clone)]
struct MethodEntry {
    fit: Arc<MethodFn>,
    /// `None` accepts every kind.
    accepts: Option<fn(&Kind) -> bool>,
}

/// Resolves method names used in plans.
#[derive(Clone)]
pub struct MethodRegistry {
    methods: HashMap<String, MethodEntry>,
}

impl fmt::Debug for MethodRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut names: Vec<_> = self.methods.keys().collect();
        names.sort();
        f.debug_struct("MethodRegistry").field("methods", &names).finish()
    }
}

impl Default for MethodRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

pub const BUILTIN_METHODS: [&str; 10] = [
    "logistic",
    "polytomous",
    "propodds",
    "normrank",
    "pmm",
    "linear",
    "linear_prior",
    "lasso_linear",
    "lasso_logistic",
    "lda",
];

impl MethodRegistry {
    pub fn with_builtins() -> Self {
        let mut methods = HashMap::new();
        let mut add = |name: &str, f: fn(&MethodInput) -> Result<Box<dyn ConditionalModel>>, accepts: fn(&Kind) -> bool| {
            methods.insert(
                name.to_string(),
                MethodEntry {
                    fit: Arc::new(f),
                    accepts: Some(accepts),
                },
            );
        };
        add("logistic", methods::fit_logistic, two_class);
        add("lasso_logistic", methods::fit_lasso_logistic, two_class);
        add("polytomous", methods::fit_polytomous, Kind::is_discrete);
        add("lda", methods::fit_lda, Kind::is_discrete);
        add("propodds", methods::fit_propodds, |k| {
            matches!(k, Kind::Ordered { .. } | Kind::Binary)
        });
        add("normrank", methods::fit_normrank, continuous);
        add("linear", methods::fit_linear, continuous);
        add("linear_prior", methods::fit_linear_prior, continuous);
        add("lasso_linear", methods::fit_lasso_linear, continuous);
        add("pmm", methods::fit_pmm, |k| !matches!(k, Kind::Categorical { .. }));
        Self { methods }
    }

    /// Makes `name` usable in plans. Custom methods accept any column kind.
    pub fn register_custom_method<F>(&mut self, name: impl Into<String>, fit: F) -> Result<()>
    where
        F: Fn(&MethodInput) -> Result<Box<dyn ConditionalModel>> + Send + Sync + 'static,
    {
        let name = name.into();
        if self.methods.contains_key(&name) {
            return Err(Error::Plan(format!("method `{name}` is already registered")));
        }
        self.methods.insert(
            name,
            MethodEntry {
                fit: Arc::new(fit),
                accepts: None,
            },
        );
        Ok(())
    }

    pub fn contains(&self, name: &str) -> bool {
        self.methods.contains_key(name)
    }

    fn is_builtin(&self, name: &str) -> bool {
        BUILTIN_METHODS.contains(&name) && self.methods[name].accepts.is_some()
    }
}

fn two_class(k: &Kind) -> bool {
    k.n_classes() == Some(2)
}

fn continuous(k: &Kind) -> bool {
    *k == Kind::Continuous
}

/// Checks a plan against a dataset schema and a method registry.
pub fn validate_plan(plan: &SynthesisPlan, schema: &[ColumnSpec], registry: &MethodRegistry) -> Result<()> {
    let spec_of = |name: &str| {
        schema
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| Error::Plan(format!("plan references unknown column `{name}`")))
    };
    if !(plan.n_multiplier > 0.0) || !plan.n_multiplier.is_finite() {
        return Err(Error::Plan(format!("n_multiplier must be positive, got {}", plan.n_multiplier)));
    }
    let mut position = HashMap::new();
    for (i, t) in plan.seq.iter().enumerate() {
        let spec = spec_of(t)?;
        if !synthesizable(spec.role) {
            return Err(Error::Plan(format!("column `{t}` with role {:?} cannot be synthesized", spec.role)));
        }
        if position.insert(t.as_str(), i).is_some() {
            return Err(Error::Plan(format!("column `{t}` appears twice in seq")));
        }
    }
    let mut passthrough = HashSet::new();
    for p in &plan.passthrough_predictors {
        let spec = spec_of(p)?;
        if !synthesizable(spec.role) {
            return Err(Error::Plan(format!("column `{p}` with role {:?} cannot be a predictor", spec.role)));
        }
        if position.contains_key(p.as_str()) {
            return Err(Error::Plan(format!("column `{p}` is both synthesized and passthrough")));
        }
        passthrough.insert(p.as_str());
    }
    for c in schema {
        if matches!(c.role, Role::EntryTime | Role::Dropout) && !position.contains_key(c.name.as_str()) {
            return Err(Error::Plan(format!("seq must contain the {:?} column `{}`", c.role, c.name)));
        }
    }
    for (t, preds) in &plan.pred {
        let &ti = position
            .get(t.as_str())
            .ok_or_else(|| Error::Plan(format!("pred lists target `{t}`, which is not in seq")))?;
        for p in preds {
            let earlier = position.get(p.as_str()).is_some_and(|&pi| pi < ti);
            if !earlier && !passthrough.contains(p.as_str()) {
                return Err(Error::Plan(format!(
                    "`{t}` cannot use `{p}` as predictor: only earlier columns in seq or passthrough columns are allowed"
                )));
            }
        }
    }
    for t in &plan.seq {
        let name = plan
            .method
            .get(t)
            .ok_or_else(|| Error::Plan(format!("no method given for `{t}`")))?;
        let entry = registry
            .methods
            .get(name)
            .ok_or_else(|| Error::Plan(format!("unknown method `{name}` for `{t}`")))?;
        let kind = &spec_of(t)?.kind;
        if let Some(accepts) = entry.accepts {
            if !accepts(kind) {
                return Err(Error::Plan(format!("method `{name}` does not support the kind of `{t}` ({kind:?})")));
            }
        }
    }
    for t in plan.method.keys().chain(plan.method_params.keys()) {
        if !position.contains_key(t.as_str()) {
            return Err(Error::Plan(format!("method given for `{t}`, which is not in seq")));
        }
    }
    Ok(())
}

struct FittedTarget {
    spec: ColumnSpec,
    method: String,
    predictors: Vec<String>,
    /// Indices of the design columns the model uses.
    keep: Vec<usize>,
    model: Box<dyn ConditionalModel>,
}

pub struct FittedSynthesizer {
    plan: SynthesisPlan,
    targets: Vec<FittedTarget>,
    /// Original values of the passthrough columns, resampled at generation.
    passthrough: Dataset,
    /// Output columns, in the order of the original schema.
    output_order: Vec<String>,
    warnings: Vec<String>,
}

impl fmt::Debug for FittedSynthesizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FittedSynthesizer")
            .field("plan", &self.plan)
            .field(
                "targets",
                &self.targets.iter().map(|t| (&t.spec.name, &t.method)).collect::<Vec<_>>(),
            )
            .field("warnings", &self.warnings)
            .finish()
    }
}

impl FittedSynthesizer {
    pub fn plan(&self) -> &SynthesisPlan {
        &self.plan
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Names of the design columns each target's model was fitted on.
    pub fn design_columns(&self, target: &str) -> Option<Vec<String>> {
        self.targets.iter().find(|t| t.spec.name == target).map(|t| t.predictors.clone())
    }
}

pub fn fit_synthesizer(data: &Dataset, plan: &SynthesisPlan) -> Result<FittedSynthesizer> {
    fit_synthesizer_with(data, plan, &MethodRegistry::with_builtins())
}

pub fn fit_synthesizer_with(data: &Dataset, plan: &SynthesisPlan, registry: &MethodRegistry) -> Result<FittedSynthesizer> {
    validate_plan(plan, data.schema(), registry)?;
    let default_params = MethodParams::default();
    let mut targets = Vec::with_capacity(plan.seq.len());
    let mut warnings = Vec::new();
    for t in &plan.seq {
        let spec = data.spec(t)?.clone();
        let method = plan.method[t].clone();
        let design = data.encode_design(plan.predictors(t))?;
        let keep: Vec<usize> = (0..design.n_cols()).filter(|&j| !design.legend[j].zero_variance).collect();
        let reduced = select_design(&design, &keep);
        let y = data.column(t)?;
        let input = MethodInput {
            target: t,
            spec: &spec,
            design: &reduced,
            y,
            params: plan.method_params.get(t).unwrap_or(&default_params),
        };
        let constant = y.first().is_some_and(|&v0| y.iter().all(|&v| v == v0));
        let model: Box<dyn ConditionalModel> = if constant && registry.is_builtin(&method) {
            warnings.push(format!("`{t}` is constant; its synthetic values repeat it"));
            Box::new(Constant(y[0]))
        } else {
            (registry.methods[&method].fit)(&input).map_err(|e| match e {
                Error::Singular(m) => Error::Singular(format!("`{t}` ({method}): {m}")),
                other => other,
            })?
        };
        for note in model.notes() {
            let w = format!("`{t}` ({method}): {note}");
            log::warn!("{w}");
            warnings.push(w);
        }
        targets.push(FittedTarget {
            spec,
            method,
            predictors: reduced.names(),
            keep,
            model,
        });
    }
    let pass_names: Vec<&str> = plan.passthrough_predictors.iter().map(String::as_str).collect();
    let passthrough = data.select(&pass_names)?;
    let output_order = data
        .schema()
        .iter()
        .filter(|c| plan.seq.contains(&c.name) || plan.passthrough_predictors.contains(&c.name))
        .map(|c| c.name.clone())
        .collect();
    Ok(FittedSynthesizer {
        plan: plan.clone(),
        targets,
        passthrough,
        output_order,
        warnings,
    })
}

fn select_design(design: &DesignMatrix, keep: &[usize]) -> DesignMatrix {
    DesignMatrix {
        matrix: design.matrix.select_columns(keep),
        legend: keep.iter().map(|&j| design.legend[j].clone()).collect(),
    }
}

/// Generates `n` synthetic rows from a single ChaCha8 stream seeded with `seed`.
///
/// Passthrough rows are drawn first (with replacement), then each `seq` column in
/// turn. The table a target's design is built from holds only the passthrough
/// columns and the columns generated before it.
pub fn generate(synth: &FittedSynthesizer, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::InvalidArgument("cannot generate 0 rows".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut partial = if synth.passthrough.schema().is_empty() {
        Dataset::empty()
    } else {
        let m = synth.passthrough.n_rows();
        let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..m)).collect();
        synth.passthrough.take_rows(&rows)
    };
    for t in &synth.targets {
        let values: Vec<f64> = if t.predictors.is_empty() {
            (0..n).map(|_| t.model.sample(&[], &mut rng)).collect()
        } else {
            let preds = synth.plan.predictors(&t.spec.name);
            let design = partial.encode_design(preds)?;
            let mut row = vec![0.0; t.keep.len()];
            (0..n)
                .map(|i| {
                    for (slot, &j) in row.iter_mut().zip(&t.keep) {
                        *slot = design.matrix[(i, j)];
                    }
                    t.model.sample(&row, &mut rng)
                })
                .collect()
        };
        let values = values.into_iter().map(|v| coerce(&t.spec.kind, v)).collect();
        partial.push_column(t.spec.clone(), values)?;
    }
    let names: Vec<&str> = synth.output_order.iter().map(String::as_str).collect();
    partial.select(&names)
}

/// Keeps method output inside the column's domain.
fn coerce(kind: &Kind, v: f64) -> f64 {
    match kind.n_classes() {
        Some(k) => v.round().clamp(0.0, (k - 1) as f64),
        None => v,
    }
}

/// Fits on `data` and generates `round(n_multiplier * n)` rows with `plan.seed`.
pub fn synthesize(data: &Dataset, plan: &SynthesisPlan) -> Result<Dataset> {
    let synth = fit_synthesizer(data, plan)?;
    generate(&synth, plan.synthetic_n(data.n_rows()), plan.seed)
}
