//! Survival times by inverting the fitted model, and observed time/status from
//! death, dropout and administrative censoring.
//!
//! Row `i` draws from `ChaCha8Rng::seed_from_u64(seed)` switched to stream `i`, so
//! results do not depend on the order in which rows are processed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::survival_model::RoystonParmarModel;
use crate::tabular::{ColumnSpec, Dataset, Kind, Role};

/// Half-width added beyond the boundary knots for the bisection bracket (log-time).
pub const BRACKET_MARGIN: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StudyWindow {
    /// Administrative follow-up limit, measured from each individual's entry.
    pub study_span: f64,
}

impl StudyWindow {
    pub fn new(study_span: f64) -> Result<Self> {
        if !(study_span > 0.0) || !study_span.is_finite() {
            return Err(Error::InvalidArgument(format!("study_span must be positive, got {study_span}")));
        }
        Ok(Self { study_span })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Dead,
    Censored,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cause {
    Event,
    AdminCensor,
    Dropout,
}

impl Cause {
    pub const LABELS: [&'static str; 3] = ["event", "admin_censor", "dropout"];

    fn index(self) -> usize {
        match self {
            Cause::Event => 0,
            Cause::AdminCensor => 1,
            Cause::Dropout => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticOutcome {
    pub observed_time: f64,
    pub status: Status,
    pub cause: Cause,
}

/// Target of the scalar equation `s(x) = log(-log u) - lp`.
fn spline_target(lp: f64, u: f64) -> f64 {
    (-u.ln()).ln() - lp
}

/// Closed-form inverse for a model without internal knots.
pub fn survival_time_closed_form(model: &RoystonParmarModel, lp: f64, u: f64) -> Result<f64> {
    if model.knots.n_internal() != 0 {
        return Err(Error::InvalidArgument("closed-form inversion needs a model without internal knots".into()));
    }
    let g = &model.gamma.0;
    if !(g[1] > 0.0) {
        return Err(Error::NonMonotone(format!("log-time slope {} is not positive", g[1])));
    }
    check_u(u)?;
    Ok(((spline_target(lp, u) - g[0]) / g[1]).exp())
}

/// Solves `S(t | lp) = u` by bisection on the log-time scale.
pub fn survival_time_bisection(model: &RoystonParmarModel, lp: f64, u: f64) -> Result<f64> {
    check_u(u)?;
    let target = spline_target(lp, u);
    let f = |x: f64| model.spline_at(x) - target;
    let mut lo = model.knots.k_min - BRACKET_MARGIN;
    let mut hi = model.knots.k_max + BRACKET_MARGIN;
    let (f_lo, f_hi) = (f(lo), f(hi));
    if !(f_lo < 0.0 && f_hi > 0.0) {
        if f_lo == 0.0 {
            return Ok(lo.exp());
        }
        if f_hi == 0.0 {
            return Ok(hi.exp());
        }
        return Err(Error::Numerical(format!(
            "no sign change of s(x) - target on [{lo}, {hi}] (target {target})"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid.exp());
        }
        if fm < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let x = 0.5 * (lo + hi);
    let resid = f(x).abs();
    if resid >= 1e-10 * target.abs().max(1.0) {
        return Err(Error::Numerical(format!("bisection residual {resid:e} too large")));
    }
    Ok(x.exp())
}

fn check_u(u: f64) -> Result<()> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::InvalidArgument(format!("uniform draw {u} outside (0, 1)")));
    }
    Ok(())
}

/// Time `t` with `S(t | lp) = u`; closed form when the spline is linear.
pub fn survival_time_for_u(model: &RoystonParmarModel, lp: f64, u: f64) -> Result<f64> {
    if model.knots.n_internal() == 0 {
        survival_time_closed_form(model, lp, u)
    } else {
        survival_time_bisection(model, lp, u)
    }
}

/// Draws a survival time for linear predictor `lp`.
pub fn draw_survival_time<R: Rng + ?Sized>(model: &RoystonParmarModel, lp: f64, rng: &mut R) -> Result<f64> {
    let u = loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            break u;
        }
    };
    survival_time_for_u(model, lp, u)
}

/// Combines a death time with entry, dropout and the study window.
pub fn assemble_outcome(t_death: f64, entry: f64, dropout: bool, window: StudyWindow) -> Result<SyntheticOutcome> {
    let limit = window.study_span - entry;
    if !(limit > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "entry time {entry} is not before the end of the study span {}",
            window.study_span
        )));
    }
    Ok(if dropout {
        SyntheticOutcome {
            observed_time: t_death.min(limit),
            status: Status::Censored,
            cause: Cause::Dropout,
        }
    } else if t_death > limit {
        SyntheticOutcome {
            observed_time: limit,
            status: Status::Censored,
            cause: Cause::AdminCensor,
        }
    } else {
        SyntheticOutcome {
            observed_time: t_death,
            status: Status::Dead,
            cause: Cause::Event,
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationColumns {
    pub time: String,
    pub status: String,
    /// Name of the optional diagnostic cause column.
    pub cause: Option<String>,
}

impl Default for SimulationColumns {
    fn default() -> Self {
        Self {
            time: "time".into(),
            status: "status".into(),
            cause: None,
        }
    }
}

/// Adds observed time, status (1 = dead) and optionally cause to a synthetic
/// covariate table.
pub fn simulate_cohort(
    model: &RoystonParmarModel,
    covariates: &Dataset,
    window: StudyWindow,
    seed: u64,
    columns: &SimulationColumns,
) -> Result<(Dataset, Vec<SyntheticOutcome>)> {
    model.ensure_monotone()?;
    StudyWindow::new(window.study_span)?;
    let lps = model.linear_predictors(covariates)?;
    let entry = covariates.column_with_role(Role::EntryTime).map(|(_, v)| v);
    let dropout = covariates.column_with_role(Role::Dropout).map(|(_, v)| v);
    if let Some(e) = entry {
        if let Some((row, v)) = e.iter().enumerate().find(|(_, &v)| v >= window.study_span) {
            return Err(Error::InvalidValue {
                row,
                column: "entry_time".into(),
                reason: format!("entry time {v} is not before the study span {}", window.study_span),
            });
        }
    }
    let base = ChaCha8Rng::seed_from_u64(seed);
    let mut outcomes = Vec::with_capacity(lps.len());
    for (i, &lp) in lps.iter().enumerate() {
        let mut rng = base.clone();
        rng.set_stream(i as u64);
        let t = draw_survival_time(model, lp, &mut rng)?;
        let e = entry.map_or(0.0, |v| v[i]);
        let dr = dropout.is_some_and(|v| v[i] == 1.0);
        outcomes.push(assemble_outcome(t, e, dr, window)?);
    }
    let mut out = covariates.clone();
    out.push_column(
        ColumnSpec::surv_time(columns.time.clone()),
        outcomes.iter().map(|o| o.observed_time).collect(),
    )?;
    out.push_column(
        ColumnSpec::event(columns.status.clone()),
        outcomes
            .iter()
            .map(|o| if o.status == Status::Dead { 1.0 } else { 0.0 })
            .collect(),
    )?;
    if let Some(name) = &columns.cause {
        out.push_column(
            ColumnSpec::new(
                name.clone(),
                Role::Ignore,
                Kind::Categorical {
                    levels: Cause::LABELS.iter().map(|s| s.to_string()).collect(),
                },
            ),
            outcomes.iter().map(|o| o.cause.index() as f64).collect(),
        )?;
    }
    Ok((out, outcomes))
}
