//! Proportional-hazards model with a natural-spline log cumulative baseline hazard:
//!
//! ```text
//! log H(t; z) = s(log t; gamma) + beta' z
//! ```
//!
//! Per-observation log-likelihood (the data constant `-delta log t` omitted):
//!
//! ```text
//! l_i = delta_i [ log s'(log t_i) + eta_i ] - exp(eta_i),   eta_i = s(log t_i) + beta' z_i
//! ```
//!
//! which is concave in `(gamma, beta)`.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glm;
use crate::optim::{self, BfgsOptions};
use crate::spline::{place_knots, KnotSet, SplineCoefficients};
use crate::tabular::Dataset;
use crate::utility::km_estimate;

/// Grid size for the post-fit monotonicity check of `s'`.
pub const MONOTONE_GRID: usize = 512;

/// Clamp applied to Kaplan-Meier survival before `log(-log S)` in the starting values.
const KM_CLAMP: f64 = 1e-6;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitInfo {
    pub log_likelihood: f64,
    pub converged: bool,
    pub n_events: usize,
    pub n_obs: usize,
    pub iterations: usize,
    /// `max_i |g_i| max(|theta_i|, 1) / max(|loglik|, 1)` from a central-difference gradient.
    pub relative_gradient: f64,
    pub initial_log_likelihood: f64,
    /// `s' > 0` on the monotonicity grid over `[k_min, k_max]`.
    pub monotone: bool,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoystonParmarModel {
    pub knots: KnotSet<f64>,
    pub gamma: SplineCoefficients<f64>,
    pub beta: Vec<f64>,
    /// Source columns, in encoding order.
    pub predictors: Vec<String>,
    pub design_legend: Vec<String>,
    pub fit_info: FitInfo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurvivalPrediction {
    pub time: f64,
    pub survival: f64,
    pub cumulative_hazard: f64,
    pub hazard: f64,
}

/// Degrees of freedom for the default knot placement, or explicit knots.
#[derive(Debug, Clone, PartialEq)]
pub enum KnotChoice {
    Df(usize),
    Knots(KnotSet<f64>),
}

impl From<usize> for KnotChoice {
    fn from(df: usize) -> Self {
        KnotChoice::Df(df)
    }
}

impl From<KnotSet<f64>> for KnotChoice {
    fn from(k: KnotSet<f64>) -> Self {
        KnotChoice::Knots(k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            tol: 1e-5,
        }
    }
}

/// Precomputed per-row quantities for likelihood evaluation.
struct Prepared {
    /// `[basis(log t_i), z_i]`, n x (m + 2 + p).
    u: DMatrix<f64>,
    /// `[basis_deriv(log t_i), 0]`, only the spline block is stored: n x (m + 2).
    v: DMatrix<f64>,
    delta: Vec<f64>,
    n_spline: usize,
}

impl Prepared {
    fn new(knots: &KnotSet<f64>, times: &[f64], events: &[f64], z: &DMatrix<f64>) -> Self {
        let n = times.len();
        let k = knots.n_basis();
        let p = z.ncols();
        let mut u = DMatrix::zeros(n, k + p);
        let mut v = DMatrix::zeros(n, k);
        let mut b = vec![0.0; k];
        let mut db = vec![0.0; k];
        for i in 0..n {
            let x = times[i].ln();
            knots.basis_into(x, &mut b);
            knots.basis_deriv_into(x, &mut db);
            for j in 0..k {
                u[(i, j)] = b[j];
                v[(i, j)] = db[j];
            }
            for j in 0..p {
                u[(i, k + j)] = z[(i, j)];
            }
        }
        Self {
            u,
            v,
            delta: events.to_vec(),
            n_spline: k,
        }
    }

    fn n_params(&self) -> usize {
        self.u.ncols()
    }

    /// Log-likelihood, `-inf` when `s' <= 0` at an event. Optionally fills the
    /// gradient and the (negative definite) Hessian.
    fn eval(&self, theta: &[f64], mut grad: Option<&mut [f64]>, mut hess: Option<&mut DMatrix<f64>>) -> f64 {
        let q = self.n_params();
        let k = self.n_spline;
        if let Some(g) = grad.as_deref_mut() {
            g.iter_mut().for_each(|v| *v = 0.0);
        }
        if let Some(h) = hess.as_deref_mut() {
            h.fill(0.0);
        }
        let mut ll = 0.0;
        for i in 0..self.u.nrows() {
            let ui = self.u.row(i);
            let eta: f64 = (0..q).map(|j| ui[j] * theta[j]).sum();
            let h_cum = eta.exp();
            ll -= h_cum;
            let d = self.delta[i];
            let mut ds = 0.0;
            if d != 0.0 {
                let vi = self.v.row(i);
                ds = (0..k).map(|j| vi[j] * theta[j]).sum();
                if !(ds > 0.0) {
                    return f64::NEG_INFINITY;
                }
                ll += d * (ds.ln() + eta);
            }
            if let Some(g) = grad.as_deref_mut() {
                let w = d - h_cum;
                for j in 0..q {
                    g[j] += w * ui[j];
                }
                if d != 0.0 {
                    let vi = self.v.row(i);
                    for j in 0..k {
                        g[j] += d * vi[j] / ds;
                    }
                }
            }
            if let Some(h) = hess.as_deref_mut() {
                for a in 0..q {
                    for b in a..q {
                        h[(a, b)] -= h_cum * ui[a] * ui[b];
                    }
                }
                if d != 0.0 {
                    let vi = self.v.row(i);
                    let w = d / (ds * ds);
                    for a in 0..k {
                        for b in a..k {
                            h[(a, b)] -= w * vi[a] * vi[b];
                        }
                    }
                }
            }
        }
        if let Some(h) = hess {
            for a in 0..q {
                for b in 0..a {
                    h[(a, b)] = h[(b, a)];
                }
            }
        }
        ll
    }
}

fn event_count(events: &[f64]) -> usize {
    events.iter().filter(|&&d| d == 1.0).count()
}

fn encode(data: &Dataset, predictors: &[String]) -> Result<(DMatrix<f64>, Vec<String>)> {
    let d = data.encode_design(predictors)?;
    let names = d.names();
    Ok((d.matrix, names))
}

impl RoystonParmarModel {
    pub fn n_params(&self) -> usize {
        self.gamma.0.len() + self.beta.len()
    }

    fn theta(&self) -> Vec<f64> {
        self.gamma.0.iter().chain(&self.beta).copied().collect()
    }

    /// `s(log t; gamma)`.
    pub fn spline_at(&self, log_t: f64) -> f64 {
        self.gamma.value(log_t, &self.knots).expect("gamma matches knots")
    }

    /// `s'(log t; gamma)`.
    pub fn spline_deriv_at(&self, log_t: f64) -> f64 {
        self.gamma.deriv(log_t, &self.knots).expect("gamma matches knots")
    }

    /// `beta' z` for an encoded design row.
    pub fn linear_predictor(&self, z: &[f64]) -> Result<f64> {
        if z.len() != self.beta.len() {
            return Err(Error::LengthMismatch {
                expected: self.beta.len(),
                got: z.len(),
            });
        }
        Ok(z.iter().zip(&self.beta).map(|(a, b)| a * b).sum())
    }

    /// Encodes `data` with the model's predictors, checks the legend and returns
    /// `beta' z_i` for every row.
    pub fn linear_predictors(&self, data: &Dataset) -> Result<Vec<f64>> {
        let (z, names) = encode(data, &self.predictors)?;
        self.check_legend(&names)?;
        Ok((0..z.nrows())
            .map(|i| z.row(i).iter().zip(&self.beta).map(|(a, b)| a * b).sum())
            .collect())
    }

    fn check_legend(&self, names: &[String]) -> Result<()> {
        if names != self.design_legend.as_slice() {
            return Err(Error::LegendMismatch {
                expected: self.design_legend.clone(),
                got: names.to_vec(),
            });
        }
        Ok(())
    }

    pub fn predict(&self, t: f64, z: &[f64]) -> Result<SurvivalPrediction> {
        if !(t > 0.0) {
            return Err(Error::InvalidArgument(format!("prediction time {t} is not positive")));
        }
        let lp = self.linear_predictor(z)?;
        Ok(self.predict_lp(t, lp))
    }

    /// Prediction for a precomputed linear predictor.
    pub fn predict_lp(&self, t: f64, lp: f64) -> SurvivalPrediction {
        let x = t.ln();
        let cumulative_hazard = (self.spline_at(x) + lp).exp();
        SurvivalPrediction {
            time: t,
            survival: (-cumulative_hazard).exp(),
            cumulative_hazard,
            hazard: cumulative_hazard * self.spline_deriv_at(x) / t,
        }
    }

    /// Checks `s' > 0` on an evenly spaced grid over the boundary knots.
    pub fn monotone_on_grid(&self) -> bool {
        let (a, b) = (self.knots.k_min, self.knots.k_max);
        (0..MONOTONE_GRID).all(|i| {
            let x = a + (b - a) * i as f64 / (MONOTONE_GRID - 1) as f64;
            self.spline_deriv_at(x) > 0.0
        })
    }

    /// Fails with [`Error::NonMonotone`] unless the model can be inverted.
    pub fn ensure_monotone(&self) -> Result<()> {
        if !self.fit_info.monotone || !self.monotone_on_grid() {
            return Err(Error::NonMonotone(
                "s'(log t) is not positive over the knot range; the cumulative hazard cannot be inverted".into(),
            ));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: Self = serde_json::from_str(text)?;
        if model.gamma.0.len() != model.knots.n_basis() {
            return Err(Error::LengthMismatch {
                expected: model.knots.n_basis(),
                got: model.gamma.0.len(),
            });
        }
        if model.beta.len() != model.design_legend.len() {
            return Err(Error::LengthMismatch {
                expected: model.design_legend.len(),
                got: model.beta.len(),
            });
        }
        KnotSet::new(model.knots.k_min, model.knots.k_max, model.knots.internal.clone())?;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Sum of per-observation log-likelihood contributions.
pub fn log_likelihood(model: &RoystonParmarModel, data: &Dataset) -> Result<f64> {
    let (t, d) = data.survival()?;
    let (z, names) = encode(data, &model.predictors)?;
    model.check_legend(&names)?;
    let prep = Prepared::new(&model.knots, t, d, &z);
    let ll = prep.eval(&model.theta(), None, None);
    if ll == f64::NEG_INFINITY {
        return Err(Error::Numerical("s'(log t) <= 0 at an event time".into()));
    }
    Ok(ll)
}

/// Log-likelihood and analytic gradient at an arbitrary parameter vector
/// `(gamma, beta)`; exposed for gradient checks.
pub fn log_likelihood_with_gradient(
    data: &Dataset,
    knots: &KnotSet<f64>,
    predictors: &[String],
    theta: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let (t, d) = data.survival()?;
    let (z, _) = encode(data, predictors)?;
    let prep = Prepared::new(knots, t, d, &z);
    if theta.len() != prep.n_params() {
        return Err(Error::LengthMismatch {
            expected: prep.n_params(),
            got: theta.len(),
        });
    }
    let mut g = vec![0.0; theta.len()];
    let ll = prep.eval(theta, Some(&mut g), None);
    Ok((ll, g))
}

/// Starting values: least squares of `log(-log S_KM(t_i))` on the spline basis of
/// `log t_i` and the covariates, over event rows.
pub fn initial_values(data: &Dataset, knots: &KnotSet<f64>, predictors: &[String]) -> Result<(Vec<f64>, Vec<f64>)> {
    let (t, d) = data.survival()?;
    let (z, _) = encode(data, predictors)?;
    initial_values_from(knots, t, d, &z)
}

fn initial_values_from(knots: &KnotSet<f64>, t: &[f64], d: &[f64], z: &DMatrix<f64>) -> Result<(Vec<f64>, Vec<f64>)> {
    let n_events = event_count(d);
    if n_events < 2 {
        return Err(Error::InsufficientEvents(format!("{n_events} events; at least 2 are required")));
    }
    let km = km_estimate(t, d)?;
    let k = knots.n_basis();
    let p = z.ncols();
    let rows: Vec<usize> = (0..t.len()).filter(|&i| d[i] == 1.0).collect();
    let mut x = DMatrix::zeros(rows.len(), k + p);
    let mut y = Vec::with_capacity(rows.len());
    let mut b = vec![0.0; k];
    for (r, &i) in rows.iter().enumerate() {
        knots.basis_into(t[i].ln(), &mut b);
        for j in 0..k {
            x[(r, j)] = b[j];
        }
        for j in 0..p {
            x[(r, k + j)] = z[(i, j)];
        }
        let s = km.survival_at(t[i]).clamp(KM_CLAMP, 1.0 - KM_CLAMP);
        y.push((-s.ln()).ln());
    }
    let fit = glm::ols(&x, &y)?;
    let coef: Vec<f64> = fit.coef.iter().copied().collect();
    Ok((coef[..k].to_vec(), coef[k..].to_vec()))
}

/// Maximum-likelihood fit.
pub fn fit(
    data: &Dataset,
    knots: impl Into<KnotChoice>,
    predictors: &[String],
    options: FitOptions,
) -> Result<RoystonParmarModel> {
    let (t, d) = data.survival()?;
    let (z, legend) = encode(data, predictors)?;
    let n_events = event_count(d);
    if n_events == 0 {
        return Err(Error::AllCensored);
    }
    if n_events < 2 {
        return Err(Error::InsufficientEvents(format!("{n_events} event; at least 2 are required")));
    }
    let knots = match knots.into() {
        KnotChoice::Df(df) => {
            let log_event: Vec<f64> = t.iter().zip(d).filter(|(_, &di)| di == 1.0).map(|(ti, _)| ti.ln()).collect();
            place_knots(&log_event, df)?
        }
        KnotChoice::Knots(k) => k,
    };
    if z.ncols() > 0 {
        glm::check_full_rank(&glm::with_intercept(&z), "survival model covariates")?;
    }
    let (g0, b0) = initial_values_from(&knots, t, d, &z)?;
    let prep = Prepared::new(&knots, t, d, &z);
    let nq = prep.n_params();
    let mut warnings = Vec::new();

    let mut theta0: Vec<f64> = g0.iter().chain(&b0).copied().collect();
    let mut ll0 = prep.eval(&theta0, None, None);
    if !ll0.is_finite() {
        // exponential start: s(x) = log(d / sum t) + x
        let total: f64 = t.iter().sum();
        theta0 = vec![0.0; nq];
        theta0[0] = (n_events as f64 / total).ln();
        theta0[1] = 1.0;
        ll0 = prep.eval(&theta0, None, None);
        warnings.push("least-squares start had s' <= 0 at an event; restarted from the exponential model".into());
        if !ll0.is_finite() {
            return Err(Error::Numerical("no feasible starting values".into()));
        }
    }

    let n = t.len() as f64;
    let mut hess = DMatrix::zeros(nq, nq);
    prep.eval(&theta0, None, Some(&mut hess));
    // objective is -ll/n, so its Hessian is -hess/n
    let inv_h = (-&hess / n).try_inverse().filter(|m| m.iter().all(|v| v.is_finite()));
    let res = optim::minimize_from(
        |th, g| {
            let ll = prep.eval(th, Some(g), None);
            g.iter_mut().for_each(|v| *v = -*v / n);
            -ll / n
        },
        &theta0,
        inv_h,
        BfgsOptions {
            max_iter: options.max_iter,
            gtol: 1e-10,
        },
    );
    let theta = res.x;
    let ll = prep.eval(&theta, None, None);
    let num_grad = optim::numerical_gradient(|th| prep.eval(th, None, None), &theta);
    let scale = ll.abs().max(1.0);
    let relative_gradient = num_grad
        .iter()
        .zip(&theta)
        .map(|(g, th)| g.abs() * th.abs().max(1.0) / scale)
        .fold(0.0, f64::max);
    let converged = relative_gradient.is_finite() && relative_gradient < options.tol;

    let k = knots.n_basis();
    let mut model = RoystonParmarModel {
        gamma: SplineCoefficients(theta[..k].to_vec()),
        beta: theta[k..].to_vec(),
        knots,
        predictors: predictors.to_vec(),
        design_legend: legend,
        fit_info: FitInfo {
            log_likelihood: ll,
            converged,
            n_events,
            n_obs: t.len(),
            iterations: res.iterations,
            relative_gradient,
            initial_log_likelihood: ll0,
            monotone: true,
            warnings,
        },
    };
    model.fit_info.monotone = model.monotone_on_grid();
    if !model.fit_info.monotone {
        let w = "fitted spline is not monotone over the knot range; simulation will refuse this model";
        log::warn!("{w}");
        model.fit_info.warnings.push(w.into());
    }
    if !converged {
        return Err(Error::NonConvergence {
            iterations: res.iterations,
            best: Box::new(model),
        });
    }
    Ok(model)
}

/// Observed information `-d2 l / d theta2` at the model parameters.
pub fn observed_information(model: &RoystonParmarModel, data: &Dataset) -> Result<DMatrix<f64>> {
    let (t, d) = data.survival()?;
    let (z, names) = encode(data, &model.predictors)?;
    model.check_legend(&names)?;
    let prep = Prepared::new(&model.knots, t, d, &z);
    let q = prep.n_params();
    let mut h = DMatrix::zeros(q, q);
    prep.eval(&model.theta(), None, Some(&mut h));
    Ok(-h)
}

/// Coefficient standard errors from the inverse observed information.
pub fn standard_errors(model: &RoystonParmarModel, data: &Dataset) -> Result<Vec<f64>> {
    let info = observed_information(model, data)?;
    let inv = info
        .try_inverse()
        .ok_or_else(|| Error::Singular("observed information is singular".into()))?;
    Ok((0..inv.nrows()).map(|i| inv[(i, i)].max(0.0).sqrt()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::ColumnSpec;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn surv_data(times: Vec<f64>, events: Vec<f64>) -> Dataset {
        Dataset::new(
            vec![ColumnSpec::surv_time("t"), ColumnSpec::event("d")],
            vec![times, events],
        )
        .unwrap()
    }

    fn exp_model() -> RoystonParmarModel {
        RoystonParmarModel {
            knots: KnotSet::new(-1.0, 1.0, vec![]).unwrap(),
            gamma: SplineCoefficients(vec![0.0, 1.0]),
            beta: vec![],
            predictors: vec![],
            design_legend: vec![],
            fit_info: FitInfo {
                log_likelihood: 0.0,
                converged: true,
                n_events: 0,
                n_obs: 0,
                iterations: 0,
                relative_gradient: 0.0,
                initial_log_likelihood: 0.0,
                monotone: true,
                warnings: vec![],
            },
        }
    }

    #[test]
    fn single_event_at_one() {
        let ll = log_likelihood(&exp_model(), &surv_data(vec![1.0], vec![1.0])).unwrap();
        assert_eq!(ll, -1.0);
    }

    #[test]
    fn censored_row_contributes_minus_cumulative_hazard() {
        let ll = log_likelihood(&exp_model(), &surv_data(vec![2.5], vec![0.0])).unwrap();
        assert_relative_eq!(ll, -2.5, epsilon = 1e-14);
    }

    #[test]
    fn exponential_prediction() {
        let p = exp_model().predict(1.0, &[]).unwrap();
        assert_relative_eq!(p.cumulative_hazard, 1.0, epsilon = 1e-15);
        assert_relative_eq!(p.survival, (-1.0f64).exp(), epsilon = 1e-15);
        assert_relative_eq!(p.hazard, 1.0, epsilon = 1e-15);
        assert!(exp_model().predict(0.0, &[]).is_err());
    }

    #[test]
    fn linear_predictor_checks() {
        let mut m = exp_model();
        m.beta = vec![0.5];
        m.design_legend = vec!["x".into()];
        assert_eq!(m.linear_predictor(&[0.0]).unwrap(), 0.0);
        assert_eq!(m.linear_predictor(&[1.0]).unwrap(), 0.5);
        assert!(m.linear_predictor(&[1.0, 2.0]).is_err());
        m.predictors = vec!["y".into()];
        let data = Dataset::new(vec![ColumnSpec::binary("y")], vec![vec![1.0]]).unwrap();
        assert!(matches!(m.linear_predictors(&data), Err(Error::LegendMismatch { .. })));
    }

    #[test]
    fn all_censored_and_single_event() {
        let d = surv_data(vec![1.0, 2.0, 3.0], vec![0.0, 0.0, 0.0]);
        assert!(matches!(fit(&d, 1, &[], FitOptions::default()), Err(Error::AllCensored)));
        let d = surv_data(vec![1.0, 2.0, 3.0], vec![1.0, 0.0, 0.0]);
        assert!(matches!(fit(&d, 1, &[], FitOptions::default()), Err(Error::InsufficientEvents(_))));
        let k = KnotSet::new(0.0, 1.0, vec![]).unwrap();
        assert!(matches!(initial_values(&d, &k, &[]), Err(Error::InsufficientEvents(_))));
    }

    #[test]
    fn duplicated_covariate_is_singular() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 50;
        let x: Vec<f64> = (0..n).map(|i| (i % 2) as f64).collect();
        let t: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 0.1).collect();
        let data = Dataset::new(
            vec![
                ColumnSpec::surv_time("t"),
                ColumnSpec::event("d"),
                ColumnSpec::binary("a"),
                ColumnSpec::binary("b"),
            ],
            vec![t, vec![1.0; n], x.clone(), x],
        )
        .unwrap();
        let k = KnotSet::new(-2.0, 0.2, vec![]).unwrap();
        let preds = vec!["a".to_string(), "b".to_string()];
        assert!(matches!(initial_values(&data, &k, &preds), Err(Error::Singular(_))));
        assert!(matches!(fit(&data, 1, &preds, FitOptions::default()), Err(Error::Singular(_))));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 200;
        let z: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let t: Vec<f64> = (0..n).map(|_| -rng.random::<f64>().ln() + 0.01).collect();
        let d: Vec<f64> = (0..n).map(|_| if rng.random::<f64>() < 0.8 { 1.0 } else { 0.0 }).collect();
        let data = Dataset::new(
            vec![ColumnSpec::surv_time("t"), ColumnSpec::event("d"), ColumnSpec::continuous("z")],
            vec![t, d, z],
        )
        .unwrap();
        let knots = KnotSet::new(-4.0, 1.5, vec![-1.0, 0.0]).unwrap();
        let preds = vec!["z".to_string()];
        for _ in 0..10 {
            let theta = vec![
                rng.random_range(-0.5..0.5),
                rng.random_range(0.8..1.5),
                rng.random_range(-0.01..0.01),
                rng.random_range(-0.01..0.01),
                rng.random_range(-1.0..1.0),
            ];
            let (_, g) = log_likelihood_with_gradient(&data, &knots, &preds, &theta).unwrap();
            let fd = optim::numerical_gradient(
                |th| log_likelihood_with_gradient(&data, &knots, &preds, th).unwrap().0,
                &theta,
            );
            for (a, b) in g.iter().zip(&fd) {
                assert!((a - b).abs() <= 1e-5 * a.abs().max(1.0), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn json_round_trip_is_exact() {
        let mut m = exp_model();
        m.gamma = SplineCoefficients(vec![0.1 + 0.2, std::f64::consts::PI / 7.0]);
        let back = RoystonParmarModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
    }
}
