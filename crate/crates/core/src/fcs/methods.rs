//! Built-in conditional methods.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use statrs::distribution::{ContinuousCDF, Normal};

use super::lasso::{lasso_linear_fit, lasso_logistic_fit, LassoFit};
use super::{ConditionalModel, MethodInput};
use crate::error::{Error, Result};
use crate::glm::{self, sigmoid, with_intercept, LdaFit, MultinomialFit, PropOddsFit};

pub const PMM_DONORS: usize = 5;
/// Strata smaller than this fall back to the marginal pool.
const MIN_STRATUM: usize = 5;
/// Predictor columns with more distinct values than this are cut at quintiles.
const MAX_EXACT_LEVELS: usize = 10;

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

fn dot1(coef: &[f64], row: &[f64]) -> f64 {
    coef[0] + coef[1..].iter().zip(row).map(|(a, b)| a * b).sum::<f64>()
}

fn draw_class(probs: &[f64], rng: &mut dyn RngCore) -> f64 {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k as f64;
        }
    }
    // rounding left u above the last partial sum
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0) as f64
}

fn classes(y: &[f64]) -> Vec<usize> {
    y.iter().map(|&v| v as usize).collect()
}

fn n_classes(input: &MethodInput) -> usize {
    input.spec.kind.n_classes().unwrap_or(2)
}

/// Emits the same value for every row.
#[derive(Debug, Clone)]
pub struct Constant(pub f64);

impl ConditionalModel for Constant {
    fn sample(&self, _row: &[f64], _rng: &mut dyn RngCore) -> f64 {
        self.0
    }
}

/// Resamples observed target values from rows whose predictors fall in the same
/// stratum; strata come from exact values of low-cardinality columns and
/// quintiles of the others.
#[derive(Debug, Clone)]
pub struct EmpiricalConditional {
    cuts: Vec<Vec<f64>>,
    strata: BTreeMap<Vec<u32>, Vec<f64>>,
    marginal: Vec<f64>,
    reason: String,
}

impl EmpiricalConditional {
    pub fn fit(x: &DMatrix<f64>, y: &[f64], reason: impl Into<String>) -> Self {
        let cuts: Vec<Vec<f64>> = x
            .column_iter()
            .map(|c| {
                let mut v: Vec<f64> = c.iter().copied().collect();
                v.sort_by(f64::total_cmp);
                let mut distinct = v.clone();
                distinct.dedup();
                if distinct.len() <= MAX_EXACT_LEVELS {
                    distinct.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
                } else {
                    let mut q: Vec<f64> = [0.2, 0.4, 0.6, 0.8]
                        .iter()
                        .map(|&p| crate::spline::quantile_sorted(&v, p))
                        .collect();
                    q.dedup();
                    q
                }
            })
            .collect();
        let mut strata: BTreeMap<Vec<u32>, Vec<f64>> = BTreeMap::new();
        for (i, &yi) in y.iter().enumerate() {
            let row: Vec<f64> = x.row(i).iter().copied().collect();
            strata.entry(key(&cuts, &row)).or_default().push(yi);
        }
        strata.retain(|_, v| v.len() >= MIN_STRATUM);
        Self {
            cuts,
            strata,
            marginal: y.to_vec(),
            reason: reason.into(),
        }
    }
}

fn key(cuts: &[Vec<f64>], row: &[f64]) -> Vec<u32> {
    cuts.iter()
        .zip(row)
        .map(|(c, &v)| c.iter().filter(|&&b| b < v).count() as u32)
        .collect()
}

impl ConditionalModel for EmpiricalConditional {
    fn sample(&self, row: &[f64], rng: &mut dyn RngCore) -> f64 {
        let pool = self.strata.get(&key(&self.cuts, row)).unwrap_or(&self.marginal);
        pool[rng.random_range(0..pool.len())]
    }

    fn notes(&self) -> Vec<String> {
        vec![format!(
            "{}; sampling observed values within predictor strata instead",
            self.reason
        )]
    }
}

struct Bernoulli {
    coef: Vec<f64>,
}

impl ConditionalModel for Bernoulli {
    fn sample(&self, row: &[f64], rng: &mut dyn RngCore) -> f64 {
        let p = sigmoid(dot1(&self.coef, row));
        if rng.random::<f64>() < p {
            1.0
        } else {
            0.0
        }
    }
}

pub(super) fn fit_logistic(input: &MethodInput) -> Result<Box<dyn ConditionalModel>> {
    let x = &input.design.matrix;
    let fit = glm::logistic(&with_intercept(x), input.y)?;
    if fit.separated || !fit.converged {
        return Ok(Box::new(EmpiricalConditional::fit(x, input.y, "logistic fit separated or did not converge")));
    }
    Ok(Box::new(Bernoulli {
        coef: fit.coef.iter().copied().collect(),
    }))
}

struct LassoBernoulli(LassoFit);

impl ConditionalModel for LassoBernoulli {
    fn sample(&self, row: &[f64], rng: &mut dyn RngCore) -> f64 {
        let p = sigmoid(self.0.linear_predictor(row));
        if rng.random::<f64>() < p {
            1.0
        } else {
            0.0
        }
    }
}

pub(super) fn fit_lasso_logistic(input: &MethodInput) -> Result<Box<dyn ConditionalModel>> {
    let fit = lasso_logistic_fit(&input.design.matrix, input.y, input.params.lambda)?;
    Ok(Box::new(LassoBernoulli(fit)))
}

enum Classifier {
    Multinomial(MultinomialFit),
    PropOdds(PropOddsFit),
    Lda(LdaFit),
}

impl ConditionalModel for Classifier {
    fn sample(&self, row: &[f64], rng: &mut dyn RngCore) -> f64 {
        let probs = match self {
            Classifier::Multinomial(f) => {
                let mut r = Vec::with_capacity(row.len() + 1);
                r.push(1.0);
                r.extend_from_slice(row);
                f.probabilities(&r)
            }
            Classifier::PropOdds(f) => f.probabilities(row),
            Classifier::Lda(f) => f.probabilities(row),
        };
        draw_class(&probs, rng)
    }
}

pub(super) fn fit_polytomous(input: &MethodInput) -> Result<Box<dyn ConditionalModel>> {
    let x = &input.design.matrix;
    let fit = glm::multinomial(&with_intercept(x), &classes(input.y), n_classes(input))?;
    if fit.separated || !fit.converged {
        return Ok(Box::new(EmpiricalConditional::fit(x, input.y, "polytomous fit separated or did not converge")));
    }
    Ok(Box::new(Classifier::Multinomial(fit)))
}

pub(super) fn fit_propodds(input: &MethodInput) -> Result<Box<dyn ConditionalModel>> {
    let x = &input.design.matrix;
    let fit = glm::propodds(x, &classes(input.y), n_classes(input))?;
    if fit.separated || !fit.converged {
        return Ok(Box::new(EmpiricalConditional::fit(
            x,
            input.y,
            "proportional odds fit separated or did not converge",
        )));
    }
    Ok(Box::new(Classifier::PropOdds(fit)))
}

pub(super) fn fit_lda(input: &MethodInput) -> Result<Box<dyn ConditionalModel>> {
    let fit = glm::lda(&input.design.matrix, &classes(input.y), n_classes(input))?;
    Ok(Box::new(Classifier::Lda(fit)))
}

/// `Phi^-1(rank / (n + 1))` with average ranks for ties.
pub fn normal_rank_scores(y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| y[a].total_cmp(&y[b]));
    let mut rank = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && y[order[j + 1]] == y[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            rank[k] = r;
        }
        i = j + 1;
    }
    let normal = std_normal();
    rank.iter().map(|&r| normal.inverse_cdf(r / (n as f64 + 1.0))).collect()
}

struct NormRank {
    coef: Vec<f64>,
    sigma: f64,
    sorted: Vec<f64>,
    normal: Normal,
}

impl ConditionalModel for NormRank {
    fn sample(&self, row: &[f64], rng: &mut dyn RngCore) -> f64 {
        let e: f64 = rng.sample(StandardNormal);
        let z = dot1(&self.coef, row) + self.sigma * e;
        let u = self.normal.cdf(z);
        let n = self.sorted.len();
        let pos = (u * (n as f64 + 1.0) - 1.0).clamp(0.0, (n - 1) as f64);
        let lo = pos.floor() as usize;
        let hi = (lo + 1).min(n - 1);
        let f = pos - lo as f64;
        self.sorted[lo] + f * (self.sorted[hi] - self.sorted[lo])
    }
}

pub(super) fn fit_normrank(input: &MethodInput) -> Result<Box<dyn ConditionalModel>> {
    let n = input.y.len();
    if n < 3 {
        return Err(Error::InvalidArgument(format!(
            "normrank needs at least 3 observations of `{}`, got {n}",
            input.target
        )));
    }
    let z = normal_rank_scores(input.y);
    let fit = glm::ols(&with_intercept(&input.design.matrix), &z)?;
    let mut sorted = input.y.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(Box::new(NormRank {
        coef: fit.coef.iter().copied().collect(),
        sigma: fit.sigma2_ml().sqrt(),
        sorted,
        normal: std_normal(),
    }))
}

struct Gaussian {
    coef: Vec<f64>,
    sigma: f64,
}

impl ConditionalModel for Gaussian {
    fn sample(&self, row: &[f64], rng: &mut dyn RngCore) -> f64 {
        let e: f64 = rng.sample(StandardNormal);
        dot1(&self.coef, row) + self.sigma * e
    }
}

pub(super) fn fit_linear(input: &MethodInput) -> Result<Box<dyn ConditionalModel>> {
    let fit = glm::ols(&with_intercept(&input.design.matrix), input.y)?;
    Ok(Box::new(Gaussian {
        coef: fit.coef.iter().copied().collect(),
        sigma: fit.sigma2_ml().sqrt(),
    }))
}

fn broadcast(v: Option<&Vec<f64>>, default: f64, p: usize, what: &str) -> Result<Vec<f64>> {
    match v {
        None => Ok(vec![default; p]),
        Some(v) if v.len() == 1 => Ok(vec![v[0]; p]),
        Some(v) if v.len() == p => Ok(v.clone()),
        Some(v) => Err(Error::InvalidArgument(format!(
            "{what} has {} entries, expected 1 or {p} (intercept first)",
            v.len()
        ))),
    }
}

pub(super) fn fit_linear_prior(input: &MethodInput) -> Result<Box<dyn ConditionalModel>> {
    let x = with_intercept(&input.design.matrix);
    let p = x.ncols();
    let mean = broadcast(input.params.prior_mean.as_ref(), 0.0, p, "prior_mean")?;
    let prec = broadcast(input.params.prior_precision.as_ref(), 1.0, p, "prior_precision")?;
    if prec.iter().any(|&v| !(v >= 0.0)) {
        return Err(Error::InvalidArgument("prior_precision must be non-negative".into()));
    }
    let fit = glm::ridge(&x, input.y, &mean, &prec)?;
    Ok(Box::new(Gaussian {
        coef: fit.coef.iter().copied().collect(),
        sigma: fit.sigma2_ml().sqrt(),
    }))
}

pub(super) fn fit_lasso_linear(input: &MethodInput) -> Result<Box<dyn ConditionalModel>> {
    let x = &input.design.matrix;
    let fit = lasso_linear_fit(x, input.y, input.params.lambda)?;
    let rss: f64 = (0..x.nrows())
        .map(|i| {
            let row: Vec<f64> = x.row(i).iter().copied().collect();
            (input.y[i] - fit.linear_predictor(&row)).powi(2)
        })
        .sum();
    let mut coef = vec![fit.intercept];
    coef.extend_from_slice(&fit.coef);
    Ok(Box::new(Gaussian {
        coef,
        sigma: (rss / x.nrows() as f64).sqrt(),
    }))
}

struct Pmm {
    coef: Vec<f64>,
    /// (predicted, observed) for the original rows, sorted by prediction.
    donors: Vec<(f64, f64)>,
    k: usize,
}

impl ConditionalModel for Pmm {
    fn sample(&self, row: &[f64], rng: &mut dyn RngCore) -> f64 {
        let target = dot1(&self.coef, row);
        let d = &self.donors;
        let pos = d.partition_point(|&(f, _)| f < target);
        let (mut lo, mut hi) = (pos, pos);
        let mut chosen = Vec::with_capacity(self.k);
        while chosen.len() < self.k {
            let left = (lo > 0).then(|| target - d[lo - 1].0);
            let right = (hi < d.len()).then(|| d[hi].0 - target);
            let take_left = match (left, right) {
                (Some(l), Some(r)) if l == r => rng.random::<bool>(),
                (Some(l), Some(r)) => l < r,
                (Some(_), None) => true,
                (None, Some(_)) => false,
                (None, None) => break,
            };
            if take_left {
                lo -= 1;
                chosen.push(d[lo].1);
            } else {
                chosen.push(d[hi].1);
                hi += 1;
            }
        }
        chosen[rng.random_range(0..chosen.len())]
    }
}

pub(super) fn fit_pmm(input: &MethodInput) -> Result<Box<dyn ConditionalModel>> {
    let k = input.params.donors.unwrap_or(PMM_DONORS);
    let n = input.y.len();
    if k == 0 || n < k {
        return Err(Error::InvalidArgument(format!(
            "pmm needs at least {k} observed donors for `{}`, got {n}",
            input.target
        )));
    }
    let fit = glm::ols(&with_intercept(&input.design.matrix), input.y)?;
    let mut donors: Vec<(f64, f64)> = fit.fitted.iter().copied().zip(input.y.iter().copied()).collect();
    donors.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(Box::new(Pmm {
        coef: fit.coef.iter().copied().collect(),
        donors,
        k,
    }))
}
