//! Regression fitters shared by the conditional synthesis methods and the
//! propensity model.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::optim::{self, BfgsOptions};

/// Prepends a column of ones.
pub fn with_intercept(x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::from_element(x.nrows(), x.ncols() + 1, 1.0);
    out.columns_mut(1, x.ncols()).copy_from(x);
    out
}

pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Fails with [`Error::Singular`] when `x` does not have full column rank.
pub fn check_full_rank(x: &DMatrix<f64>, what: &str) -> Result<()> {
    if x.ncols() == 0 {
        return Ok(());
    }
    if x.nrows() < x.ncols() {
        return Err(Error::Singular(format!(
            "{what}: {} rows for {} columns",
            x.nrows(),
            x.ncols()
        )));
    }
    // scale columns so the rank test does not depend on units
    let mut xs = x.clone();
    for mut c in xs.column_iter_mut() {
        let norm = c.norm();
        if norm > 0.0 {
            c /= norm;
        }
    }
    let sv = xs.singular_values();
    let max = sv.max();
    let min = sv.min();
    if !(max > 0.0) || min / max < 1e-10 {
        return Err(Error::Singular(format!(
            "{what}: design matrix is rank deficient (condition {:.3e})",
            if min > 0.0 { max / min } else { f64::INFINITY }
        )));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct OlsFit {
    pub coef: DVector<f64>,
    pub rss: f64,
    pub fitted: DVector<f64>,
}

impl OlsFit {
    /// Residual variance with divisor `n` (maximum likelihood).
    pub fn sigma2_ml(&self) -> f64 {
        self.rss / self.fitted.len() as f64
    }
}

pub fn ols(x: &DMatrix<f64>, y: &[f64]) -> Result<OlsFit> {
    check_full_rank(x, "least squares")?;
    let yv = DVector::from_column_slice(y);
    let qr = x.clone().qr();
    let qty = qr.q().transpose() * &yv;
    let coef = qr
        .r()
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::Singular("least squares: triangular solve failed".into()))?;
    let fitted = x * &coef;
    let rss = (&yv - &fitted).norm_squared();
    Ok(OlsFit { coef, rss, fitted })
}

/// Posterior mean under a Gaussian prior `N(prior_mean, prior_precision^-1)` on the
/// coefficients, with precision expressed relative to the noise variance.
pub fn ridge(x: &DMatrix<f64>, y: &[f64], prior_mean: &[f64], prior_precision: &[f64]) -> Result<OlsFit> {
    let p = x.ncols();
    if prior_mean.len() != p || prior_precision.len() != p {
        return Err(Error::LengthMismatch {
            expected: p,
            got: prior_mean.len().min(prior_precision.len()),
        });
    }
    let yv = DVector::from_column_slice(y);
    let prec = DMatrix::from_diagonal(&DVector::from_column_slice(prior_precision));
    let mean = DVector::from_column_slice(prior_mean);
    let lhs = x.transpose() * x + &prec;
    let rhs = x.transpose() * &yv + &prec * mean;
    let coef = lhs
        .cholesky()
        .ok_or_else(|| Error::Singular("prior-regularised least squares is not positive definite".into()))?
        .solve(&rhs);
    let fitted = x * &coef;
    let rss = (&yv - &fitted).norm_squared();
    Ok(OlsFit { coef, rss, fitted })
}

#[derive(Debug, Clone)]
pub struct LogisticFit {
    pub coef: DVector<f64>,
    pub converged: bool,
    /// Coefficients diverged (complete or quasi-complete separation).
    pub separated: bool,
    pub iterations: usize,
}

impl LogisticFit {
    pub fn predict(&self, x: &DMatrix<f64>) -> Vec<f64> {
        (x * &self.coef).iter().map(|&e| sigmoid(e)).collect()
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        sigmoid(row.iter().zip(self.coef.iter()).map(|(a, b)| a * b).sum())
    }
}

const SEPARATION_NORM: f64 = 1e3;

fn bernoulli_loglik(eta: &DVector<f64>, y: &[f64]) -> f64 {
    eta.iter()
        .zip(y)
        .map(|(&e, &yi)| {
            // log sigma(e) = -log(1+exp(-e))
            let log1pexp = |t: f64| if t > 0.0 { t + (-t).exp().ln_1p() } else { t.exp().ln_1p() };
            if yi == 1.0 {
                -log1pexp(-e)
            } else {
                -log1pexp(e)
            }
        })
        .sum()
}

/// Logistic regression by iteratively reweighted least squares. `x` must include
/// the intercept column when one is wanted.
pub fn logistic(x: &DMatrix<f64>, y: &[f64]) -> Result<LogisticFit> {
    check_full_rank(x, "logistic regression")?;
    let p = x.ncols();
    let n = x.nrows();
    let max_iter = 50;
    let mut beta = DVector::zeros(p);
    let mut eta = DVector::zeros(n);
    let mut ll = bernoulli_loglik(&eta, y);
    for it in 1..=max_iter {
        let mut w = DVector::zeros(n);
        let mut score = DVector::zeros(p);
        for i in 0..n {
            let pi = sigmoid(eta[i]);
            w[i] = (pi * (1.0 - pi)).max(1e-300);
            let r = y[i] - pi;
            for j in 0..p {
                score[j] += x[(i, j)] * r;
            }
        }
        let mut info = DMatrix::zeros(p, p);
        for i in 0..n {
            let xi = x.row(i);
            for a in 0..p {
                let wa = w[i] * xi[a];
                for b in a..p {
                    info[(a, b)] += wa * xi[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                info[(a, b)] = info[(b, a)];
            }
        }
        let Some(chol) = info.cholesky() else {
            return Ok(LogisticFit {
                coef: beta,
                converged: false,
                separated: true,
                iterations: it,
            });
        };
        let delta = chol.solve(&score);
        let mut step = 1.0;
        let mut new_beta = &beta + &delta;
        let mut new_eta = x * &new_beta;
        let mut new_ll = bernoulli_loglik(&new_eta, y);
        while !(new_ll >= ll - 1e-12 * ll.abs()) && step > 1e-8 {
            step *= 0.5;
            new_beta = &beta + &delta * step;
            new_eta = x * &new_beta;
            new_ll = bernoulli_loglik(&new_eta, y);
        }
        let change = (&new_beta - &beta).amax();
        beta = new_beta;
        eta = new_eta;
        ll = new_ll;
        if !beta.iter().all(|b| b.is_finite()) || beta.norm() > SEPARATION_NORM {
            return Ok(LogisticFit {
                coef: beta,
                converged: false,
                separated: true,
                iterations: it,
            });
        }
        if change < 1e-10 * (1.0 + beta.amax()) {
            return Ok(LogisticFit {
                coef: beta,
                converged: true,
                separated: false,
                iterations: it,
            });
        }
    }
    Ok(LogisticFit {
        coef: beta,
        converged: false,
        separated: true,
        iterations: max_iter,
    })
}

/// Baseline-category multinomial logit. Class 0 is the reference; `coef` is
/// `p x (k - 1)`.
#[derive(Debug, Clone)]
pub struct MultinomialFit {
    pub coef: DMatrix<f64>,
    pub n_classes: usize,
    pub converged: bool,
    pub separated: bool,
}

impl MultinomialFit {
    pub fn probabilities(&self, row: &[f64]) -> Vec<f64> {
        let mut eta = vec![0.0; self.n_classes];
        for k in 1..self.n_classes {
            eta[k] = row.iter().enumerate().map(|(j, &v)| v * self.coef[(j, k - 1)]).sum();
        }
        softmax(&eta)
    }
}

pub fn softmax(eta: &[f64]) -> Vec<f64> {
    let m = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = eta.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

fn multinomial_loglik(x: &DMatrix<f64>, y: &[usize], coef: &DMatrix<f64>, k: usize) -> f64 {
    let fit = MultinomialFit {
        coef: coef.clone(),
        n_classes: k,
        converged: false,
        separated: false,
    };
    (0..x.nrows())
        .map(|i| {
            let row: Vec<f64> = x.row(i).iter().copied().collect();
            fit.probabilities(&row)[y[i]].max(1e-300).ln()
        })
        .sum()
}

pub fn multinomial(x: &DMatrix<f64>, y: &[usize], k: usize) -> Result<MultinomialFit> {
    check_full_rank(x, "polytomous regression")?;
    let p = x.ncols();
    let n = x.nrows();
    let q = k - 1;
    let dim = p * q;
    let mut coef = DMatrix::zeros(p, q);
    let mut ll = multinomial_loglik(x, y, &coef, k);
    let max_iter = 100;
    for _ in 0..max_iter {
        let cur = MultinomialFit {
            coef: coef.clone(),
            n_classes: k,
            converged: false,
            separated: false,
        };
        let mut score = DVector::zeros(dim);
        let mut info = DMatrix::zeros(dim, dim);
        for i in 0..n {
            let row: Vec<f64> = x.row(i).iter().copied().collect();
            let pr = cur.probabilities(&row);
            for a in 0..q {
                let ind = if y[i] == a + 1 { 1.0 } else { 0.0 };
                for j in 0..p {
                    score[a * p + j] += row[j] * (ind - pr[a + 1]);
                }
                for b in 0..q {
                    let w = pr[a + 1] * (if a == b { 1.0 } else { 0.0 } - pr[b + 1]);
                    for j in 0..p {
                        let wj = w * row[j];
                        for l in 0..p {
                            info[(a * p + j, b * p + l)] += wj * row[l];
                        }
                    }
                }
            }
        }
        let Some(chol) = info.cholesky() else {
            return Ok(MultinomialFit {
                coef,
                n_classes: k,
                converged: false,
                separated: true,
            });
        };
        let delta = chol.solve(&score);
        let delta = DMatrix::from_fn(p, q, |j, a| delta[a * p + j]);
        let mut step = 1.0;
        let mut new = &coef + &delta;
        let mut new_ll = multinomial_loglik(x, y, &new, k);
        while !(new_ll >= ll - 1e-12 * ll.abs()) && step > 1e-8 {
            step *= 0.5;
            new = &coef + &delta * step;
            new_ll = multinomial_loglik(x, y, &new, k);
        }
        let change = (&new - &coef).amax();
        coef = new;
        ll = new_ll;
        if !coef.iter().all(|v| v.is_finite()) || coef.norm() > SEPARATION_NORM {
            return Ok(MultinomialFit {
                coef,
                n_classes: k,
                converged: false,
                separated: true,
            });
        }
        if change < 1e-10 * (1.0 + coef.amax()) {
            return Ok(MultinomialFit {
                coef,
                n_classes: k,
                converged: true,
                separated: false,
            });
        }
    }
    Ok(MultinomialFit {
        coef,
        n_classes: k,
        converged: false,
        separated: true,
    })
}

/// Cumulative-logit (proportional odds) model:
/// `P(Y <= j | x) = sigmoid(threshold_j - x'beta)`.
#[derive(Debug, Clone)]
pub struct PropOddsFit {
    pub thresholds: Vec<f64>,
    pub beta: Vec<f64>,
    pub converged: bool,
    pub separated: bool,
}

impl PropOddsFit {
    pub fn probabilities(&self, row: &[f64]) -> Vec<f64> {
        let eta: f64 = row.iter().zip(&self.beta).map(|(a, b)| a * b).sum();
        let k = self.thresholds.len() + 1;
        (0..k)
            .map(|j| {
                let upper = self.thresholds.get(j).map(|t| t - eta);
                let lower = if j == 0 { None } else { Some(self.thresholds[j - 1] - eta) };
                interval_prob(lower, upper)
            })
            .collect()
    }
}

/// `sigmoid(upper) - sigmoid(lower)` with infinite ends given as `None`,
/// computed on whichever tail keeps precision.
fn interval_prob(lower: Option<f64>, upper: Option<f64>) -> f64 {
    match (lower, upper) {
        (None, None) => 1.0,
        (None, Some(u)) => sigmoid(u),
        (Some(l), None) => sigmoid(-l),
        (Some(l), Some(u)) => {
            if l > 0.0 {
                sigmoid(-l) - sigmoid(-u)
            } else {
                sigmoid(u) - sigmoid(l)
            }
        }
    }
}

fn logistic_density(t: f64) -> f64 {
    let s = sigmoid(t);
    s * (1.0 - s)
}

/// Fits the proportional-odds model by quasi-Newton maximization of the
/// likelihood. `x` carries no intercept column; thresholds play that role.
pub fn propodds(x: &DMatrix<f64>, y: &[usize], k: usize) -> Result<PropOddsFit> {
    if k < 2 {
        return Err(Error::InvalidArgument("proportional odds needs at least 2 levels".into()));
    }
    check_full_rank(&with_intercept(x), "proportional odds")?;
    let n = x.nrows();
    let p = x.ncols();
    let q = k - 1;
    // start thresholds at marginal cumulative logits
    let mut counts = vec![0.0; k];
    for &v in y {
        counts[v] += 1.0;
    }
    let mut start = Vec::with_capacity(q + p);
    let mut cum = 0.0;
    let mut prev = f64::NEG_INFINITY;
    for c in counts.iter().take(q) {
        cum += c;
        let f = ((cum + 0.5) / (n as f64 + 1.0)).clamp(1e-6, 1.0 - 1e-6);
        let t = (f / (1.0 - f)).ln();
        if start.is_empty() {
            start.push(t);
        } else {
            start.push((t - prev).max(1e-3).ln());
        }
        prev = t;
    }
    start.resize(q + p, 0.0);

    let rows: Vec<Vec<f64>> = (0..n).map(|i| x.row(i).iter().copied().collect()).collect();
    let thresholds_of = |a: &[f64]| {
        let mut th = Vec::with_capacity(q);
        let mut t = a[0];
        th.push(t);
        for v in &a[1..q] {
            t += v.exp();
            th.push(t);
        }
        th
    };
    let objective = |a: &[f64], g: &mut [f64]| -> f64 {
        let th = thresholds_of(a);
        let beta = &a[q..];
        g.iter_mut().for_each(|v| *v = 0.0);
        let mut dth = vec![0.0; q];
        let mut ll = 0.0;
        for (row, &yi) in rows.iter().zip(y) {
            let eta: f64 = row.iter().zip(beta).map(|(a, b)| a * b).sum();
            let upper = th.get(yi).map(|t| t - eta);
            let lower = if yi == 0 { None } else { Some(th[yi - 1] - eta) };
            let pr = interval_prob(lower, upper);
            if !(pr > 0.0) {
                return f64::INFINITY;
            }
            ll += pr.ln();
            let fu = upper.map_or(0.0, logistic_density);
            let fl = lower.map_or(0.0, logistic_density);
            if yi < q {
                dth[yi] += fu / pr;
            }
            if yi > 0 {
                dth[yi - 1] -= fl / pr;
            }
            let deta = (fl - fu) / pr;
            for (gj, xj) in g[q..].iter_mut().zip(row) {
                *gj += deta * xj;
            }
        }
        // chain rule from thresholds to (a_1, log increments)
        for (j, d) in dth.iter().enumerate() {
            g[0] += d;
            for i in 1..=j {
                g[i] += d * a[i].exp();
            }
        }
        let nf = n as f64;
        g.iter_mut().for_each(|v| *v = -*v / nf);
        -ll / nf
    };
    let res = optim::minimize(
        objective,
        &start,
        BfgsOptions {
            max_iter: 1000,
            gtol: 1e-11,
        },
    );
    let beta = res.x[q..].to_vec();
    let norm = beta.iter().map(|b| b * b).sum::<f64>().sqrt();
    let separated = norm > SEPARATION_NORM || !res.x.iter().all(|v| v.is_finite()) || !(res.converged || res.stalled);
    Ok(PropOddsFit {
        thresholds: thresholds_of(&res.x),
        beta,
        converged: res.converged || res.stalled,
        separated,
    })
}

/// Linear discriminant analysis with shared covariance.
#[derive(Debug, Clone)]
pub struct LdaFit {
    pub priors: Vec<f64>,
    /// Per-class linear score coefficients `Sigma^-1 mu_k`.
    pub weights: Vec<DVector<f64>>,
    /// Per-class constants `-mu_k' Sigma^-1 mu_k / 2 + log prior_k`.
    pub offsets: Vec<f64>,
}

impl LdaFit {
    pub fn probabilities(&self, row: &[f64]) -> Vec<f64> {
        let scores: Vec<f64> = self
            .weights
            .iter()
            .zip(&self.offsets)
            .map(|(w, &c)| c + row.iter().zip(w.iter()).map(|(a, b)| a * b).sum::<f64>())
            .collect();
        softmax(&scores)
    }
}

pub fn lda(x: &DMatrix<f64>, y: &[usize], k: usize) -> Result<LdaFit> {
    let n = x.nrows();
    let p = x.ncols();
    let mut counts = vec![0usize; k];
    for &v in y {
        counts[v] += 1;
    }
    let priors: Vec<f64> = counts.iter().map(|&c| c as f64 / n as f64).collect();
    let mut means = vec![DVector::<f64>::zeros(p); k];
    for (i, &v) in y.iter().enumerate() {
        means[v] += x.row(i).transpose();
    }
    for (m, &c) in means.iter_mut().zip(&counts) {
        if c > 0 {
            *m /= c as f64;
        }
    }
    let present = counts.iter().filter(|&&c| c > 0).count();
    let inv = if p == 0 {
        DMatrix::zeros(0, 0)
    } else {
        let mut cov = DMatrix::<f64>::zeros(p, p);
        for (i, &v) in y.iter().enumerate() {
            let d = x.row(i).transpose() - &means[v];
            cov += &d * d.transpose();
        }
        let dof = n.saturating_sub(present).max(1) as f64;
        cov /= dof;
        cov.try_inverse()
            .filter(|m| m.iter().all(|v| v.is_finite()))
            .ok_or_else(|| Error::Singular("discriminant analysis: pooled covariance is singular".into()))?
    };
    let mut weights = Vec::with_capacity(k);
    let mut offsets = Vec::with_capacity(k);
    for (m, &pi) in means.iter().zip(&priors) {
        let w = &inv * m;
        let c = if pi > 0.0 { pi.ln() - 0.5 * m.dot(&w) } else { f64::NEG_INFINITY };
        weights.push(w);
        offsets.push(c);
    }
    Ok(LdaFit {
        priors,
        weights,
        offsets,
    })
}
