//! L1-penalised linear and logistic regression by coordinate descent, with the
//! penalty picked by K-fold cross-validation over a log-spaced grid.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::glm::sigmoid;

pub const LASSO_GRID: usize = 50;
pub const LASSO_FOLDS: usize = 5;
/// Smallest grid penalty as a fraction of the largest.
const LAMBDA_RATIO: f64 = 1e-3;
/// Fold assignment is fixed so that fitting stays deterministic.
const FOLD_SEED: u64 = 0x1a55_0f01d;

#[derive(Debug, Clone, PartialEq)]
pub struct LassoFit {
    pub intercept: f64,
    /// Coefficients on the original predictor scale.
    pub coef: Vec<f64>,
    pub lambda: f64,
    /// Mean held-out loss per grid point, when cross-validation was run.
    pub cv_loss: Option<Vec<f64>>,
}

impl LassoFit {
    pub fn linear_predictor(&self, row: &[f64]) -> f64 {
        self.intercept + row.iter().zip(&self.coef).map(|(a, b)| a * b).sum::<f64>()
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Family {
    Gaussian,
    Binomial,
}

struct Standardized {
    x: DMatrix<f64>,
    mean: Vec<f64>,
    sd: Vec<f64>,
}

fn standardize(x: &DMatrix<f64>) -> Standardized {
    let n = x.nrows() as f64;
    let mut xs = x.clone();
    let mut mean = Vec::with_capacity(x.ncols());
    let mut sd = Vec::with_capacity(x.ncols());
    for mut c in xs.column_iter_mut() {
        let m = c.sum() / n;
        let v = c.iter().map(|a| (a - m).powi(2)).sum::<f64>() / n;
        let s = if v > 0.0 { v.sqrt() } else { 1.0 };
        for a in c.iter_mut() {
            *a = if v > 0.0 { (*a - m) / s } else { 0.0 };
        }
        mean.push(m);
        sd.push(s);
    }
    Standardized { x: xs, mean, sd }
}

fn soft_threshold(g: f64, lambda: f64) -> f64 {
    if g > lambda {
        g - lambda
    } else if g < -lambda {
        g + lambda
    } else {
        0.0
    }
}

/// Minimises `sum w_i (z_i - b0 - x_i'b)^2 / (2n) + lambda |b|_1` in place.
fn weighted_cd(x: &DMatrix<f64>, z: &[f64], w: &[f64], lambda: f64, b0: &mut f64, b: &mut [f64]) {
    let n = x.nrows();
    let nf = n as f64;
    let mut r: Vec<f64> = (0..n)
        .map(|i| z[i] - *b0 - (0..b.len()).map(|j| x[(i, j)] * b[j]).sum::<f64>())
        .collect();
    let sw: f64 = w.iter().sum();
    let scale: Vec<f64> = (0..b.len())
        .map(|j| x.column(j).iter().zip(w).map(|(a, wi)| wi * a * a).sum::<f64>() / nf)
        .collect();
    for _ in 0..10_000 {
        let d0 = r.iter().zip(w).map(|(ri, wi)| ri * wi).sum::<f64>() / sw;
        *b0 += d0;
        r.iter_mut().for_each(|ri| *ri -= d0);
        let mut max_delta = d0.abs();
        for j in 0..b.len() {
            let a = scale[j];
            if a == 0.0 {
                continue;
            }
            let col = x.column(j);
            let g = col.iter().zip(&r).zip(w).map(|((xi, ri), wi)| wi * xi * ri).sum::<f64>() / nf + a * b[j];
            let new = soft_threshold(g, lambda) / a;
            let delta = new - b[j];
            if delta != 0.0 {
                for (ri, xi) in r.iter_mut().zip(col.iter()) {
                    *ri -= delta * xi;
                }
                b[j] = new;
                max_delta = max_delta.max(delta.abs() * a.sqrt());
            }
        }
        if max_delta < 1e-10 {
            break;
        }
    }
}

/// Solves at one penalty, continuing from `(b0, b)`.
fn solve(family: Family, x: &DMatrix<f64>, y: &[f64], lambda: f64, b0: &mut f64, b: &mut [f64]) {
    let n = x.nrows();
    match family {
        Family::Gaussian => weighted_cd(x, y, &vec![1.0; n], lambda, b0, b),
        Family::Binomial => {
            for _ in 0..100 {
                let eta: Vec<f64> = (0..n)
                    .map(|i| *b0 + (0..b.len()).map(|j| x[(i, j)] * b[j]).sum::<f64>())
                    .collect();
                let p: Vec<f64> = eta.iter().map(|&e| sigmoid(e)).collect();
                let w: Vec<f64> = p.iter().map(|&pi| (pi * (1.0 - pi)).max(1e-5)).collect();
                let z: Vec<f64> = (0..n).map(|i| eta[i] + (y[i] - p[i]) / w[i]).collect();
                let old: Vec<f64> = std::iter::once(*b0).chain(b.iter().copied()).collect();
                weighted_cd(x, &z, &w, lambda, b0, b);
                let change = std::iter::once(*b0)
                    .chain(b.iter().copied())
                    .zip(&old)
                    .map(|(a, o)| (a - o).abs())
                    .fold(0.0, f64::max);
                if change < 1e-8 {
                    break;
                }
            }
        }
    }
}

fn lambda_max(x: &DMatrix<f64>, y: &[f64]) -> f64 {
    let n = x.nrows() as f64;
    let ybar = y.iter().sum::<f64>() / n;
    x.column_iter()
        .map(|c| (c.iter().zip(y).map(|(a, yi)| a * (yi - ybar)).sum::<f64>() / n).abs())
        .fold(0.0, f64::max)
}

fn grid(max: f64) -> Vec<f64> {
    (0..LASSO_GRID)
        .map(|k| max * LAMBDA_RATIO.powf(k as f64 / (LASSO_GRID - 1) as f64))
        .collect()
}

/// Standardized path fit; returns `(b0, b)` at each penalty.
fn path(family: Family, x: &DMatrix<f64>, y: &[f64], lambdas: &[f64]) -> Vec<(f64, Vec<f64>)> {
    let mut b0 = match family {
        Family::Gaussian => y.iter().sum::<f64>() / y.len() as f64,
        Family::Binomial => {
            let m = (y.iter().sum::<f64>() / y.len() as f64).clamp(1e-6, 1.0 - 1e-6);
            (m / (1.0 - m)).ln()
        }
    };
    let mut b = vec![0.0; x.ncols()];
    lambdas
        .iter()
        .map(|&l| {
            solve(family, x, y, l, &mut b0, &mut b);
            (b0, b.clone())
        })
        .collect()
}

fn loss(family: Family, eta: f64, y: f64) -> f64 {
    match family {
        Family::Gaussian => (y - eta).powi(2),
        Family::Binomial => {
            let p = sigmoid(eta).clamp(1e-12, 1.0 - 1e-12);
            -2.0 * (y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        }
    }
}

fn to_original(st: &Standardized, b0: f64, b: &[f64], lambda: f64, cv_loss: Option<Vec<f64>>) -> LassoFit {
    let coef: Vec<f64> = b.iter().zip(&st.sd).map(|(bj, s)| bj / s).collect();
    let intercept = b0 - coef.iter().zip(&st.mean).map(|(c, m)| c * m).sum::<f64>();
    LassoFit {
        intercept,
        coef,
        lambda,
        cv_loss,
    }
}

fn fit(family: Family, x: &DMatrix<f64>, y: &[f64], lambda: Option<f64>) -> Result<LassoFit> {
    let n = x.nrows();
    if n != y.len() {
        return Err(Error::LengthMismatch { expected: n, got: y.len() });
    }
    if n == 0 {
        return Err(Error::InvalidArgument("lasso needs at least one row".into()));
    }
    let st = standardize(x);
    if let Some(l) = lambda {
        if !(l >= 0.0) {
            return Err(Error::InvalidArgument(format!("lasso penalty must be non-negative, got {l}")));
        }
        let (b0, b) = path(family, &st.x, y, &[l]).pop().unwrap_or_default();
        return Ok(to_original(&st, b0, &b, l, None));
    }
    let lmax = lambda_max(&st.x, y);
    if lmax == 0.0 {
        let (b0, b) = path(family, &st.x, y, &[0.0]).pop().unwrap_or_default();
        return Ok(to_original(&st, b0, &b, 0.0, None));
    }
    if n < 2 * LASSO_FOLDS {
        return Err(Error::InvalidArgument(format!(
            "lasso cross-validation needs at least {} rows, got {n}",
            2 * LASSO_FOLDS
        )));
    }
    let lambdas = grid(lmax);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(FOLD_SEED));
    let mut fold = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        fold[i] = pos % LASSO_FOLDS;
    }
    let mut cv = vec![0.0; lambdas.len()];
    for k in 0..LASSO_FOLDS {
        let train: Vec<usize> = (0..n).filter(|&i| fold[i] != k).collect();
        let test: Vec<usize> = (0..n).filter(|&i| fold[i] == k).collect();
        let xt = x.select_rows(&train);
        let yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let sk = standardize(&xt);
        for (l, (b0, b)) in path(family, &sk.x, &yt, &lambdas).into_iter().enumerate() {
            let f = to_original(&sk, b0, &b, lambdas[l], None);
            cv[l] += test
                .iter()
                .map(|&i| {
                    let row: Vec<f64> = x.row(i).iter().copied().collect();
                    loss(family, f.linear_predictor(&row), y[i])
                })
                .sum::<f64>();
        }
    }
    cv.iter_mut().for_each(|v| *v /= n as f64);
    let best = (0..cv.len()).fold(0, |b, i| if cv[i] < cv[b] { i } else { b });
    let (b0, b) = path(family, &st.x, y, &lambdas[..=best]).pop().unwrap_or_default();
    Ok(to_original(&st, b0, &b, lambdas[best], Some(cv)))
}

/// Lasso least squares. `x` has no intercept column; the intercept is not
/// penalised. With `lambda = None` the penalty is chosen by cross-validation.
pub fn lasso_linear_fit(x: &DMatrix<f64>, y: &[f64], lambda: Option<f64>) -> Result<LassoFit> {
    fit(Family::Gaussian, x, y, lambda)
}

/// Lasso logistic regression for 0/1 outcomes.
pub fn lasso_logistic_fit(x: &DMatrix<f64>, y: &[f64], lambda: Option<f64>) -> Result<LassoFit> {
    fit(Family::Binomial, x, y, lambda)
}
