//! Propensity-score mean squared error and its null moments.

use nalgebra::DMatrix;
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glm;
use crate::tabular::Dataset;

/// `(1/N) sum (p_i - c)^2`.
pub fn pmse<T: Float>(p_hat: &[T], c: T) -> Result<T> {
    if p_hat.is_empty() {
        return Err(Error::InvalidArgument("pMSE of an empty vector".into()));
    }
    if !(c > T::zero() && c < T::one()) {
        return Err(Error::InvalidArgument("synthetic fraction must lie in (0, 1)".into()));
    }
    let sum = p_hat.iter().fold(T::zero(), |acc, &p| acc + (p - c) * (p - c));
    Ok(sum / T::from(p_hat.len()).unwrap())
}

/// Null expectation `(M-1)/(8N)` and variance `2(M-1)/(8N)^2`, where `M` counts
/// the propensity model's parameters including the intercept.
pub fn null_pmse_moments<T: Float>(m: usize, n: usize) -> (T, T) {
    let k = T::from(m.saturating_sub(1)).unwrap();
    let eight_n = T::from(8.0).unwrap() * T::from(n).unwrap();
    (k / eight_n, (k + k) / (eight_n * eight_n))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropensityResult {
    #[serde(with = "super::nonfinite")]
    pub pmse: f64,
    #[serde(with = "super::nonfinite")]
    pub expected_null: f64,
    #[serde(with = "super::nonfinite")]
    pub var_null: f64,
    /// `pmse / expected_null`; `+inf` when the sources are perfectly separable.
    #[serde(with = "super::nonfinite")]
    pub s_pmse_ratio: f64,
    /// `(pmse - expected_null) / sqrt(var_null)`.
    #[serde(with = "super::nonfinite")]
    pub s_pmse_z: f64,
    /// Fitted parameters including the intercept.
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub c: f64,
    pub separated: bool,
    pub notes: Vec<String>,
}

/// Stacks original and synthetic rows, encodes `variables` as main effects (plus
/// pairwise products across variables when `interactions` is set), fits a logistic
/// model of the source indicator and scores it.
pub fn propensity_utility(
    original: &Dataset,
    synthetic: &Dataset,
    variables: &[String],
    interactions: bool,
) -> Result<PropensityResult> {
    for v in variables {
        let a = original.spec(v)?;
        let b = synthetic.spec(v)?;
        if a.kind != b.kind {
            return Err(Error::Schema(format!("column `{v}` differs between original and synthetic")));
        }
    }
    let n0 = original.n_rows();
    let n1 = synthetic.n_rows();
    if n0 == 0 || n1 == 0 {
        return Err(Error::InvalidArgument("propensity model needs rows from both sources".into()));
    }
    let xo = original.encode_design(variables)?;
    let xs = synthetic.encode_design(variables)?;
    let n = n0 + n1;
    let mut cols: Vec<Vec<f64>> = Vec::new();
    let mut sources: Vec<&str> = Vec::new();
    let mut notes = Vec::new();
    for (j, entry) in xo.legend.iter().enumerate() {
        let col: Vec<f64> = xo.matrix.column(j).iter().chain(xs.matrix.column(j).iter()).copied().collect();
        if col.windows(2).all(|w| w[0] == w[1]) {
            notes.push(format!("design column `{}` is constant and was dropped", entry.name));
            continue;
        }
        cols.push(col);
        sources.push(entry.source.as_str());
    }
    if interactions {
        let main = cols.len();
        for a in 0..main {
            for b in (a + 1)..main {
                if sources[a] == sources[b] {
                    continue;
                }
                let prod: Vec<f64> = cols[a].iter().zip(&cols[b]).map(|(x, y)| x * y).collect();
                if prod.windows(2).all(|w| w[0] == w[1]) {
                    continue;
                }
                cols.push(prod);
            }
        }
    }
    let x = glm::with_intercept(&DMatrix::from_fn(n, cols.len(), |r, c| cols[c][r]));
    let y: Vec<f64> = (0..n).map(|i| if i < n0 { 0.0 } else { 1.0 }).collect();
    let fit = glm::logistic(&x, &y)?;
    let p_hat = fit.predict(&x);
    let c = n1 as f64 / n as f64;
    let value = pmse(&p_hat, c)?;
    let m = x.ncols();
    let (expected_null, var_null) = null_pmse_moments::<f64>(m, n);
    let (ratio, z) = if fit.separated {
        notes.push("sources are perfectly distinguishable (logistic separation)".into());
        (f64::INFINITY, f64::INFINITY)
    } else if m == 1 {
        // intercept-only: p_hat == c and the null moments vanish
        (0.0, 0.0)
    } else {
        (value / expected_null, (value - expected_null) / var_null.sqrt())
    };
    Ok(PropensityResult {
        pmse: value,
        expected_null,
        var_null,
        s_pmse_ratio: ratio,
        s_pmse_z: z,
        m,
        n,
        c,
        separated: fit.separated,
        notes,
    })
}
