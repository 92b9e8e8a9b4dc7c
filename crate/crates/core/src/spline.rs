//! Natural cubic spline on the log-time scale.
//!
//! The basis for `m` internal knots is `(1, x, v_1(x), ..., v_m(x))` with
//!
//! ```text
//! v_j(x) = (x - k_j)+^3 - l_j (x - k_min)+^3 - (1 - l_j) (x - k_max)+^3
//! l_j    = (k_max - k_j) / (k_max - k_min)
//! ```
//!
//! which is linear below `k_min` and above `k_max`. Everything here is generic over
//! the floating-point type.

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Boundary and internal knots, all on the log-time scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnotSet<T> {
    pub k_min: T,
    pub k_max: T,
    pub internal: Vec<T>,
}

impl<T: Float> KnotSet<T> {
    /// Validates `k_min < k_1 < ... < k_m < k_max`.
    pub fn new(k_min: T, k_max: T, internal: Vec<T>) -> Result<Self> {
        if !(k_min.is_finite() && k_max.is_finite()) || k_min >= k_max {
            return Err(Error::Knots("boundary knots must satisfy k_min < k_max".into()));
        }
        let mut prev = k_min;
        for &k in &internal {
            if !k.is_finite() || k <= prev {
                return Err(Error::Knots(
                    "internal knots must be strictly increasing and inside the boundary knots".into(),
                ));
            }
            prev = k;
        }
        if prev >= k_max {
            return Err(Error::Knots("internal knot at or beyond k_max".into()));
        }
        Ok(Self { k_min, k_max, internal })
    }

    pub fn n_internal(&self) -> usize {
        self.internal.len()
    }

    /// Number of spline coefficients, `m + 2`.
    pub fn n_basis(&self) -> usize {
        self.internal.len() + 2
    }

    pub fn lambda(&self, j: usize) -> T {
        (self.k_max - self.internal[j]) / (self.k_max - self.k_min)
    }

    pub fn basis(&self, x: T) -> Vec<T> {
        let mut out = vec![T::zero(); self.n_basis()];
        self.basis_into(x, &mut out);
        out
    }

    pub fn basis_into(&self, x: T, out: &mut [T]) {
        debug_assert_eq!(out.len(), self.n_basis());
        out[0] = T::one();
        out[1] = x;
        let cube = |a: T| {
            let d = plus(x - a);
            d * d * d
        };
        let lo = cube(self.k_min);
        let hi = cube(self.k_max);
        for (j, slot) in out[2..].iter_mut().enumerate() {
            let l = self.lambda(j);
            *slot = cube(self.internal[j]) - l * lo - (T::one() - l) * hi;
        }
    }

    pub fn basis_deriv(&self, x: T) -> Vec<T> {
        let mut out = vec![T::zero(); self.n_basis()];
        self.basis_deriv_into(x, &mut out);
        out
    }

    pub fn basis_deriv_into(&self, x: T, out: &mut [T]) {
        debug_assert_eq!(out.len(), self.n_basis());
        let three = T::from(3.0).unwrap();
        out[0] = T::zero();
        out[1] = T::one();
        let sq = |a: T| {
            let d = plus(x - a);
            three * d * d
        };
        let lo = sq(self.k_min);
        let hi = sq(self.k_max);
        for (j, slot) in out[2..].iter_mut().enumerate() {
            let l = self.lambda(j);
            *slot = sq(self.internal[j]) - l * lo - (T::one() - l) * hi;
        }
    }
}

#[inline]
fn plus<T: Float>(d: T) -> T {
    if d > T::zero() {
        d
    } else {
        T::zero()
    }
}

/// Spline coefficients `(g_0, ..., g_{m+1})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SplineCoefficients<T>(pub Vec<T>);

impl<T: Float> SplineCoefficients<T> {
    pub fn new(gamma: Vec<T>, knots: &KnotSet<T>) -> Result<Self> {
        if gamma.len() != knots.n_basis() {
            return Err(Error::LengthMismatch {
                expected: knots.n_basis(),
                got: gamma.len(),
            });
        }
        Ok(Self(gamma))
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    fn check(&self, knots: &KnotSet<T>) -> Result<()> {
        if self.0.len() != knots.n_basis() {
            return Err(Error::LengthMismatch {
                expected: knots.n_basis(),
                got: self.0.len(),
            });
        }
        Ok(())
    }

    pub fn value(&self, x: T, knots: &KnotSet<T>) -> Result<T> {
        self.check(knots)?;
        Ok(dot(&self.0, &knots.basis(x)))
    }

    pub fn deriv(&self, x: T, knots: &KnotSet<T>) -> Result<T> {
        self.check(knots)?;
        Ok(dot(&self.0, &knots.basis_deriv(x)))
    }
}

fn dot<T: Float>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

pub fn spline_value<T: Float>(x: T, knots: &KnotSet<T>, gamma: &SplineCoefficients<T>) -> Result<T> {
    gamma.value(x, knots)
}

pub fn spline_deriv<T: Float>(x: T, knots: &KnotSet<T>, gamma: &SplineCoefficients<T>) -> Result<T> {
    gamma.deriv(x, knots)
}

/// Quantile at probability `q` of sorted data: position `q (n - 1)`, linear
/// interpolation between order statistics.
pub fn quantile_sorted<T: Float>(sorted: &[T], q: T) -> T {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * T::from(n - 1).unwrap();
    let lo = pos.floor();
    let i = lo.to_usize().unwrap().min(n - 1);
    if i + 1 >= n {
        return sorted[n - 1];
    }
    let frac = pos - lo;
    sorted[i] + frac * (sorted[i + 1] - sorted[i])
}

/// Internal knot centiles for the default placement, by degrees of freedom.
pub fn default_centiles(df: usize) -> Option<&'static [f64]> {
    match df {
        1 => Some(&[]),
        2 => Some(&[0.50]),
        3 => Some(&[0.33, 0.67]),
        4 => Some(&[0.25, 0.50, 0.75]),
        _ => None,
    }
}

/// Boundary knots at the extreme event log-times, internal knots at centiles.
pub fn place_knots<T: Float>(event_log_times: &[T], df: usize) -> Result<KnotSet<T>> {
    let centiles = default_centiles(df).ok_or_else(|| {
        Error::Knots(format!(
            "built-in knot placement supports df 1..=4, got {df}; supply explicit knots"
        ))
    })?;
    if event_log_times.iter().any(|v| !v.is_finite()) {
        return Err(Error::Knots("non-finite event log-time".into()));
    }
    let mut sorted = event_log_times.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    sorted.dedup();
    if sorted.len() < 2 {
        return Err(Error::Knots("fewer than 2 distinct event log-times".into()));
    }
    let mut all = event_log_times.to_vec();
    all.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let internal = centiles
        .iter()
        .map(|&q| quantile_sorted(&all, T::from(q).unwrap()))
        .collect::<Vec<_>>();
    KnotSet::new(all[0], all[all.len() - 1], internal)
        .map_err(|e| Error::Knots(format!("tied knots at df={df}: {e}; supply explicit knots")))
}
