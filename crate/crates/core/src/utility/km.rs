//! Kaplan-Meier estimation and log-rank comparison.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

const Z_975: f64 = 1.959_963_984_540_054;

/// Product-limit survival curve evaluated at each distinct event time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMCurve {
    pub times: Vec<f64>,
    pub survival: Vec<f64>,
    pub at_risk: Vec<usize>,
    pub events: Vec<usize>,
    /// Pointwise 95% band, Greenwood variance on the log scale.
    pub ci_low: Vec<f64>,
    pub ci_high: Vec<f64>,
}

impl KMCurve {
    /// Right-continuous step function value at `t`.
    pub fn survival_at(&self, t: f64) -> f64 {
        match self.times.partition_point(|&x| x <= t) {
            0 => 1.0,
            i => self.survival[i - 1],
        }
    }
}

fn check_inputs(times: &[f64], events: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::InvalidArgument("empty survival sample".into()));
    }
    if times.len() != events.len() {
        return Err(Error::LengthMismatch {
            expected: times.len(),
            got: events.len(),
        });
    }
    if times.iter().any(|&t| !(t > 0.0) || !t.is_finite()) {
        return Err(Error::InvalidArgument("survival times must be positive".into()));
    }
    if events.iter().any(|&d| d != 0.0 && d != 1.0) {
        return Err(Error::InvalidArgument("event indicators must be 0 or 1".into()));
    }
    Ok(())
}

/// Sorted (time, events-at-time, removed-at-time) triples.
fn tabulate(times: &[f64], events: &[f64]) -> Vec<(f64, usize, usize)> {
    let mut idx: Vec<usize> = (0..times.len()).collect();
    idx.sort_by(|&a, &b| times[a].partial_cmp(&times[b]).unwrap());
    let mut out: Vec<(f64, usize, usize)> = Vec::new();
    for i in idx {
        let d = usize::from(events[i] == 1.0);
        match out.last_mut() {
            Some(last) if last.0 == times[i] => {
                last.1 += d;
                last.2 += 1;
            }
            _ => out.push((times[i], d, 1)),
        }
    }
    out
}

pub fn km_estimate(times: &[f64], events: &[f64]) -> Result<KMCurve> {
    check_inputs(times, events)?;
    let mut curve = KMCurve {
        times: vec![],
        survival: vec![],
        at_risk: vec![],
        events: vec![],
        ci_low: vec![],
        ci_high: vec![],
    };
    let mut n = times.len();
    let mut s = 1.0;
    let mut greenwood = 0.0;
    for (t, d, removed) in tabulate(times, events) {
        if d > 0 {
            s *= 1.0 - d as f64 / n as f64;
            let (lo, hi) = if d < n {
                greenwood += d as f64 / (n as f64 * (n - d) as f64);
                let half = Z_975 * greenwood.sqrt();
                (s * (-half).exp(), (s * half.exp()).min(1.0))
            } else {
                (0.0, 0.0)
            };
            curve.times.push(t);
            curve.survival.push(s);
            curve.at_risk.push(n);
            curve.events.push(d);
            curve.ci_low.push(lo.min(s));
            curve.ci_high.push(hi.max(s));
        }
        n -= removed;
    }
    Ok(curve)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRankResult {
    pub chi_sq: f64,
    pub p_value: f64,
    pub observed: [f64; 2],
    pub expected: [f64; 2],
    pub variance: f64,
}

/// `(sum of O_a - E_a, sum of hypergeometric variances, O, E)` for one stratum.
fn logrank_parts(a: (&[f64], &[f64]), b: (&[f64], &[f64])) -> Result<(f64, f64, [f64; 2], [f64; 2])> {
    check_inputs(a.0, a.1)?;
    check_inputs(b.0, b.1)?;
    let mut times: Vec<f64> = a.0.iter().chain(b.0).copied().collect();
    let mut events: Vec<f64> = a.1.iter().chain(b.1).copied().collect();
    let group: Vec<bool> = (0..times.len()).map(|i| i < a.0.len()).collect();
    let mut idx: Vec<usize> = (0..times.len()).collect();
    idx.sort_by(|&i, &j| times[i].partial_cmp(&times[j]).unwrap());
    times = idx.iter().map(|&i| times[i]).collect();
    events = idx.iter().map(|&i| events[i]).collect();
    let group: Vec<bool> = idx.iter().map(|&i| group[i]).collect();

    let mut n_a = a.0.len() as f64;
    let mut n_b = b.0.len() as f64;
    let mut u = 0.0;
    let mut v = 0.0;
    let mut obs = [0.0; 2];
    let mut exp = [0.0; 2];
    let mut i = 0;
    while i < times.len() {
        let t = times[i];
        let (mut d_a, mut d_b, mut r_a, mut r_b) = (0.0, 0.0, 0.0, 0.0);
        while i < times.len() && times[i] == t {
            let d = events[i];
            if group[i] {
                d_a += d;
                r_a += 1.0;
            } else {
                d_b += d;
                r_b += 1.0;
            }
            i += 1;
        }
        let d = d_a + d_b;
        if d > 0.0 {
            let n = n_a + n_b;
            let e_a = d * n_a / n;
            let e_b = d * n_b / n;
            u += d_a - e_a;
            obs[0] += d_a;
            obs[1] += d_b;
            exp[0] += e_a;
            exp[1] += e_b;
            if n > 1.0 {
                v += n_a * n_b * d * (n - d) / (n * n * (n - 1.0));
            }
        }
        n_a -= r_a;
        n_b -= r_b;
    }
    if obs[0] + obs[1] == 0.0 {
        return Err(Error::Degenerate("no events in either group".into()));
    }
    Ok((u, v, obs, exp))
}

fn chi_sq_p(stat: f64, dof: f64) -> f64 {
    if stat <= 0.0 {
        return 1.0;
    }
    ChiSquared::new(dof).map(|c| c.sf(stat)).unwrap_or(f64::NAN)
}

/// Two-sample log-rank test, 1 degree of freedom.
pub fn logrank_test(a: (&[f64], &[f64]), b: (&[f64], &[f64])) -> Result<LogRankResult> {
    let (u, v, observed, expected) = logrank_parts(a, b)?;
    let chi_sq = if u == 0.0 {
        0.0
    } else if v > 0.0 {
        u * u / v
    } else {
        f64::INFINITY
    };
    Ok(LogRankResult {
        chi_sq,
        p_value: chi_sq_p(chi_sq, 1.0),
        observed,
        expected,
        variance: v,
    })
}

pub type SurvivalSample<'a> = (&'a [f64], &'a [f64]);

/// Stratified log-rank test: per-stratum `O - E` and variances summed before forming
/// the statistic. Strata without events are skipped.
pub fn stratified_logrank_test(strata: &[(SurvivalSample<'_>, SurvivalSample<'_>)]) -> Result<LogRankResult> {
    let mut u = 0.0;
    let mut v = 0.0;
    let mut observed = [0.0; 2];
    let mut expected = [0.0; 2];
    let mut used = 0;
    for (a, b) in strata {
        if a.0.is_empty() || b.0.is_empty() {
            continue;
        }
        match logrank_parts(*a, *b) {
            Ok((su, sv, o, e)) => {
                u += su;
                v += sv;
                for g in 0..2 {
                    observed[g] += o[g];
                    expected[g] += e[g];
                }
                used += 1;
            }
            Err(Error::Degenerate(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    if used == 0 {
        return Err(Error::Degenerate("no stratum has events".into()));
    }
    let chi_sq = if u == 0.0 {
        0.0
    } else if v > 0.0 {
        u * u / v
    } else {
        f64::INFINITY
    };
    Ok(LogRankResult {
        chi_sq,
        p_value: chi_sq_p(chi_sq, 1.0),
        observed,
        expected,
        variance: v,
    })
}
