//! Original-versus-synthetic comparison report and Kaplan-Meier export.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::km::{km_estimate, logrank_test, KMCurve, LogRankResult};
use super::propensity::{propensity_utility, PropensityResult};
use super::tests::{chisq_homogeneity, mann_whitney, prop_test, welch_t, TestResult};
use crate::error::{Error, Result};
use crate::spline::quantile_sorted;
use crate::tabular::{ColumnSpec, Dataset, Kind, Role};

/// S_pMSE ratio above which a variable is flagged.
pub const S_PMSE_THRESHOLD: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum StratumSpec {
    /// One stratum per declared level of a discrete column.
    Levels { column: String },
    /// Classes `(-inf, b1), [b1, b2), ..., [bk, inf)` of a continuous column.
    Breaks { column: String, breaks: Vec<f64> },
}

impl StratumSpec {
    pub fn column(&self) -> &str {
        match self {
            StratumSpec::Levels { column } | StratumSpec::Breaks { column, .. } => column,
        }
    }

    /// Labels and per-row stratum membership.
    fn assign(&self, data: &Dataset) -> Result<(Vec<String>, Vec<usize>)> {
        let spec = data.spec(self.column())?;
        let values = data.column(self.column())?;
        match self {
            StratumSpec::Levels { column } => {
                let labels: Vec<String> = match &spec.kind {
                    Kind::Binary => vec!["0".into(), "1".into()],
                    Kind::Categorical { levels } | Kind::Ordered { levels } => levels.clone(),
                    Kind::Continuous => {
                        return Err(Error::InvalidArgument(format!(
                            "level strata need a discrete column, `{column}` is continuous"
                        )))
                    }
                };
                let labels = labels.into_iter().map(|l| format!("{column}={l}")).collect();
                Ok((labels, values.iter().map(|&v| v as usize).collect()))
            }
            StratumSpec::Breaks { column, breaks } => {
                if breaks.is_empty() || breaks.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::InvalidArgument(format!(
                        "breaks for `{column}` must be non-empty and increasing"
                    )));
                }
                let mut labels = vec![format!("{column}<{}", breaks[0])];
                for w in breaks.windows(2) {
                    labels.push(format!("{}<={column}<{}", w[0], w[1]));
                }
                labels.push(format!("{column}>={}", breaks[breaks.len() - 1]));
                Ok((labels, values.iter().map(|&v| breaks.partition_point(|&b| b <= v)).collect()))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Summary {
    Continuous {
        median: f64,
        q1: f64,
        q3: f64,
        mean: f64,
        sd: f64,
    },
    Levels {
        labels: Vec<String>,
        counts: Vec<usize>,
        percents: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub test: String,
    pub statistic: Option<f64>,
    pub p_value: Option<f64>,
    pub notice: Option<String>,
}

impl TestOutcome {
    fn from_result(test: &str, r: Result<TestResult>) -> Self {
        match r {
            Ok(r) => Self {
                test: test.into(),
                statistic: Some(r.statistic),
                p_value: Some(r.p_value),
                notice: None,
            },
            Err(e) => Self {
                test: test.into(),
                statistic: None,
                p_value: None,
                notice: Some(e.to_string()),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableRow {
    pub name: String,
    pub original: Summary,
    pub synthetic: Summary,
    pub tests: Vec<TestOutcome>,
    #[serde(with = "super::nonfinite")]
    pub s_pmse_ratio: f64,
    #[serde(with = "super::nonfinite")]
    pub s_pmse_z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumResult {
    pub stratum: String,
    pub n_original: usize,
    pub n_synthetic: usize,
    pub chi_sq: Option<f64>,
    pub p_value: Option<f64>,
    pub notice: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityReport {
    pub n_original: usize,
    pub n_synthetic: usize,
    /// One row per synthesized variable, then the survival status row.
    pub variables: Vec<VariableRow>,
    pub overall_logrank: Option<LogRankResult>,
    pub stratified: Vec<StratumResult>,
    pub propensity: PropensityResult,
    pub threshold: f64,
    pub n_above_threshold: usize,
    pub footnotes: Vec<String>,
}

fn summarize(spec: &ColumnSpec, values: &[f64]) -> Summary {
    match &spec.kind {
        Kind::Continuous => {
            let mut s = values.to_vec();
            s.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let n = s.len() as f64;
            let mean = s.iter().sum::<f64>() / n;
            let sd = if s.len() > 1 {
                (s.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            let q = |p: f64| if s.is_empty() { f64::NAN } else { quantile_sorted(&s, p) };
            Summary::Continuous {
                median: q(0.5),
                q1: q(0.25),
                q3: q(0.75),
                mean,
                sd,
            }
        }
        kind => {
            let labels: Vec<String> = match kind {
                Kind::Binary => vec!["0".into(), "1".into()],
                _ => kind.levels().unwrap().to_vec(),
            };
            let counts = level_counts(values, labels.len());
            let total = values.len().max(1) as f64;
            let percents = counts.iter().map(|&c| 100.0 * c as f64 / total).collect();
            Summary::Levels {
                labels,
                counts,
                percents,
            }
        }
    }
}

fn level_counts(values: &[f64], k: usize) -> Vec<usize> {
    let mut counts = vec![0; k];
    for &v in values {
        counts[v as usize] += 1;
    }
    counts
}

fn variable_tests(spec: &ColumnSpec, a: &[f64], b: &[f64]) -> Vec<TestOutcome> {
    match &spec.kind {
        Kind::Continuous => vec![
            TestOutcome::from_result("welch_t", welch_t(a, b)),
            TestOutcome::from_result("mann_whitney", mann_whitney(a, b)),
        ],
        Kind::Binary => {
            let k1 = a.iter().filter(|&&v| v == 1.0).count();
            let k2 = b.iter().filter(|&&v| v == 1.0).count();
            vec![TestOutcome::from_result("prop_test", prop_test(k1, a.len(), k2, b.len()))]
        }
        Kind::Categorical { levels } | Kind::Ordered { levels } => {
            let ca = level_counts(a, levels.len());
            let cb = level_counts(b, levels.len());
            let name = if levels.len() == 2 { "prop_test" } else { "chisq_homogeneity" };
            let r = if levels.len() == 2 {
                prop_test(ca[1], a.len(), cb[1], b.len())
            } else {
                chisq_homogeneity(&ca, &cb)
            };
            vec![TestOutcome::from_result(name, r)]
        }
    }
}

/// Builds the comparison report for the synthesized `variables`.
pub fn compare_report(
    original: &Dataset,
    synthetic: &Dataset,
    variables: &[String],
    strata: &[StratumSpec],
) -> Result<UtilityReport> {
    let (t_spec, _) = original
        .column_with_role(Role::SurvTime)
        .ok_or_else(|| Error::Schema("original data has no surv_time column".into()))?;
    let (d_spec, _) = original
        .column_with_role(Role::Event)
        .ok_or_else(|| Error::Schema("original data has no event column".into()))?;
    let (t_name, d_name) = (t_spec.name.clone(), d_spec.name.clone());
    let (to, d_o) = (original.column(&t_name)?, original.column(&d_name)?);
    let (ts, d_s) = (synthetic.column(&t_name)?, synthetic.column(&d_name)?);

    let mut rows = Vec::with_capacity(variables.len() + 1);
    for v in variables {
        let spec = original.spec(v)?;
        if synthetic.spec(v)?.kind != spec.kind {
            return Err(Error::Schema(format!("column `{v}` differs between original and synthetic")));
        }
        let a = original.column(v)?;
        let b = synthetic.column(v)?;
        let prop = propensity_utility(original, synthetic, std::slice::from_ref(v), false)?;
        rows.push(VariableRow {
            name: v.clone(),
            original: summarize(spec, a),
            synthetic: summarize(spec, b),
            tests: variable_tests(spec, a, b),
            s_pmse_ratio: prop.s_pmse_ratio,
            s_pmse_z: prop.s_pmse_z,
        });
    }

    let overall = logrank_test((to, d_o), (ts, d_s));
    let mut status_tests = variable_tests(d_spec, d_o, d_s);
    status_tests.push(match &overall {
        Ok(r) => TestOutcome {
            test: "logrank".into(),
            statistic: Some(r.chi_sq),
            p_value: Some(r.p_value),
            notice: None,
        },
        Err(e) => TestOutcome {
            test: "logrank".into(),
            statistic: None,
            p_value: None,
            notice: Some(e.to_string()),
        },
    });
    let status_prop = propensity_utility(original, synthetic, std::slice::from_ref(&d_name), false)?;
    rows.push(VariableRow {
        name: d_name.clone(),
        original: summarize(d_spec, d_o),
        synthetic: summarize(d_spec, d_s),
        tests: status_tests,
        s_pmse_ratio: status_prop.s_pmse_ratio,
        s_pmse_z: status_prop.s_pmse_z,
    });

    let mut stratified = Vec::new();
    for spec in strata {
        let (labels, g_o) = spec.assign(original)?;
        let (_, g_s) = spec.assign(synthetic)?;
        for (k, label) in labels.iter().enumerate() {
            let pick = |g: &[usize], t: &[f64], d: &[f64]| -> (Vec<f64>, Vec<f64>) {
                g.iter()
                    .enumerate()
                    .filter(|(_, &s)| s == k)
                    .map(|(i, _)| (t[i], d[i]))
                    .unzip()
            };
            let (ta, da) = pick(&g_o, to, d_o);
            let (tb, db) = pick(&g_s, ts, d_s);
            let mut res = StratumResult {
                stratum: label.clone(),
                n_original: ta.len(),
                n_synthetic: tb.len(),
                chi_sq: None,
                p_value: None,
                notice: None,
            };
            if ta.is_empty() || tb.is_empty() {
                res.notice = Some("stratum empty in one cohort; skipped".into());
            } else {
                match logrank_test((&ta, &da), (&tb, &db)) {
                    Ok(r) => {
                        res.chi_sq = Some(r.chi_sq);
                        res.p_value = Some(r.p_value);
                    }
                    Err(e) => res.notice = Some(format!("{e}; skipped")),
                }
            }
            stratified.push(res);
        }
    }

    let propensity = propensity_utility(original, synthetic, variables, false)?;
    let n_above_threshold = rows.iter().filter(|r| !(r.s_pmse_ratio < S_PMSE_THRESHOLD)).count();
    Ok(UtilityReport {
        n_original: original.n_rows(),
        n_synthetic: synthetic.n_rows(),
        variables: rows,
        overall_logrank: overall.ok(),
        stratified,
        propensity,
        threshold: S_PMSE_THRESHOLD,
        n_above_threshold,
        footnotes: vec![
            "p-val: t = Welch two-sample t-test; MW = Mann-Whitney test; P = two-sample test for equality of proportions; X2 = chi-square test of homogeneity (multi-level factors); LR = log-rank test".into(),
            "S_pMSE: propensity-score mean squared error divided by its null expectation (M-1)/(8N), single-variable logistic model".into(),
        ],
    })
}

fn abbrev(test: &str) -> &str {
    match test {
        "welch_t" => "t",
        "mann_whitney" => "MW",
        "prop_test" => "P",
        "chisq_homogeneity" => "X2",
        "logrank" => "LR",
        other => other,
    }
}

pub fn format_p(p: f64) -> String {
    if p > 0.99 {
        ">0.99".into()
    } else if p < 0.001 {
        "<0.001".into()
    } else {
        format!("{p:.3}")
    }
}

fn format_num(v: f64) -> String {
    if v.abs() >= 100.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

impl UtilityReport {
    /// Aligned text table: Characteristic, Original, Synthetic, p-val, S_pMSE.
    pub fn render_table(&self) -> String {
        let mut lines: Vec<[String; 5]> = vec![
            [
                "Characteristic".into(),
                "Original".into(),
                "Synthetic".into(),
                "p-val".into(),
                "S_pMSE".into(),
            ],
            [
                String::new(),
                format!("(n = {})", self.n_original),
                format!("(n = {})", self.n_synthetic),
                String::new(),
                String::new(),
            ],
        ];
        for row in &self.variables {
            let pval = row
                .tests
                .iter()
                .map(|t| match t.p_value {
                    Some(p) => format!("{} ({})", format_p(p), abbrev(&t.test)),
                    None => format!("n/a ({})", abbrev(&t.test)),
                })
                .collect::<Vec<_>>()
                .join("; ");
            let spmse = if row.s_pmse_ratio.is_finite() {
                format!("{:.3}", row.s_pmse_ratio)
            } else {
                "inf".into()
            };
            match (&row.original, &row.synthetic) {
                (
                    Summary::Continuous { median, q1, q3, .. },
                    Summary::Continuous {
                        median: m2,
                        q1: a2,
                        q3: b2,
                        ..
                    },
                ) => lines.push([
                    format!("{}, median (Q1, Q3)", row.name),
                    format!("{} ({}, {})", format_num(*median), format_num(*q1), format_num(*q3)),
                    format!("{} ({}, {})", format_num(*m2), format_num(*a2), format_num(*b2)),
                    pval,
                    spmse,
                ]),
                (
                    Summary::Levels { labels, counts, percents },
                    Summary::Levels {
                        counts: c2,
                        percents: p2,
                        ..
                    },
                ) => {
                    lines.push([format!("{}, n (%)", row.name), String::new(), String::new(), pval, spmse]);
                    for i in 0..labels.len() {
                        lines.push([
                            format!("  {}", labels[i]),
                            format!("{} ({:.1}%)", counts[i], percents[i]),
                            format!("{} ({:.1}%)", c2[i], p2[i]),
                            String::new(),
                            String::new(),
                        ]);
                    }
                }
                _ => {}
            }
        }
        let mut widths = [0usize; 5];
        for l in &lines {
            for (w, cell) in widths.iter_mut().zip(l) {
                *w = (*w).max(cell.chars().count());
            }
        }
        let mut out = String::new();
        for (i, l) in lines.iter().enumerate() {
            let mut line = String::new();
            for (j, cell) in l.iter().enumerate() {
                if j == 0 {
                    let _ = write!(line, "{cell:<w$}", w = widths[j]);
                } else {
                    let _ = write!(line, "  {cell:>w$}", w = widths[j]);
                }
            }
            out.push_str(line.trim_end());
            out.push('\n');
            if i == 1 {
                out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 8));
                out.push('\n');
            }
        }
        out.push('\n');
        if let Some(lr) = &self.overall_logrank {
            let _ = writeln!(out, "Overall log-rank: chi-sq = {:.4}, p = {}", lr.chi_sq, format_p(lr.p_value));
        }
        if !self.stratified.is_empty() {
            let _ = writeln!(out, "\nStratified log-rank (original vs synthetic):");
            let w = self.stratified.iter().map(|s| s.stratum.len()).max().unwrap_or(0);
            for s in &self.stratified {
                match s.p_value {
                    Some(p) => {
                        let _ = writeln!(out, "  {:<w$}  p = {}", s.stratum, format_p(p));
                    }
                    None => {
                        let _ = writeln!(
                            out,
                            "  {:<w$}  {}",
                            s.stratum,
                            s.notice.as_deref().unwrap_or("skipped")
                        );
                    }
                }
            }
        }
        let p = &self.propensity;
        let _ = writeln!(
            out,
            "\nFull propensity model: pMSE = {:.6}, E = {:.6}, S_pMSE ratio = {:.3}, z = {:.3} (M = {}, N = {}, c = {:.4})",
            p.pmse, p.expected_null, p.s_pmse_ratio, p.s_pmse_z, p.m, p.n, p.c
        );
        let _ = writeln!(out, "{}", self.threshold_line());
        for (i, f) in self.footnotes.iter().enumerate() {
            let _ = writeln!(out, "[{}] {f}", i + 1);
        }
        out
    }

    pub fn threshold_line(&self) -> String {
        format!(
            "{} variables above threshold (S_pMSE >= {})",
            self.n_above_threshold, self.threshold
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KmSeries {
    pub cohort: String,
    pub group: String,
    pub curve: KMCurve,
}

/// Kaplan-Meier curves for both cohorts: overall (`group = "all"`) and per stratum.
pub fn km_curves(original: &Dataset, synthetic: &Dataset, strata: &[StratumSpec]) -> Result<Vec<KmSeries>> {
    let mut out = Vec::new();
    for (cohort, data) in [("original", original), ("synthetic", synthetic)] {
        let (t, d) = data.survival()?;
        out.push(KmSeries {
            cohort: cohort.into(),
            group: "all".into(),
            curve: km_estimate(t, d)?,
        });
        for spec in strata {
            let (labels, g) = spec.assign(data)?;
            for (k, label) in labels.iter().enumerate() {
                let (ts, ds): (Vec<f64>, Vec<f64>) = g
                    .iter()
                    .enumerate()
                    .filter(|(_, &s)| s == k)
                    .map(|(i, _)| (t[i], d[i]))
                    .unzip();
                if ts.is_empty() {
                    continue;
                }
                out.push(KmSeries {
                    cohort: cohort.into(),
                    group: label.clone(),
                    curve: km_estimate(&ts, &ds)?,
                });
            }
        }
    }
    Ok(out)
}

/// CSV with columns `time,survival,ci_low,ci_high,group,cohort`, one row per
/// (cohort, group, event time).
pub fn km_csv(series: &[KmSeries]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["time", "survival", "ci_low", "ci_high", "group", "cohort"])?;
    for s in series {
        let c = &s.curve;
        for i in 0..c.times.len() {
            w.write_record([
                c.times[i].to_string(),
                c.survival[i].to_string(),
                c.ci_low[i].to_string(),
                c.ci_high[i].to_string(),
                s.group.clone(),
                s.cohort.clone(),
            ])?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cohort() -> Dataset {
        let n = 40;
        Dataset::new(
            vec![
                ColumnSpec::continuous("age"),
                ColumnSpec::binary("sex"),
                ColumnSpec::categorical("codon", ["MM", "MV", "VV"]),
                ColumnSpec::surv_time("time"),
                ColumnSpec::event("status"),
            ],
            vec![
                (0..n).map(|i| 50.0 + (i * 7 % 30) as f64).collect(),
                (0..n).map(|i| (i % 2) as f64).collect(),
                (0..n).map(|i| (i % 3) as f64).collect(),
                (0..n).map(|i| 1.0 + (i * 13 % 17) as f64).collect(),
                (0..n).map(|i| if i % 5 == 0 { 0.0 } else { 1.0 }).collect(),
            ],
        )
        .unwrap()
    }

    #[test]
    fn identical_cohorts() {
        let d = cohort();
        let vars: Vec<String> = ["age", "sex", "codon"].iter().map(|s| s.to_string()).collect();
        let strata = vec![
            StratumSpec::Levels { column: "codon".into() },
            StratumSpec::Breaks {
                column: "age".into(),
                breaks: vec![60.0, 70.0],
            },
        ];
        let r = compare_report(&d, &d, &vars, &strata).unwrap();
        assert_eq!(r.variables.len(), vars.len() + 1);
        for row in &r.variables {
            assert!(row.s_pmse_ratio < 1e-9, "{}: {}", row.name, row.s_pmse_ratio);
            for t in &row.tests {
                assert_eq!(t.p_value, Some(1.0), "{} {}", row.name, t.test);
            }
        }
        assert_eq!(r.overall_logrank.as_ref().unwrap().p_value, 1.0);
        assert_eq!(r.stratified.len(), 6);
        assert_eq!(r.n_above_threshold, 0);
        let text = r.render_table();
        let header = text.lines().next().unwrap();
        let order = ["Characteristic", "Original", "Synthetic", "p-val", "S_pMSE"];
        let pos: Vec<usize> = order.iter().map(|h| header.find(h).unwrap()).collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]));
        assert!(text.contains("0 variables above threshold"));
    }

    #[test]
    fn km_export_rows() {
        let d = cohort();
        let strata = vec![StratumSpec::Levels { column: "sex".into() }];
        let series = km_curves(&d, &d, &strata).unwrap();
        assert_eq!(series.len(), 6);
        let csv = km_csv(&series).unwrap();
        let expected: usize = series.iter().map(|s| s.curve.times.len()).sum();
        assert_eq!(csv.lines().count(), expected + 1);
        assert!(csv.starts_with("time,survival,ci_low,ci_high,group,cohort"));
    }

    #[test]
    fn break_labels() {
        let d = cohort();
        let s = StratumSpec::Breaks {
            column: "age".into(),
            breaks: vec![60.0],
        };
        let (labels, g) = s.assign(&d).unwrap();
        assert_eq!(labels, vec!["age<60", "age>=60"]);
        assert_eq!(g[0], 0);
        assert!(StratumSpec::Levels { column: "age".into() }.assign(&d).is_err());
    }
}
