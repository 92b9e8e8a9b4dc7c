use std::collections::BTreeMap;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use survsynth::fcs::{
    fit_synthesizer, fit_synthesizer_with, generate, ConditionalModel, MethodInput, MethodParams, MethodRegistry,
    SynthesisPlan,
};
use survsynth::tabular::{ColumnSpec, Dataset};
use survsynth::utility::ks_two_sample;

/// Covariate columns plus a dummy survival pair so the schema is a full cohort.
fn cohort(specs: Vec<ColumnSpec>, mut cols: Vec<Vec<f64>>) -> Dataset {
    let n = cols[0].len();
    let mut schema = specs;
    schema.push(ColumnSpec::surv_time("time"));
    schema.push(ColumnSpec::event("status"));
    cols.push(vec![1.0; n]);
    cols.push(vec![1.0; n]);
    Dataset::new(schema, cols).unwrap()
}

fn plan(targets: &[(&str, &str, &[&str])]) -> SynthesisPlan {
    SynthesisPlan {
        seq: targets.iter().map(|t| t.0.to_string()).collect(),
        pred: targets
            .iter()
            .map(|t| (t.0.to_string(), t.2.iter().map(|s| s.to_string()).collect()))
            .collect(),
        method: targets.iter().map(|t| (t.0.to_string(), t.1.to_string())).collect(),
        method_params: BTreeMap::new(),
        passthrough_predictors: vec![],
        n_multiplier: 1.0,
        seed: 0,
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

#[test]
fn intercept_only_logistic_keeps_proportion() {
    let y: Vec<f64> = (0..1000).map(|i| (i % 2) as f64).collect();
    let data = cohort(vec![ColumnSpec::binary("y")], vec![y]);
    let synth = fit_synthesizer(&data, &plan(&[("y", "logistic", &[])])).unwrap();
    let out = generate(&synth, 10_000, 5).unwrap();
    let p = mean(out.column("y").unwrap());
    assert!((p - 0.5).abs() < 0.02, "{p}");
}

#[test]
fn thirty_percent_target() {
    let y: Vec<f64> = (0..1000).map(|i| f64::from(i % 10 < 3)).collect();
    let data = cohort(vec![ColumnSpec::binary("y")], vec![y]);
    let synth = fit_synthesizer(&data, &plan(&[("y", "logistic", &[])])).unwrap();
    let p = mean(generate(&synth, 20_000, 6).unwrap().column("y").unwrap());
    // 3 sigma at n = 20000 is about 0.0097
    assert!((p - 0.3).abs() < 0.01, "{p}");
}

#[test]
fn polytomous_equal_levels() {
    let y: Vec<f64> = (0..900).map(|i| (i % 3) as f64).collect();
    let data = cohort(vec![ColumnSpec::categorical("g", ["a", "b", "c"])], vec![y]);
    let synth = fit_synthesizer(&data, &plan(&[("g", "polytomous", &[])])).unwrap();
    let out = generate(&synth, 30_000, 7).unwrap();
    for level in 0..3 {
        let share = out.column("g").unwrap().iter().filter(|&&v| v == level as f64).count() as f64 / 30_000.0;
        assert!((share - 1.0 / 3.0).abs() < 0.01, "level {level}: {share}");
    }
}

#[test]
fn normrank_reproduces_marginal_and_stays_in_range() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let y: Vec<f64> = (0..5000).map(|_| rng.random::<f64>()).collect();
    let (lo, hi) = y.iter().fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
    let data = cohort(vec![ColumnSpec::continuous("y")], vec![y.clone()]);
    let synth = fit_synthesizer(&data, &plan(&[("y", "normrank", &[])])).unwrap();
    let out = generate(&synth, 5000, 9).unwrap();
    let s = out.column("y").unwrap();
    let ks = ks_two_sample(&y, s).unwrap();
    assert!(ks.statistic < 0.05, "KS {}", ks.statistic);
    assert!(s.iter().all(|&v| (lo..=hi).contains(&v)));
}

#[test]
fn pmm_only_emits_observed_values() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let x: Vec<f64> = (0..300).map(|_| rng.random::<f64>() * 10.0).collect();
    let y: Vec<f64> = x.iter().map(|v| (2.0 * v + rng.random::<f64>()).round()).collect();
    let data = cohort(vec![ColumnSpec::continuous("x"), ColumnSpec::continuous("y")], vec![x, y.clone()]);
    let p = plan(&[("x", "normrank", &[]), ("y", "pmm", &["x"])]);
    let out = generate(&fit_synthesizer(&data, &p).unwrap(), 2000, 11).unwrap();
    assert!(out.column("y").unwrap().iter().all(|v| y.contains(v)));
}

#[test]
fn lasso_with_huge_penalty_ignores_predictors() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let x: Vec<f64> = (0..400).map(|_| rng.random::<f64>()).collect();
    let y: Vec<f64> = x.iter().map(|v| 5.0 * v + 0.1 * rng.random::<f64>()).collect();
    let data = cohort(vec![ColumnSpec::continuous("x"), ColumnSpec::continuous("y")], vec![x, y.clone()]);
    let mut p = plan(&[("x", "normrank", &[]), ("y", "lasso_linear", &["x"])]);
    p.method_params.insert(
        "y".into(),
        MethodParams {
            lambda: Some(1e12),
            ..Default::default()
        },
    );
    let out = generate(&fit_synthesizer(&data, &p).unwrap(), 4000, 13).unwrap();
    let (xs, ys) = (out.column("x").unwrap(), out.column("y").unwrap());
    let (mx, my) = (mean(xs), mean(ys));
    let cov: f64 = xs.iter().zip(ys).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / 4000.0;
    assert!(cov.abs() < 0.02, "covariance {cov}");
    assert!((my - mean(&y)).abs() < 0.1);
}

#[test]
fn lda_separates_well_spaced_classes() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let g: Vec<f64> = (0..2000).map(|_| f64::from(rng.random::<f64>() < 0.4)).collect();
    let x: Vec<f64> = g
        .iter()
        .map(|&c| if c == 1.0 { 5.0 } else { -5.0 } + rng.sample::<f64, _>(rand_distr::StandardNormal))
        .collect();
    let data = cohort(vec![ColumnSpec::continuous("x"), ColumnSpec::binary("g")], vec![x, g.clone()]);
    let p = plan(&[("x", "normrank", &[]), ("g", "lda", &["x"])]);
    let out = generate(&fit_synthesizer(&data, &p).unwrap(), 10_000, 15).unwrap();
    let share = mean(out.column("g").unwrap());
    assert!((share - mean(&g)).abs() < 0.02, "{share}");
    let agree = out
        .column("x")
        .unwrap()
        .iter()
        .zip(out.column("g").unwrap())
        .filter(|(x, g)| (**x > 0.0) == (**g == 1.0))
        .count();
    assert!(agree as f64 / 10_000.0 > 0.999);
}

struct Zero;

impl ConditionalModel for Zero {
    fn sample(&self, _row: &[f64], _rng: &mut dyn RngCore) -> f64 {
        0.0
    }
}

#[test]
fn custom_method_const0() {
    let mut registry = MethodRegistry::with_builtins();
    registry
        .register_custom_method("const0", |_: &MethodInput| Ok(Box::new(Zero) as Box<dyn ConditionalModel>))
        .unwrap();
    assert!(registry.register_custom_method("const0", |_: &MethodInput| Ok(Box::new(Zero) as _)).is_err());
    let y: Vec<f64> = (0..50).map(f64::from).collect();
    let data = cohort(vec![ColumnSpec::continuous("y")], vec![y]);
    let synth = fit_synthesizer_with(&data, &plan(&[("y", "const0", &[])]), &registry).unwrap();
    assert!(generate(&synth, 100, 1).unwrap().column("y").unwrap().iter().all(|&v| v == 0.0));
}

#[test]
fn separated_logistic_falls_back_with_warning() {
    let x: Vec<f64> = (0..200).map(|i| (i % 2) as f64).collect();
    let y = x.clone();
    let data = cohort(vec![ColumnSpec::binary("x"), ColumnSpec::binary("y")], vec![x, y]);
    let p = plan(&[("x", "logistic", &[]), ("y", "logistic", &["x"])]);
    let synth = fit_synthesizer(&data, &p).unwrap();
    assert!(synth.warnings().iter().any(|w| w.contains("`y`") && w.contains("separated")), "{:?}", synth.warnings());
    let out = generate(&synth, 1000, 2).unwrap();
    assert_eq!(out.column("x").unwrap(), out.column("y").unwrap());
}

#[test]
fn constant_target_is_flagged_and_repeated() {
    let data = cohort(vec![ColumnSpec::binary("y")], vec![vec![1.0; 40]]);
    let synth = fit_synthesizer(&data, &plan(&[("y", "logistic", &[])])).unwrap();
    assert_eq!(synth.warnings().len(), 1);
    assert!(generate(&synth, 80, 3).unwrap().column("y").unwrap().iter().all(|&v| v == 1.0));
}

#[test]
fn same_seed_same_output() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let a: Vec<f64> = (0..200).map(|_| rng.random::<f64>()).collect();
    let b: Vec<f64> = a.iter().map(|v| f64::from(*v + 0.3 * rng.random::<f64>() > 0.6)).collect();
    let data = cohort(vec![ColumnSpec::continuous("a"), ColumnSpec::binary("b")], vec![a, b]);
    let synth = fit_synthesizer(&data, &plan(&[("a", "normrank", &[]), ("b", "logistic", &["a"])])).unwrap();
    assert_eq!(generate(&synth, 300, 42).unwrap(), generate(&synth, 300, 42).unwrap());
    assert_ne!(generate(&synth, 300, 42).unwrap(), generate(&synth, 300, 43).unwrap());
}

#[test]
fn passthrough_values_are_resampled_originals() {
    let keep: Vec<f64> = (0..60).map(|i| f64::from(i) * 0.5).collect();
    let y: Vec<f64> = keep.iter().map(|v| v * 2.0).collect();
    let data = cohort(vec![ColumnSpec::continuous("keep"), ColumnSpec::continuous("y")], vec![keep.clone(), y]);
    let mut p = plan(&[("y", "linear", &["keep"])]);
    p.passthrough_predictors = vec!["keep".into()];
    let out = generate(&fit_synthesizer(&data, &p).unwrap(), 500, 4).unwrap();
    assert!(out.column("keep").unwrap().iter().all(|v| keep.contains(v)));
    for (k, y) in out.column("keep").unwrap().iter().zip(out.column("y").unwrap()) {
        assert!((y - 2.0 * k).abs() < 1e-9);
    }
}
