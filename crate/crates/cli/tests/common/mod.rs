//! Simulated cohorts and config files shared by the integration tests.
#![allow(dead_code)]

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use survsynth::tabular::{write_dataset, ColumnSpec, Dataset};

pub const STUDY_SPAN: f64 = 8.0;

pub fn schema() -> Vec<ColumnSpec> {
    vec![
        ColumnSpec::continuous("age"),
        ColumnSpec::continuous("bmi"),
        ColumnSpec::binary("sex"),
        ColumnSpec::categorical("stage", ["I", "II", "III"]),
        ColumnSpec::entry_time("entry"),
        ColumnSpec::dropout("dropout"),
        ColumnSpec::surv_time("time"),
        ColumnSpec::event("status"),
    ]
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Covariates only: age, bmi, sex, stage.
pub fn covariates(n: usize, rng: &mut ChaCha8Rng) -> [Vec<f64>; 4] {
    let age_d = Normal::new(60.0, 10.0).unwrap();
    let bmi_d = Normal::new(0.0, 0.15).unwrap();
    let mut cols: [Vec<f64>; 4] = Default::default();
    for _ in 0..n {
        let age: f64 = age_d.sample(rng);
        let bmi = 25.0 * Distribution::<f64>::sample(&bmi_d, rng).exp() + 0.05 * (age - 60.0);
        let sex = if rng.random::<f64>() < sigmoid(-0.3 + 0.03 * (age - 60.0)) { 1.0 } else { 0.0 };
        let w = [1.0, (0.2 + 0.02 * (age - 60.0)).exp(), (-0.3 + 0.04 * (age - 60.0) + 0.3 * sex).exp()];
        let u = rng.random::<f64>() * w.iter().sum::<f64>();
        let stage = if u < w[0] {
            0.0
        } else if u < w[0] + w[1] {
            1.0
        } else {
            2.0
        };
        cols[0].push(age);
        cols[1].push(bmi);
        cols[2].push(sex);
        cols[3].push(stage);
    }
    cols
}

/// Full cohort: Weibull proportional hazards (shape 1.5) with administrative
/// censoring at `STUDY_SPAN - entry` and 5% dropout censored at a uniform
/// fraction of the death time.
pub fn cohort(n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let [age, bmi, sex, stage] = covariates(n, &mut rng);
    let (mut entry, mut dropout, mut time, mut status) = (vec![], vec![], vec![], vec![]);
    for i in 0..n {
        let lp = -3.0
            + 0.03 * (age[i] - 60.0)
            + 0.02 * (bmi[i] - 25.0)
            + 0.4 * sex[i]
            + if stage[i] == 1.0 { 0.3 } else { 0.0 }
            + if stage[i] == 2.0 { 0.7 } else { 0.0 };
        let u: f64 = 1.0 - rng.random::<f64>();
        let t = (-u.ln() / lp.exp()).powf(1.0 / 1.5);
        let e = 3.0 * rng.random::<f64>();
        let d = if rng.random::<f64>() < 0.05 { 1.0 } else { 0.0 };
        let limit = STUDY_SPAN - e;
        let (obs, st) = if d == 1.0 {
            ((t * rng.random::<f64>()).max(1e-3).min(limit), 0.0)
        } else if t > limit {
            (limit, 0.0)
        } else {
            (t, 1.0)
        };
        entry.push(e);
        dropout.push(d);
        time.push(obs);
        status.push(st);
    }
    Dataset::new(schema(), vec![age, bmi, sex, stage, entry, dropout, time, status]).unwrap()
}

/// Writes `in.csv` and `config.json` into `dir`; returns the config path.
pub fn write_pipeline(dir: &Path, data: &Dataset, seed: u64, extra: &str) -> std::path::PathBuf {
    write_dataset(data, dir.join("in.csv")).unwrap();
    let schema = serde_json::to_string(&schema()).unwrap();
    let config = format!(
        r#"{{
  "input_csv": "in.csv",
  "schema": {schema},
  "model": {{"df": 2, "predictors": ["age", "bmi", "sex", "stage"]}},
  "window": {{"study_span": {STUDY_SPAN}}},
  "seed": {seed},
  "strata": [{{"type": "levels", "column": "stage"}}, {{"type": "breaks", "column": "age", "breaks": [55, 65]}}],
  "outputs": {{
    "synthetic_csv": "out/synthetic.csv",
    "model_json": "out/model.json",
    "report_json": "out/report.json",
    "report_txt": "out/report.txt",
    "km_csv": "out/km.csv"
  }}{extra}
}}"#
    );
    std::fs::create_dir_all(dir.join("out")).unwrap();
    let path = dir.join("config.json");
    std::fs::write(&path, config).unwrap();
    path
}
