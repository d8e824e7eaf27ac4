//! Classical tests: OLS regression, one-way and repeated-measures ANOVA,
//! one- and two-sample t-tests.

mod distribution;

pub use distribution::{beta_inc, f_cdf, f_sf, ln_gamma, t_cdf, t_two_tailed_p};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("invalid degrees of freedom {0}")]
    InvalidDegreesOfFreedom(f64),
    #[error("non-finite input")]
    NonFinite,
    #[error("degenerate regressor")]
    DegenerateRegressor,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("incomplete matrix: row {row} has {got} values, expected {expected}")]
    IncompleteMatrix { row: usize, got: usize, expected: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsResult {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub p_value: f64,
    pub t_statistic: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaResult {
    pub f_statistic: f64,
    pub df_between: usize,
    pub df_within: usize,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t_statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

fn finite(xs: &[f64]) -> Result<(), StatsError> {
    if xs.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(StatsError::NonFinite)
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Ordinary least squares of `y` on `x` with an intercept.
pub fn ols(x: &[f64], y: &[f64]) -> Result<OlsResult, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    if n < 3 {
        return Err(StatsError::InsufficientData(format!("regression needs 3 points, got {n}")));
    }
    finite(x)?;
    finite(y)?;
    let (mx, my) = (mean(x), mean(y));
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 {
        return Err(StatsError::DegenerateRegressor);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(&a, &b)| {
            let r = b - (intercept + slope * a);
            r * r
        })
        .sum();
    let r_squared = if syy == 0.0 { 0.0 } else { (1.0 - ss_res / syy).clamp(0.0, 1.0) };
    let df = (n - 2) as f64;
    let se = (ss_res / df / sxx).sqrt();
    let t = if se == 0.0 {
        if slope == 0.0 {
            0.0
        } else {
            f64::INFINITY.copysign(slope)
        }
    } else {
        slope / se
    };
    Ok(OlsResult {
        slope,
        intercept,
        r_squared,
        p_value: t_two_tailed_p(t, df)?,
        t_statistic: t,
        n,
    })
}

fn f_result(ss_effect: f64, df_effect: usize, ss_error: f64, df_error: usize) -> Result<AnovaResult, StatsError> {
    let ms_effect = ss_effect / df_effect as f64;
    let ms_error = ss_error / df_error as f64;
    let f = if ms_error > 0.0 {
        ms_effect / ms_error
    } else if ms_effect > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    Ok(AnovaResult {
        f_statistic: f,
        df_between: df_effect,
        df_within: df_error,
        p_value: f_sf(f, df_effect as f64, df_error as f64)?,
    })
}

/// Between/within one-way ANOVA.
pub fn one_way_anova<G: AsRef<[f64]>>(groups: &[G]) -> Result<AnovaResult, StatsError> {
    if groups.len() < 2 {
        return Err(StatsError::InsufficientData(format!("need 2 groups, got {}", groups.len())));
    }
    for (i, g) in groups.iter().enumerate() {
        let g = g.as_ref();
        if g.len() < 2 {
            return Err(StatsError::InsufficientData(format!("group {i} has {} values", g.len())));
        }
        finite(g)?;
    }
    let total: usize = groups.iter().map(|g| g.as_ref().len()).sum();
    let grand = groups.iter().flat_map(|g| g.as_ref()).sum::<f64>() / total as f64;
    let mut ss_between = 0.0;
    let mut ss_within = 0.0;
    for g in groups {
        let g = g.as_ref();
        let m = mean(g);
        ss_between += g.len() as f64 * (m - grand) * (m - grand);
        ss_within += g.iter().map(|v| (v - m) * (v - m)).sum::<f64>();
    }
    f_result(ss_between, groups.len() - 1, ss_within, total - groups.len())
}

/// One-way within-subjects ANOVA on a subjects × conditions table, without
/// sphericity correction.
pub fn rm_anova<R: AsRef<[f64]>>(table: &[R]) -> Result<AnovaResult, StatsError> {
    let n = table.len();
    if n < 2 {
        return Err(StatsError::InsufficientData(format!("need 2 subjects, got {n}")));
    }
    let k = table[0].as_ref().len();
    if k < 2 {
        return Err(StatsError::InsufficientData(format!("need 2 conditions, got {k}")));
    }
    for (row, r) in table.iter().enumerate() {
        let r = r.as_ref();
        if r.len() != k {
            return Err(StatsError::IncompleteMatrix { row, got: r.len(), expected: k });
        }
        finite(r)?;
    }
    let grand = table.iter().flat_map(|r| r.as_ref()).sum::<f64>() / (n * k) as f64;
    let subject_means: Vec<f64> = table.iter().map(|r| mean(r.as_ref())).collect();
    let condition_means: Vec<f64> = (0..k)
        .map(|j| table.iter().map(|r| r.as_ref()[j]).sum::<f64>() / n as f64)
        .collect();
    let ss_condition = n as f64 * condition_means.iter().map(|m| (m - grand) * (m - grand)).sum::<f64>();
    let mut ss_error = 0.0;
    for (i, r) in table.iter().enumerate() {
        for (j, v) in r.as_ref().iter().enumerate() {
            let e = v - subject_means[i] - condition_means[j] + grand;
            ss_error += e * e;
        }
    }
    f_result(ss_condition, k - 1, ss_error, (k - 1) * (n - 1))
}

fn t_from(effect: f64, se: f64, df: usize) -> Result<TTestResult, StatsError> {
    let t = if se > 0.0 {
        effect / se
    } else if effect == 0.0 {
        0.0
    } else {
        f64::INFINITY.copysign(effect)
    };
    Ok(TTestResult { t_statistic: t, df, p_value: t_two_tailed_p(t, df as f64)? })
}

fn sum_sq_dev(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|v| (v - m) * (v - m)).sum()
}

/// One-sample two-tailed t-test against `mu0`.
pub fn t_test_one_sample(data: &[f64], mu0: f64) -> Result<TTestResult, StatsError> {
    let n = data.len();
    if n < 2 {
        return Err(StatsError::InsufficientData(format!("need 2 values, got {n}")));
    }
    finite(data)?;
    if !mu0.is_finite() {
        return Err(StatsError::NonFinite);
    }
    let var = sum_sq_dev(data) / (n - 1) as f64;
    t_from(mean(data) - mu0, (var / n as f64).sqrt(), n - 1)
}

/// Two-sample two-tailed t-test with pooled variance.
pub fn t_test_two_sample(a: &[f64], b: &[f64]) -> Result<TTestResult, StatsError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(StatsError::InsufficientData(format!(
            "need 2 values per sample, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    finite(a)?;
    finite(b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let df = a.len() + b.len() - 2;
    let pooled = (sum_sq_dev(a) + sum_sq_dev(b)) / df as f64;
    t_from(mean(a) - mean(b), (pooled * (1.0 / na + 1.0 / nb)).sqrt(), df)
}

/// Serialized record of one test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatReport {
    pub test: String,
    pub statistic: f64,
    pub df: Vec<usize>,
    pub p_value: f64,
    pub inputs_digest: String,
}

/// SHA-256 over the inputs; each slice is length-prefixed and values are
/// little-endian f64 bytes.
pub fn inputs_digest<S: AsRef<[f64]>>(inputs: &[S]) -> String {
    let mut h = Sha256::new();
    for s in inputs {
        let s = s.as_ref();
        h.update((s.len() as u64).to_le_bytes());
        for v in s {
            h.update(v.to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}

impl StatReport {
    pub fn ols<S: AsRef<[f64]>>(r: &OlsResult, inputs: &[S]) -> Self {
        StatReport {
            test: "ols".into(),
            statistic: r.t_statistic,
            df: vec![r.n - 2],
            p_value: r.p_value,
            inputs_digest: inputs_digest(inputs),
        }
    }

    pub fn anova<S: AsRef<[f64]>>(test: &str, r: &AnovaResult, inputs: &[S]) -> Self {
        StatReport {
            test: test.into(),
            statistic: r.f_statistic,
            df: vec![r.df_between, r.df_within],
            p_value: r.p_value,
            inputs_digest: inputs_digest(inputs),
        }
    }

    pub fn t_test<S: AsRef<[f64]>>(test: &str, r: &TTestResult, inputs: &[S]) -> Self {
        StatReport {
            test: test.into(),
            statistic: r.t_statistic,
            df: vec![r.df],
            p_value: r.p_value,
            inputs_digest: inputs_digest(inputs),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ols_examples() {
        let x = [0.0, 1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        let r = ols(&x, &y).unwrap();
        assert!((r.slope - 2.0).abs() < 1e-12);
        assert!((r.intercept - 1.0).abs() < 1e-12);
        assert!((r.r_squared - 1.0).abs() < 1e-12);

        let r = ols(&[0.0, 1.0, 2.0], &[0.0, 1.0, 0.0]).unwrap();
        assert_eq!(r.slope, 0.0);
        assert_eq!(r.r_squared, 0.0);
        assert_eq!(r.p_value, 1.0);

        assert_eq!(ols(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(StatsError::DegenerateRegressor));
        assert_eq!(StatsError::DegenerateRegressor.to_string(), "degenerate regressor");
        assert!(matches!(ols(&[1.0, 2.0], &[1.0, 2.0]), Err(StatsError::InsufficientData(_))));
    }

    #[test]
    fn ols_against_reference() {
        // Values from an independent least-squares implementation.
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let y = [1.1, 1.9, 3.2, 3.8, 5.3, 5.9];
        let r = ols(&x, &y).unwrap();
        assert!((r.slope - 0.994_285_714_285_714_1).abs() < 1e-12);
        assert!((r.intercept - 0.053_333_333_333_334_1).abs() < 1e-12);
        assert!((r.r_squared - 0.988_980_836_236_933_3).abs() < 1e-10);
        assert!((r.p_value / 4.570_152_915_039_848e-5 - 1.0).abs() < 1e-8);
    }

    #[test]
    fn anova_examples() {
        let g = [vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0]];
        let r = one_way_anova(&g).unwrap();
        assert_eq!(r.f_statistic, 0.0);
        assert_eq!(r.p_value, 1.0);

        let r = one_way_anova(&[vec![1.0, 2.0, 3.0], vec![101.0, 102.0, 103.0]]).unwrap();
        // SS_between = 15000 over 1 df; SS_within = 4 over 4 df.
        assert!((r.f_statistic - 15000.0).abs() < 1e-8);
        assert_eq!((r.df_between, r.df_within), (1, 4));
        assert!((r.p_value / 2.665_481_896_163_793e-8 - 1.0).abs() < 1e-8);

        assert!(one_way_anova(&[vec![1.0, 2.0]]).is_err());
        assert!(one_way_anova(&[vec![1.0, 2.0], vec![3.0]]).is_err());
    }

    #[test]
    fn rm_anova_examples() {
        let r = rm_anova(&[vec![2.0, 2.0], vec![2.0, 2.0]]).unwrap();
        assert_eq!(r.f_statistic, 0.0);
        assert_eq!(r.p_value, 1.0);

        // Grand mean 2.25; SS_condition = 2.25, SS_error = 0.25.
        let r = rm_anova(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert!((r.f_statistic - 9.0).abs() < 1e-12);
        assert_eq!((r.df_between, r.df_within), (1, 1));
        let exact = 1.0 - 2.0 / std::f64::consts::PI * 3f64.atan();
        assert!((r.p_value - exact).abs() < 1e-12);

        assert!(matches!(
            rm_anova(&[vec![1.0, 2.0], vec![2.0]]),
            Err(StatsError::IncompleteMatrix { row: 1, got: 1, expected: 2 })
        ));
    }

    #[test]
    fn t_test_examples() {
        let r = t_test_one_sample(&[4.0, 4.0, 4.0], 4.0).unwrap();
        assert_eq!((r.t_statistic, r.p_value), (0.0, 1.0));
        let r = t_test_one_sample(&[4.0, 4.0, 4.0], 3.0).unwrap();
        assert_eq!(r.p_value, 0.0);

        let r = t_test_one_sample(&[1.0, 2.0, 3.0], 0.0).unwrap();
        assert!((r.t_statistic - 2.0 * 3f64.sqrt()).abs() < 1e-12);
        assert_eq!(r.df, 2);
        assert!((r.p_value - 0.074_179_900_227_448_54).abs() < 1e-10);

        let r = t_test_two_sample(&[1.0, 2.0, 3.0, 4.0], &[2.0, 4.0, 6.0]).unwrap();
        assert_eq!(r.df, 5);
        // t = -1.5 / sqrt((5 + 8) / 5 * (1/4 + 1/3)).
        let t = -1.5 / (13.0f64 / 5.0 * (0.25 + 1.0 / 3.0)).sqrt();
        assert!((r.t_statistic - t).abs() < 1e-12);
    }

    #[test]
    fn report_json_shape() {
        let r = t_test_one_sample(&[1.0, 2.0, 3.0], 0.0).unwrap();
        let rep = StatReport::t_test("one_sample_t", &r, &[[1.0, 2.0, 3.0], [0.0, 0.0, 0.0]]);
        let v: serde_json::Value = serde_json::to_value(&rep).unwrap();
        let keys: Vec<&str> = v.as_object().unwrap().keys().map(|s| s.as_str()).collect();
        assert_eq!(keys.len(), 5);
        for k in ["test", "statistic", "df", "p_value", "inputs_digest"] {
            assert!(v.get(k).is_some(), "{k}");
        }
        assert_eq!(v["df"], serde_json::json!([2]));
        assert_eq!(rep.inputs_digest.len(), 64);
        assert_ne!(inputs_digest(&[[1.0, 2.0]]), inputs_digest(&[[1.0], [2.0]]));
    }

    fn sample(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-100.0f64..100.0, n)
    }

    proptest! {
        #[test]
        fn two_group_anova_is_squared_t(a in sample(5), b in sample(7)) {
            let f = one_way_anova(&[a.clone(), b.clone()]).unwrap();
            let t = t_test_two_sample(&a, &b).unwrap();
            prop_assert!((f.f_statistic - t.t_statistic.powi(2)).abs() <= 1e-8 * f.f_statistic.max(1.0));
            prop_assert!((f.p_value - t.p_value).abs() < 1e-9);
        }

        #[test]
        fn ols_equivariance(x in sample(8), y in sample(8), c in 0.1f64..10.0, s in -50.0f64..50.0) {
            prop_assume!(sum_sq_dev(&x) > 1e-3 && sum_sq_dev(&y) > 1e-3);
            let base = ols(&x, &y).unwrap();
            let ys: Vec<f64> = y.iter().map(|v| v * c).collect();
            let scaled = ols(&x, &ys).unwrap();
            prop_assert!((scaled.slope - c * base.slope).abs() < 1e-8 * (1.0 + base.slope.abs() * c));
            prop_assert!((scaled.r_squared - base.r_squared).abs() < 1e-9);
            prop_assert!((scaled.p_value - base.p_value).abs() < 1e-9);
            let xs: Vec<f64> = x.iter().map(|v| v + s).collect();
            let shifted = ols(&xs, &y).unwrap();
            prop_assert!((shifted.slope - base.slope).abs() < 1e-8 * (1.0 + base.slope.abs()));
            prop_assert!((shifted.intercept - (base.intercept - base.slope * s)).abs() < 1e-6 * (1.0 + base.intercept.abs()));
            prop_assert!((shifted.p_value - base.p_value).abs() < 1e-9);
        }

        #[test]
        fn rm_anova_permutation_invariant(flat in sample(12), rot in 0usize..4, col in 0usize..3) {
            let table: Vec<Vec<f64>> = flat.chunks(3).map(|c| c.to_vec()).collect();
            let base = rm_anova(&table).unwrap();
            let mut rows = table.clone();
            rows.rotate_left(rot);
            let mut cols = rows.clone();
            for r in &mut cols {
                r.rotate_left(col);
            }
            let p = rm_anova(&cols).unwrap();
            prop_assert!((p.p_value - base.p_value).abs() < 1e-10);
        }

        #[test]
        fn p_values_in_unit_interval(a in sample(4), b in sample(4)) {
            let t = t_test_two_sample(&a, &b).unwrap();
            prop_assert!(t.p_value > 0.0 && t.p_value <= 1.0);
        }
    }
}
