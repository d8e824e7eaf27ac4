use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::cohort::{parse_cohort_name, Relation};
use crate::corpus::Label;
use crate::metrics::PerformanceRecord;
use crate::stats::{
    ols, one_way_anova, rm_anova, t_test_one_sample, t_test_two_sample, AnovaResult, OlsResult, StatReport,
    TTestResult,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntraRecord {
    pub dataset: String,
    pub intra_mcd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRegression {
    pub label: Label,
    pub ols: OlsResult,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelationTriple {
    pub native: f64,
    pub partial: f64,
    pub external: f64,
}

impl RelationTriple {
    pub fn as_array(&self) -> [f64; 3] {
        [self.native, self.partial, self.external]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMean {
    pub relation: Relation,
    pub count: usize,
    pub mean: f64,
}

/// Macro-AUC of one single-specialty model, averaged over the test sets in
/// each relation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleSpecialtyRow {
    pub train_set: String,
    pub macro_auc: RelationTriple,
}

/// Macro-AUC on one test set, averaged over the models trained on `k`
/// specialties; `by_train_size[k - 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSizeRow {
    pub test_set: String,
    pub by_train_size: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub auc_vs_mcd: Vec<LabelRegression>,
    pub ppv_vs_mcd: Vec<LabelRegression>,
    pub mcd_by_relation: Vec<GroupMean>,
    pub mcd_anova: AnovaResult,
    /// Pooled two-sample test of intra-dataset MCDs against native-pair MCDs.
    pub intra_vs_native: TTestResult,
    /// One-sample test of intra-dataset MCDs against the native-pair mean.
    pub intra_vs_native_mean: TTestResult,
    pub single_specialty: Vec<SingleSpecialtyRow>,
    pub single_specialty_means: RelationTriple,
    pub single_specialty_anova: AnovaResult,
    pub train_size: Vec<TrainSizeRow>,
    /// Whether every test set's macro-AUC is non-decreasing in the number of
    /// training specialties.
    pub train_size_monotone: bool,
    pub train_size_anova: AnovaResult,
    pub reports: Vec<StatReport>,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn specialties(name: &str) -> Result<BTreeSet<crate::corpus::Specialty>, ExperimentError> {
    parse_cohort_name(name)
        .map(|(s, _)| s)
        .map_err(|e| ExperimentError::Analysis(e.to_string()))
}

/// Names in first-appearance order.
fn ordered_unique<'a>(names: impl Iterator<Item = &'a str>) -> Vec<&'a str> {
    let mut seen = BTreeSet::new();
    names.filter(|n| seen.insert(*n)).collect()
}

fn regressions(
    records: &[PerformanceRecord],
    metric: fn(&PerformanceRecord) -> [f64; 3],
) -> Result<Vec<LabelRegression>, ExperimentError> {
    let x: Vec<f64> = records.iter().map(|r| r.mcd).collect();
    Label::ALL
        .iter()
        .map(|&label| {
            let y: Vec<f64> = records.iter().map(|r| metric(r)[label.index()]).collect();
            Ok(LabelRegression { label, ols: ols(&x, &y)? })
        })
        .collect()
}

/// The statistical battery over a set of train/test performance records and
/// intra-dataset distances.
pub fn analyze(records: &[PerformanceRecord], intra: &[IntraRecord]) -> Result<Analysis, ExperimentError> {
    let mut reports = Vec::new();
    let mcds: Vec<f64> = records.iter().map(|r| r.mcd).collect();

    let auc_vs_mcd = regressions(records, PerformanceRecord::aucs)?;
    let ppv_vs_mcd = regressions(records, PerformanceRecord::ppvs)?;
    for (kind, regs, metric) in [
        ("auc", &auc_vs_mcd, PerformanceRecord::aucs as fn(&PerformanceRecord) -> [f64; 3]),
        ("ppv", &ppv_vs_mcd, PerformanceRecord::ppvs),
    ] {
        for r in regs {
            let y: Vec<f64> = records.iter().map(|x| metric(x)[r.label.index()]).collect();
            let mut rep = StatReport::ols(&r.ols, &[mcds.as_slice(), y.as_slice()]);
            rep.test = format!("ols_{kind}_{}_vs_mcd", r.label.as_str());
            reports.push(rep);
        }
    }

    let relations = [Relation::Native, Relation::Partial, Relation::External];
    let groups: Vec<Vec<f64>> = relations
        .iter()
        .map(|&rel| records.iter().filter(|r| r.relation == rel).map(|r| r.mcd).collect())
        .collect();
    let mcd_anova = one_way_anova(&groups)?;
    reports.push(StatReport::anova("anova_mcd_by_relation", &mcd_anova, &groups));
    let mcd_by_relation = relations
        .iter()
        .zip(&groups)
        .map(|(&relation, g)| GroupMean { relation, count: g.len(), mean: mean(g) })
        .collect();

    let intra_values: Vec<f64> = intra.iter().map(|r| r.intra_mcd).collect();
    let native = &groups[0];
    let intra_vs_native = t_test_two_sample(&intra_values, native)?;
    reports.push(StatReport::t_test("t_intra_vs_native", &intra_vs_native, &[&intra_values, native]));
    let native_mean = mean(native);
    let intra_vs_native_mean = t_test_one_sample(&intra_values, native_mean)?;
    reports.push(StatReport::t_test(
        "t_intra_vs_native_mean",
        &intra_vs_native_mean,
        &[intra_values.as_slice(), &[native_mean]],
    ));

    // Single-specialty models by relation.
    let trains = ordered_unique(records.iter().map(|r| r.train_set.as_str()));
    let mut single_specialty = Vec::new();
    for &train in &trains {
        if specialties(train)?.len() != 1 {
            continue;
        }
        let mut cells = [0.0; 3];
        for (k, &rel) in relations.iter().enumerate() {
            let v: Vec<f64> = records
                .iter()
                .filter(|r| r.train_set == train && r.relation == rel)
                .map(|r| r.macro_auc)
                .collect();
            if v.is_empty() {
                return Err(ExperimentError::Analysis(format!("{train} has no {rel} test sets")));
            }
            cells[k] = mean(&v);
        }
        single_specialty.push(SingleSpecialtyRow {
            train_set: train.to_string(),
            macro_auc: RelationTriple { native: cells[0], partial: cells[1], external: cells[2] },
        });
    }
    let table: Vec<[f64; 3]> = single_specialty.iter().map(|r| r.macro_auc.as_array()).collect();
    let single_specialty_anova = rm_anova(&table)?;
    reports.push(StatReport::anova("rm_anova_single_specialty_by_relation", &single_specialty_anova, &table));
    let col = |k: usize| mean(&table.iter().map(|r| r[k]).collect::<Vec<_>>());
    let single_specialty_means = RelationTriple { native: col(0), partial: col(1), external: col(2) };

    // Test sets by number of training specialties.
    let mut sizes = BTreeSet::new();
    for &t in &trains {
        sizes.insert(specialties(t)?.len());
    }
    let max_size = sizes.iter().copied().max().unwrap_or(0);
    if sizes != (1..=max_size).collect() || max_size < 2 {
        return Err(ExperimentError::Analysis(format!("training set sizes {sizes:?} are not 1..k with k >= 2")));
    }
    let mut train_size = Vec::new();
    for test in ordered_unique(records.iter().map(|r| r.test_set.as_str())) {
        let mut by_size = vec![Vec::new(); max_size];
        for r in records.iter().filter(|r| r.test_set == test) {
            by_size[specialties(&r.train_set)?.len() - 1].push(r.macro_auc);
        }
        if by_size.iter().any(|v| v.is_empty()) {
            return Err(ExperimentError::Analysis(format!("{test} lacks a model of some training size")));
        }
        train_size.push(TrainSizeRow {
            test_set: test.to_string(),
            by_train_size: by_size.iter().map(|v| mean(v)).collect(),
        });
    }
    let train_size_monotone = train_size
        .iter()
        .all(|r| r.by_train_size.windows(2).all(|w| w[1] >= w[0]));
    let table: Vec<&[f64]> = train_size.iter().map(|r| r.by_train_size.as_slice()).collect();
    let train_size_anova = rm_anova(&table)?;
    reports.push(StatReport::anova("rm_anova_test_set_by_train_size", &train_size_anova, &table));

    Ok(Analysis {
        auc_vs_mcd,
        ppv_vs_mcd,
        mcd_by_relation,
        mcd_anova,
        intra_vs_native,
        intra_vs_native_mean,
        single_specialty,
        single_specialty_means,
        single_specialty_anova,
        train_size,
        train_size_monotone,
        train_size_anova,
        reports,
    })
}
