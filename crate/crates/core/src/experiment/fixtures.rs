use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use super::analysis::{analyze, Analysis, IntraRecord};
use super::ExperimentError;
use crate::cohort::{parse_cohort_name, relation, Role};
use crate::metrics::{macro_average_auc, PerformanceRecord};

const AUC_FILE: &str = "auc_by_pair.csv";
const PPV_FILE: &str = "ppv_by_pair.csv";
const INTRA_FILE: &str = "intra_mcd.csv";

const BUNDLED_AUC: &str = include_str!("../../fixtures/auc_by_pair.csv");
const BUNDLED_PPV: &str = include_str!("../../fixtures/ppv_by_pair.csv");
const BUNDLED_INTRA: &str = include_str!("../../fixtures/intra_mcd.csv");

/// Published per-pair results joined into performance records, plus the
/// intra-dataset distances.
#[derive(Debug, Clone, PartialEq)]
pub struct FixtureSet {
    pub records: Vec<PerformanceRecord>,
    pub intra: Vec<IntraRecord>,
}

#[derive(Deserialize)]
struct AucRow {
    train_set: String,
    test_set: String,
    mcd: f64,
    auc_yes: f64,
    auc_no: f64,
    auc_maybe: f64,
}

#[derive(Deserialize)]
struct PpvRow {
    train_set: String,
    test_set: String,
    mcd: f64,
    ppv_yes: f64,
    ppv_no: f64,
    ppv_maybe: f64,
}

fn fixture_err(file: &str, row: usize, message: impl Into<String>) -> ExperimentError {
    ExperimentError::Fixture { file: file.to_string(), row, message: message.into() }
}

/// Parses CSV rows; `row` numbers count the header as row 1.
fn parse<T: serde::de::DeserializeOwned>(file: &str, text: &str) -> Result<Vec<(usize, T)>, ExperimentError> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (i, row) in reader.deserialize().enumerate() {
        let row: T = row.map_err(|e| fixture_err(file, i + 2, e.to_string()))?;
        out.push((i + 2, row));
    }
    Ok(out)
}

fn check_unit(file: &str, row: usize, name: &str, v: f64) -> Result<(), ExperimentError> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(fixture_err(file, row, format!("{name} = {v} outside [0, 1]")))
    }
}

fn parse_fixtures(auc: &str, ppv: &str, intra: &str) -> Result<FixtureSet, ExperimentError> {
    let ppv_rows = parse::<PpvRow>(PPV_FILE, ppv)?;
    let mut ppv_by_pair = BTreeMap::new();
    for (row, p) in ppv_rows {
        for (name, v) in [("ppv_yes", p.ppv_yes), ("ppv_no", p.ppv_no), ("ppv_maybe", p.ppv_maybe)] {
            check_unit(PPV_FILE, row, name, v)?;
        }
        let key = (p.train_set.clone(), p.test_set.clone());
        if ppv_by_pair.insert(key, (row, p)).is_some() {
            return Err(fixture_err(PPV_FILE, row, "duplicate train/test pair"));
        }
    }

    let mut records = Vec::new();
    for (row, a) in parse::<AucRow>(AUC_FILE, auc)? {
        for (name, v) in [("auc_yes", a.auc_yes), ("auc_no", a.auc_no), ("auc_maybe", a.auc_maybe), ("mcd", a.mcd)] {
            check_unit(AUC_FILE, row, name, v)?;
        }
        let (train, train_role) = parse_cohort_name(&a.train_set).map_err(|e| fixture_err(AUC_FILE, row, e.to_string()))?;
        let (test, test_role) = parse_cohort_name(&a.test_set).map_err(|e| fixture_err(AUC_FILE, row, e.to_string()))?;
        if train_role != Role::Train || test_role != Role::Test {
            return Err(fixture_err(AUC_FILE, row, "expected a train set followed by a test set"));
        }
        let rel = relation(&train, &test).map_err(|e| fixture_err(AUC_FILE, row, e.to_string()))?;
        let (_, p) = ppv_by_pair
            .remove(&(a.train_set.clone(), a.test_set.clone()))
            .ok_or_else(|| fixture_err(AUC_FILE, row, format!("no {PPV_FILE} row for this pair")))?;
        if (p.mcd - a.mcd).abs() > 1e-9 {
            return Err(fixture_err(AUC_FILE, row, format!("mcd {} disagrees with {PPV_FILE} ({})", a.mcd, p.mcd)));
        }
        let aucs = [a.auc_yes, a.auc_no, a.auc_maybe];
        records.push(PerformanceRecord {
            train_set: a.train_set,
            test_set: a.test_set,
            relation: rel,
            mcd: a.mcd,
            auc_yes: a.auc_yes,
            auc_no: a.auc_no,
            auc_maybe: a.auc_maybe,
            ppv_yes: p.ppv_yes,
            ppv_no: p.ppv_no,
            ppv_maybe: p.ppv_maybe,
            macro_auc: macro_average_auc(aucs),
        });
    }
    if let Some((_, (row, _))) = ppv_by_pair.into_iter().next() {
        return Err(fixture_err(PPV_FILE, row, format!("pair missing from {AUC_FILE}")));
    }

    let mut intra_out = Vec::new();
    for (row, r) in parse::<IntraRecord>(INTRA_FILE, intra)? {
        check_unit(INTRA_FILE, row, "intra_mcd", r.intra_mcd)?;
        parse_cohort_name(&r.dataset).map_err(|e| fixture_err(INTRA_FILE, row, e.to_string()))?;
        intra_out.push(r);
    }
    Ok(FixtureSet { records, intra: intra_out })
}

/// Loads the reference tables from `dir`, or the copies bundled with the
/// crate when `dir` is `None`.
pub fn load_fixtures(dir: Option<&Path>) -> Result<FixtureSet, ExperimentError> {
    match dir {
        None => parse_fixtures(BUNDLED_AUC, BUNDLED_PPV, BUNDLED_INTRA),
        Some(dir) => {
            let read = |name: &str| {
                let path = dir.join(name);
                std::fs::read_to_string(&path).map_err(|_| ExperimentError::MissingPath {
                    field: "fixture".into(),
                    path,
                })
            };
            parse_fixtures(&read(AUC_FILE)?, &read(PPV_FILE)?, &read(INTRA_FILE)?)
        }
    }
}

/// Runs the full statistical analysis on the reference tables alone.
pub fn reproduce_reference_stats(dir: Option<&Path>) -> Result<(FixtureSet, Analysis), ExperimentError> {
    let fixtures = load_fixtures(dir)?;
    let analysis = analyze(&fixtures.records, &fixtures.intra)?;
    Ok((fixtures, analysis))
}
