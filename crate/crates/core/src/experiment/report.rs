use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::analysis::{Analysis, IntraRecord, LabelRegression};
use super::ExperimentError;
use crate::metrics::{write_performance_csv, PerformanceRecord};

fn regression_csv(rows: &[LabelRegression]) -> String {
    let mut s = String::from("label,slope,intercept,r_squared,p_value,n\n");
    for r in rows {
        let o = &r.ols;
        let _ = writeln!(
            s,
            "{},{:.6},{:.6},{:.6},{:.6e},{}",
            r.label.as_str(),
            o.slope,
            o.intercept,
            o.r_squared,
            o.p_value,
            o.n
        );
    }
    s
}

fn json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

/// Writes one CSV or JSON file per table and figure; returns the paths in
/// write order.
pub fn write_report(
    dir: &Path,
    records: &[PerformanceRecord],
    intra: &[IntraRecord],
    analysis: &Analysis,
) -> Result<Vec<PathBuf>, ExperimentError> {
    fs::create_dir_all(dir)?;
    let mut files: Vec<(&str, String)> = Vec::new();

    let mut perf = Vec::new();
    write_performance_csv(&mut perf, records).map_err(|e| ExperimentError::Analysis(e.to_string()))?;
    files.push(("performance.csv", String::from_utf8(perf).expect("ascii")));

    let mut s = String::from("dataset,intra_mcd\n");
    for r in intra {
        let _ = writeln!(s, "{},{:.6}", r.dataset, r.intra_mcd);
    }
    files.push(("intra_mcd.csv", s));

    files.push(("auc_vs_mcd.csv", regression_csv(&analysis.auc_vs_mcd)));
    files.push(("ppv_vs_mcd.csv", regression_csv(&analysis.ppv_vs_mcd)));

    let mut s = String::from("relation,count,mean_mcd\n");
    for g in &analysis.mcd_by_relation {
        let _ = writeln!(s, "{},{},{:.6}", g.relation, g.count, g.mean);
    }
    files.push(("mcd_by_relation.csv", s));

    let mut s = String::from("train_set,native,partial,external\n");
    for r in &analysis.single_specialty {
        let m = &r.macro_auc;
        let _ = writeln!(s, "{},{:.6},{:.6},{:.6}", r.train_set, m.native, m.partial, m.external);
    }
    files.push(("single_specialty_by_relation.csv", s));

    let k = analysis.train_size.first().map_or(0, |r| r.by_train_size.len());
    let mut s = String::from("test_set");
    for i in 1..=k {
        let _ = write!(s, ",train_size_{i}");
    }
    s.push('\n');
    for r in &analysis.train_size {
        s.push_str(&r.test_set);
        for v in &r.by_train_size {
            let _ = write!(s, ",{v:.6}");
        }
        s.push('\n');
    }
    files.push(("test_set_by_train_size.csv", s));

    files.push(("stat_tests.json", json(&analysis.reports)));
    files.push(("analysis.json", json(analysis)));

    let mut paths = Vec::new();
    for (name, body) in files {
        let path = dir.join(name);
        fs::write(&path, body)?;
        paths.push(path);
    }
    Ok(paths)
}
