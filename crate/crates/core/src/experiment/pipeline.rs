use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::analysis::{analyze, Analysis, IntraRecord};
use super::config::ExperimentConfig;
use super::report::write_report;
use super::{BoxError, ExperimentError};
use crate::classifier::{train_head, HeadCheckpoint, LabeledData, TrainConfig};
use crate::cohort::{build_cohorts, relation, Cohort, CohortSet, Relation};
use crate::corpus::{
    apply_annotations, extract_all, read_annotations, read_notes, read_records, write_records, Label, Lexicon,
    SentenceRecord,
};
use crate::distance::{summarize, summarize_intra, write_summaries_csv, DistanceSummary};
use crate::embedding::{keyed_seed, load_embeddings, save_embeddings, EmbeddingMatrix};
use crate::metrics::{auc, macro_average_auc, ppv_at_recall, PerformanceRecord};
use crate::projection::{pca_fit, pca_transform, tsne, write_projection_csv, ProjectionRow};

/// Present in the output directory while a stage runs and after a stage
/// fails; its contents name the stage.
pub const STALE_MARKER: &str = "STALE";
const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Extract,
    Embed,
    Cohorts,
    Train,
    Evaluate,
    Distances,
    Stats,
    Report,
    Project,
}

impl Stage {
    /// Stages run by [`run_experiment`], in order.
    pub const PIPELINE: [Stage; 8] = [
        Stage::Extract,
        Stage::Embed,
        Stage::Cohorts,
        Stage::Train,
        Stage::Evaluate,
        Stage::Distances,
        Stage::Stats,
        Stage::Report,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Extract => "extract",
            Stage::Embed => "embed",
            Stage::Cohorts => "cohorts",
            Stage::Train => "train",
            Stage::Evaluate => "evaluate",
            Stage::Distances => "distances",
            Stage::Stats => "stats",
            Stage::Report => "report",
            Stage::Project => "project",
        }
    }

    /// Stages whose artifacts this stage reads.
    pub fn inputs(self) -> &'static [Stage] {
        match self {
            Stage::Extract => &[],
            Stage::Embed => &[Stage::Extract],
            Stage::Cohorts => &[Stage::Extract],
            Stage::Train => &[Stage::Extract, Stage::Embed, Stage::Cohorts],
            Stage::Evaluate => &[Stage::Extract, Stage::Embed, Stage::Cohorts, Stage::Train],
            Stage::Distances => &[Stage::Embed, Stage::Cohorts],
            Stage::Stats => &[Stage::Evaluate, Stage::Distances],
            Stage::Report => &[Stage::Stats],
            Stage::Project => &[Stage::Extract, Stage::Embed],
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::PIPELINE
            .iter()
            .chain(&[Stage::Project])
            .copied()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| ExperimentError::Config(format!("unknown stage {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub path: String,
    pub sha256: String,
}

/// Record of the artifacts each completed stage produced under one config.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_digest: String,
    pub stages: BTreeMap<Stage, Vec<ArtifactEntry>>,
}

impl Manifest {
    pub fn load(out: &Path) -> Option<Manifest> {
        let text = fs::read_to_string(out.join(MANIFEST)).ok()?;
        serde_json::from_str(&text).ok()
    }

    fn save(&self, out: &Path) -> Result<(), ExperimentError> {
        let mut text = serde_json::to_string_pretty(self).expect("serializable");
        text.push('\n');
        fs::write(out.join(MANIFEST), text)?;
        Ok(())
    }

    /// Whether `stage` completed and its files still hash to the recorded
    /// values.
    fn intact(&self, out: &Path, stage: Stage) -> bool {
        self.stages.get(&stage).is_some_and(|files| {
            files
                .iter()
                .all(|a| file_digest(&out.join(&a.path)).is_ok_and(|d| d == a.sha256))
        })
    }
}

fn file_digest(path: &Path) -> std::io::Result<String> {
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config_digest: String,
    pub records: Vec<PerformanceRecord>,
    pub intra: Vec<IntraRecord>,
    pub analysis: Analysis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ExtractionSummary {
    records: usize,
    labeled: usize,
    unlabeled: usize,
    skipped_documents: usize,
    over_length: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TrainingSummary {
    train_set: String,
    examples: usize,
    selected_epoch: usize,
    train_loss: Vec<f64>,
    val_loss: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Evaluation {
    train_set: String,
    test_set: String,
    relation: Relation,
    auc: [f64; 3],
    ppv: [f64; 3],
}

/// File names under the output directory.
mod files {
    pub const SENTENCES: &str = "sentences.jsonl";
    pub const EXTRACTION: &str = "extraction.json";
    pub const EMBEDDINGS: &str = "embeddings.emb";
    pub const COHORTS: &str = "cohorts.json";
    pub const MODELS: &str = "models";
    pub const TRAINING: &str = "training.json";
    pub const EVALUATIONS: &str = "evaluations.json";
    pub const DISTANCES_CSV: &str = "distances.csv";
    pub const DISTANCES: &str = "distances.json";
    pub const RESULTS: &str = "results.json";
    pub const REPORT: &str = "report";
    pub const PCA_MODEL: &str = "pca_model.json";
    pub const PCA: &str = "projection_pca.csv";
    pub const TSNE: &str = "projection_tsne.csv";
    pub const TSNE_SUMMARY: &str = "tsne_summary.json";
}

fn model_file(train_set: &str) -> String {
    format!("{}/{}.json", files::MODELS, train_set.replace(' ', "_"))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), BoxError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, BoxError> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

struct Context<'a> {
    cfg: &'a ExperimentConfig,
    out: &'a Path,
}

impl Context<'_> {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn records(&self) -> Result<Vec<SentenceRecord>, BoxError> {
        Ok(read_records(BufReader::new(File::open(self.path(files::SENTENCES))?))?)
    }

    fn embeddings(&self) -> Result<EmbeddingMatrix, BoxError> {
        Ok(load_embeddings(self.path(files::EMBEDDINGS))?)
    }

    fn cohorts(&self) -> Result<CohortSet, BoxError> {
        read_json(&self.path(files::COHORTS))
    }

    fn labels(&self) -> Result<HashMap<String, Label>, BoxError> {
        Ok(self
            .records()?
            .into_iter()
            .filter_map(|r| r.label.map(|l| (r.sentence_id, l)))
            .collect())
    }
}

fn labeled_data(
    cohort: &Cohort,
    embeddings: &EmbeddingMatrix,
    labels: &HashMap<String, Label>,
) -> Result<LabeledData, BoxError> {
    let m = embeddings.select(&cohort.sentence_ids)?;
    let y = cohort
        .sentence_ids
        .iter()
        .map(|id| labels.get(id).copied().ok_or_else(|| format!("sentence {id} has no label")))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(LabeledData::from_matrix(&m, y)?)
}

fn stage_extract(cx: &Context) -> Result<Vec<String>, BoxError> {
    let notes = read_notes(BufReader::new(File::open(&cx.cfg.corpus.notes)?))?;
    let lexicons = cx
        .cfg
        .specialties()?
        .into_iter()
        .map(|(s, path)| Lexicon::load(s, path))
        .collect::<Result<Vec<_>, _>>()?;
    let extraction = extract_all(&notes, &lexicons, cx.cfg.max_tokens);
    let annotations = read_annotations(BufReader::new(File::open(&cx.cfg.corpus.annotations)?))?;
    let mut records = extraction.records;
    let total = records.len();
    let unlabeled = apply_annotations(&mut records, &annotations);
    if unlabeled > 0 {
        log::warn!("{unlabeled} of {total} extracted sentences have no annotation and are dropped");
    }
    records.retain(|r| r.label.is_some());
    if records.is_empty() {
        return Err("no labeled sentences".into());
    }
    let mut w = BufWriter::new(File::create(cx.path(files::SENTENCES))?);
    write_records(&mut w, &records)?;
    w.flush()?;
    write_json(
        &cx.path(files::EXTRACTION),
        &ExtractionSummary {
            records: total,
            labeled: records.len(),
            unlabeled,
            skipped_documents: extraction.skipped_documents,
            over_length: extraction.over_length,
        },
    )?;
    Ok(vec![files::SENTENCES.into(), files::EXTRACTION.into()])
}

fn stage_embed(cx: &Context) -> Result<Vec<String>, BoxError> {
    let unique: BTreeMap<String, String> = cx.records()?.into_iter().map(|r| (r.sentence_id, r.text)).collect();
    let texts: Vec<String> = unique.into_values().collect();
    let matrix = cx.cfg.embedding.embed(&texts)?;
    save_embeddings(&matrix, cx.path(files::EMBEDDINGS))?;
    Ok(vec![files::EMBEDDINGS.into()])
}

fn stage_cohorts(cx: &Context) -> Result<Vec<String>, BoxError> {
    let cohorts = build_cohorts(&cx.records()?, cx.cfg.train_fraction, cx.cfg.seed)?;
    write_json(&cx.path(files::COHORTS), &cohorts)?;
    Ok(vec![files::COHORTS.into()])
}

fn stage_train(cx: &Context) -> Result<Vec<String>, BoxError> {
    let (embeddings, cohorts, labels) = (cx.embeddings()?, cx.cohorts()?, cx.labels()?);
    let trained = cohorts
        .train
        .par_iter()
        .map(|cohort| -> Result<_, BoxError> {
            let data = labeled_data(cohort, &embeddings, &labels)?;
            let cfg = TrainConfig { seed: keyed_seed(cx.cfg.seed, &cohort.name), ..cx.cfg.train.clone() };
            let report = train_head(&data, &cfg).map_err(|e| format!("{}: {e}", cohort.name))?;
            Ok((cohort, data.len(), report))
        })
        .collect::<Result<Vec<_>, _>>()?;
    fs::create_dir_all(cx.path(files::MODELS))?;
    let mut written = Vec::new();
    let mut summaries = Vec::new();
    for (cohort, examples, report) in trained {
        let name = model_file(&cohort.name);
        write_json(&cx.path(&name), &HeadCheckpoint::new(&report.head, report.selected_epoch))?;
        written.push(name);
        summaries.push(TrainingSummary {
            train_set: cohort.name.clone(),
            examples,
            selected_epoch: report.selected_epoch,
            train_loss: report.train_loss,
            val_loss: report.val_loss,
        });
    }
    write_json(&cx.path(files::TRAINING), &summaries)?;
    written.push(files::TRAINING.into());
    Ok(written)
}

fn stage_evaluate(cx: &Context) -> Result<Vec<String>, BoxError> {
    let (embeddings, cohorts, labels) = (cx.embeddings()?, cx.cohorts()?, cx.labels()?);
    let heads = cohorts
        .train
        .iter()
        .map(|c| -> Result<_, BoxError> {
            let ckpt: HeadCheckpoint = read_json(&cx.path(&model_file(&c.name)))?;
            Ok(ckpt.into_head()?)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let tests = cohorts
        .test
        .iter()
        .map(|c| labeled_data(c, &embeddings, &labels))
        .collect::<Result<Vec<_>, _>>()?;
    let pairs: Vec<(usize, usize)> = (0..cohorts.train.len())
        .flat_map(|i| (0..cohorts.test.len()).map(move |j| (i, j)))
        .collect();
    let evaluations = pairs
        .par_iter()
        .map(|&(i, j)| -> Result<Evaluation, BoxError> {
            let (train, test) = (&cohorts.train[i], &cohorts.test[j]);
            let data = &tests[j];
            let probs = (0..data.len())
                .map(|k| heads[i].predict_proba(data.row(k)))
                .collect::<Result<Vec<_>, _>>()?;
            let mut aucs = [0.0; 3];
            let mut ppvs = [0.0; 3];
            for label in Label::ALL {
                let c = label.index();
                let scores: Vec<f64> = probs.iter().map(|p| p[c]).collect();
                let truth: Vec<bool> = data.labels().iter().map(|&l| l == label).collect();
                let context = |e: &dyn fmt::Display| format!("{} on {} ({}): {e}", train.name, test.name, label.as_str());
                aucs[c] = auc(&scores, &truth).map_err(|e| context(&e))?;
                ppvs[c] = ppv_at_recall(&scores, &truth, cx.cfg.recall_floor).map_err(|e| context(&e))?;
            }
            Ok(Evaluation {
                train_set: train.name.clone(),
                test_set: test.name.clone(),
                relation: relation(&train.specialties, &test.specialties)?,
                auc: aucs,
                ppv: ppvs,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    write_json(&cx.path(files::EVALUATIONS), &evaluations)?;
    Ok(vec![files::EVALUATIONS.into()])
}

fn stage_distances(cx: &Context) -> Result<Vec<String>, BoxError> {
    let (embeddings, cohorts) = (cx.embeddings()?, cx.cohorts()?);
    let matrices = cohorts
        .iter()
        .map(|c| embeddings.select(&c.sentence_ids))
        .collect::<Result<Vec<_>, _>>()?;
    let (train_m, test_m) = matrices.split_at(cohorts.train.len());
    let mut rows = Vec::new();
    for (train, a) in cohorts.train.iter().zip(train_m) {
        for (test, b) in cohorts.test.iter().zip(test_m) {
            let rel = relation(&train.specialties, &test.specialties)?;
            rows.push(summarize(&train.name, &test.name, rel, a, b)?);
        }
    }
    for (c, m) in cohorts.iter().zip(&matrices) {
        rows.push(summarize_intra(&c.name, m)?);
    }
    write_json(&cx.path(files::DISTANCES), &rows)?;
    write_summaries_csv(BufWriter::new(File::create(cx.path(files::DISTANCES_CSV))?), &rows)?;
    Ok(vec![files::DISTANCES.into(), files::DISTANCES_CSV.into()])
}

fn stage_stats(cx: &Context) -> Result<(Vec<String>, ExperimentResult), BoxError> {
    let evaluations: Vec<Evaluation> = read_json(&cx.path(files::EVALUATIONS))?;
    let distances: Vec<DistanceSummary> = read_json(&cx.path(files::DISTANCES))?;
    let cross: HashMap<(&str, &str), f64> = distances
        .iter()
        .filter(|d| d.relation != Relation::Intra)
        .map(|d| ((d.train_name.as_str(), d.test_name.as_str()), d.mcd))
        .collect();
    let records = evaluations
        .iter()
        .map(|e| -> Result<PerformanceRecord, BoxError> {
            let mcd = *cross
                .get(&(e.train_set.as_str(), e.test_set.as_str()))
                .ok_or_else(|| format!("no distance for {} on {}", e.train_set, e.test_set))?;
            Ok(PerformanceRecord {
                train_set: e.train_set.clone(),
                test_set: e.test_set.clone(),
                relation: e.relation,
                mcd,
                auc_yes: e.auc[0],
                auc_no: e.auc[1],
                auc_maybe: e.auc[2],
                ppv_yes: e.ppv[0],
                ppv_no: e.ppv[1],
                ppv_maybe: e.ppv[2],
                macro_auc: macro_average_auc(e.auc),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let intra: Vec<IntraRecord> = distances
        .iter()
        .filter(|d| d.relation == Relation::Intra)
        .map(|d| IntraRecord { dataset: d.train_name.clone(), intra_mcd: d.mcd })
        .collect();
    let analysis = analyze(&records, &intra)?;
    let result = ExperimentResult { config_digest: cx.cfg.digest(), records, intra, analysis };
    write_json(&cx.path(files::RESULTS), &result)?;
    Ok((vec![files::RESULTS.into()], result))
}

fn stage_report(cx: &Context) -> Result<Vec<String>, BoxError> {
    let result: ExperimentResult = read_json(&cx.path(files::RESULTS))?;
    let paths = write_report(&cx.path(files::REPORT), &result.records, &result.intra, &result.analysis)?;
    Ok(paths
        .iter()
        .map(|p| p.strip_prefix(cx.out).unwrap_or(p).to_string_lossy().into_owned())
        .collect())
}

fn stage_project(cx: &Context) -> Result<Vec<String>, BoxError> {
    let records = cx.records()?;
    let embeddings = cx.embeddings()?;
    let mut meta: BTreeMap<&str, &SentenceRecord> = BTreeMap::new();
    for r in &records {
        meta.entry(r.sentence_id.as_str()).or_insert(r);
    }
    let ids: Vec<&str> = meta.keys().copied().collect();
    let all = embeddings.select(&ids)?;

    let mut background = ids.clone();
    background.shuffle(&mut ChaCha8Rng::seed_from_u64(keyed_seed(cx.cfg.seed, "pca-background")));
    background.truncate(cx.cfg.projection.background_size.max(3));
    let model = pca_fit(&embeddings.select(&background)?)?;
    let pca = pca_transform(&model, &all)?;
    let tsne_out = tsne(&all, &cx.cfg.projection.tsne)?;

    let rows = |coords: &[[f64; 2]]| -> Vec<ProjectionRow> {
        ids.iter()
            .zip(coords)
            .map(|(id, c)| ProjectionRow {
                sentence_id: id.to_string(),
                x: c[0],
                y: c[1],
                note_type: meta[id].note_type.clone(),
                specialty: meta[id].specialty.name().to_string(),
            })
            .collect()
    };
    write_json(&cx.path(files::PCA_MODEL), &model)?;
    write_projection_csv(File::create(cx.path(files::PCA))?, &rows(&pca))?;
    write_projection_csv(File::create(cx.path(files::TSNE))?, &rows(&tsne_out.coords))?;
    write_json(
        &cx.path(files::TSNE_SUMMARY),
        &serde_json::json!({
            "perplexities": tsne_out.perplexities,
            "kl_history": tsne_out.kl_history,
        }),
    )?;
    Ok(vec![files::PCA_MODEL.into(), files::PCA.into(), files::TSNE.into(), files::TSNE_SUMMARY.into()])
}

fn execute(cx: &Context, stage: Stage) -> Result<(Vec<String>, Option<ExperimentResult>), BoxError> {
    Ok(match stage {
        Stage::Extract => (stage_extract(cx)?, None),
        Stage::Embed => (stage_embed(cx)?, None),
        Stage::Cohorts => (stage_cohorts(cx)?, None),
        Stage::Train => (stage_train(cx)?, None),
        Stage::Evaluate => (stage_evaluate(cx)?, None),
        Stage::Distances => (stage_distances(cx)?, None),
        Stage::Stats => {
            let (files, result) = stage_stats(cx)?;
            (files, Some(result))
        }
        Stage::Report => (stage_report(cx)?, None),
        Stage::Project => (stage_project(cx)?, None),
    })
}

fn write_marker(out: &Path, text: &str) -> Result<(), ExperimentError> {
    fs::write(out.join(STALE_MARKER), format!("{text}\n"))?;
    Ok(())
}

/// Runs one stage against the artifacts already in the output directory.
/// The stage's inputs must have been produced under the same config.
pub fn run_stage(cfg: &ExperimentConfig, stage: Stage) -> Result<Option<ExperimentResult>, ExperimentError> {
    cfg.validate()?;
    let out = cfg.output_dir.as_path();
    fs::create_dir_all(out)?;
    let digest = cfg.digest();
    let mut manifest = match Manifest::load(out) {
        Some(m) if m.config_digest == digest => m,
        _ => Manifest { config_digest: digest, stages: BTreeMap::new() },
    };
    for &input in stage.inputs() {
        if !manifest.intact(out, input) {
            return Err(ExperimentError::Stage {
                stage: stage.as_str(),
                source: format!("missing or modified output of stage {input}; run it first").into(),
            });
        }
    }

    write_marker(out, &format!("stage {stage} in progress"))?;
    let cx = Context { cfg, out };
    let (written, result) = match execute(&cx, stage) {
        Ok(r) => r,
        Err(source) => {
            write_marker(out, &format!("stage {stage} failed: {source}"))?;
            return Err(ExperimentError::Stage { stage: stage.as_str(), source });
        }
    };
    let entries = written
        .into_iter()
        .map(|path| Ok(ArtifactEntry { sha256: file_digest(&out.join(&path))?, path }))
        .collect::<Result<Vec<_>, std::io::Error>>()?;
    let changed = manifest.stages.get(&stage) != Some(&entries);
    manifest.stages.insert(stage, entries);
    if changed {
        // Anything that read the old outputs is no longer current.
        let mut stale = vec![stage];
        while let Some(s) = stale.pop() {
            for (&other, _) in manifest.stages.clone().iter() {
                if other.inputs().contains(&s) && manifest.stages.remove(&other).is_some() {
                    stale.push(other);
                }
            }
        }
    }
    manifest.save(out)?;
    fs::remove_file(out.join(STALE_MARKER))?;
    Ok(result)
}

/// Extraction through statistics and report, persisting every intermediate
/// artifact under the output directory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult, ExperimentError> {
    cfg.validate()?;
    let mut result = None;
    for stage in Stage::PIPELINE {
        if let Some(r) = run_stage(cfg, stage)? {
            result = Some(r);
        }
    }
    Ok(result.expect("stats stage yields a result"))
}
