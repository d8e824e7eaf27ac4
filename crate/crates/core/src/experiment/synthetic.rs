//! Synthetic three-specialty corpus for exercising the pipeline without
//! clinical data.
//!
//! Each sentence mixes specialty vocabulary, one lexicon term, label cue
//! words, and shared filler. Most label cues are specialty-specific and a
//! minority are shared, so a model transfers only partly to specialties it
//! did not see.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{CorpusPaths, ExperimentConfig, ProjectionConfig};
use super::ExperimentError;
use crate::classifier::TrainConfig;
use crate::cohort::DEFAULT_TRAIN_FRACTION;
use crate::corpus::{sentence_id, Annotation, Label, NoteDocument, Specialty, DEFAULT_MAX_TOKENS};
use crate::embedding::EmbeddingSource;

const SYLLABLES: [&str; 8] = ["ka", "lo", "mi", "ne", "ru", "ta", "vi", "so"];
const NOTE_TYPES: [&str; 4] = ["Nursing", "Physician", "Radiology", "Discharge summary"];
const SENTENCES_PER_NOTE: usize = 5;
const EMBEDDING_DIM: usize = 96;

const SHARED_CUES: [[&str; 2]; 3] = [["confirmed", "positive"], ["denies", "negative"], ["possible", "suspected"]];

/// Probability that a sentence carries a specialty-specific cue, and that
/// such a cue matches the true label.
const SPECIFIC_CUE: (f64, f64) = (0.9, 0.85);
/// The same for the shared cue words.
const SHARED_CUE: (f64, f64) = (0.45, 0.8);

struct Profile {
    specialty: Specialty,
    tag: &'static str,
    terms: &'static [&'static str],
}

const PROFILES: [Profile; 3] = [
    Profile {
        specialty: Specialty::Oncology,
        tag: "onc",
        terms: &["breast cancer", "lymphoma", "metastatic carcinoma", "leukemia"],
    },
    Profile {
        specialty: Specialty::Cardiology,
        tag: "card",
        terms: &["heart failure", "atrial fibrillation", "myocardial infarction", "cardiomyopathy"],
    },
    Profile {
        specialty: Specialty::Pulmonology,
        tag: "pulm",
        terms: &["pneumonia", "copd", "pulmonary embolism", "asthma"],
    },
];

fn vocabulary(tag: &str) -> Vec<String> {
    let mut out = Vec::new();
    for a in SYLLABLES {
        for b in SYLLABLES {
            out.push(format!("{tag}{a}{b}"));
        }
    }
    out
}

fn specific_cue(tag: &str, label: Label, k: usize) -> String {
    format!("{tag}{}{k}", label.as_str())
}

fn draw_label(rng: &mut ChaCha8Rng) -> Label {
    match rng.random_range(0.0..1.0) {
        x if x < 0.5 => Label::Yes,
        x if x < 0.8 => Label::No,
        _ => Label::Maybe,
    }
}

fn other_label(rng: &mut ChaCha8Rng, label: Label) -> Label {
    let others: Vec<Label> = Label::ALL.into_iter().filter(|&l| l != label).collect();
    *others.choose(rng).expect("two other labels")
}

/// Generated notes, their sentence annotations, and lexicon terms.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub notes: Vec<NoteDocument>,
    pub annotations: Vec<Annotation>,
    pub lexicons: Vec<(Specialty, Vec<String>)>,
}

/// A corpus with `per_specialty` sentences for each of three specialties.
pub fn generate(seed: u64, per_specialty: usize) -> SyntheticCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let filler = vocabulary("gen");
    let mut notes = Vec::new();
    let mut labels: BTreeMap<String, Label> = BTreeMap::new();
    for profile in &PROFILES {
        let vocab = vocabulary(profile.tag);
        let mut sentences = Vec::new();
        for _ in 0..per_specialty {
            let label = draw_label(&mut rng);
            let mut words: Vec<String> = Vec::new();
            for _ in 0..rng.random_range(3..=5) {
                words.push(vocab.choose(&mut rng).expect("non-empty").clone());
            }
            words.push(profile.terms.choose(&mut rng).expect("non-empty").to_string());
            if rng.random_bool(SPECIFIC_CUE.0) {
                let l = if rng.random_bool(SPECIFIC_CUE.1) { label } else { other_label(&mut rng, label) };
                words.push(specific_cue(profile.tag, l, rng.random_range(0..3)));
            }
            if rng.random_bool(SHARED_CUE.0) {
                let l = if rng.random_bool(SHARED_CUE.1) { label } else { other_label(&mut rng, label) };
                words.push(SHARED_CUES[l.index()].choose(&mut rng).expect("non-empty").to_string());
            }
            for _ in 0..rng.random_range(2..=4) {
                words.push(filler.choose(&mut rng).expect("non-empty").clone());
            }
            let mut text = words.join(" ");
            text[..1].make_ascii_uppercase();
            text.push('.');
            labels.entry(sentence_id(&text)).or_insert(label);
            sentences.push(text);
        }
        for (i, chunk) in sentences.chunks(SENTENCES_PER_NOTE).enumerate() {
            notes.push(NoteDocument {
                doc_id: format!("{}-{i:05}", profile.tag),
                note_type: NOTE_TYPES.choose(&mut rng).expect("non-empty").to_string(),
                text: chunk.join(" "),
            });
        }
    }
    SyntheticCorpus {
        notes,
        annotations: labels.into_iter().map(|(sentence_id, label)| Annotation { sentence_id, label }).collect(),
        lexicons: PROFILES
            .iter()
            .map(|p| (p.specialty.clone(), p.terms.iter().map(|t| t.to_string()).collect()))
            .collect(),
    }
}

fn write_jsonl<T: serde::Serialize>(path: &Path, items: &[T]) -> Result<(), ExperimentError> {
    let mut w = std::io::BufWriter::new(fs::File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut w, item).map_err(std::io::Error::other)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a synthetic corpus, its lexicons, and a `config.toml` using the
/// test embedder into `dir`; returns the loaded config.
pub fn write_synthetic_experiment(dir: &Path, seed: u64, per_specialty: usize) -> Result<ExperimentConfig, ExperimentError> {
    let corpus = generate(seed, per_specialty);
    fs::create_dir_all(dir.join("lexicons"))?;
    write_jsonl(&dir.join("notes.jsonl"), &corpus.notes)?;
    write_jsonl(&dir.join("labels.jsonl"), &corpus.annotations)?;
    let mut lexicons = BTreeMap::new();
    for (specialty, terms) in &corpus.lexicons {
        let rel = format!("lexicons/{}.txt", specialty.name());
        fs::write(dir.join(&rel), terms.join("\n") + "\n")?;
        lexicons.insert(specialty.name().to_string(), rel.into());
    }
    let cfg = ExperimentConfig {
        seed,
        output_dir: "out".into(),
        max_tokens: DEFAULT_MAX_TOKENS,
        train_fraction: DEFAULT_TRAIN_FRACTION,
        recall_floor: 0.9,
        corpus: CorpusPaths { notes: "notes.jsonl".into(), annotations: "labels.jsonl".into() },
        lexicons,
        embedding: EmbeddingSource::Test { seed: seed.wrapping_add(1), dim: EMBEDDING_DIM },
        train: TrainConfig::default(),
        projection: ProjectionConfig::default(),
    };
    let path = dir.join("config.toml");
    fs::write(&path, cfg.to_toml()?)?;
    ExperimentConfig::load(&path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{extract_all, Lexicon};

    #[test]
    fn every_sentence_matches_one_lexicon() {
        let c = generate(3, 60);
        assert_eq!(c.notes.len(), 3 * 12);
        let lexicons: Vec<Lexicon> = c
            .lexicons
            .iter()
            .map(|(s, terms)| Lexicon::new(s.clone(), terms.iter().map(String::as_str)).unwrap())
            .collect();
        let ex = extract_all(&c.notes, &lexicons, DEFAULT_MAX_TOKENS);
        assert_eq!(ex.records.len(), 180);
        let ids: std::collections::HashSet<&str> = c.annotations.iter().map(|a| a.sentence_id.as_str()).collect();
        assert!(ex.records.iter().all(|r| ids.contains(r.sentence_id.as_str())));
    }

    #[test]
    fn deterministic_in_seed() {
        assert_eq!(generate(5, 20), generate(5, 20));
        assert_ne!(generate(5, 20), generate(6, 20));
    }
}
