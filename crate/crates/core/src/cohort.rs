//! Combinatorial train/test cohorts and train–test relations.
//!
//! Every specialty's labeled sentences are shuffled once and split into a
//! train pool and a test pool. A cohort over a specialty subset `S` takes,
//! from each member's pool, the first `round(pool / |S|)` sentences, so
//! multi-specialty cohorts have near-equal component counts and no sentence
//! ever appears in both a train and a test cohort.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{SentenceRecord, Specialty};
use crate::embedding::keyed_seed;

/// Fewest labeled sentences a specialty needs before it can be split.
pub const MIN_SENTENCES_PER_SPECIALTY: usize = 10;

pub const DEFAULT_TRAIN_FRACTION: f64 = 0.7;

#[derive(Debug, Error)]
pub enum CohortError {
    #[error("relation needs non-empty specialty sets")]
    EmptySpecialtySet,
    #[error("no records to split")]
    NoRecords,
    #[error("sentence {0} has no label")]
    Unlabeled(String),
    #[error("insufficient data: {specialty} has {count} labeled sentences (need {MIN_SENTENCES_PER_SPECIALTY})")]
    InsufficientData { specialty: Specialty, count: usize },
    #[error("train fraction {0} outside (0, 1)")]
    InvalidFraction(f64),
    #[error("cannot parse cohort name {0:?}")]
    BadName(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Train,
    Test,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Train => "train",
            Role::Test => "test",
        }
    }
}

/// How a test set's specialties relate to a training set's.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    Native,
    Partial,
    External,
    /// Pairs within a single dataset.
    Intra,
}

impl Relation {
    pub fn as_str(self) -> &'static str {
        match self {
            Relation::Native => "native",
            Relation::Partial => "partial",
            Relation::External => "external",
            Relation::Intra => "intra",
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Relation {
    type Err = CohortError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "native" => Ok(Relation::Native),
            "partial" => Ok(Relation::Partial),
            "external" => Ok(Relation::External),
            "intra" => Ok(Relation::Intra),
            _ => Err(CohortError::BadName(s.to_string())),
        }
    }
}

/// Equal sets are native, disjoint sets external, anything else partial.
pub fn relation(train: &BTreeSet<Specialty>, test: &BTreeSet<Specialty>) -> Result<Relation, CohortError> {
    if train.is_empty() || test.is_empty() {
        return Err(CohortError::EmptySpecialtySet);
    }
    Ok(if train == test {
        Relation::Native
    } else if train.is_disjoint(test) {
        Relation::External
    } else {
        Relation::Partial
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cohort {
    pub name: String,
    pub role: Role,
    pub specialties: BTreeSet<Specialty>,
    pub sentence_ids: Vec<String>,
    pub composition: BTreeMap<Specialty, usize>,
}

impl Cohort {
    pub fn len(&self) -> usize {
        self.sentence_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentence_ids.is_empty()
    }
}

/// The train and test cohorts of one experiment, index-aligned by
/// specialty subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSet {
    pub train: Vec<Cohort>,
    pub test: Vec<Cohort>,
}

impl CohortSet {
    pub fn iter(&self) -> impl Iterator<Item = &Cohort> {
        self.train.iter().chain(&self.test)
    }
}

const STANDARD_THREE: [Specialty; 3] = [Specialty::Oncology, Specialty::Cardiology, Specialty::Pulmonology];

/// Dataset name for a specialty subset, e.g. "cancer cardiac train".
/// The full standard three-specialty set is called "all three".
pub fn cohort_name(specialties: &BTreeSet<Specialty>, role: Role) -> String {
    let is_standard_three = specialties.len() == 3 && STANDARD_THREE.iter().all(|s| specialties.contains(s));
    let stem = if is_standard_three {
        "all three".to_string()
    } else {
        specialties.iter().map(Specialty::short_name).collect::<Vec<_>>().join(" ")
    };
    format!("{stem} {}", role.as_str())
}

/// Inverse of [`cohort_name`].
pub fn parse_cohort_name(name: &str) -> Result<(BTreeSet<Specialty>, Role), CohortError> {
    let bad = || CohortError::BadName(name.to_string());
    let (stem, role) = name.trim().rsplit_once(' ').ok_or_else(bad)?;
    let role = match role {
        "train" => Role::Train,
        "test" => Role::Test,
        _ => return Err(bad()),
    };
    let specialties: BTreeSet<Specialty> = if stem.trim() == "all three" {
        STANDARD_THREE.into_iter().collect()
    } else {
        stem.split_whitespace()
            .map(|w| w.parse().map_err(|_| bad()))
            .collect::<Result<_, _>>()?
    };
    if specialties.is_empty() {
        return Err(bad());
    }
    Ok((specialties, role))
}

/// Non-empty subsets of `items`, by size and then lexicographically by index.
fn subsets<T: Clone>(items: &[T]) -> Vec<Vec<T>> {
    let n = items.len();
    let mut masks: Vec<u32> = (1..(1u32 << n)).collect();
    let key = |m: &u32| {
        let idx: Vec<usize> = (0..n).filter(|i| m & (1 << i) != 0).collect();
        (idx.len(), idx)
    };
    masks.sort_by_key(key);
    masks
        .into_iter()
        .map(|m| (0..n).filter(|i| m & (1 << i) != 0).map(|i| items[i].clone()).collect())
        .collect()
}

fn cohort_from_pools(
    subset: &[Specialty],
    role: Role,
    pools: &BTreeMap<Specialty, (Vec<String>, Vec<String>)>,
) -> Cohort {
    let mut sentence_ids = Vec::new();
    let mut composition = BTreeMap::new();
    for s in subset {
        let (train, test) = &pools[s];
        let pool = if role == Role::Train { train } else { test };
        let take = ((pool.len() as f64) / subset.len() as f64).round() as usize;
        sentence_ids.extend(pool[..take].iter().cloned());
        composition.insert(s.clone(), take);
    }
    let specialties: BTreeSet<Specialty> = subset.iter().cloned().collect();
    Cohort {
        name: cohort_name(&specialties, role),
        role,
        specialties,
        sentence_ids,
        composition,
    }
}

/// Builds one train and one test cohort for every non-empty subset of the
/// specialties present in `records`.
///
/// Records sharing a sentence id are collapsed to the first one, so each
/// sentence belongs to exactly one specialty. Each specialty's sentences are
/// shuffled with a seed derived from `seed` and the specialty name, then
/// `floor(n · train_fraction)` go to the train pool.
pub fn build_cohorts(records: &[SentenceRecord], train_fraction: f64, seed: u64) -> Result<CohortSet, CohortError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(CohortError::InvalidFraction(train_fraction));
    }
    if records.is_empty() {
        return Err(CohortError::NoRecords);
    }
    let mut seen = HashSet::new();
    let mut by_specialty: BTreeMap<Specialty, Vec<String>> = BTreeMap::new();
    for r in records {
        if r.label.is_none() {
            return Err(CohortError::Unlabeled(r.sentence_id.clone()));
        }
        if seen.insert(r.sentence_id.as_str()) {
            by_specialty.entry(r.specialty.clone()).or_default().push(r.sentence_id.clone());
        }
    }
    let mut pools = BTreeMap::new();
    for (specialty, mut ids) in by_specialty {
        if ids.len() < MIN_SENTENCES_PER_SPECIALTY {
            return Err(CohortError::InsufficientData {
                specialty,
                count: ids.len(),
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(keyed_seed(seed, specialty.name()));
        ids.shuffle(&mut rng);
        let n_train = (ids.len() as f64 * train_fraction).floor() as usize;
        let test = ids.split_off(n_train);
        pools.insert(specialty, (ids, test));
    }
    let specialties: Vec<Specialty> = pools.keys().cloned().collect();
    let groups = subsets(&specialties);
    Ok(CohortSet {
        train: groups.iter().map(|g| cohort_from_pools(g, Role::Train, &pools)).collect(),
        test: groups.iter().map(|g| cohort_from_pools(g, Role::Test, &pools)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Label;

    fn set(xs: &[Specialty]) -> BTreeSet<Specialty> {
        xs.iter().cloned().collect()
    }

    fn records(counts: &[(Specialty, usize)]) -> Vec<SentenceRecord> {
        let mut out = Vec::new();
        for (s, n) in counts {
            for i in 0..*n {
                out.push(SentenceRecord {
                    sentence_id: format!("{}-{i}", s.short_name()),
                    text: format!("{} sentence {i}", s.short_name()),
                    tokens: vec![],
                    matched_term: "x".into(),
                    specialty: s.clone(),
                    note_type: "Nursing".into(),
                    doc_id: "d".into(),
                    label: Some(Label::ALL[i % 3]),
                });
            }
        }
        out
    }

    use Specialty::{Cardiology as Card, Oncology as Onc, Pulmonology as Pulm};

    #[test]
    fn relation_examples() {
        assert_eq!(relation(&set(&[Onc]), &set(&[Onc])).unwrap(), Relation::Native);
        assert_eq!(relation(&set(&[Onc]), &set(&[Card])).unwrap(), Relation::External);
        assert_eq!(relation(&set(&[Onc]), &set(&[Onc, Card])).unwrap(), Relation::Partial);
        assert!(relation(&set(&[]), &set(&[Onc])).is_err());
    }

    #[test]
    fn relation_census_over_all_subset_pairs() {
        // Brute force over every (train subset, test subset) pair.
        let subs = subsets(&[Onc, Card, Pulm]);
        assert_eq!(subs.len(), 7);
        let mut census = BTreeMap::new();
        for a in &subs {
            for b in &subs {
                *census.entry(relation(&set(a), &set(b)).unwrap()).or_insert(0) += 1;
            }
        }
        assert_eq!(census[&Relation::Native], 7);
        assert_eq!(census[&Relation::Partial], 30);
        assert_eq!(census[&Relation::External], 12);
    }

    #[test]
    fn names_roundtrip() {
        let names = [
            "cancer train",
            "cardiac test",
            "cancer cardiac train",
            "cardiac pulmonary test",
            "all three train",
        ];
        for name in names {
            let (specs, role) = parse_cohort_name(name).unwrap();
            assert_eq!(cohort_name(&specs, role), name);
        }
        assert!(parse_cohort_name("cancer").is_err());
        assert!(parse_cohort_name("cancer validation").is_err());
    }

    #[test]
    fn single_specialty_split_is_exact() {
        let cohorts = build_cohorts(&records(&[(Onc, 10)]), 0.7, 1).unwrap();
        assert_eq!(cohorts.train.len(), 1);
        assert_eq!(cohorts.train[0].len(), 7);
        assert_eq!(cohorts.test[0].len(), 3);
    }

    #[test]
    fn table_one_shape() {
        let cohorts = build_cohorts(&records(&[(Onc, 1120), (Card, 902), (Pulm, 933)]), 0.7, 42).unwrap();
        let names: Vec<&str> = cohorts.train.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(
            names,
            [
                "cancer train",
                "cardiac train",
                "pulmonary train",
                "cancer cardiac train",
                "cancer pulmonary train",
                "cardiac pulmonary train",
                "all three train"
            ]
        );
        // Table 1 of the source study, (onc, card, pulm) train then test.
        let expected: [([usize; 3], [usize; 3]); 7] = [
            ([783, 0, 0], [337, 0, 0]),
            ([0, 631, 0], [0, 271, 0]),
            ([0, 0, 653], [0, 0, 280]),
            ([392, 316, 0], [168, 136, 0]),
            ([392, 0, 326], [168, 0, 140]),
            ([0, 316, 326], [0, 136, 140]),
            ([261, 210, 217], [112, 90, 93]),
        ];
        for (i, (train, test)) in expected.iter().enumerate() {
            for (j, s) in [Onc, Card, Pulm].iter().enumerate() {
                let got_train = cohorts.train[i].composition.get(s).copied().unwrap_or(0);
                let got_test = cohorts.test[i].composition.get(s).copied().unwrap_or(0);
                assert!(got_train.abs_diff(train[j]) <= 2, "{} {s}: {got_train}", cohorts.train[i].name);
                assert!(got_test.abs_diff(test[j]) <= 2, "{} {s}: {got_test}", cohorts.test[i].name);
            }
        }
    }

    #[test]
    fn cohorts_are_disjoint_consistent_and_seeded() {
        let recs = records(&[(Onc, 40), (Card, 31), (Pulm, 25)]);
        let a = build_cohorts(&recs, 0.7, 5).unwrap();
        let train_ids: HashSet<&String> = a.train.iter().flat_map(|c| &c.sentence_ids).collect();
        for test in &a.test {
            assert!(test.sentence_ids.iter().all(|id| !train_ids.contains(id)));
        }
        for c in a.iter() {
            assert_eq!(c.composition.values().sum::<usize>(), c.len());
            for id in &c.sentence_ids {
                let rec = recs.iter().find(|r| &r.sentence_id == id).unwrap();
                assert!(c.specialties.contains(&rec.specialty));
            }
        }
        assert_eq!(a, build_cohorts(&recs, 0.7, 5).unwrap());
        let b = build_cohorts(&recs, 0.7, 6).unwrap();
        assert_ne!(a, b);
        for (x, y) in a.iter().zip(b.iter()) {
            assert_eq!(x.composition, y.composition);
        }
    }

    #[test]
    fn insufficient_or_unlabeled_data_is_rejected() {
        let err = build_cohorts(&records(&[(Onc, 20), (Card, 9)]), 0.7, 1).unwrap_err();
        assert!(err.to_string().starts_with("insufficient data"));
        let mut recs = records(&[(Onc, 20)]);
        recs[3].label = None;
        assert!(matches!(build_cohorts(&recs, 0.7, 1), Err(CohortError::Unlabeled(_))));
        assert!(matches!(build_cohorts(&records(&[(Onc, 20)]), 1.0, 1), Err(CohortError::InvalidFraction(_))));
    }

    #[test]
    fn duplicate_sentence_ids_keep_first_specialty() {
        let mut recs = records(&[(Onc, 12), (Card, 12)]);
        let mut dup = recs[0].clone();
        dup.specialty = Card;
        recs.push(dup);
        let c = build_cohorts(&recs, 0.7, 3).unwrap();
        let all: Vec<&String> = c.iter().filter(|c| c.specialties.len() == 1).flat_map(|c| &c.sentence_ids).collect();
        assert_eq!(all.len(), 24);
    }

    #[test]
    fn manifest_json_shape() {
        let c = build_cohorts(&records(&[(Onc, 10)]), 0.7, 1).unwrap();
        let v: serde_json::Value = serde_json::to_value(&c.train[0]).unwrap();
        assert_eq!(v["name"], "cancer train");
        assert_eq!(v["role"], "train");
        assert_eq!(v["specialties"], serde_json::json!(["oncology"]));
        assert_eq!(v["composition"]["oncology"], 7);
        assert_eq!(v["sentence_ids"].as_array().unwrap().len(), 7);
    }
}
