//! Sentence extraction from clinical notes.
//!
//! Notes are split into sentences, sentences into lowercase word tokens, and
//! contiguous runs of one to six tokens are looked up in a disease lexicon.
//! Each (sentence, matched term) pair becomes one [`SentenceRecord`].

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Longest lexicon phrase, in words.
pub const MAX_TERM_WORDS: usize = 6;

/// Default per-sentence token cap.
pub const DEFAULT_MAX_TOKENS: usize = 512;

/// Abbreviations whose trailing period never ends a sentence.
const ABBREVIATIONS: &[&str] = &["dr.", "pt.", "vs.", "e.g.", "i.e.", "mg.", "ml.", "hr."];

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("lexicon term is empty")]
    EmptyTerm,
    #[error("lexicon term {term:?} has {words} words (maximum {MAX_TERM_WORDS})")]
    TermTooLong { term: String, words: usize },
    #[error("unknown specialty {0:?}")]
    UnknownSpecialty(String),
    #[error("unknown label {0:?}")]
    UnknownLabel(String),
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("duplicate document id {0:?}")]
    DuplicateDocId(String),
    #[error("document on line {0} has an empty id")]
    EmptyDocId(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Medical specialty a lexicon (and every sentence matched by it) belongs to.
///
/// Specialties order by their short name, which is also the order used to
/// name multi-specialty cohorts ("cancer cardiac", ...).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Specialty {
    Oncology,
    Cardiology,
    Pulmonology,
    Other(String),
}

impl Specialty {
    /// Canonical lowercase name used in files.
    pub fn name(&self) -> &str {
        match self {
            Specialty::Oncology => "oncology",
            Specialty::Cardiology => "cardiology",
            Specialty::Pulmonology => "pulmonology",
            Specialty::Other(name) => name,
        }
    }

    /// Short name used in cohort names.
    pub fn short_name(&self) -> &str {
        match self {
            Specialty::Oncology => "cancer",
            Specialty::Cardiology => "cardiac",
            Specialty::Pulmonology => "pulmonary",
            Specialty::Other(name) => name,
        }
    }
}

impl Ord for Specialty {
    fn cmp(&self, other: &Self) -> Ordering {
        self.short_name().cmp(other.short_name())
    }
}

impl PartialOrd for Specialty {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Specialty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Specialty {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_lowercase();
        Ok(match lower.as_str() {
            "oncology" | "cancer" | "onc" => Specialty::Oncology,
            "cardiology" | "cardiac" | "card" => Specialty::Cardiology,
            "pulmonology" | "pulmonary" | "pulm" => Specialty::Pulmonology,
            "" | "all" | "three" | "train" | "test" => {
                return Err(CorpusError::UnknownSpecialty(s.to_string()))
            }
            _ if lower.chars().all(|c| c.is_alphanumeric() || c == '_' || c == '-') => {
                Specialty::Other(lower)
            }
            _ => return Err(CorpusError::UnknownSpecialty(s.to_string())),
        })
    }
}

impl From<Specialty> for String {
    fn from(s: Specialty) -> String {
        s.name().to_string()
    }
}

impl TryFrom<String> for Specialty {
    type Error = CorpusError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

/// Diagnosis sentiment annotated on a sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    Yes,
    No,
    Maybe,
}

impl Label {
    /// Fixed class order of the classifier outputs.
    pub const ALL: [Label; 3] = [Label::Yes, Label::No, Label::Maybe];

    pub fn index(self) -> usize {
        match self {
            Label::Yes => 0,
            Label::No => 1,
            Label::Maybe => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Label> {
        Label::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Yes => "Yes",
            Label::No => "No",
            Label::Maybe => "Maybe",
        }
    }
}

impl FromStr for Label {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_lowercase().as_str() {
            "yes" => Ok(Label::Yes),
            "no" => Ok(Label::No),
            "maybe" => Ok(Label::Maybe),
            _ => Err(CorpusError::UnknownLabel(s.to_string())),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoteDocument {
    pub doc_id: String,
    pub note_type: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceRecord {
    pub sentence_id: String,
    pub text: String,
    pub tokens: Vec<String>,
    pub matched_term: String,
    pub specialty: Specialty,
    pub note_type: String,
    pub doc_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Label>,
}

/// Stable 128-bit content id: the first 16 bytes of SHA-256 over the raw
/// sentence text, lowercase hex.
pub fn sentence_id(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    hex::encode(&digest[..16])
}

/// A specialty's disease phrases, normalized to space-joined lowercase tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lexicon {
    specialty: Specialty,
    terms: BTreeSet<String>,
}

impl Lexicon {
    pub fn new<I, S>(specialty: Specialty, phrases: I) -> Result<Self, CorpusError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut terms = BTreeSet::new();
        for phrase in phrases {
            let words = tokenize(phrase.as_ref());
            if words.is_empty() {
                return Err(CorpusError::EmptyTerm);
            }
            if words.len() > MAX_TERM_WORDS {
                return Err(CorpusError::TermTooLong {
                    term: phrase.as_ref().to_string(),
                    words: words.len(),
                });
            }
            terms.insert(words.join(" "));
        }
        Ok(Lexicon { specialty, terms })
    }

    /// Parses the lexicon file format: one phrase per line, `#` starts a
    /// comment, blank lines ignored.
    pub fn parse(specialty: Specialty, text: &str) -> Result<Self, CorpusError> {
        let phrases = text
            .lines()
            .map(|line| line.split('#').next().unwrap_or("").trim())
            .filter(|line| !line.is_empty());
        Lexicon::new(specialty, phrases)
    }

    pub fn load(specialty: Specialty, path: impl AsRef<Path>) -> Result<Self, CorpusError> {
        let text = std::fs::read_to_string(path)?;
        Lexicon::parse(specialty, &text)
    }

    pub fn specialty(&self) -> &Specialty {
        &self.specialty
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.terms.iter().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn contains(&self, term: &str) -> bool {
        self.terms.contains(term)
    }
}

fn is_delimiter(c: char) -> bool {
    matches!(c, '.' | '?' | '!' | ';' | '\n')
}

/// Rule-based sentence splitter.
///
/// A run of `.?!;` closes a sentence when it is followed by whitespace and
/// then an uppercase letter or digit, or by the end of the text. A newline
/// closes a sentence when the next non-whitespace character is uppercase, a
/// digit, or absent. Periods ending a known abbreviation never split.
pub fn sentencize(text: &str) -> Vec<String> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut sentences = Vec::new();
    let mut start = 0usize;
    let mut i = 0usize;
    while i < chars.len() {
        let (_, c) = chars[i];
        if !is_delimiter(c) {
            i += 1;
            continue;
        }
        let mut end = i;
        if c != '\n' {
            while end + 1 < chars.len() && matches!(chars[end + 1].1, '.' | '?' | '!' | ';') {
                end += 1;
            }
        }
        let after = end + 1;
        let mut j = after;
        while j < chars.len() && chars[j].1.is_whitespace() {
            j += 1;
        }
        let saw_space = j > after || c == '\n';
        let boundary = if j == chars.len() {
            true
        } else {
            let next = chars[j].1;
            saw_space && (next.is_uppercase() || next.is_ascii_digit())
        };
        let abbreviation = c == '.' && end == i && ends_with_abbreviation(text, chars[i].0);
        if boundary && !abbreviation {
            let stop = chars.get(after).map_or(text.len(), |&(b, _)| b);
            push_sentence(&mut sentences, &text[start..stop]);
            start = stop;
        }
        i = after;
    }
    push_sentence(&mut sentences, &text[start..]);
    sentences
}

fn push_sentence(out: &mut Vec<String>, piece: &str) {
    let trimmed = piece.trim();
    if !trimmed.is_empty() {
        out.push(trimmed.to_string());
    }
}

/// Whether the word ending with the period at byte `dot` is an abbreviation.
fn ends_with_abbreviation(text: &str, dot: usize) -> bool {
    let head = &text[..=dot];
    let word_start = head
        .char_indices()
        .rev()
        .find(|&(_, c)| c.is_whitespace() || c == '(' || c == '[')
        .map_or(0, |(b, c)| b + c.len_utf8());
    let word = head[word_start..].to_lowercase();
    ABBREVIATIONS.contains(&word.as_str())
}

/// Lowercase word tokens. Any non-alphanumeric character separates tokens
/// and is dropped, so hyphenated words split and parentheses vanish.
pub fn tokenize(sentence: &str) -> Vec<String> {
    sentence
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// A lexicon hit inside a token list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TermMatch {
    pub term: String,
    pub start: usize,
    pub len: usize,
}

/// Finds lexicon phrases in `tokens`. Longer matches win over shorter ones,
/// then leftmost over rightmost; no token belongs to two matches. Returned
/// spans are sorted by start index.
pub fn match_lexicon(tokens: &[String], lexicon: &Lexicon) -> Vec<TermMatch> {
    if lexicon.is_empty() {
        return Vec::new();
    }
    let mut candidates = Vec::new();
    for start in 0..tokens.len() {
        let mut phrase = String::new();
        for len in 1..=MAX_TERM_WORDS.min(tokens.len() - start) {
            if len > 1 {
                phrase.push(' ');
            }
            phrase.push_str(&tokens[start + len - 1]);
            if lexicon.contains(&phrase) {
                candidates.push(TermMatch {
                    term: phrase.clone(),
                    start,
                    len,
                });
            }
        }
    }
    candidates.sort_by(|a, b| b.len.cmp(&a.len).then(a.start.cmp(&b.start)));
    let mut used = vec![false; tokens.len()];
    let mut accepted = Vec::new();
    for m in candidates {
        if used[m.start..m.start + m.len].iter().any(|&u| u) {
            continue;
        }
        used[m.start..m.start + m.len].iter_mut().for_each(|u| *u = true);
        accepted.push(m);
    }
    accepted.sort_by_key(|m| m.start);
    accepted
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Extraction {
    pub records: Vec<SentenceRecord>,
    /// Documents skipped because their text was empty.
    pub skipped_documents: usize,
    /// Matching sentences dropped by the token cap.
    pub over_length: usize,
}

/// Extracts one record per unique (sentence text, matched term). Records come
/// out in document order, then sentence position, then match position.
pub fn extract_sentences(docs: &[NoteDocument], lexicon: &Lexicon, max_tokens: usize) -> Extraction {
    let mut out = Extraction::default();
    let mut seen: HashSet<(String, String)> = HashSet::new();
    for doc in docs {
        if doc.text.trim().is_empty() {
            out.skipped_documents += 1;
            continue;
        }
        for sentence in sentencize(&doc.text) {
            let tokens = tokenize(&sentence);
            let matches = match_lexicon(&tokens, lexicon);
            if matches.is_empty() {
                continue;
            }
            if tokens.len() > max_tokens {
                out.over_length += 1;
                continue;
            }
            let id = sentence_id(&sentence);
            for m in matches {
                if !seen.insert((sentence.clone(), m.term.clone())) {
                    continue;
                }
                out.records.push(SentenceRecord {
                    sentence_id: id.clone(),
                    text: sentence.clone(),
                    tokens: tokens.clone(),
                    matched_term: m.term,
                    specialty: lexicon.specialty().clone(),
                    note_type: doc.note_type.clone(),
                    doc_id: doc.doc_id.clone(),
                    label: None,
                });
            }
        }
    }
    if out.skipped_documents > 0 {
        log::warn!("skipped {} documents with empty text", out.skipped_documents);
    }
    out
}

/// Runs [`extract_sentences`] once per lexicon and concatenates the results
/// in lexicon order.
pub fn extract_all(docs: &[NoteDocument], lexicons: &[Lexicon], max_tokens: usize) -> Extraction {
    let mut all = Extraction::default();
    for lexicon in lexicons {
        let part = extract_sentences(docs, lexicon, max_tokens);
        all.records.extend(part.records);
        all.skipped_documents = all.skipped_documents.max(part.skipped_documents);
        all.over_length += part.over_length;
    }
    all
}

/// Reads a JSON-lines note corpus. Document ids must be non-empty and unique.
pub fn read_notes(reader: impl BufRead) -> Result<Vec<NoteDocument>, CorpusError> {
    let docs: Vec<NoteDocument> = read_jsonl(reader)?;
    let mut ids = HashSet::new();
    for (i, doc) in docs.iter().enumerate() {
        if doc.doc_id.is_empty() {
            return Err(CorpusError::EmptyDocId(i + 1));
        }
        if !ids.insert(doc.doc_id.as_str()) {
            return Err(CorpusError::DuplicateDocId(doc.doc_id.clone()));
        }
    }
    Ok(docs)
}

pub fn read_records(reader: impl BufRead) -> Result<Vec<SentenceRecord>, CorpusError> {
    read_jsonl(reader)
}

pub fn write_records(mut writer: impl Write, records: &[SentenceRecord]) -> Result<(), CorpusError> {
    for record in records {
        serde_json::to_writer(&mut writer, record).map_err(|e| CorpusError::Json { line: 0, source: e })?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

/// One annotation: the label of a sentence, keyed by its content id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub sentence_id: String,
    pub label: Label,
}

pub fn read_annotations(reader: impl BufRead) -> Result<Vec<Annotation>, CorpusError> {
    read_jsonl(reader)
}

/// Copies labels onto records by sentence id. Returns the number of records
/// left without a label.
pub fn apply_annotations(records: &mut [SentenceRecord], annotations: &[Annotation]) -> usize {
    let labels: std::collections::HashMap<&str, Label> = annotations
        .iter()
        .map(|a| (a.sentence_id.as_str(), a.label))
        .collect();
    let mut missing = 0;
    for record in records.iter_mut() {
        record.label = labels.get(record.sentence_id.as_str()).copied();
        if record.label.is_none() {
            missing += 1;
        }
    }
    missing
}

pub(crate) fn read_jsonl<T: serde::de::DeserializeOwned>(reader: impl BufRead) -> Result<Vec<T>, CorpusError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| CorpusError::Json { line: i + 1, source: e })?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &[&str]) -> Vec<String> {
        s.iter().map(|s| s.to_string()).collect()
    }

    fn doc(id: &str, text: &str) -> NoteDocument {
        NoteDocument {
            doc_id: id.into(),
            note_type: "Nursing".into(),
            text: text.into(),
        }
    }

    #[test]
    fn sentencize_examples() {
        assert!(sentencize("").is_empty());
        assert_eq!(
            sentencize("No acute distress. Pt is afebrile."),
            vec!["No acute distress.", "Pt is afebrile."]
        );
        assert_eq!(
            sentencize("Dx: CHF vs. COPD exacerbation"),
            vec!["Dx: CHF vs. COPD exacerbation"]
        );
    }

    #[test]
    fn sentencize_edge_cases() {
        assert_eq!(sentencize("cardiac arrest!!! Called code."), vec!["cardiac arrest!!!", "Called code."]);
        assert_eq!(sentencize("Seen by Dr. Smith today."), vec!["Seen by Dr. Smith today."]);
        assert_eq!(sentencize("given 5 mg. Then stable."), vec!["given 5 mg. Then stable."]);
        assert_eq!(sentencize("BP 120/80.\nHR 72"), vec!["BP 120/80.", "HR 72"]);
        assert_eq!(sentencize("Impression:\nPneumonia"), vec!["Impression:", "Pneumonia"]);
        assert_eq!(sentencize("wrapped line\ncontinues here."), vec!["wrapped line\ncontinues here."]);
        assert_eq!(sentencize("temp 37.5 today. 2 episodes"), vec!["temp 37.5 today.", "2 episodes"]);
        assert!(sentencize("   \n\n ").is_empty());
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(
            tokenize("No episodes of tachycardia at this time"),
            toks(&["no", "episodes", "of", "tachycardia", "at", "this", "time"])
        );
        assert_eq!(tokenize("cardiac arrest!!!"), toks(&["cardiac", "arrest"]));
        assert_eq!(tokenize("ST-elevation, (acute)"), toks(&["st", "elevation", "acute"]));
        assert!(tokenize("... --- !!!").is_empty());
    }

    #[test]
    fn match_lexicon_examples() {
        let cardio = Lexicon::new(Specialty::Cardiology, ["cardiomyopathy", "heart failure"]).unwrap();
        let tokens = tokenize("pt was found to have cardiomyopathy and is in heart failure");
        let found: Vec<(String, usize)> = match_lexicon(&tokens, &cardio)
            .into_iter()
            .map(|m| (m.term, m.start))
            .collect();
        assert_eq!(
            found,
            vec![("cardiomyopathy".to_string(), 5), ("heart failure".to_string(), 9)]
        );

        let empty = Lexicon::new(Specialty::Cardiology, Vec::<&str>::new()).unwrap();
        assert!(match_lexicon(&tokens, &empty).is_empty());

        let pulm = Lexicon::new(
            Specialty::Pulmonology,
            ["chronic obstructive pulmonary disease", "pulmonary disease"],
        )
        .unwrap();
        let m = match_lexicon(&toks(&["chronic", "obstructive", "pulmonary", "disease"]), &pulm);
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].term, "chronic obstructive pulmonary disease");
        assert_eq!(m[0].start, 0);
    }

    #[test]
    fn match_prefers_longest_then_leftmost() {
        let lex = Lexicon::new(Specialty::Cardiology, ["a b", "b c"]).unwrap();
        let m = match_lexicon(&toks(&["a", "b", "c"]), &lex);
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].term, "a b");

        let lex = Lexicon::new(Specialty::Cardiology, ["a b", "b c d"]).unwrap();
        let m = match_lexicon(&toks(&["a", "b", "c", "d"]), &lex);
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].term, "b c d");
    }

    #[test]
    fn lexicon_validation() {
        assert!(matches!(
            Lexicon::new(Specialty::Oncology, ["a b c d e f g"]),
            Err(CorpusError::TermTooLong { words: 7, .. })
        ));
        assert!(matches!(Lexicon::new(Specialty::Oncology, ["  "]), Err(CorpusError::EmptyTerm)));
        let lex = Lexicon::parse(
            Specialty::Oncology,
            "# oncology terms\nBreast Cancer\nlymphoma  # common\n\nbreast cancer\n",
        )
        .unwrap();
        assert_eq!(lex.terms().collect::<Vec<_>>(), vec!["breast cancer", "lymphoma"]);
    }

    #[test]
    fn duplicate_sentences_across_documents_yield_one_record() {
        let lex = Lexicon::new(Specialty::Pulmonology, ["pneumonia"]).unwrap();
        let docs = vec![doc("a", "pt has pneumonia"), doc("b", "pt has pneumonia")];
        let out = extract_sentences(&docs, &lex, DEFAULT_MAX_TOKENS);
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.records[0].doc_id, "a");
    }

    #[test]
    fn over_length_sentences_are_excluded() {
        let lex = Lexicon::new(Specialty::Pulmonology, ["pneumonia"]).unwrap();
        let mut words = vec!["word"; 512];
        words[100] = "pneumonia";
        let docs = vec![doc("a", &words.join(" "))];
        assert_eq!(extract_sentences(&docs, &lex, 512).records.len(), 1);
        words.push("extra");
        let docs = vec![doc("a", &words.join(" "))];
        let out = extract_sentences(&docs, &lex, 512);
        assert!(out.records.is_empty());
        assert_eq!(out.over_length, 1);
    }

    #[test]
    fn empty_documents_are_counted() {
        let lex = Lexicon::new(Specialty::Pulmonology, ["pneumonia"]).unwrap();
        let out = extract_sentences(&[doc("a", ""), doc("b", "Pneumonia.")], &lex, 512);
        assert_eq!(out.skipped_documents, 1);
        assert_eq!(out.records.len(), 1);
    }

    #[test]
    fn record_json_omits_missing_label() {
        let lex = Lexicon::new(Specialty::Pulmonology, ["pneumonia"]).unwrap();
        let mut rec = extract_sentences(&[doc("a", "Pneumonia.")], &lex, 512).records.remove(0);
        let json = serde_json::to_string(&rec).unwrap();
        assert!(!json.contains("label"));
        assert!(json.contains("\"specialty\":\"pulmonology\""));
        rec.label = Some(Label::Maybe);
        let json = serde_json::to_string(&rec).unwrap();
        assert!(json.contains("\"label\":\"Maybe\""));
        let back: SentenceRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(back, rec);
    }

    #[test]
    fn sentence_id_is_32_hex_chars() {
        let id = sentence_id("pt has pneumonia");
        assert_eq!(id.len(), 32);
        assert_eq!(id, sentence_id("pt has pneumonia"));
        assert_ne!(id, sentence_id("pt has pneumonia."));
    }

    #[test]
    fn specialty_parsing_and_order() {
        assert_eq!("cancer".parse::<Specialty>().unwrap(), Specialty::Oncology);
        assert_eq!("Cardiology".parse::<Specialty>().unwrap(), Specialty::Cardiology);
        assert_eq!("neuro".parse::<Specialty>().unwrap(), Specialty::Other("neuro".into()));
        assert!(Specialty::Oncology < Specialty::Cardiology);
        assert!(Specialty::Cardiology < Specialty::Pulmonology);
    }

    #[test]
    fn notes_reject_duplicate_ids() {
        let input = "{\"doc_id\":\"a\",\"note_type\":\"ECG\",\"text\":\"x\"}\n{\"doc_id\":\"a\",\"note_type\":\"ECG\",\"text\":\"y\"}\n";
        assert!(matches!(read_notes(input.as_bytes()), Err(CorpusError::DuplicateDocId(_))));
    }
}
