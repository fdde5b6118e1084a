//! Labeled corpus of test source files.
//!
//! A corpus is read from a JSON Lines manifest (one record per file, paths
//! relative to the manifest) or discovered from a `flaky/` + `nonflaky/`
//! directory layout. Entries are always kept sorted by id so that
//! filesystem enumeration order never reaches the results.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Flaky,
    #[serde(rename = "nonflaky")]
    NonFlaky,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::Flaky, Label::NonFlaky];

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Flaky => "flaky",
            Label::NonFlaky => "nonflaky",
        }
    }

    pub fn parse(s: &str) -> Option<Label> {
        match s {
            "flaky" => Some(Label::Flaky),
            "nonflaky" => Some(Label::NonFlaky),
            _ => None,
        }
    }

    pub fn is_flaky(self) -> bool {
        self == Label::Flaky
    }

    pub fn other(self) -> Label {
        match self {
            Label::Flaky => Label::NonFlaky,
            Label::NonFlaky => Label::Flaky,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CorpusError {
    #[error("cannot read manifest {path}: {reason}")]
    Manifest { path: PathBuf, reason: String },
    #[error("manifest line {line}: {reason}")]
    BadRecord { line: usize, reason: String },
    #[error("record {id}: file {path} does not exist")]
    MissingFile { id: String, path: PathBuf },
    #[error("record {id}: file {path} is not valid UTF-8")]
    NotUtf8 { id: String, path: PathBuf },
    #[error("record {id}: label {label:?} is not one of flaky, nonflaky")]
    BadLabel { id: String, label: String },
    #[error("duplicate id {0}")]
    DuplicateId(String),
    #[error("record {id}: file {path} is empty")]
    EmptyFile { id: String, path: PathBuf },
    #[error("corpus has no entries")]
    NoEntries,
    #[error("corpus has no {0} entries")]
    EmptyClass(Label),
    #[error("class {label} has {count} entries, fewer than {n_folds} folds")]
    TooFewSamples { label: Label, count: usize, n_folds: usize },
    #[error("need at least 2 folds, got {0}")]
    BadFoldCount(usize),
}

/// One labeled source file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub id: String,
    pub path: PathBuf,
    pub label: Label,
    pub repo: String,
    pub text: String,
}

/// Entries sorted by id, ids unique, texts non-empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    entries: Vec<CorpusEntry>,
}

impl Corpus {
    pub fn new(mut entries: Vec<CorpusEntry>) -> Result<Self, CorpusError> {
        entries.sort_by(|a, b| a.id.cmp(&b.id));
        for w in entries.windows(2) {
            if w[0].id == w[1].id {
                return Err(CorpusError::DuplicateId(w[0].id.clone()));
            }
        }
        if let Some(e) = entries.iter().find(|e| e.text.is_empty()) {
            return Err(CorpusError::EmptyFile { id: e.id.clone(), path: e.path.clone() });
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[CorpusEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn labels(&self) -> Vec<Label> {
        self.entries.iter().map(|e| e.label).collect()
    }

    pub fn class_counts(&self) -> BTreeMap<Label, usize> {
        let mut counts = BTreeMap::from([(Label::Flaky, 0), (Label::NonFlaky, 0)]);
        for e in &self.entries {
            *counts.entry(e.label).or_default() += 1;
        }
        counts
    }

    pub fn count(&self, label: Label) -> usize {
        self.entries.iter().filter(|e| e.label == label).count()
    }

    /// Sub-corpus of the given positions (which need not be sorted).
    pub fn subset(&self, indices: &[usize]) -> Corpus {
        let mut entries: Vec<_> = indices.iter().map(|&i| self.entries[i].clone()).collect();
        entries.sort_by(|a, b| a.id.cmp(&b.id));
        Corpus { entries }
    }

    /// SHA-256 over ids, labels, repos and texts, in id order.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        for e in &self.entries {
            for part in [e.id.as_bytes(), e.label.as_str().as_bytes(), e.repo.as_bytes(), e.text.as_bytes()] {
                hasher.update((part.len() as u64).to_le_bytes());
                hasher.update(part);
            }
        }
        hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// A manifest line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub id: String,
    pub path: String,
    pub label: String,
    pub repo: String,
}

/// Loads a manifest, stopping at the first problem.
pub fn load_manifest(manifest_path: &Path) -> Result<Corpus, CorpusError> {
    audit_manifest(manifest_path).map_err(|mut problems| problems.swap_remove(0))
}

/// Loads a manifest, collecting every problem instead of stopping at the first.
pub fn audit_manifest(manifest_path: &Path) -> Result<Corpus, Vec<CorpusError>> {
    let raw = fs::read_to_string(manifest_path).map_err(|e| {
        vec![CorpusError::Manifest { path: manifest_path.to_path_buf(), reason: e.to_string() }]
    })?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));

    let mut problems = Vec::new();
    let mut records = Vec::new();
    for (i, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<ManifestRecord>(line) {
            Ok(r) => records.push(r),
            Err(e) => problems.push(CorpusError::BadRecord { line: i + 1, reason: e.to_string() }),
        }
    }
    let entries = read_records(base, &records, &mut problems);
    if problems.is_empty() && entries.is_empty() {
        problems.push(CorpusError::NoEntries);
    }
    if problems.is_empty() {
        Corpus::new(entries).map_err(|e| vec![e])
    } else {
        Err(problems)
    }
}

fn read_records(base: &Path, records: &[ManifestRecord], problems: &mut Vec<CorpusError>) -> Vec<CorpusEntry> {
    let mut seen = BTreeSet::new();
    let mut reported = BTreeSet::new();
    let mut entries = Vec::new();
    for r in records {
        if !seen.insert(r.id.as_str()) {
            if reported.insert(r.id.as_str()) {
                problems.push(CorpusError::DuplicateId(r.id.clone()));
            }
            continue;
        }
        let Some(label) = Label::parse(&r.label) else {
            problems.push(CorpusError::BadLabel { id: r.id.clone(), label: r.label.clone() });
            continue;
        };
        let path = base.join(&r.path);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(_) => {
                problems.push(CorpusError::MissingFile { id: r.id.clone(), path });
                continue;
            }
        };
        let Ok(text) = String::from_utf8(bytes) else {
            problems.push(CorpusError::NotUtf8 { id: r.id.clone(), path });
            continue;
        };
        if text.is_empty() {
            problems.push(CorpusError::EmptyFile { id: r.id.clone(), path });
            continue;
        }
        entries.push(CorpusEntry { id: r.id.clone(), path, label, repo: r.repo.clone(), text });
    }
    entries
}

/// Discovers files under `<root>/flaky/**` and `<root>/nonflaky/**`.
///
/// Ids are root-relative paths with `/` separators. The repository is the
/// first directory below the class directory, or `unknown` for files
/// directly inside it. Record paths are written relative to `manifest_dir`
/// when possible, absolute otherwise.
pub fn scan_directory(root: &Path, manifest_dir: &Path) -> Result<Vec<ManifestRecord>, CorpusError> {
    let root = fs::canonicalize(root)
        .map_err(|e| CorpusError::Manifest { path: root.to_path_buf(), reason: e.to_string() })?;
    let manifest_dir = fs::canonicalize(manifest_dir).unwrap_or_else(|_| manifest_dir.to_path_buf());
    let mut records = Vec::new();
    for label in Label::ALL {
        let class_dir = root.join(label.as_str());
        if !class_dir.is_dir() {
            continue;
        }
        for entry in walkdir::WalkDir::new(&class_dir).sort_by_file_name() {
            let entry = entry.map_err(|e| CorpusError::Manifest { path: class_dir.clone(), reason: e.to_string() })?;
            if !entry.file_type().is_file() {
                continue;
            }
            let rel = entry.path().strip_prefix(&root).expect("walk stays under root");
            let parts: Vec<String> = rel.components().map(|c| c.as_os_str().to_string_lossy().into_owned()).collect();
            let repo = if parts.len() > 2 { parts[1].clone() } else { "unknown".to_string() };
            let path = match entry.path().strip_prefix(&manifest_dir) {
                Ok(p) => p.components().map(|c| c.as_os_str().to_string_lossy().into_owned()).collect::<Vec<_>>().join("/"),
                Err(_) => entry.path().to_string_lossy().into_owned(),
            };
            records.push(ManifestRecord { id: parts.join("/"), path, label: label.as_str().to_string(), repo });
        }
    }
    records.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(records)
}

pub fn write_manifest(records: &[ManifestRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("records serialize"));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubsetMode {
    Balanced,
    Imbalanced,
    All,
}

/// Balanced: every minority entry plus a seeded uniform sample of equally
/// many majority entries. Imbalanced and All return the corpus unchanged.
pub fn select_subset(corpus: &Corpus, mode: SubsetMode, seed: u64) -> Result<Corpus, CorpusError> {
    for label in Label::ALL {
        if corpus.count(label) == 0 {
            return Err(CorpusError::EmptyClass(label));
        }
    }
    if mode != SubsetMode::Balanced {
        return Ok(corpus.clone());
    }
    let flaky = corpus.count(Label::Flaky);
    let nonflaky = corpus.count(Label::NonFlaky);
    let (minority, keep) = if flaky <= nonflaky { (Label::Flaky, flaky) } else { (Label::NonFlaky, nonflaky) };
    let majority: Vec<usize> = (0..corpus.len()).filter(|&i| corpus.entries[i].label != minority).collect();
    let mut rng = seed::stream(seed, "subset", 0);
    let mut chosen: Vec<usize> = (0..corpus.len()).filter(|&i| corpus.entries[i].label == minority).collect();
    chosen.extend(index::sample(&mut rng, majority.len(), keep).into_iter().map(|i| majority[i]));
    Ok(corpus.subset(&chosen))
}

/// Fold index per corpus entry id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub n_folds: usize,
    pub assignment: BTreeMap<String, usize>,
}

impl FoldAssignment {
    /// Positions (in corpus order) of the entries held out in `fold`.
    pub fn test_indices(&self, corpus: &Corpus, fold: usize) -> Vec<usize> {
        self.positions(corpus, |f| f == fold)
    }

    pub fn train_indices(&self, corpus: &Corpus, fold: usize) -> Vec<usize> {
        self.positions(corpus, |f| f != fold)
    }

    fn positions(&self, corpus: &Corpus, keep: impl Fn(usize) -> bool) -> Vec<usize> {
        corpus
            .entries()
            .iter()
            .enumerate()
            .filter(|(_, e)| keep(self.assignment[&e.id]))
            .map(|(i, _)| i)
            .collect()
    }
}

/// Stratified fold assignment for the whole corpus.
pub fn stratified_folds(corpus: &Corpus, n_folds: usize, seed: u64) -> Result<FoldAssignment, CorpusError> {
    let folds = stratified_fold_indices(&corpus.labels(), n_folds, seed)?;
    let assignment = corpus.entries.iter().zip(folds).map(|(e, f)| (e.id.clone(), f)).collect();
    Ok(FoldAssignment { n_folds, assignment })
}

/// Per-class seeded shuffle followed by round-robin dealing into folds.
/// Returns the fold of every position in `labels`.
pub fn stratified_fold_indices(labels: &[Label], n_folds: usize, seed: u64) -> Result<Vec<usize>, CorpusError> {
    if n_folds < 2 {
        return Err(CorpusError::BadFoldCount(n_folds));
    }
    let mut folds = vec![0; labels.len()];
    for (class_idx, label) in Label::ALL.into_iter().enumerate() {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == label).collect();
        if members.len() < n_folds {
            return Err(CorpusError::TooFewSamples { label, count: members.len(), n_folds });
        }
        members.shuffle(&mut seed::stream(seed, "folds", class_idx as u64));
        for (k, i) in members.into_iter().enumerate() {
            folds[i] = k % n_folds;
        }
    }
    Ok(folds)
}

/// Stratified holdout: returns `(fit, holdout)` positions, both sorted.
/// Each class contributes `round(fraction * n_c)` holdout members, clamped
/// so both sides keep at least one member of every class that has two or more.
pub fn stratified_holdout(labels: &[Label], fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut fit = Vec::new();
    let mut holdout = Vec::new();
    for (class_idx, label) in Label::ALL.into_iter().enumerate() {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == label).collect();
        members.shuffle(&mut seed::stream(seed, "holdout", class_idx as u64));
        let n = members.len();
        let mut take = (fraction * n as f64).round() as usize;
        if n >= 2 {
            take = take.clamp(1, n - 1);
        } else {
            take = 0;
        }
        holdout.extend_from_slice(&members[..take]);
        fit.extend_from_slice(&members[take..]);
    }
    fit.sort_unstable();
    holdout.sort_unstable();
    (fit, holdout)
}
