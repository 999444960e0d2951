//! Knowledge-based vocabulary classifier: partitions the vocabulary into a
//! preserve set (gender carries meaning, or debiasing is pointless) and a
//! debias set (everything else).
//!
//! Stages, applied in order with short-circuit:
//! 1. stop words and non-alphabetic tokens are preserved;
//! 2. gendered names and seed words are preserved;
//! 3. a strict majority of dictionaries defining the token with a seed word
//!    in the definition preserves it;
//! otherwise the token goes to the debias set.

use std::collections::{HashMap, HashSet};
use std::io::BufRead;

use rayon::prelude::*;

use crate::embedding::Vocabulary;
use crate::{Error, Result};

/// Which stage decided a token's fate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    StopOrNonAlphabetic,
    NameOrSeed,
    DictionaryVote,
    Debias,
}

impl Stage {
    pub fn label(self) -> &'static str {
        match self {
            Stage::StopOrNonAlphabetic => "stop/nonalpha",
            Stage::NameOrSeed => "name_or_seed",
            Stage::DictionaryVote => "dictionary_vote",
            Stage::Debias => "debias",
        }
    }
}

/// Stop words, gender-specific seed references, and gendered names.
/// All sets are lowercase-normalized on construction.
#[derive(Debug, Clone)]
pub struct WordLists {
    stop_words: HashSet<String>,
    seed: HashSet<String>,
    names: HashSet<String>,
}

impl WordLists {
    pub fn new(
        stop_words: HashSet<String>,
        seed: HashSet<String>,
        names: HashSet<String>,
    ) -> Result<Self> {
        if seed.is_empty() {
            return Err(Error::InvalidConfig("seed word set is empty".into()));
        }
        let lower = |s: HashSet<String>| s.into_iter().map(|w| w.to_lowercase()).collect();
        Ok(Self {
            stop_words: lower(stop_words),
            seed: lower(seed),
            names: lower(names),
        })
    }

    pub fn seed(&self) -> &HashSet<String> {
        &self.seed
    }
}

/// Default gender-specific reference terms; extensible via configuration.
pub const DEFAULT_SEED_WORDS: [&str; 8] =
    ["man", "woman", "boy", "girl", "male", "female", "he", "she"];

pub fn default_seed_set() -> HashSet<String> {
    DEFAULT_SEED_WORDS.iter().map(|s| s.to_string()).collect()
}

/// One token per line; blank lines and `#` comments skipped.
pub fn load_word_list<R: BufRead>(reader: R) -> Result<HashSet<String>> {
    let mut set = HashSet::new();
    for line in reader.lines() {
        let line = line?;
        let token = line.trim();
        if token.is_empty() || token.starts_with('#') {
            continue;
        }
        set.insert(token.to_string());
    }
    Ok(set)
}

/// A single dictionary: lowercased headword -> concatenated definition text.
#[derive(Debug, Clone)]
pub struct Dictionary {
    name: String,
    entries: HashMap<String, String>,
}

impl Dictionary {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn definition(&self, token: &str) -> Option<&str> {
        self.entries.get(&token.to_lowercase()).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Parses `headword<TAB>definition` lines; repeated headwords have their
    /// senses concatenated.
    pub fn load<R: BufRead>(name: impl Into<String>, reader: R) -> Result<Self> {
        let mut entries: HashMap<String, String> = HashMap::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let (head, def) = line.split_once('\t').ok_or_else(|| {
                Error::parse(lineno + 1, "expected `headword<TAB>definition`")
            })?;
            let head = head.trim().to_lowercase();
            if head.is_empty() {
                return Err(Error::parse(lineno + 1, "empty headword"));
            }
            let slot = entries.entry(head).or_default();
            if !slot.is_empty() {
                slot.push(' ');
            }
            slot.push_str(def);
        }
        Ok(Self {
            name: name.into(),
            entries,
        })
    }

    pub fn from_entries(name: impl Into<String>, entries: HashMap<String, String>) -> Self {
        let entries = entries
            .into_iter()
            .map(|(k, v)| (k.to_lowercase(), v))
            .collect();
        Self {
            name: name.into(),
            entries,
        }
    }
}

/// An ordered, non-empty collection of dictionaries.
#[derive(Debug, Clone)]
pub struct KnowledgeBase {
    dictionaries: Vec<Dictionary>,
}

impl KnowledgeBase {
    pub fn new(dictionaries: Vec<Dictionary>) -> Result<Self> {
        if dictionaries.is_empty() {
            return Err(Error::InvalidConfig(
                "knowledge base needs at least one dictionary".into(),
            ));
        }
        Ok(Self { dictionaries })
    }

    pub fn dictionaries(&self) -> &[Dictionary] {
        &self.dictionaries
    }
}

/// True iff the token contains any character outside the alphabetic class
/// (digits, hyphens, apostrophes, punctuation, ...).
pub fn is_nonalphabetic(token: &str) -> bool {
    token.chars().any(|c| !c.is_alphabetic())
}

/// True iff a strict majority of dictionaries both define the token and
/// mention at least one seed word in the definition. Matching is on whole
/// definition tokens (split at non-alphabetic boundaries, lowercased), so
/// `man` does not match `human`. A dictionary lacking the headword votes
/// negative.
pub fn dictionary_gender_vote(token: &str, kb: &KnowledgeBase, seed: &HashSet<String>) -> bool {
    let votes = kb
        .dictionaries()
        .iter()
        .filter(|d| match d.definition(token) {
            Some(def) => def
                .split(|c: char| !c.is_alphabetic())
                .filter(|t| !t.is_empty())
                .any(|t| seed.contains(&t.to_lowercase())),
            None => false,
        })
        .count();
    2 * votes > kb.dictionaries().len()
}

/// The preserve/debias partition with per-token provenance.
#[derive(Debug, Clone)]
pub struct Classification {
    preserve: HashSet<String>,
    debias: HashSet<String>,
    provenance: HashMap<String, Stage>,
}

impl Classification {
    pub fn preserve(&self) -> &HashSet<String> {
        &self.preserve
    }

    pub fn debias(&self) -> &HashSet<String> {
        &self.debias
    }

    pub fn stage(&self, token: &str) -> Option<Stage> {
        self.provenance.get(token).copied()
    }

    pub fn is_preserved(&self, token: &str) -> bool {
        self.preserve.contains(token)
    }

    /// Number of tokens decided by each stage, in stage order.
    pub fn stage_counts(&self) -> [(Stage, usize); 4] {
        let mut counts = [0usize; 4];
        for stage in self.provenance.values() {
            let i = match stage {
                Stage::StopOrNonAlphabetic => 0,
                Stage::NameOrSeed => 1,
                Stage::DictionaryVote => 2,
                Stage::Debias => 3,
            };
            counts[i] += 1;
        }
        [
            (Stage::StopOrNonAlphabetic, counts[0]),
            (Stage::NameOrSeed, counts[1]),
            (Stage::DictionaryVote, counts[2]),
            (Stage::Debias, counts[3]),
        ]
    }

    /// Builds a classification from explicit token sets (e.g. files written
    /// by an earlier run). Provenance for preserved tokens is unknown, so
    /// stage labels are not reconstructed.
    pub fn from_sets(preserve: HashSet<String>, debias: HashSet<String>) -> Result<Self> {
        if let Some(both) = preserve.intersection(&debias).next() {
            return Err(Error::InvalidConfig(format!(
                "token `{both}` is in both the preserve and debias sets"
            )));
        }
        let mut provenance = HashMap::with_capacity(preserve.len() + debias.len());
        for t in &debias {
            provenance.insert(t.clone(), Stage::Debias);
        }
        Ok(Self {
            preserve,
            debias,
            provenance,
        })
    }
}

/// Runs the staged classifier over the whole vocabulary.
pub fn classify_vocabulary(
    vocab: &Vocabulary,
    lists: &WordLists,
    kb: &KnowledgeBase,
) -> Classification {
    let stages: Vec<Stage> = vocab
        .words()
        .par_iter()
        .map(|token| {
            let lower = token.to_lowercase();
            if lists.stop_words.contains(&lower) || is_nonalphabetic(token) {
                Stage::StopOrNonAlphabetic
            } else if lists.names.contains(&lower) || lists.seed.contains(&lower) {
                Stage::NameOrSeed
            } else if dictionary_gender_vote(&lower, kb, &lists.seed) {
                Stage::DictionaryVote
            } else {
                Stage::Debias
            }
        })
        .collect();

    let mut preserve = HashSet::new();
    let mut debias = HashSet::new();
    let mut provenance = HashMap::with_capacity(vocab.len());
    for (token, stage) in vocab.words().iter().zip(stages) {
        match stage {
            Stage::Debias => debias.insert(token.clone()),
            _ => preserve.insert(token.clone()),
        };
        provenance.insert(token.clone(), stage);
    }
    Classification {
        preserve,
        debias,
        provenance,
    }
}

/// Gold label for classifier scoring.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GoldLabel {
    GenderSpecific,
    NonGenderSpecific,
}

/// Confusion-matrix metrics with the preserve set as the positive class.
#[derive(Debug, Clone, Copy)]
pub struct ClassificationMetrics {
    pub true_positives: usize,
    pub false_positives: usize,
    pub true_negatives: usize,
    pub false_negatives: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
}

/// Scores a predicted partition against gold labels. Every gold token must
/// appear in the partition.
pub fn score_classification(
    predicted: &Classification,
    gold: &HashMap<String, GoldLabel>,
) -> Result<ClassificationMetrics> {
    let (mut tp, mut fp, mut tn, mut fn_) = (0usize, 0usize, 0usize, 0usize);
    for (token, label) in gold {
        let positive = if predicted.preserve.contains(token) {
            true
        } else if predicted.debias.contains(token) {
            false
        } else {
            return Err(Error::MissingToken(token.clone()));
        };
        match (positive, label) {
            (true, GoldLabel::GenderSpecific) => tp += 1,
            (true, GoldLabel::NonGenderSpecific) => fp += 1,
            (false, GoldLabel::NonGenderSpecific) => tn += 1,
            (false, GoldLabel::GenderSpecific) => fn_ += 1,
        }
    }
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    let accuracy = ratio(tp + tn, tp + fp + tn + fn_);
    Ok(ClassificationMetrics {
        true_positives: tp,
        false_positives: fp,
        true_negatives: tn,
        false_negatives: fn_,
        precision,
        recall,
        f1,
        accuracy,
    })
}
