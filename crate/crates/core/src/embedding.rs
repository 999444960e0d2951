//! Loading, validating, normalizing and writing word embeddings in the
//! plain text format (`token c1 c2 ... ch`, one word per line).

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::linalg;
use crate::{Error, Result};

/// Ordered set of unique tokens with a token -> index lookup.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Builds a vocabulary, rejecting duplicates, empty tokens and tokens
    /// containing whitespace.
    pub fn new(words: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(words.len());
        for (i, word) in words.iter().enumerate() {
            if word.is_empty() {
                return Err(Error::Degenerate("empty token in vocabulary".into()));
            }
            if word.chars().any(char::is_whitespace) {
                return Err(Error::Degenerate(format!(
                    "token `{word}` contains whitespace"
                )));
            }
            if index.insert(word.clone(), i).is_some() {
                return Err(Error::Degenerate(format!("duplicate token `{word}`")));
            }
        }
        Ok(Self { words, index })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn word(&self, i: usize) -> &str {
        &self.words[i]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }
}

/// A vocabulary plus one dense `dim`-component row per word.
///
/// Immutable after construction; row data is stored row-major in a single
/// allocation so read-only sharing across worker threads is cheap.
#[derive(Debug, Clone)]
pub struct EmbeddingSet {
    vocab: Vocabulary,
    dim: usize,
    data: Vec<f64>,
}

impl EmbeddingSet {
    /// Builds a set from row-major `data` (`vocab.len() * dim` components,
    /// all finite).
    pub fn new(vocab: Vocabulary, dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Degenerate("embedding dimension must be > 0".into()));
        }
        if data.len() != vocab.len() * dim {
            return Err(Error::DimensionMismatch {
                expected: vocab.len() * dim,
                got: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::Degenerate(format!(
                "non-finite component for token `{}`",
                vocab.word(pos / dim)
            )));
        }
        Ok(Self { vocab, dim, data })
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    /// Row for `token`, if present.
    pub fn vector(&self, token: &str) -> Option<&[f64]> {
        self.vocab.index_of(token).map(|i| self.row(i))
    }

    /// Like [`vector`](Self::vector) but errors with the token name.
    pub fn require_vector(&self, token: &str) -> Result<&[f64]> {
        self.vector(token)
            .ok_or_else(|| Error::MissingToken(token.to_string()))
    }

    /// Returns a copy with every row scaled to Euclidean norm 1. Errors
    /// naming the token of any zero-norm row.
    pub fn unit_normalized(&self) -> Result<EmbeddingSet> {
        let mut data = Vec::with_capacity(self.data.len());
        for (i, row) in self.rows().enumerate() {
            let n = linalg::norm(row);
            if n == 0.0 {
                return Err(Error::ZeroVector(self.vocab.word(i).to_string()));
            }
            data.extend(row.iter().map(|x| x / n));
        }
        EmbeddingSet::new(self.vocab.clone(), self.dim, data)
    }
}

/// Result of [`load_embedding`]: the set plus how many duplicate tokens were
/// dropped (first occurrence wins).
#[derive(Debug)]
pub struct LoadOutcome {
    pub set: EmbeddingSet,
    pub duplicates: usize,
}

/// Parses the text format. When `expected_dim` is `None` the dimension is
/// taken from the first row. Empty lines are skipped; any other malformed
/// line is a parse error carrying its 1-based line number.
pub fn load_embedding<R: BufRead>(reader: R, expected_dim: Option<usize>) -> Result<LoadOutcome> {
    let mut dim = expected_dim;
    let mut words: Vec<String> = Vec::new();
    let mut seen: std::collections::HashSet<String> = std::collections::HashSet::new();
    let mut data: Vec<f64> = Vec::new();
    let mut duplicates = 0usize;

    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let token = fields.next().expect("non-empty line has a first field");
        let components: Vec<&str> = fields.collect();

        match dim {
            Some(d) => {
                if components.len() != d {
                    return Err(Error::parse(
                        lineno,
                        format!("expected {d} components, found {}", components.len()),
                    ));
                }
            }
            None => {
                if components.is_empty() {
                    return Err(Error::parse(lineno, "line has a token but no components"));
                }
                dim = Some(components.len());
            }
        }

        let mut row = Vec::with_capacity(components.len());
        for c in &components {
            let value: f64 = c
                .parse()
                .map_err(|_| Error::parse(lineno, format!("unparsable component `{c}`")))?;
            if !value.is_finite() {
                return Err(Error::parse(lineno, format!("non-finite component `{c}`")));
            }
            row.push(value);
        }

        if !seen.insert(token.to_string()) {
            duplicates += 1;
            continue;
        }
        data.extend_from_slice(&row);
        words.push(token.to_string());
    }

    let dim = dim.ok_or_else(|| Error::EmptyInput("no embedding rows".into()))?;
    if words.is_empty() {
        return Err(Error::EmptyInput("no embedding rows".into()));
    }
    let set = EmbeddingSet::new(Vocabulary::new(words)?, dim, data)?;
    Ok(LoadOutcome { set, duplicates })
}

pub fn load_embedding_file(path: &Path, expected_dim: Option<usize>) -> Result<LoadOutcome> {
    load_embedding(BufReader::new(File::open(path)?), expected_dim)
}

/// Writes the text format with `precision` decimal places per component.
/// A reload recovers vectors within `10^-precision` per component.
pub fn save_embedding<W: Write>(set: &EmbeddingSet, writer: W, precision: usize) -> Result<()> {
    if set.is_empty() {
        return Err(Error::EmptyInput("nothing to write".into()));
    }
    let mut w = BufWriter::new(writer);
    for (i, row) in set.rows().enumerate() {
        w.write_all(set.vocab().word(i).as_bytes())?;
        for c in row {
            write!(w, " {c:.precision$}")?;
        }
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_embedding_file(set: &EmbeddingSet, path: &Path, precision: usize) -> Result<()> {
    save_embedding(set, File::create(path)?, precision)
}
