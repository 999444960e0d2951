//! Exact top-k cosine neighbours — the shared substrate for repulsion sets,
//! proximity bias and the bias network.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::{BufRead, Write};

use indexmap::IndexMap;
use rayon::prelude::*;

use crate::embedding::EmbeddingSet;
use crate::linalg::norm;
use crate::{Error, Result};

/// Neighbours per word used throughout the pipeline unless overridden.
pub const DEFAULT_K: usize = 100;

/// Per-word top-k cosine neighbours, descending by similarity, ties broken
/// by ascending vocabulary index. A token never lists itself.
#[derive(Debug, Clone)]
pub struct NeighbourTable {
    k: usize,
    entries: IndexMap<String, Vec<(String, f64)>>,
}

impl NeighbourTable {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&[(String, f64)]> {
        self.entries.get(token).map(Vec::as_slice)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&String, &[(String, f64)])> {
        self.entries.iter().map(|(t, n)| (t, n.as_slice()))
    }

    /// Copy with every list cut down to its strongest `k` neighbours
    /// (lists are already sorted, so a prefix is the exact top-k).
    pub fn truncated(&self, k: usize) -> NeighbourTable {
        let entries = self
            .entries
            .iter()
            .map(|(t, n)| (t.clone(), n.iter().take(k).cloned().collect()))
            .collect();
        NeighbourTable {
            k: k.min(self.k),
            entries,
        }
    }

    /// `token<TAB>neighbour:sim,...` — one row per query word, insertion
    /// order. Similarities use shortest-roundtrip formatting, so a reload
    /// reproduces the exact values.
    pub fn write_cache<W: Write>(&self, mut writer: W) -> Result<()> {
        for (token, neighbours) in &self.entries {
            write!(writer, "{token}\t")?;
            for (i, (n, sim)) in neighbours.iter().enumerate() {
                if i > 0 {
                    writer.write_all(b",")?;
                }
                write!(writer, "{n}:{sim}")?;
            }
            writer.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_cache<R: BufRead>(reader: R) -> Result<Self> {
        let mut entries: IndexMap<String, Vec<(String, f64)>> = IndexMap::new();
        let mut k = 0usize;
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let (token, rest) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(lineno + 1, "expected `token<TAB>list`"))?;
            let mut neighbours = Vec::new();
            if !rest.is_empty() {
                for item in rest.split(',') {
                    let (n, sim) = item.rsplit_once(':').ok_or_else(|| {
                        Error::parse(lineno + 1, format!("expected `neighbour:sim`, got `{item}`"))
                    })?;
                    let sim: f64 = sim.parse().map_err(|_| {
                        Error::parse(lineno + 1, format!("unparsable similarity `{sim}`"))
                    })?;
                    neighbours.push((n.to_string(), sim));
                }
            }
            k = k.max(neighbours.len());
            entries.insert(token.to_string(), neighbours);
        }
        if entries.is_empty() {
            return Err(Error::EmptyInput("empty neighbour cache".into()));
        }
        Ok(Self { k, entries })
    }
}

#[derive(PartialEq)]
struct Candidate {
    similarity: f64,
    index: usize,
}

// Total order: higher similarity first, lower vocabulary index on ties.
// Similarities are finite by construction.
impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.similarity
            .partial_cmp(&other.similarity)
            .expect("finite similarities")
            .then_with(|| other.index.cmp(&self.index))
    }
}

/// Exact top-k cosine neighbours for each query word over the full
/// vocabulary, parallel across query words.
pub fn top_k_neighbours(
    set: &EmbeddingSet,
    query_words: &[String],
    k: usize,
) -> Result<NeighbourTable> {
    if k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    let query_indices: Vec<usize> = query_words
        .iter()
        .map(|w| {
            set.vocab()
                .index_of(w)
                .ok_or_else(|| Error::MissingToken(w.clone()))
        })
        .collect::<Result<_>>()?;

    let norms: Vec<f64> = set.rows().map(norm).collect();
    for (qi, w) in query_indices.iter().zip(query_words) {
        if norms[*qi] == 0.0 {
            return Err(Error::ZeroVector(w.clone()));
        }
    }

    let lists: Vec<Vec<(String, f64)>> = query_indices
        .par_iter()
        .map(|&qi| {
            let q = set.row(qi);
            let qn = norms[qi];
            // Min-heap of the current best k: the weakest candidate sits on
            // top and is evicted first.
            let mut heap: BinaryHeap<std::cmp::Reverse<Candidate>> =
                BinaryHeap::with_capacity(k + 1);
            for i in 0..set.len() {
                if i == qi || norms[i] == 0.0 {
                    continue;
                }
                let sim = crate::linalg::dot(q, set.row(i)) / (qn * norms[i]);
                heap.push(std::cmp::Reverse(Candidate {
                    similarity: sim,
                    index: i,
                }));
                if heap.len() > k {
                    heap.pop();
                }
            }
            let mut top: Vec<Candidate> = heap.into_iter().map(|r| r.0).collect();
            top.sort_unstable_by(|a, b| b.cmp(a));
            top.into_iter()
                .map(|c| (set.vocab().word(c.index).to_string(), c.similarity))
                .collect()
        })
        .collect();

    let mut entries = IndexMap::with_capacity(query_words.len());
    for (w, list) in query_words.iter().zip(lists) {
        entries.insert(w.clone(), list);
    }
    Ok(NeighbourTable { k, entries })
}
