//! Bias network construction and the gender-based illicit proximity
//! estimate (GIPE).
//!
//! The bias network is a weighted directed graph: every query word points
//! at its top-n cosine neighbours, each edge weighted by the indirect bias
//! of the pair. Per-word proximity bias counts outgoing edges above a
//! threshold; node weights count incoming ones; GIPE is the weighted
//! average over the query set.

use std::collections::HashMap;
use std::io::Write;

use indexmap::{IndexMap, IndexSet};

use crate::embedding::EmbeddingSet;
use crate::geometry::{indirect_bias, GenderDirection};
use crate::neighbours::{top_k_neighbours, NeighbourTable};
use crate::{Error, Result};

/// Default denominator guard for node weights.
pub const DEFAULT_EPSILON: f64 = 1e-6;

/// Weighted directed graph over words. Out-edges exist only for query
/// nodes; neighbour-only nodes are present as targets.
#[derive(Debug, Clone)]
pub struct BiasNetwork {
    n: usize,
    nodes: IndexSet<String>,
    out_edges: IndexMap<String, Vec<(String, f64)>>,
    in_edges: HashMap<String, Vec<(String, f64)>>,
}

impl BiasNetwork {
    /// Builds the network for query set `words`: neighbours are found in
    /// `eval_set`, while edge weights come from `reference_set` vectors
    /// (for a debiased embedding, pass the original as the reference).
    /// Pairs with undefined indirect bias get weight 0.
    pub fn build(
        eval_set: &EmbeddingSet,
        reference_set: &EmbeddingSet,
        words: &[String],
        n: usize,
        g: &GenderDirection,
    ) -> Result<Self> {
        let table = top_k_neighbours(eval_set, words, n)?;
        Self::from_neighbour_table(&table, reference_set, g)
    }

    /// Assembles the network from a precomputed neighbour table (e.g. a
    /// cache written by an earlier stage).
    pub fn from_neighbour_table(
        table: &NeighbourTable,
        reference_set: &EmbeddingSet,
        g: &GenderDirection,
    ) -> Result<Self> {
        let mut nodes = IndexSet::new();
        let mut out_edges: IndexMap<String, Vec<(String, f64)>> =
            IndexMap::with_capacity(table.len());
        let mut in_edges: HashMap<String, Vec<(String, f64)>> = HashMap::new();

        for (word, neighbours) in table.entries() {
            let w_vec = reference_set.require_vector(word)?;
            nodes.insert(word.clone());
            let mut edges = Vec::with_capacity(neighbours.len());
            for (neighbour, _) in neighbours {
                let n_vec = reference_set.require_vector(neighbour)?;
                let beta = match indirect_bias(w_vec, n_vec, g) {
                    Ok(b) => b,
                    Err(Error::UndefinedBias(_)) => 0.0,
                    Err(e) => return Err(e),
                };
                nodes.insert(neighbour.clone());
                edges.push((neighbour.clone(), beta));
                in_edges
                    .entry(neighbour.clone())
                    .or_default()
                    .push((word.clone(), beta));
            }
            out_edges.insert(word.clone(), edges);
        }

        Ok(Self {
            n: table.k(),
            nodes,
            out_edges,
            in_edges,
        })
    }

    /// Builds a network directly from explicit edges, for callers that
    /// already hold a graph. `query_nodes` fixes the query-set order; every
    /// edge source must be a query node.
    pub fn from_edges(
        query_nodes: &[String],
        edges: &[(String, String, f64)],
        n: usize,
    ) -> Result<Self> {
        let mut nodes: IndexSet<String> = query_nodes.iter().cloned().collect();
        let mut out_edges: IndexMap<String, Vec<(String, f64)>> = query_nodes
            .iter()
            .map(|q| (q.clone(), Vec::new()))
            .collect();
        let mut in_edges: HashMap<String, Vec<(String, f64)>> = HashMap::new();
        for (src, dst, beta) in edges {
            if src == dst {
                return Err(Error::InvalidConfig(format!("self-loop on `{src}`")));
            }
            let list = out_edges.get_mut(src).ok_or_else(|| {
                Error::InvalidConfig(format!("edge source `{src}` is not a query node"))
            })?;
            if list.len() == n {
                return Err(Error::InvalidConfig(format!(
                    "query node `{src}` has more than {n} out-edges"
                )));
            }
            list.push((dst.clone(), *beta));
            nodes.insert(dst.clone());
            in_edges
                .entry(dst.clone())
                .or_default()
                .push((src.clone(), *beta));
        }
        Ok(Self {
            n,
            nodes,
            out_edges,
            in_edges,
        })
    }

    /// Neighbours per query node this network was built with.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nodes(&self) -> impl Iterator<Item = &String> {
        self.nodes.iter()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn query_set(&self) -> impl Iterator<Item = &String> {
        self.out_edges.keys()
    }

    pub fn query_count(&self) -> usize {
        self.out_edges.len()
    }

    pub fn out_edges(&self, token: &str) -> Option<&[(String, f64)]> {
        self.out_edges.get(token).map(Vec::as_slice)
    }

    pub fn in_edges(&self, token: &str) -> &[(String, f64)] {
        self.in_edges.get(token).map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Fraction of a query word's out-edges with weight strictly above
/// `theta_s`. A query node with no out-edges (single-word vocabulary)
/// scores 0.
pub fn proximity_bias(word: &str, net: &BiasNetwork, theta_s: f64) -> Result<f64> {
    let edges = net
        .out_edges(word)
        .ok_or_else(|| Error::MissingToken(word.to_string()))?;
    if edges.is_empty() {
        return Ok(0.0);
    }
    let biased = edges.iter().filter(|(_, b)| *b > theta_s).count();
    Ok(biased as f64 / edges.len() as f64)
}

/// Node weight: `1 + |incoming with weight > theta_s| / (epsilon + |incoming|)`.
/// A node with no incoming edges weighs exactly 1.
pub fn node_weight(word: &str, net: &BiasNetwork, theta_s: f64, epsilon: f64) -> f64 {
    let incoming = net.in_edges(word);
    let biased = incoming.iter().filter(|(_, b)| *b > theta_s).count();
    1.0 + biased as f64 / (epsilon + incoming.len() as f64)
}

/// Per-word entry of a [`GipeReport`].
#[derive(Debug, Clone)]
pub struct WordBias {
    pub token: String,
    pub eta: f64,
    pub gamma: f64,
    /// Out-edges above the threshold.
    pub biased_neighbours: usize,
    pub incoming_biased: usize,
    pub incoming_total: usize,
}

/// GIPE over a network's query set, with the full per-word breakdown.
#[derive(Debug, Clone)]
pub struct GipeReport {
    pub theta_s: f64,
    pub epsilon: f64,
    pub per_word: Vec<WordBias>,
    pub gipe: f64,
}

impl GipeReport {
    /// Tab-separated per-word rows followed by a summary line.
    pub fn write_tsv<W: Write>(&self, mut writer: W) -> Result<()> {
        writeln!(writer, "token\teta\tgamma\tbiased_out\tin_biased\tin_total")?;
        for w in &self.per_word {
            writeln!(
                writer,
                "{}\t{:.6}\t{:.6}\t{}\t{}\t{}",
                w.token, w.eta, w.gamma, w.biased_neighbours, w.incoming_biased, w.incoming_total
            )?;
        }
        writeln!(
            writer,
            "GIPE\ttheta_s={}\tepsilon={}\twords={}\tvalue={:.6}",
            self.theta_s,
            self.epsilon,
            self.per_word.len(),
            self.gipe
        )?;
        Ok(())
    }
}

/// Weighted average of proximity bias over the query set.
pub fn gipe(net: &BiasNetwork, theta_s: f64, epsilon: f64) -> Result<GipeReport> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidConfig(
            "epsilon must be a positive constant".into(),
        ));
    }
    if net.query_count() == 0 {
        return Err(Error::EmptyInput("bias network has no query nodes".into()));
    }
    let mut per_word = Vec::with_capacity(net.query_count());
    let mut weighted_sum = 0.0;
    let mut weight_sum = 0.0;
    for word in net.query_set() {
        let eta = proximity_bias(word, net, theta_s)?;
        let gamma = node_weight(word, net, theta_s, epsilon);
        let out = net.out_edges(word).unwrap_or(&[]);
        let incoming = net.in_edges(word);
        per_word.push(WordBias {
            token: word.clone(),
            eta,
            gamma,
            biased_neighbours: out.iter().filter(|(_, b)| *b > theta_s).count(),
            incoming_biased: incoming.iter().filter(|(_, b)| *b > theta_s).count(),
            incoming_total: incoming.len(),
        });
        weighted_sum += gamma * eta;
        weight_sum += gamma;
    }
    Ok(GipeReport {
        theta_s,
        epsilon,
        per_word,
        gipe: weighted_sum / weight_sum,
    })
}
