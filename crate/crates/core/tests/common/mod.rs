//! Shared fixtures: synthetic embeddings with planted gender structure and
//! an independent, loop-based reference implementation of the bias network
//! metrics.

// Each integration-test target compiles this module and uses its own subset.
#![allow(dead_code)]

use std::collections::{HashMap, HashSet};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use ran_debias::embedding::{EmbeddingSet, Vocabulary};
use ran_debias::geometry::{GenderDirection, DEFAULT_GENDER_PAIRS};
use ran_debias::kbc::Classification;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Purely alphabetic token suffix (`a`, `b`, ..., `aa`, ...), so synthetic
/// vocabularies survive the non-alphabetic classifier stage.
pub fn alpha_suffix(mut i: usize) -> String {
    let mut s = String::new();
    loop {
        s.insert(0, (b'a' + (i % 26) as u8) as char);
        i /= 26;
        if i == 0 {
            return s;
        }
        i -= 1;
    }
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize, zero_first: bool) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        if zero_first {
            v[0] = 0.0;
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-3 {
            for x in &mut v {
                *x /= n;
            }
            return v;
        }
    }
}

pub fn build_set(rows: Vec<(String, Vec<f64>)>) -> EmbeddingSet {
    let dim = rows[0].1.len();
    let vocab = Vocabulary::new(rows.iter().map(|(w, _)| w.clone()).collect()).unwrap();
    let data = rows.into_iter().flat_map(|(_, r)| r).collect();
    EmbeddingSet::new(vocab, dim, data).unwrap()
}

/// Fully random embedding, components uniform in [-1, 1].
pub fn random_embedding(seed: u64, n: usize, dim: usize) -> EmbeddingSet {
    let mut rng = rng(seed);
    let rows = (0..n)
        .map(|i| {
            let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            (format!("w{i}"), v)
        })
        .collect();
    build_set(rows)
}

/// A synthetic embedding with planted gender structure along axis 0:
///
/// * the twenty tokens of the default gender pairs, strongly gendered
///   (these form the preserve set);
/// * two "illicit proximity" groups whose members are close to one another
///   mainly through a shared same-sign gender component;
/// * neutral fillers with only tiny random gender components.
pub struct Synthetic {
    pub set: EmbeddingSet,
    pub classification: Classification,
    pub gender_pairs: Vec<(String, String)>,
    pub debias_words: Vec<String>,
}

pub fn biased_embedding(seed: u64, group_size: usize, n_fillers: usize, dim: usize) -> Synthetic {
    assert!(dim >= 4);
    let mut rng = rng(seed);
    let mut rows: Vec<(String, Vec<f64>)> = Vec::new();
    let mut preserve: HashSet<String> = HashSet::new();

    let gender_pairs: Vec<(String, String)> = DEFAULT_GENDER_PAIRS
        .iter()
        .map(|(f, m)| (f.to_string(), m.to_string()))
        .collect();
    for (female, male) in &gender_pairs {
        // Pair members share a semantic base and sit at opposite ends of
        // the gender axis.
        let base = random_unit(&mut rng, dim, true);
        for (token, sign) in [(female, 1.0), (male, -1.0)] {
            let mut v: Vec<f64> = base.iter().map(|x| 0.2 * x).collect();
            v[0] = 0.8 * sign + rng.random_range(-0.02..0.02);
            rows.push((token.clone(), v));
            preserve.insert(token.clone());
        }
    }

    // Illicit groups: gender carries the shared similarity, the semantic
    // part is per-word noise.
    let gamma: f64 = 0.65;
    let delta = (1.0 - gamma * gamma).sqrt();
    for (group, sign) in [("fem", 1.0), ("masc", -1.0)] {
        for i in 0..group_size {
            let r = random_unit(&mut rng, dim, true);
            let mut v: Vec<f64> = r.iter().map(|x| delta * x).collect();
            v[0] = gamma * sign;
            rows.push((format!("{group}{}", alpha_suffix(i)), v));
        }
    }

    for i in 0..n_fillers {
        let r = random_unit(&mut rng, dim, true);
        let mut v = r;
        v[0] = rng.random_range(-0.08..0.08);
        rows.push((format!("plain{}", alpha_suffix(i)), v));
    }

    let debias_words: Vec<String> = rows
        .iter()
        .map(|(w, _)| w.clone())
        .filter(|w| !preserve.contains(w))
        .collect();
    let debias: HashSet<String> = debias_words.iter().cloned().collect();
    Synthetic {
        set: build_set(rows),
        classification: Classification::from_sets(preserve, debias).unwrap(),
        gender_pairs,
        debias_words,
    }
}

pub fn mean_direct_bias(set: &EmbeddingSet, words: &[String], g: &GenderDirection) -> f64 {
    let params = ran_debias::geometry::DirectBiasParams::default();
    let sum: f64 = words
        .iter()
        .map(|w| {
            ran_debias::geometry::direct_bias(set.vector(w).unwrap(), g, &params).unwrap()
        })
        .sum();
    sum / words.len() as f64
}

pub fn mean_cosine(a: &EmbeddingSet, b: &EmbeddingSet, words: &[String]) -> f64 {
    let sum: f64 = words
        .iter()
        .map(|w| {
            let x = a.vector(w).unwrap();
            let y = b.vector(w).unwrap();
            dot(x, y) / (norm(x) * norm(y))
        })
        .sum();
    sum / words.len() as f64
}

// --- independent reference implementation ---------------------------------
//
// Plain two-loop versions of neighbour search, indirect bias, the network
// metrics and their weighted average. Kept free of calls into the library's
// geometry/network code so it can serve as an oracle.

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn naive_beta(w: &[f64], v: &[f64], g: &[f64]) -> Option<f64> {
    let nw = norm(w);
    let nv = norm(v);
    if nw == 0.0 || nv == 0.0 {
        return None;
    }
    let w: Vec<f64> = w.iter().map(|x| x / nw).collect();
    let v: Vec<f64> = v.iter().map(|x| x / nv).collect();
    let wg = dot(&w, g);
    let vg = dot(&v, g);
    let w_perp: Vec<f64> = w.iter().zip(g).map(|(x, gi)| x - wg * gi).collect();
    let v_perp: Vec<f64> = v.iter().zip(g).map(|(x, gi)| x - vg * gi).collect();
    let nwp = norm(&w_perp);
    let nvp = norm(&v_perp);
    if nwp == 0.0 || nvp == 0.0 {
        return None;
    }
    let denom = dot(&w, &v);
    if denom == 0.0 {
        return None;
    }
    Some((denom - dot(&w_perp, &v_perp) / (nwp * nvp)) / denom)
}

pub struct NaiveNetwork {
    /// Source -> ordered (target, beta) out-edges.
    pub out_edges: Vec<(String, Vec<(String, f64)>)>,
    pub eta: HashMap<String, f64>,
    pub gamma: HashMap<String, f64>,
    pub gipe: f64,
}

pub fn naive_network(
    eval: &EmbeddingSet,
    reference: &EmbeddingSet,
    words: &[String],
    n: usize,
    g: &[f64],
    theta_s: f64,
    epsilon: f64,
) -> NaiveNetwork {
    // Top-n neighbours by full sort: similarity descending, index ascending.
    let mut out_edges: Vec<(String, Vec<(String, f64)>)> = Vec::new();
    for word in words {
        let qi = eval.vocab().index_of(word).unwrap();
        let q = eval.row(qi);
        let mut sims: Vec<(usize, f64)> = (0..eval.len())
            .filter(|&i| i != qi)
            .map(|i| (i, dot(q, eval.row(i)) / (norm(q) * norm(eval.row(i)))))
            .collect();
        sims.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        let mut edges = Vec::new();
        for (i, _) in sims.into_iter().take(n) {
            let target = eval.vocab().word(i).to_string();
            let beta = naive_beta(
                reference.vector(word).unwrap(),
                reference.vector(&target).unwrap(),
                g,
            )
            .unwrap_or(0.0);
            edges.push((target, beta));
        }
        out_edges.push((word.clone(), edges));
    }

    let mut eta = HashMap::new();
    for (word, edges) in &out_edges {
        let biased = edges.iter().filter(|(_, b)| *b > theta_s).count();
        let value = if edges.is_empty() {
            0.0
        } else {
            biased as f64 / edges.len() as f64
        };
        eta.insert(word.clone(), value);
    }

    let mut gamma = HashMap::new();
    for (word, _) in &out_edges {
        let mut incoming = 0usize;
        let mut biased = 0usize;
        for (src, edges) in &out_edges {
            if src == word {
                continue;
            }
            for (dst, b) in edges {
                if dst == word {
                    incoming += 1;
                    if *b > theta_s {
                        biased += 1;
                    }
                }
            }
        }
        gamma.insert(word.clone(), 1.0 + biased as f64 / (epsilon + incoming as f64));
    }

    let num: f64 = out_edges.iter().map(|(w, _)| gamma[w] * eta[w]).sum();
    let den: f64 = out_edges.iter().map(|(w, _)| gamma[w]).sum();
    NaiveNetwork {
        out_edges,
        eta,
        gamma,
        gipe: num / den,
    }
}
