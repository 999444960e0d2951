//! Gender direction extraction and the direct / indirect bias measures.

use std::io::BufRead;

use crate::embedding::EmbeddingSet;
use crate::linalg::{cosine, dot, norm, unit};
use crate::{Error, Result};

/// Female/male pairs used when no pair file is supplied.
pub const DEFAULT_GENDER_PAIRS: [(&str, &str); 10] = [
    ("she", "he"),
    ("her", "his"),
    ("woman", "man"),
    ("mary", "john"),
    ("herself", "himself"),
    ("daughter", "son"),
    ("mother", "father"),
    ("gal", "guy"),
    ("girl", "boy"),
    ("female", "male"),
];

/// Unit vector capturing the feminine<->masculine axis of an embedding.
///
/// Sign convention: `dot(g, v_woman - v_man) >= 0` whenever both tokens
/// exist in the embedding. Otherwise the sign is fixed against the mean
/// difference vector of the source pairs, and as a last resort so that the
/// first nonzero component of `g` is positive.
#[derive(Debug, Clone)]
pub struct GenderDirection {
    vector: Vec<f64>,
    source_pairs: Vec<(String, String)>,
}

impl GenderDirection {
    /// First principal component of the mean-centered difference vectors
    /// `v_female - v_male`, computed by power iteration on the covariance.
    ///
    /// When the centered differences carry (numerically) no variance —
    /// every pair produced the same difference — the common direction
    /// itself is returned; all-zero differences are an error.
    pub fn compute(set: &EmbeddingSet, pairs: &[(String, String)]) -> Result<Self> {
        if pairs.len() < 2 {
            return Err(Error::Degenerate(
                "need at least 2 gender pairs".into(),
            ));
        }
        let dim = set.dim();
        let mut diffs: Vec<Vec<f64>> = Vec::with_capacity(pairs.len());
        for (female, male) in pairs {
            let f = set.require_vector(female)?;
            let m = set.require_vector(male)?;
            diffs.push(f.iter().zip(m).map(|(a, b)| a - b).collect());
        }

        let mut mean = vec![0.0; dim];
        for d in &diffs {
            for (m, x) in mean.iter_mut().zip(d) {
                *m += x / diffs.len() as f64;
            }
        }
        let centered: Vec<Vec<f64>> = diffs
            .iter()
            .map(|d| d.iter().zip(&mean).map(|(x, m)| x - m).collect())
            .collect();

        let cov_centered = covariance(&centered, dim);
        let cov_raw = covariance(&diffs, dim);
        let trace_centered = trace(&cov_centered, dim);
        let trace_raw = trace(&cov_raw, dim);
        if trace_raw == 0.0 {
            return Err(Error::Degenerate(
                "all gender pair differences are zero".into(),
            ));
        }

        // Identical differences leave only cancellation noise after
        // centering; fall back to the uncentered covariance, whose dominant
        // eigenvector is the common difference direction.
        let mut g = if trace_centered <= 1e-24 * trace_raw {
            dominant_eigenvector(&cov_raw, dim, &diffs)?
        } else {
            dominant_eigenvector(&cov_centered, dim, &centered)?
        };

        fix_sign(&mut g, set, &diffs);
        Ok(Self {
            vector: g,
            source_pairs: pairs.to_vec(),
        })
    }

    pub fn vector(&self) -> &[f64] {
        &self.vector
    }

    pub fn dim(&self) -> usize {
        self.vector.len()
    }

    pub fn source_pairs(&self) -> &[(String, String)] {
        &self.source_pairs
    }

    /// Builds a direction from a raw vector (normalized here). Intended for
    /// tests and callers that already hold a direction.
    pub fn from_vector(vector: Vec<f64>) -> Result<Self> {
        let vector = unit(&vector, "gender direction")?;
        Ok(Self {
            vector,
            source_pairs: Vec::new(),
        })
    }
}

fn covariance(rows: &[Vec<f64>], dim: usize) -> Vec<f64> {
    let mut cov = vec![0.0; dim * dim];
    for r in rows {
        for i in 0..dim {
            let ri = r[i];
            if ri == 0.0 {
                continue;
            }
            for j in 0..dim {
                cov[i * dim + j] += ri * r[j];
            }
        }
    }
    cov
}

fn trace(cov: &[f64], dim: usize) -> f64 {
    (0..dim).map(|i| cov[i * dim + i]).sum()
}

/// Power iteration for the dominant eigenvector of a symmetric PSD matrix.
/// The start vector is the input row with the largest norm, which always
/// overlaps the dominant eigenspace of `rows' covariance`.
fn dominant_eigenvector(cov: &[f64], dim: usize, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
    let start = rows
        .iter()
        .max_by(|a, b| norm(a).partial_cmp(&norm(b)).unwrap())
        .expect("non-empty rows");
    let mut v = unit(start, "principal component start")?;
    let mut prev = v.clone();
    for _ in 0..10_000 {
        let mut next = vec![0.0; dim];
        for i in 0..dim {
            next[i] = dot(&cov[i * dim..(i + 1) * dim], &v);
        }
        let n = norm(&next);
        if n == 0.0 {
            // v is in the null space; the matrix had rank issues the caller
            // screens for, so treat as degenerate.
            return Err(Error::Degenerate(
                "power iteration hit the null space".into(),
            ));
        }
        for x in &mut next {
            *x /= n;
        }
        let delta = f64::min(
            next.iter().zip(&prev).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max),
            next.iter().zip(&prev).map(|(a, b)| (a + b).abs()).fold(0.0, f64::max),
        );
        prev = next.clone();
        v = next;
        if delta < 1e-14 {
            break;
        }
    }
    Ok(v)
}

fn fix_sign(g: &mut [f64], set: &EmbeddingSet, diffs: &[Vec<f64>]) {
    let reference = match (set.vector("woman"), set.vector("man")) {
        (Some(w), Some(m)) => Some(w.iter().zip(m).map(|(a, b)| a - b).collect::<Vec<f64>>()),
        _ => None,
    };
    let orientation = match reference {
        Some(r) => dot(g, &r),
        None => {
            let mut mean = vec![0.0; g.len()];
            for d in diffs {
                for (m, x) in mean.iter_mut().zip(d) {
                    *m += x;
                }
            }
            dot(g, &mean)
        }
    };
    let flip = if orientation != 0.0 {
        orientation < 0.0
    } else {
        matches!(g.iter().find(|x| **x != 0.0), Some(x) if *x < 0.0)
    };
    if flip {
        for x in g.iter_mut() {
            *x = -*x;
        }
    }
}

/// Strictness exponent for [`direct_bias`]; must be positive.
#[derive(Debug, Clone, Copy)]
pub struct DirectBiasParams {
    strictness: f64,
}

impl DirectBiasParams {
    pub fn new(strictness: f64) -> Result<Self> {
        if !(strictness > 0.0) || !strictness.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "bias strictness must be a positive finite number, got {strictness}"
            )));
        }
        Ok(Self { strictness })
    }

    pub fn strictness(&self) -> f64 {
        self.strictness
    }
}

impl Default for DirectBiasParams {
    fn default() -> Self {
        Self { strictness: 1.0 }
    }
}

/// `|cos(w, g)|^c` — projection strength of `w` on the gender direction.
pub fn direct_bias(w: &[f64], g: &GenderDirection, params: &DirectBiasParams) -> Result<f64> {
    let c = cosine(w, g.vector(), "direct bias input")?;
    Ok(c.abs().powf(params.strictness))
}

/// Indirect bias between `w` and `v`: the proportional change of their
/// inner product once the gender component is projected out of both.
///
/// Both vectors are unit-normalized before the formula applies. Errors when
/// the pair is orthogonal after normalization (division by zero: the bias is
/// undefined) or when either vector is collinear with the gender direction.
pub fn indirect_bias(w: &[f64], v: &[f64], g: &GenderDirection) -> Result<f64> {
    let w = unit(w, "indirect bias first argument")?;
    let v = unit(v, "indirect bias second argument")?;
    let gv = g.vector();

    let perp = |x: &[f64]| -> Vec<f64> {
        let along = dot(x, gv);
        x.iter().zip(gv).map(|(xi, gi)| xi - along * gi).collect()
    };
    let w_perp = perp(&w);
    let v_perp = perp(&v);
    if norm(&w_perp) == 0.0 || norm(&v_perp) == 0.0 {
        return Err(Error::UndefinedBias(
            "vector collinear with the gender direction".into(),
        ));
    }

    let denom = dot(&w, &v);
    if denom == 0.0 {
        return Err(Error::UndefinedBias(
            "orthogonal pair: inner product is zero".into(),
        ));
    }
    let perp_cos = cosine(&w_perp, &v_perp, "projected pair")?;
    Ok((denom - perp_cos) / denom)
}

/// Reads `female_token male_token` pairs, one per line. `#` starts a
/// comment; blank lines are skipped.
pub fn load_gender_pairs<R: BufRead>(reader: R) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split_whitespace();
        match (fields.next(), fields.next(), fields.next()) {
            (Some(f), Some(m), None) => pairs.push((f.to_string(), m.to_string())),
            _ => {
                return Err(Error::parse(
                    lineno + 1,
                    "expected exactly two tokens per line",
                ))
            }
        }
    }
    Ok(pairs)
}

pub fn default_gender_pairs() -> Vec<(String, String)> {
    DEFAULT_GENDER_PAIRS
        .iter()
        .map(|(f, m)| (f.to_string(), m.to_string()))
        .collect()
}
