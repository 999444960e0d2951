//! The debiasing optimizer: per-word repulsion sets and minimization of the
//! scalarized repulsion / attraction / neutralization objective with
//! adam-style gradient descent.

use std::io::Write;

use rayon::prelude::*;

use crate::embedding::EmbeddingSet;
use crate::geometry::{indirect_bias, GenderDirection};
use crate::kbc::Classification;
use crate::linalg::{cosine, dot, norm};
use crate::neighbours::{top_k_neighbours, NeighbourTable, DEFAULT_K};
use crate::{Error, Result};

/// Repulsion-set threshold used unless overridden.
pub const DEFAULT_THETA_R: f64 = 0.05;

/// Relative importance of the three objective terms. Each weight lies in
/// [0, 1] and they sum to 1 (within 1e-12).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveWeights {
    repulsion: f64,
    attraction: f64,
    neutralization: f64,
}

impl ObjectiveWeights {
    pub fn new(repulsion: f64, attraction: f64, neutralization: f64) -> Result<Self> {
        for (name, w) in [
            ("repulsion", repulsion),
            ("attraction", attraction),
            ("neutralization", neutralization),
        ] {
            if !(0.0..=1.0).contains(&w) || !w.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "{name} weight must lie in [0, 1], got {w}"
                )));
            }
        }
        let sum = repulsion + attraction + neutralization;
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidConfig(format!(
                "objective weights must sum to 1, got {sum}"
            )));
        }
        Ok(Self {
            repulsion,
            attraction,
            neutralization,
        })
    }

    pub fn repulsion(&self) -> f64 {
        self.repulsion
    }

    pub fn attraction(&self) -> f64 {
        self.attraction
    }

    pub fn neutralization(&self) -> f64 {
        self.neutralization
    }
}

impl Default for ObjectiveWeights {
    /// The reference setting: (1/8, 6/8, 1/8).
    fn default() -> Self {
        Self {
            repulsion: 0.125,
            attraction: 0.75,
            neutralization: 0.125,
        }
    }
}

/// A member of a word's repulsion set: a close neighbour whose proximity is
/// attributed to gender rather than meaning.
#[derive(Debug, Clone)]
pub struct RepulsionMember {
    pub token: String,
    pub vector: Vec<f64>,
}

/// Neighbours of `word` (from the original embedding) whose indirect bias
/// with it exceeds `theta_r`.
#[derive(Debug, Clone)]
pub struct RepulsionSet {
    pub word: String,
    pub theta_r: f64,
    pub members: Vec<RepulsionMember>,
}

impl RepulsionSet {
    pub fn empty(word: impl Into<String>, theta_r: f64) -> Self {
        Self {
            word: word.into(),
            theta_r,
            members: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Builds the repulsion set for `word` from its neighbour list. Pairs whose
/// indirect bias is undefined are excluded; members are deduplicated by
/// token.
pub fn repulsion_set(
    word: &str,
    neighbours: &NeighbourTable,
    reference_set: &EmbeddingSet,
    g: &GenderDirection,
    theta_r: f64,
) -> Result<RepulsionSet> {
    let list = neighbours
        .get(word)
        .ok_or_else(|| Error::MissingToken(word.to_string()))?;
    let w_vec = reference_set.require_vector(word)?;
    let mut members = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (token, _) in list {
        if !seen.insert(token.as_str()) {
            continue;
        }
        let n_vec = reference_set.require_vector(token)?;
        match indirect_bias(w_vec, n_vec, g) {
            Ok(beta) if beta > theta_r => members.push(RepulsionMember {
                token: token.clone(),
                vector: n_vec.to_vec(),
            }),
            Ok(_) => {}
            Err(Error::UndefinedBias(_)) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(RepulsionSet {
        word: word.to_string(),
        theta_r,
        members,
    })
}

/// Mean absolute cosine between the candidate and the repulsion-set
/// members; 0 for an empty set (nothing to repel).
pub fn f_r(w_d: &[f64], s: &RepulsionSet) -> Result<f64> {
    if s.is_empty() {
        // Still reject a zero candidate so all terms share preconditions.
        if norm(w_d) == 0.0 {
            return Err(Error::ZeroVector("repulsion input".into()));
        }
        return Ok(0.0);
    }
    let mut sum = 0.0;
    for m in &s.members {
        sum += cosine(w_d, &m.vector, "repulsion input")?.abs();
    }
    Ok(sum / s.members.len() as f64)
}

/// Semantic-offset term: `|cos(w_d, w) - 1| / 2`.
pub fn f_a(w_d: &[f64], w: &[f64]) -> Result<f64> {
    Ok((cosine(w_d, w, "attraction input")? - 1.0).abs() / 2.0)
}

/// Gender-projection term: `|cos(w_d, g)|`.
pub fn f_n(w_d: &[f64], g: &GenderDirection) -> Result<f64> {
    Ok(cosine(w_d, g.vector(), "neutralization input")?.abs())
}

/// The scalarized objective: a weighted sum of the three terms, in [0, 1].
pub fn objective(
    w_d: &[f64],
    w: &[f64],
    s: &RepulsionSet,
    g: &GenderDirection,
    weights: &ObjectiveWeights,
) -> Result<f64> {
    Ok(weights.repulsion * f_r(w_d, s)?
        + weights.attraction * f_a(w_d, w)?
        + weights.neutralization * f_n(w_d, g)?)
}

// sign with sign(0) = 0, so |.| keeps its kink points stationary.
fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

// out += scale * d cos(x, a)/dx, where
// d cos(x, a)/dx = a/(|x||a|) - cos(x, a) * x / |x|^2.
fn add_scaled_cosine_gradient(x: &[f64], a: &[f64], scale: f64, out: &mut [f64]) -> Result<f64> {
    let nx = norm(x);
    let na = norm(a);
    if nx == 0.0 || na == 0.0 {
        return Err(Error::ZeroVector("cosine gradient input".into()));
    }
    let cos = dot(x, a) / (nx * na);
    if scale != 0.0 {
        let inv = 1.0 / (nx * na);
        let self_coeff = cos / (nx * nx);
        for ((o, xi), ai) in out.iter_mut().zip(x).zip(a) {
            *o += scale * (ai * inv - self_coeff * xi);
        }
    }
    Ok(cos)
}

/// Analytic gradient of [`objective`] with respect to `w_d`.
pub fn objective_gradient(
    w_d: &[f64],
    w: &[f64],
    s: &RepulsionSet,
    g: &GenderDirection,
    weights: &ObjectiveWeights,
) -> Result<Vec<f64>> {
    if norm(w_d) == 0.0 {
        return Err(Error::ZeroVector("objective gradient input".into()));
    }
    let mut grad = vec![0.0; w_d.len()];

    if weights.repulsion != 0.0 && !s.is_empty() {
        let per_member = weights.repulsion / s.members.len() as f64;
        for m in &s.members {
            let cos = cosine(w_d, &m.vector, "repulsion member")?;
            add_scaled_cosine_gradient(w_d, &m.vector, per_member * sgn(cos), &mut grad)?;
        }
    }

    if weights.attraction != 0.0 {
        let cos = cosine(w_d, w, "attraction anchor")?;
        add_scaled_cosine_gradient(w_d, w, weights.attraction * sgn(cos - 1.0) / 2.0, &mut grad)?;
    }

    if weights.neutralization != 0.0 {
        let cos = cosine(w_d, g.vector(), "gender direction")?;
        add_scaled_cosine_gradient(
            w_d,
            g.vector(),
            weights.neutralization * sgn(cos),
            &mut grad,
        )?;
    }

    Ok(grad)
}

/// Adam-style optimizer settings.
#[derive(Debug, Clone, Copy)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub max_steps: usize,
    pub beta1: f64,
    pub beta2: f64,
    /// Numerical-stability constant in the update denominator.
    pub epsilon: f64,
    /// Stop once the step-to-step objective change falls below this.
    pub tolerance: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            max_steps: 300,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            tolerance: 1e-8,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig("learning rate must be positive".into()));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidConfig("max steps must be at least 1".into()));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0 < b && b < 1.0) {
                return Err(Error::InvalidConfig(format!("{name} must lie in (0, 1)")));
            }
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidConfig("epsilon must be positive".into()));
        }
        if !(self.tolerance >= 0.0) {
            return Err(Error::InvalidConfig("tolerance must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Objective values and step count for one word's optimization.
#[derive(Debug, Clone, Copy)]
pub struct TraceEntry {
    pub initial_objective: f64,
    pub final_objective: f64,
    pub steps: usize,
}

/// Minimizes the objective starting from `w`; returns the best iterate
/// observed, rescaled to the original norm of `w`.
pub fn debias_word(
    w: &[f64],
    s: &RepulsionSet,
    g: &GenderDirection,
    weights: &ObjectiveWeights,
    cfg: &OptimizerConfig,
) -> Result<(Vec<f64>, TraceEntry)> {
    cfg.validate()?;
    let original_norm = norm(w);
    if original_norm == 0.0 {
        return Err(Error::ZeroVector(s.word.clone()));
    }

    let dim = w.len();
    let mut x: Vec<f64> = w.to_vec();
    let mut m = vec![0.0; dim];
    let mut v = vec![0.0; dim];

    let initial = objective(&x, w, s, g, weights)?;
    let mut best = x.clone();
    let mut best_objective = initial;
    let mut prev_objective = initial;
    let mut steps = 0usize;

    for t in 1..=cfg.max_steps {
        let grad = objective_gradient(&x, w, s, g, weights)
            .map_err(|e| Error::Divergence(format!("step {t}: {e}")))?;
        let bias1 = 1.0 - cfg.beta1.powi(t as i32);
        let bias2 = 1.0 - cfg.beta2.powi(t as i32);
        for i in 0..dim {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
            let m_hat = m[i] / bias1;
            let v_hat = v[i] / bias2;
            x[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
        }
        steps = t;

        if x.iter().any(|c| !c.is_finite()) {
            return Err(Error::Divergence(format!(
                "non-finite iterate at step {t} (best objective so far {best_objective})"
            )));
        }
        let current = objective(&x, w, s, g, weights)
            .map_err(|e| Error::Divergence(format!("step {t}: {e}")))?;
        if !current.is_finite() {
            return Err(Error::Divergence(format!(
                "non-finite objective at step {t}"
            )));
        }
        if current < best_objective {
            best_objective = current;
            best.copy_from_slice(&x);
        }
        if (prev_objective - current).abs() < cfg.tolerance {
            break;
        }
        prev_objective = current;
    }

    // The objective is scale-invariant, so restoring the original norm is
    // free and keeps downstream dot-product consumers stable.
    let best_norm = norm(&best);
    let scale = original_norm / best_norm;
    for c in &mut best {
        *c *= scale;
    }

    Ok((
        best,
        TraceEntry {
            initial_objective: initial,
            final_objective: best_objective,
            steps,
        },
    ))
}

/// Full debiasing configuration.
#[derive(Debug, Clone)]
pub struct DebiasConfig {
    pub weights: ObjectiveWeights,
    pub theta_r: f64,
    /// Neighbours per word for repulsion-set construction.
    pub k: usize,
    pub optimizer: OptimizerConfig,
}

impl Default for DebiasConfig {
    fn default() -> Self {
        Self {
            weights: ObjectiveWeights::default(),
            theta_r: DEFAULT_THETA_R,
            k: DEFAULT_K,
            optimizer: OptimizerConfig::default(),
        }
    }
}

/// A debiased embedding plus the per-word optimization trace. Preserve-set
/// rows are bit-identical to the input.
#[derive(Debug)]
pub struct DebiasResult {
    pub debiased: EmbeddingSet,
    /// Vocabulary-ordered trace for every word that was optimized.
    pub trace: Vec<(String, TraceEntry)>,
    pub weights: ObjectiveWeights,
    /// Words whose optimization failed (left unchanged), with the reason.
    pub failures: Vec<(String, String)>,
}

impl DebiasResult {
    pub fn write_trace_tsv<W: Write>(&self, mut writer: W) -> Result<()> {
        writeln!(writer, "token\tinitial_objective\tfinal_objective\tsteps")?;
        for (token, entry) in &self.trace {
            writeln!(
                writer,
                "{token}\t{:.9}\t{:.9}\t{}",
                entry.initial_objective, entry.final_objective, entry.steps
            )?;
        }
        Ok(())
    }
}

fn validate_partition(set: &EmbeddingSet, classification: &Classification) -> Result<()> {
    for token in set.vocab().words() {
        let p = classification.preserve().contains(token);
        let d = classification.debias().contains(token);
        if p == d {
            return Err(Error::InvalidConfig(format!(
                "classification does not partition the vocabulary at `{token}`"
            )));
        }
    }
    Ok(())
}

/// Debiases every word of the debias set, leaving the preserve set
/// untouched. Neighbour tables and repulsion sets are built once from the
/// input (original) embedding; per-word optimizations run in parallel and
/// deterministically.
pub fn debias_all(
    set: &EmbeddingSet,
    classification: &Classification,
    g: &GenderDirection,
    cfg: &DebiasConfig,
) -> Result<DebiasResult> {
    validate_partition(set, classification)?;
    let debias_words: Vec<String> = set
        .vocab()
        .words()
        .iter()
        .filter(|w| classification.debias().contains(*w))
        .cloned()
        .collect();
    if debias_words.is_empty() {
        return Ok(DebiasResult {
            debiased: set.clone(),
            trace: Vec::new(),
            weights: cfg.weights,
            failures: Vec::new(),
        });
    }
    let table = top_k_neighbours(set, &debias_words, cfg.k)?;
    debias_with_neighbours(set, classification, g, cfg, &table)
}

/// Like [`debias_all`] but reusing a precomputed neighbour table for the
/// debias-set words (e.g. a cache shared with the audit stage).
pub fn debias_with_neighbours(
    set: &EmbeddingSet,
    classification: &Classification,
    g: &GenderDirection,
    cfg: &DebiasConfig,
    table: &NeighbourTable,
) -> Result<DebiasResult> {
    cfg.optimizer.validate()?;
    if g.dim() != set.dim() {
        return Err(Error::DimensionMismatch {
            expected: set.dim(),
            got: g.dim(),
        });
    }
    validate_partition(set, classification)?;

    let vd_indices: Vec<usize> = (0..set.len())
        .filter(|&i| classification.debias().contains(set.vocab().word(i)))
        .collect();

    let outcomes: Vec<(usize, Result<(Vec<f64>, TraceEntry)>)> = vd_indices
        .par_iter()
        .map(|&i| {
            let word = set.vocab().word(i);
            let run = || -> Result<(Vec<f64>, TraceEntry)> {
                let s = repulsion_set(word, table, set, g, cfg.theta_r)?;
                debias_word(set.row(i), &s, g, &cfg.weights, &cfg.optimizer)
            };
            (i, run())
        })
        .collect();

    let mut data: Vec<f64> = Vec::with_capacity(set.len() * set.dim());
    for row in set.rows() {
        data.extend_from_slice(row);
    }
    let mut trace = Vec::with_capacity(vd_indices.len());
    let mut failures = Vec::new();
    for (i, outcome) in outcomes {
        let token = set.vocab().word(i).to_string();
        match outcome {
            Ok((vector, entry)) => {
                data[i * set.dim()..(i + 1) * set.dim()].copy_from_slice(&vector);
                trace.push((token, entry));
            }
            Err(e) => failures.push((token, e.to_string())),
        }
    }

    let debiased = EmbeddingSet::new(set.vocab().clone(), set.dim(), data)?;
    Ok(DebiasResult {
        debiased,
        trace,
        weights: cfg.weights,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::Vocabulary;

    fn direction(v: &[f64]) -> GenderDirection {
        GenderDirection::from_vector(v.to_vec()).unwrap()
    }

    fn member(token: &str, v: &[f64]) -> RepulsionMember {
        RepulsionMember {
            token: token.to_string(),
            vector: v.to_vec(),
        }
    }

    fn rset(members: Vec<RepulsionMember>) -> RepulsionSet {
        RepulsionSet {
            word: "w".to_string(),
            theta_r: 0.05,
            members,
        }
    }

    fn set_from(rows: &[(&str, &[f64])]) -> EmbeddingSet {
        let vocab = Vocabulary::new(rows.iter().map(|(w, _)| w.to_string()).collect()).unwrap();
        let dim = rows[0].1.len();
        let data = rows.iter().flat_map(|(_, r)| r.iter().copied()).collect();
        EmbeddingSet::new(vocab, dim, data).unwrap()
    }

    #[test]
    fn weights_must_sum_to_one() {
        assert!(ObjectiveWeights::new(0.125, 0.75, 0.125).is_ok());
        assert!(ObjectiveWeights::new(0.3, 0.3, 0.3).is_err());
        assert!(ObjectiveWeights::new(-0.1, 0.6, 0.5).is_err());
        assert!(ObjectiveWeights::new(1.0, 0.0, 0.0).is_ok());
    }

    #[test]
    fn repulsion_term() {
        let g1 = rset(vec![member("a", &[0.0, 1.0])]);
        assert_eq!(f_r(&[1.0, 0.0], &g1).unwrap(), 0.0);

        let g2 = rset(vec![member("a", &[2.0, 0.0])]);
        assert!((f_r(&[1.0, 0.0], &g2).unwrap() - 1.0).abs() < 1e-15);

        // Cosines 0.5, -0.5 and 1.0 -> mean of absolutes is 2/3.
        let three = rset(vec![
            member("a", &[0.5, 0.75f64.sqrt()]),
            member("b", &[-0.5, 0.75f64.sqrt()]),
            member("c", &[1.0, 0.0]),
        ]);
        assert!((f_r(&[1.0, 0.0], &three).unwrap() - 2.0 / 3.0).abs() < 1e-15);

        // Empty set: nothing to repel.
        assert_eq!(f_r(&[1.0, 0.0], &rset(vec![])).unwrap(), 0.0);
        assert!(f_r(&[0.0, 0.0], &rset(vec![])).is_err());
    }

    #[test]
    fn attraction_term() {
        let w = [1.0, 0.0];
        assert!(f_a(&[2.0, 0.0], &w).unwrap().abs() < 1e-15);
        assert!((f_a(&[-1.0, 0.0], &w).unwrap() - 1.0).abs() < 1e-15);
        assert!((f_a(&[0.0, 1.0], &w).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn neutralization_term() {
        let g = direction(&[1.0, 0.0]);
        assert_eq!(f_n(&[0.0, 1.0], &g).unwrap(), 0.0);
        assert!((f_n(&[2.0, 0.0], &g).unwrap() - 1.0).abs() < 1e-15);
        let sixty = [0.5, 0.75f64.sqrt()];
        assert!((f_n(&sixty, &g).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn objective_global_minimum_and_ablation() {
        let g = direction(&[0.0, 1.0]);
        let w = [1.0, 0.0];
        let empty = rset(vec![]);
        let weights = ObjectiveWeights::default();
        assert!(objective(&w, &w, &empty, &g, &weights).unwrap() < 1e-12);

        // Attraction-only weights reduce the objective to f_a.
        let attraction_only = ObjectiveWeights::new(0.0, 1.0, 0.0).unwrap();
        let s = rset(vec![member("a", &[0.9, 0.1])]);
        let x = [0.3, 0.8];
        let f = objective(&x, &w, &s, &g, &attraction_only).unwrap();
        assert!((f - f_a(&x, &w).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn objective_recomposition() {
        let g = direction(&[0.2, -0.5, 0.8]);
        let w = [1.0, 0.3, -0.2];
        let s = rset(vec![
            member("a", &[0.9, 0.4, -0.1]),
            member("b", &[-0.3, 0.8, 0.5]),
        ]);
        let weights = ObjectiveWeights::new(0.2, 0.5, 0.3).unwrap();
        let x = [0.7, -0.1, 0.4];
        let f = objective(&x, &w, &s, &g, &weights).unwrap();
        let parts = 0.2 * f_r(&x, &s).unwrap() + 0.5 * f_a(&x, &w).unwrap()
            + 0.3 * f_n(&x, &g).unwrap();
        assert!((f - parts).abs() < 1e-12);
        assert!((0.0..=1.0).contains(&f));
    }

    #[test]
    fn objective_scale_invariant() {
        let g = direction(&[0.1, 0.9, -0.3]);
        let w = [0.5, 0.2, 0.8];
        let s = rset(vec![member("a", &[0.4, 0.3, 0.7])]);
        let weights = ObjectiveWeights::default();
        let x = [0.3, -0.6, 0.9];
        let scaled: Vec<f64> = x.iter().map(|c| c * 123.456).collect();
        let a = objective(&x, &w, &s, &g, &weights).unwrap();
        let b = objective(&scaled, &w, &s, &g, &weights).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn gradient_zero_at_attraction_fixed_point() {
        let g = direction(&[0.0, 0.0, 1.0]);
        let w = [1.0, 0.5, 0.0]; // orthogonal to g
        let empty = rset(vec![]);
        let weights = ObjectiveWeights::new(0.0, 1.0, 0.0).unwrap();
        let grad = objective_gradient(&w, &w, &empty, &g, &weights).unwrap();
        for c in grad {
            assert!(c.abs() < 1e-9);
        }
    }

    #[test]
    fn gradient_subgradient_zero_on_neutral_point() {
        // w_d exactly orthogonal to g: cos is exactly 0, sign(0) = 0.
        let g = direction(&[1.0, 0.0]);
        let weights = ObjectiveWeights::new(0.0, 0.0, 1.0).unwrap();
        let w = [0.0, 1.0];
        let grad = objective_gradient(&w, &w, &rset(vec![]), &g, &weights).unwrap();
        assert_eq!(grad, vec![0.0, 0.0]);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let g = direction(&[0.3, -0.2, 0.9, 0.1]);
        let w = [0.8, 0.1, -0.4, 0.5];
        let s = rset(vec![
            member("a", &[0.7, 0.2, -0.3, 0.6]),
            member("b", &[-0.2, 0.9, 0.1, 0.3]),
        ]);
        let weights = ObjectiveWeights::default();
        let x = [0.6, -0.3, 0.2, 0.7];
        let grad = objective_gradient(&x, &w, &s, &g, &weights).unwrap();
        let h = 1e-6;
        for i in 0..x.len() {
            let mut plus = x;
            let mut minus = x;
            plus[i] += h;
            minus[i] -= h;
            let fd = (objective(&plus, &w, &s, &g, &weights).unwrap()
                - objective(&minus, &w, &s, &g, &weights).unwrap())
                / (2.0 * h);
            assert!(
                (grad[i] - fd).abs() / fd.abs().max(1e-3) < 1e-6,
                "component {i}: analytic {} vs fd {fd}",
                grad[i]
            );
        }
    }

    #[test]
    fn debias_word_attraction_only_is_fixed_point() {
        let g = direction(&[0.0, 0.0, 1.0]);
        let w = [0.4, -0.7, 0.2];
        let weights = ObjectiveWeights::new(0.0, 1.0, 0.0).unwrap();
        let (out, trace) = debias_word(
            &w,
            &rset(vec![]),
            &g,
            &weights,
            &OptimizerConfig::default(),
        )
        .unwrap();
        for (a, b) in out.iter().zip(&w) {
            assert!((a - b).abs() < 1e-6, "moved from {b} to {a}");
        }
        assert!(trace.final_objective <= trace.initial_objective);
    }

    #[test]
    fn debias_word_neutralization_removes_gender_component() {
        let g = direction(&[1.0, 0.0, 0.0]);
        let w = [0.2, 0.9, 0.5]; // small component along g
        let weights = ObjectiveWeights::new(0.0, 0.0, 1.0).unwrap();
        let (out, trace) = debias_word(
            &w,
            &rset(vec![]),
            &g,
            &weights,
            &OptimizerConfig::default(),
        )
        .unwrap();
        let final_fn = f_n(&out, &g).unwrap();
        let initial_fn = f_n(&w, &g).unwrap();
        assert!(final_fn < initial_fn);
        assert!(final_fn < 1e-3, "residual gender component {final_fn}");
        // The projection-removal oracle achieves exactly zero; the
        // optimizer must come close and cannot beat it.
        let oracle = [0.0, 0.9, 0.5];
        assert!(f_n(&oracle, &g).unwrap() < 1e-15);
        // Norm restored.
        assert!((norm(&out) - norm(&w)).abs() < 1e-9);
        assert!(trace.final_objective <= trace.initial_objective);
    }

    #[test]
    fn debias_word_with_repulsion_reduces_both_terms() {
        let g = direction(&[1.0, 0.0, 0.0, 0.0]);
        // A word whose proximity to its neighbours runs mostly through the
        // gender axis: repelling them is compatible with staying close to
        // the original vector.
        let w = [0.3, 0.9, 0.3, 0.1];
        let s = rset(vec![
            member("n1", &[0.95, 0.25, 0.10, 0.00]),
            member("n2", &[0.90, 0.30, 0.05, 0.10]),
            member("n3", &[0.92, 0.20, 0.15, 0.05]),
            member("n4", &[0.94, 0.18, 0.10, 0.08]),
            member("n5", &[0.91, 0.22, 0.12, 0.03]),
        ]);
        let weights = ObjectiveWeights::default();
        let (out, trace) = debias_word(&w, &s, &g, &weights, &OptimizerConfig::default()).unwrap();
        assert!(trace.final_objective < trace.initial_objective);
        assert!(f_r(&out, &s).unwrap() < f_r(&w, &s).unwrap());
        assert!(f_a(&out, &w).unwrap() < 0.05);
    }

    #[test]
    fn repulsion_set_threshold_filtering() {
        // Build a tiny embedding, compute neighbours, and check that the
        // repulsion set keeps exactly the members whose indirect bias
        // (per the formula oracle) exceeds the threshold.
        let set = set_from(&[
            ("w", &[0.5, 1.0, 0.3]),
            ("n1", &[0.55, 0.95, 0.35]),
            ("n2", &[-0.5, 0.9, 0.3]),
            ("n3", &[0.0, 1.0, 0.25]),
        ]);
        let g = direction(&[1.0, 0.0, 0.0]);
        let table =
            top_k_neighbours(&set, &["w".to_string()], 3).unwrap();

        let betas: Vec<(String, f64)> = table
            .get("w")
            .unwrap()
            .iter()
            .map(|(t, _)| {
                let b = indirect_bias(
                    set.vector("w").unwrap(),
                    set.vector(t).unwrap(),
                    &g,
                )
                .unwrap();
                (t.clone(), b)
            })
            .collect();

        // Pick a threshold strictly between the smallest and largest beta.
        let mut sorted: Vec<f64> = betas.iter().map(|(_, b)| *b).collect();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let theta = (sorted[0] + sorted[2]) / 2.0;

        let s = repulsion_set("w", &table, &set, &g, theta).unwrap();
        let expect: Vec<&String> =
            betas.iter().filter(|(_, b)| *b > theta).map(|(t, _)| t).collect();
        let got: Vec<&String> = s.members.iter().map(|m| &m.token).collect();
        assert_eq!(got, expect);
        assert!(!s.is_empty() && s.len() < 3);

        // Threshold below every beta keeps all neighbours.
        let all = repulsion_set("w", &table, &set, &g, sorted[0] - 1.0).unwrap();
        assert_eq!(all.len(), 3);
        // Threshold above every beta keeps none.
        let none = repulsion_set("w", &table, &set, &g, sorted[2] + 1.0).unwrap();
        assert!(none.is_empty());

        assert!(matches!(
            repulsion_set("missing", &table, &set, &g, 0.05),
            Err(Error::MissingToken(_))
        ));
    }

    #[test]
    fn debias_all_empty_debias_set_is_identity() {
        let set = set_from(&[("he", &[1.0, 0.0]), ("she", &[-1.0, 0.1])]);
        let classification = Classification::from_sets(
            ["he".to_string(), "she".to_string()].into_iter().collect(),
            Default::default(),
        )
        .unwrap();
        let g = direction(&[1.0, 0.0]);
        let result = debias_all(&set, &classification, &g, &DebiasConfig::default()).unwrap();
        for (a, b) in set.rows().zip(result.debiased.rows()) {
            assert_eq!(a, b);
        }
        assert!(result.trace.is_empty());
        assert!(result.failures.is_empty());
    }

    #[test]
    fn debias_all_preserve_rows_bit_identical_and_objectives_monotone() {
        let set = set_from(&[
            ("he", &[1.0, 0.05, 0.3]),
            ("she", &[-1.0, 0.02, 0.31]),
            ("nurse", &[-0.4, 0.8, 0.5]),
            ("doctor", &[0.45, 0.75, 0.55]),
            ("table", &[0.01, 0.2, 0.9]),
        ]);
        let preserve: std::collections::HashSet<String> =
            ["he".to_string(), "she".to_string()].into_iter().collect();
        let debias: std::collections::HashSet<String> =
            ["nurse".to_string(), "doctor".to_string(), "table".to_string()]
                .into_iter()
                .collect();
        let classification = Classification::from_sets(preserve, debias).unwrap();
        let g = direction(&[1.0, 0.0, 0.0]);
        let cfg = DebiasConfig {
            k: 4,
            ..DebiasConfig::default()
        };
        let result = debias_all(&set, &classification, &g, &cfg).unwrap();
        assert!(result.failures.is_empty());

        for token in ["he", "she"] {
            assert_eq!(
                set.vector(token).unwrap(),
                result.debiased.vector(token).unwrap()
            );
        }
        assert_eq!(result.trace.len(), 3);
        for (_, entry) in &result.trace {
            assert!(entry.final_objective <= entry.initial_objective);
        }
    }

    #[test]
    fn debias_all_is_deterministic() {
        let set = set_from(&[
            ("a", &[0.9, 0.2, 0.1]),
            ("b", &[0.8, 0.3, 0.2]),
            ("c", &[0.7, 0.25, 0.15]),
            ("d", &[-0.6, 0.4, 0.3]),
        ]);
        let classification = Classification::from_sets(
            Default::default(),
            ["a", "b", "c", "d"].iter().map(|s| s.to_string()).collect(),
        )
        .unwrap();
        let g = direction(&[1.0, 0.0, 0.0]);
        let cfg = DebiasConfig {
            k: 3,
            ..DebiasConfig::default()
        };
        let r1 = debias_all(&set, &classification, &g, &cfg).unwrap();
        let r2 = debias_all(&set, &classification, &g, &cfg).unwrap();
        for (x, y) in r1.debiased.rows().zip(r2.debiased.rows()) {
            assert_eq!(x, y);
        }
    }

    #[test]
    fn debias_all_partition_mismatch_is_error() {
        let set = set_from(&[("a", &[1.0]), ("b", &[2.0])]);
        let classification = Classification::from_sets(
            ["a".to_string()].into_iter().collect(),
            Default::default(),
        )
        .unwrap();
        let g = direction(&[1.0]);
        assert!(matches!(
            debias_all(&set, &classification, &g, &DebiasConfig::default()),
            Err(Error::InvalidConfig(_))
        ));
    }
}
