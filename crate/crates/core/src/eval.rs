//! Intrinsic evaluation suite: gender relational analogy (SemBias),
//! 3CosMul word analogies, and Spearman word-similarity correlation.
//!
//! Dataset tokens are lowercased at load time to match typical embedding
//! vocabularies. Out-of-vocabulary entries are skipped and counted for
//! dataset runs; single queries fail hard.

use std::io::BufRead;

use rayon::prelude::*;

use crate::embedding::EmbeddingSet;
use crate::linalg::{dot, norm};
use crate::{Error, Result};

/// Shift applied inside 3CosMul so all cosines are nonnegative.
pub const DEFAULT_ANALOGY_EPS: f64 = 0.001;

// ---------------------------------------------------------------------------
// SemBias
// ---------------------------------------------------------------------------

/// Label of one word pair inside a SemBias instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairKind {
    Definition,
    Stereotype,
    None,
}

/// Four labelled word pairs: one gender-definitional, one stereotypical,
/// two unrelated.
#[derive(Debug, Clone)]
pub struct SemBiasInstance {
    pairs: [(String, String); 4],
    kinds: [PairKind; 4],
}

impl SemBiasInstance {
    pub fn new(pairs: [(String, String); 4], kinds: [PairKind; 4]) -> Result<Self> {
        let count = |k: PairKind| kinds.iter().filter(|x| **x == k).count();
        if count(PairKind::Definition) != 1
            || count(PairKind::Stereotype) != 1
            || count(PairKind::None) != 2
        {
            return Err(Error::InvalidConfig(
                "SemBias instance needs one definition, one stereotype and two none pairs".into(),
            ));
        }
        Ok(Self { pairs, kinds })
    }

    pub fn pairs(&self) -> &[(String, String); 4] {
        &self.pairs
    }

    pub fn kinds(&self) -> &[PairKind; 4] {
        &self.kinds
    }
}

/// Parses the dataset layout: per line, four tab-separated `a:b` pairs in
/// the fixed order definition, stereotype, none, none.
pub fn load_sembias<R: BufRead>(reader: R) -> Result<Vec<SemBiasInstance>> {
    let mut instances = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(Error::parse(
                lineno + 1,
                format!("expected 4 tab-separated pairs, found {}", fields.len()),
            ));
        }
        let mut pairs: Vec<(String, String)> = Vec::with_capacity(4);
        for f in &fields {
            let (a, b) = f.trim().split_once(':').ok_or_else(|| {
                Error::parse(lineno + 1, format!("expected `a:b`, got `{f}`"))
            })?;
            pairs.push((a.to_lowercase(), b.to_lowercase()));
        }
        instances.push(SemBiasInstance::new(
            pairs.try_into().expect("exactly four pairs"),
            [
                PairKind::Definition,
                PairKind::Stereotype,
                PairKind::None,
                PairKind::None,
            ],
        )?);
    }
    if instances.is_empty() {
        return Err(Error::EmptyInput("no SemBias instances".into()));
    }
    Ok(instances)
}

/// Percentages of instances whose best-aligned pair carries each label,
/// over the evaluated (non-skipped) instances. Percentages sum to 100.
#[derive(Debug, Clone, Copy)]
pub struct SemBiasScores {
    pub definition_pct: f64,
    pub stereotype_pct: f64,
    pub none_pct: f64,
    pub evaluated: usize,
    pub skipped: usize,
}

/// For each instance, selects the pair whose difference vector best aligns
/// with `he - she` (ties: first pair in file order). Instances with any
/// out-of-vocabulary token are skipped and excluded from the denominator.
pub fn sembias_eval(set: &EmbeddingSet, instances: &[SemBiasInstance]) -> Result<SemBiasScores> {
    let he = set.require_vector("he")?;
    let she = set.require_vector("she")?;
    let axis: Vec<f64> = he.iter().zip(she).map(|(a, b)| a - b).collect();
    let axis_norm = norm(&axis);
    if axis_norm == 0.0 {
        return Err(Error::Degenerate("`he` and `she` vectors coincide".into()));
    }

    let mut counts = [0usize; 3];
    let mut skipped = 0usize;
    'outer: for instance in instances {
        let mut best: Option<(f64, PairKind)> = None;
        for ((a, b), kind) in instance.pairs().iter().zip(instance.kinds()) {
            let (Some(va), Some(vb)) = (set.vector(a), set.vector(b)) else {
                skipped += 1;
                continue 'outer;
            };
            let diff: Vec<f64> = va.iter().zip(vb).map(|(x, y)| x - y).collect();
            let dn = norm(&diff);
            let score = if dn == 0.0 {
                f64::NEG_INFINITY
            } else {
                dot(&axis, &diff) / (axis_norm * dn)
            };
            if best.as_ref().is_none_or(|(s, _)| score > *s) {
                best = Some((score, *kind));
            }
        }
        match best.expect("four pairs evaluated").1 {
            PairKind::Definition => counts[0] += 1,
            PairKind::Stereotype => counts[1] += 1,
            PairKind::None => counts[2] += 1,
        }
    }

    let evaluated = counts.iter().sum::<usize>();
    if evaluated == 0 {
        return Err(Error::EmptyInput(
            "every SemBias instance was skipped".into(),
        ));
    }
    let pct = |c: usize| 100.0 * c as f64 / evaluated as f64;
    Ok(SemBiasScores {
        definition_pct: pct(counts[0]),
        stereotype_pct: pct(counts[1]),
        none_pct: pct(counts[2]),
        evaluated,
        skipped,
    })
}

// ---------------------------------------------------------------------------
// Analogies
// ---------------------------------------------------------------------------

/// "p is to q as r is to `expected`", all four tokens distinct.
#[derive(Debug, Clone)]
pub struct AnalogyQuestion {
    pub p: String,
    pub q: String,
    pub r: String,
    pub expected: String,
}

impl AnalogyQuestion {
    pub fn new(p: String, q: String, r: String, expected: String) -> Result<Self> {
        let all = [&p, &q, &r, &expected];
        for i in 0..4 {
            for j in i + 1..4 {
                if all[i] == all[j] {
                    return Err(Error::InvalidConfig(format!(
                        "analogy tokens must be distinct, `{}` repeats",
                        all[i]
                    )));
                }
            }
        }
        Ok(Self { p, q, r, expected })
    }
}

/// A named group of questions (e.g. one `: section` of the Google set).
#[derive(Debug, Clone)]
pub struct AnalogySection {
    pub name: String,
    pub questions: Vec<AnalogyQuestion>,
}

/// Google format: `: section` headers, then 4 tokens per line.
pub fn load_google_analogies<R: BufRead>(reader: R) -> Result<Vec<AnalogySection>> {
    let mut sections: Vec<AnalogySection> = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix(':') {
            sections.push(AnalogySection {
                name: name.trim().to_string(),
                questions: Vec::new(),
            });
            continue;
        }
        let q = parse_question_line(line, lineno + 1)?;
        match sections.last_mut() {
            Some(s) => s.questions.push(q),
            None => sections.push(AnalogySection {
                name: "default".to_string(),
                questions: vec![q],
            }),
        }
    }
    if sections.iter().all(|s| s.questions.is_empty()) {
        return Err(Error::EmptyInput("no analogy questions".into()));
    }
    Ok(sections)
}

/// MSR format: plain 4-token lines, one section.
pub fn load_msr_analogies<R: BufRead>(reader: R) -> Result<Vec<AnalogySection>> {
    let mut questions = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        questions.push(parse_question_line(line, lineno + 1)?);
    }
    if questions.is_empty() {
        return Err(Error::EmptyInput("no analogy questions".into()));
    }
    Ok(vec![AnalogySection {
        name: "msr".to_string(),
        questions,
    }])
}

fn parse_question_line(line: &str, lineno: usize) -> Result<AnalogyQuestion> {
    let tokens: Vec<String> = line.split_whitespace().map(str::to_lowercase).collect();
    if tokens.len() != 4 {
        return Err(Error::parse(
            lineno,
            format!("expected 4 tokens, found {}", tokens.len()),
        ));
    }
    let mut it = tokens.into_iter();
    AnalogyQuestion::new(
        it.next().unwrap(),
        it.next().unwrap(),
        it.next().unwrap(),
        it.next().unwrap(),
    )
    .map_err(|e| Error::parse(lineno, e.to_string()))
}

/// 3CosMul: `argmax over vocab \ {p,q,r}` of
/// `cos'(w,r) * cos'(w,q) / (cos'(w,p) + eps)` with cosines shifted to
/// [0, 1] via `(x+1)/2`. Ties break toward the lower vocabulary index.
pub fn solve_analogy_3cosmul(
    set: &EmbeddingSet,
    p: &str,
    q: &str,
    r: &str,
    eps: f64,
) -> Result<String> {
    if !(eps > 0.0) {
        return Err(Error::InvalidConfig("analogy eps must be positive".into()));
    }
    let pi = set.vocab().index_of(p).ok_or_else(|| Error::MissingToken(p.into()))?;
    let qi = set.vocab().index_of(q).ok_or_else(|| Error::MissingToken(q.into()))?;
    let ri = set.vocab().index_of(r).ok_or_else(|| Error::MissingToken(r.into()))?;

    let shifted_cos = |a: &[f64], na: f64, b: &[f64], nb: f64| (dot(a, b) / (na * nb) + 1.0) / 2.0;
    let (vp, vq, vr) = (set.row(pi), set.row(qi), set.row(ri));
    let (np, nq, nr) = (norm(vp), norm(vq), norm(vr));
    for (t, n) in [(p, np), (q, nq), (r, nr)] {
        if n == 0.0 {
            return Err(Error::ZeroVector(t.to_string()));
        }
    }

    let mut best: Option<(f64, usize)> = None;
    for i in 0..set.len() {
        if i == pi || i == qi || i == ri {
            continue;
        }
        let w = set.row(i);
        let nw = norm(w);
        if nw == 0.0 {
            continue;
        }
        let score = shifted_cos(w, nw, vr, nr) * shifted_cos(w, nw, vq, nq)
            / (shifted_cos(w, nw, vp, np) + eps);
        if best.is_none_or(|(s, _)| score > s) {
            best = Some((score, i));
        }
    }
    best.map(|(_, i)| set.vocab().word(i).to_string())
        .ok_or_else(|| Error::Degenerate("no candidate answers".into()))
}

#[derive(Debug, Clone)]
pub struct SectionReport {
    pub name: String,
    pub accuracy: f64,
    pub correct: usize,
    pub answered: usize,
    pub skipped: usize,
}

#[derive(Debug, Clone)]
pub struct AnalogyReport {
    pub accuracy: f64,
    pub correct: usize,
    pub answered: usize,
    pub skipped: usize,
    pub sections: Vec<SectionReport>,
}

/// Accuracy of 3CosMul over a question set; questions with
/// out-of-vocabulary tokens are skipped and counted. Errors when nothing
/// is answerable.
pub fn analogy_accuracy(
    set: &EmbeddingSet,
    sections: &[AnalogySection],
    eps: f64,
) -> Result<AnalogyReport> {
    let mut reports = Vec::with_capacity(sections.len());
    let (mut correct, mut answered, mut skipped) = (0usize, 0usize, 0usize);
    for section in sections {
        let outcomes: Vec<Option<bool>> = section
            .questions
            .par_iter()
            .map(|q| {
                let in_vocab = [&q.p, &q.q, &q.r, &q.expected]
                    .iter()
                    .all(|t| set.vocab().contains(t));
                if !in_vocab {
                    return None;
                }
                let answer = solve_analogy_3cosmul(set, &q.p, &q.q, &q.r, eps)
                    .expect("tokens checked in vocabulary");
                Some(answer.eq_ignore_ascii_case(&q.expected))
            })
            .collect();
        let s_skipped = outcomes.iter().filter(|o| o.is_none()).count();
        let s_correct = outcomes.iter().filter(|o| **o == Some(true)).count();
        let s_answered = outcomes.len() - s_skipped;
        correct += s_correct;
        answered += s_answered;
        skipped += s_skipped;
        reports.push(SectionReport {
            name: section.name.clone(),
            accuracy: if s_answered == 0 {
                0.0
            } else {
                s_correct as f64 / s_answered as f64
            },
            correct: s_correct,
            answered: s_answered,
            skipped: s_skipped,
        });
    }
    if answered == 0 {
        return Err(Error::EmptyInput("no answerable analogy questions".into()));
    }
    Ok(AnalogyReport {
        accuracy: correct as f64 / answered as f64,
        correct,
        answered,
        skipped,
        sections: reports,
    })
}

// ---------------------------------------------------------------------------
// Word similarity
// ---------------------------------------------------------------------------

/// A human-rated word pair.
#[derive(Debug, Clone)]
pub struct SimilarityPair {
    pub a: String,
    pub b: String,
    pub human_score: f64,
}

/// `a b score` per line, whitespace-separated.
pub fn load_similarity_pairs<R: BufRead>(reader: R) -> Result<Vec<SimilarityPair>> {
    let mut pairs = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::parse(
                lineno + 1,
                format!("expected `a b score`, found {} fields", fields.len()),
            ));
        }
        let score: f64 = fields[2].parse().map_err(|_| {
            Error::parse(lineno + 1, format!("unparsable score `{}`", fields[2]))
        })?;
        if !score.is_finite() {
            return Err(Error::parse(lineno + 1, "non-finite score"));
        }
        pairs.push(SimilarityPair {
            a: fields[0].to_lowercase(),
            b: fields[1].to_lowercase(),
            human_score: score,
        });
    }
    if pairs.is_empty() {
        return Err(Error::EmptyInput("no similarity pairs".into()));
    }
    Ok(pairs)
}

#[derive(Debug, Clone, Copy)]
pub struct SpearmanReport {
    pub rho: f64,
    pub used: usize,
    pub skipped: usize,
}

/// Average ranks (1-based), ties sharing the mean of their rank range.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite values"));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let shared = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = shared;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (a, b) in x.iter().zip(y) {
        cov += (a - mx) * (b - my);
        vx += (a - mx) * (a - mx);
        vy += (b - my) * (b - my);
    }
    if vx == 0.0 || vy == 0.0 {
        return Err(Error::Degenerate(
            "rank correlation undefined: a side has zero variance".into(),
        ));
    }
    Ok(cov / (vx * vy).sqrt())
}

/// Spearman rank correlation between model cosines and human ratings, with
/// average-rank tie handling. Out-of-vocabulary pairs are skipped; fewer
/// than 2 usable pairs is an error.
pub fn similarity_spearman(set: &EmbeddingSet, pairs: &[SimilarityPair]) -> Result<SpearmanReport> {
    let mut cosines = Vec::with_capacity(pairs.len());
    let mut human = Vec::with_capacity(pairs.len());
    let mut skipped = 0usize;
    for p in pairs {
        let (Some(va), Some(vb)) = (set.vector(&p.a), set.vector(&p.b)) else {
            skipped += 1;
            continue;
        };
        let (na, nb) = (norm(va), norm(vb));
        if na == 0.0 || nb == 0.0 {
            skipped += 1;
            continue;
        }
        cosines.push(dot(va, vb) / (na * nb));
        human.push(p.human_score);
    }
    if cosines.len() < 2 {
        return Err(Error::EmptyInput(format!(
            "need at least 2 in-vocabulary pairs, have {}",
            cosines.len()
        )));
    }
    let rho = pearson(&average_ranks(&cosines), &average_ranks(&human))?;
    Ok(SpearmanReport {
        rho,
        used: cosines.len(),
        skipped,
    })
}
