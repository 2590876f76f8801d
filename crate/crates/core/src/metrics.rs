//! Accuracy, TPR-gap fairness measures, word-similarity correlation and
//! nearest-neighbour lists.

use std::collections::BTreeMap;

use crate::error::{Result, SalError};
use crate::io::embeddings::EmbeddingTable;

pub fn accuracy(predictions: &[usize], labels: &[usize]) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(SalError::contract(
            "predictions and labels differ in length",
        ));
    }
    if labels.is_empty() {
        return Err(SalError::contract("accuracy of an empty set"));
    }
    let hits = predictions
        .iter()
        .zip(labels)
        .filter(|(p, l)| p == l)
        .count();
    Ok(hits as f64 / labels.len() as f64)
}

/// The two distinct group ids, in ascending order.
fn two_groups(groups: &[usize]) -> Result<(usize, usize)> {
    let mut ids: Vec<usize> = groups.to_vec();
    ids.sort_unstable();
    ids.dedup();
    match ids.as_slice() {
        [a, b] => Ok((*a, *b)),
        _ => Err(SalError::contract(format!(
            "TPR metrics need exactly two groups, found {}",
            ids.len()
        ))),
    }
}

/// `P(ŷ = c | y = c, group = g)`, or `None` when the group has no samples of class `c`.
fn class_tpr(
    predictions: &[usize],
    labels: &[usize],
    groups: &[usize],
    class: usize,
    group: usize,
) -> Option<f64> {
    let mut total = 0usize;
    let mut hit = 0usize;
    for ((&p, &l), &g) in predictions.iter().zip(labels).zip(groups) {
        if g == group && l == class {
            total += 1;
            if p == class {
                hit += 1;
            }
        }
    }
    (total > 0).then(|| hit as f64 / total as f64)
}

fn check_lengths(predictions: &[usize], labels: &[usize], groups: &[usize]) -> Result<()> {
    if predictions.len() != labels.len() || labels.len() != groups.len() {
        return Err(SalError::contract(
            "predictions, labels and groups differ in length",
        ));
    }
    Ok(())
}

/// `|TPR(A) − TPR(B)|` with class 1 as the positive label.
pub fn tpr_gap(predictions: &[usize], labels: &[usize], groups: &[usize]) -> Result<f64> {
    check_lengths(predictions, labels, groups)?;
    if labels.iter().chain(predictions).any(|&l| l > 1) {
        return Err(SalError::contract("tpr_gap needs binary labels in {0, 1}"));
    }
    let (a, b) = two_groups(groups)?;
    match (
        class_tpr(predictions, labels, groups, 1, a),
        class_tpr(predictions, labels, groups, 1, b),
    ) {
        (Some(ta), Some(tb)) => Ok((ta - tb).abs()),
        _ => Err(SalError::UndefinedMetric(
            "a group has no positive-label samples".into(),
        )),
    }
}

/// Root mean square of per-class TPR gaps.
#[derive(Debug, Clone, PartialEq)]
pub struct TprRms {
    pub rms: f64,
    /// Per-class gap, for classes present in both groups.
    pub gaps: BTreeMap<usize, f64>,
    /// Classes skipped because one group has no samples of them.
    pub skipped: Vec<usize>,
}

pub fn tpr_rms(predictions: &[usize], labels: &[usize], groups: &[usize]) -> Result<TprRms> {
    check_lengths(predictions, labels, groups)?;
    let (a, b) = two_groups(groups)?;
    let mut classes: Vec<usize> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let mut gaps = BTreeMap::new();
    let mut skipped = Vec::new();
    for &c in &classes {
        match (
            class_tpr(predictions, labels, groups, c, a),
            class_tpr(predictions, labels, groups, c, b),
        ) {
            (Some(ta), Some(tb)) => {
                gaps.insert(c, (ta - tb).abs());
            }
            _ => skipped.push(c),
        }
    }
    if gaps.is_empty() {
        return Err(SalError::UndefinedMetric(
            "no class has samples in both groups".into(),
        ));
    }
    let mean_sq = gaps.values().map(|g| g * g).sum::<f64>() / gaps.len() as f64;
    Ok(TprRms {
        rms: mean_sq.sqrt(),
        gaps,
        skipped,
    })
}

/// Ranks starting at 1, with tied values sharing their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Pearson correlation; `None` when either side is constant.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    (va > 0.0 && vb > 0.0).then(|| cov / (va.sqrt() * vb.sqrt()))
}

pub fn spearman(a: &[f64], b: &[f64]) -> Option<f64> {
    pearson(&average_ranks(a), &average_ranks(b))
}

/// A human-scored word pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredPair {
    pub left: String,
    pub right: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityCorrelation {
    pub spearman: f64,
    pub pearson: f64,
    pub used: usize,
    /// Pairs with at least one out-of-vocabulary word.
    pub skipped: usize,
}

pub const MIN_SCORED_PAIRS: usize = 5;

/// Correlation between embedding cosine similarities and human similarity scores.
pub fn similarity_correlation(
    table: &EmbeddingTable,
    pairs: &[ScoredPair],
) -> Result<SimilarityCorrelation> {
    let mut cosines = Vec::new();
    let mut scores = Vec::new();
    let mut skipped = 0;
    for p in pairs {
        match (table.vector(&p.left), table.vector(&p.right)) {
            (Some(a), Some(b)) => {
                cosines.push(cosine(a, b));
                scores.push(p.score);
            }
            _ => skipped += 1,
        }
    }
    if cosines.len() < MIN_SCORED_PAIRS {
        return Err(SalError::contract(format!(
            "only {} usable pairs, need at least {MIN_SCORED_PAIRS}",
            cosines.len()
        )));
    }
    let undefined = || SalError::UndefinedMetric("constant similarities or scores".into());
    Ok(SimilarityCorrelation {
        spearman: spearman(&cosines, &scores).ok_or_else(undefined)?,
        pearson: pearson(&cosines, &scores).ok_or_else(undefined)?,
        used: cosines.len(),
        skipped,
    })
}

/// Cosine similarity; zero when either vector is zero.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// The `m` words most cosine-similar to `query`, excluding the query itself.
/// Ties are broken by lexicographic word order.
pub fn nearest_neighbors(
    table: &EmbeddingTable,
    query: &str,
    m: usize,
) -> Result<Vec<(String, f64)>> {
    let q = table
        .vector(query)
        .ok_or_else(|| SalError::Lookup(format!("'{query}' is not in the vocabulary")))?;
    if m >= table.len() {
        return Err(SalError::contract(format!(
            "asked for {m} neighbours from a vocabulary of {}",
            table.len()
        )));
    }
    let mut scored: Vec<(&str, f64)> = table
        .iter()
        .filter(|(w, _)| *w != query)
        .map(|(w, v)| (w, cosine(q, v)))
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    Ok(scored
        .into_iter()
        .take(m)
        .map(|(w, s)| (w.to_string(), s))
        .collect())
}
