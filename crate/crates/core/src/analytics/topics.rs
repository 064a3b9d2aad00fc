//! LDA by collapsed Gibbs sampling, and the three derived topic outputs.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::AnalyticsError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaParams {
    pub topics: usize,
    /// Defaults to `50 / topics`.
    pub alpha: Option<f64>,
    pub beta: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for LdaParams {
    fn default() -> Self {
        Self { topics: 5, alpha: None, beta: 0.01, iterations: 500, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicModel {
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
    pub iterations: usize,
    /// Sorted; term ↔ column index of `phi`.
    pub vocabulary: Vec<String>,
    pub doc_ids: Vec<String>,
    /// K × V.
    pub phi: Vec<Vec<f64>>,
    /// D × K.
    pub theta: Vec<Vec<f64>>,
    /// Topic of each token, per document.
    pub assignments: Vec<Vec<usize>>,
}

impl TopicModel {
    pub fn term_index(&self, term: &str) -> Option<usize> {
        self.vocabulary.binary_search_by(|t| t.as_str().cmp(term)).ok()
    }
}

/// Fits LDA to `docs` (`(id, tokens)` pairs). Deterministic for a fixed
/// seed: the vocabulary is sorted and the sampler walks tokens in order.
pub fn lda_fit(docs: &[(String, Vec<String>)], params: &LdaParams) -> Result<TopicModel, AnalyticsError> {
    let k = params.topics;
    if k == 0 {
        return Err(AnalyticsError::InvalidK(k));
    }
    if docs.is_empty() {
        return Err(AnalyticsError::EmptyCorpus);
    }
    if let Some((id, _)) = docs.iter().find(|(_, t)| t.is_empty()) {
        return Err(AnalyticsError::InvalidArgument(format!("document {id} has no tokens")));
    }
    if params.iterations == 0 || !(params.beta > 0.0) {
        return Err(AnalyticsError::InvalidArgument("iterations and beta must be positive".into()));
    }
    let alpha = params.alpha.unwrap_or(50.0 / k as f64);
    if !(alpha > 0.0) {
        return Err(AnalyticsError::InvalidArgument("alpha must be positive".into()));
    }
    let beta = params.beta;

    let vocab: Vec<String> = {
        let mut v: Vec<String> = docs.iter().flat_map(|(_, t)| t.iter().cloned()).collect();
        v.sort();
        v.dedup();
        v
    };
    let index: BTreeMap<&str, usize> = vocab.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
    let words: Vec<Vec<usize>> = docs.iter().map(|(_, t)| t.iter().map(|w| index[w.as_str()]).collect()).collect();
    let v = vocab.len();
    let vbeta = v as f64 * beta;

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut n_dk = vec![vec![0u32; k]; docs.len()];
    let mut n_kw = vec![vec![0u32; v]; k];
    let mut n_k = vec![0u32; k];
    let mut z: Vec<Vec<usize>> = Vec::with_capacity(docs.len());
    for (d, ws) in words.iter().enumerate() {
        let zs: Vec<usize> = ws
            .iter()
            .map(|&w| {
                let t = rng.random_range(0..k);
                n_dk[d][t] += 1;
                n_kw[t][w] += 1;
                n_k[t] += 1;
                t
            })
            .collect();
        z.push(zs);
    }

    let mut p = vec![0.0f64; k];
    for _ in 0..params.iterations {
        for (d, ws) in words.iter().enumerate() {
            for (i, &w) in ws.iter().enumerate() {
                let old = z[d][i];
                n_dk[d][old] -= 1;
                n_kw[old][w] -= 1;
                n_k[old] -= 1;
                let mut total = 0.0;
                for t in 0..k {
                    total += (n_dk[d][t] as f64 + alpha) * (n_kw[t][w] as f64 + beta) / (n_k[t] as f64 + vbeta);
                    p[t] = total;
                }
                let u = rng.random::<f64>() * total;
                let new = p.iter().position(|&c| u < c).unwrap_or(k - 1);
                z[d][i] = new;
                n_dk[d][new] += 1;
                n_kw[new][w] += 1;
                n_k[new] += 1;
            }
        }
    }

    let phi = (0..k).map(|t| (0..v).map(|w| (n_kw[t][w] as f64 + beta) / (n_k[t] as f64 + vbeta)).collect()).collect();
    let theta = words
        .iter()
        .enumerate()
        .map(|(d, ws)| {
            let nd = ws.len() as f64;
            (0..k).map(|t| (n_dk[d][t] as f64 + alpha) / (nd + k as f64 * alpha)).collect()
        })
        .collect();
    Ok(TopicModel {
        k,
        alpha,
        beta,
        seed: params.seed,
        iterations: params.iterations,
        vocabulary: vocab,
        doc_ids: docs.iter().map(|(id, _)| id.clone()).collect(),
        phi,
        theta,
        assignments: z,
    })
}

/// What the exploration shows about a fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicSummary {
    pub k: usize,
    /// Per topic, top terms with their phi weight.
    pub top_terms: Vec<Vec<(String, f64)>>,
    /// Per topic, the documents with the largest theta for it.
    pub top_docs: Vec<Vec<(String, f64)>>,
    /// K × K Pearson correlation of theta columns across documents.
    pub correlation: Vec<Vec<f64>>,
    /// K × K Jensen–Shannon divergence (base 2) between phi rows.
    pub phi_divergence: Vec<Vec<f64>>,
    /// Argmax topic per document.
    pub doc_topics: Vec<(String, usize)>,
}

fn top_n(weights: impl Iterator<Item = (String, f64)>, n: usize) -> Vec<(String, f64)> {
    let mut v: Vec<(String, f64)> = weights.collect();
    v.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    v.truncate(n);
    v
}

/// Pearson correlation; a zero-variance column correlates 1 with itself
/// and 0 with everything else.
pub fn pearson_matrix(columns: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let stats: Vec<(f64, f64)> = columns
        .iter()
        .map(|c| {
            let n = c.len().max(1) as f64;
            let mean = c.iter().sum::<f64>() / n;
            let ss = c.iter().map(|x| (x - mean).powi(2)).sum::<f64>();
            (mean, ss.sqrt())
        })
        .collect();
    let k = columns.len();
    let mut out = vec![vec![0.0; k]; k];
    for a in 0..k {
        for b in 0..k {
            out[a][b] = if a == b {
                1.0
            } else if stats[a].1 == 0.0 || stats[b].1 == 0.0 {
                0.0
            } else {
                let cov: f64 =
                    columns[a].iter().zip(&columns[b]).map(|(x, y)| (x - stats[a].0) * (y - stats[b].0)).sum();
                (cov / (stats[a].1 * stats[b].1)).clamp(-1.0, 1.0)
            };
        }
    }
    out
}

pub fn jensen_shannon(p: &[f64], q: &[f64]) -> f64 {
    let kl = |a: &[f64], m: &[f64]| -> f64 {
        a.iter().zip(m).filter(|(x, _)| **x > 0.0).map(|(x, y)| x * (x / y).log2()).sum()
    };
    let m: Vec<f64> = p.iter().zip(q).map(|(a, b)| 0.5 * (a + b)).collect();
    (0.5 * kl(p, &m) + 0.5 * kl(q, &m)).max(0.0)
}

pub fn topic_outputs(m: &TopicModel, top_terms: usize, top_docs: usize) -> Result<TopicSummary, AnalyticsError> {
    if top_terms == 0 || top_docs == 0 {
        return Err(AnalyticsError::InvalidArgument("top counts must be at least 1".into()));
    }
    let terms =
        m.phi.iter().map(|row| top_n(m.vocabulary.iter().cloned().zip(row.iter().copied()), top_terms)).collect();
    let docs = (0..m.k).map(|t| top_n(m.doc_ids.iter().cloned().zip(m.theta.iter().map(|r| r[t])), top_docs)).collect();
    let columns: Vec<Vec<f64>> = (0..m.k).map(|t| m.theta.iter().map(|r| r[t]).collect()).collect();
    let divergence = m.phi.iter().map(|a| m.phi.iter().map(|b| jensen_shannon(a, b)).collect()).collect();
    let doc_topics = m
        .doc_ids
        .iter()
        .zip(&m.theta)
        .map(|(id, r)| {
            let best = (0..m.k).fold(0, |b, t| if r[t] > r[b] { t } else { b });
            (id.clone(), best)
        })
        .collect();
    Ok(TopicSummary {
        k: m.k,
        top_terms: terms,
        top_docs: docs,
        correlation: pearson_matrix(&columns),
        phi_divergence: divergence,
        doc_topics,
    })
}
