//! Label alignment between partitions: maximum overlap, consensus
//! partitions with their uncertainty, and overlap matrices between model
//! classes.

use std::collections::BTreeMap;

use rayon::prelude::*;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Partition;
use crate::inference::mean_std;

/// Solve the square assignment problem maximizing `Σ_i w[i][a(i)]`.
///
/// Returns `a`, the column assigned to each row. O(n³) shortest augmenting
/// paths with potentials.
pub fn hungarian(w: &[Vec<i64>]) -> Vec<usize> {
    let n = w.len();
    if n == 0 {
        return Vec::new();
    }
    assert!(w.iter().all(|r| r.len() == n), "weight matrix must be square");
    // Minimize cost = -w, 1-indexed with a virtual column 0.
    let inf = i64::MAX / 4;
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = -w[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            assign[p[j] - 1] = j - 1;
        }
    }
    assign
}

/// Labels compacted to `0..L` in order of first appearance.
fn dense_labels(p: &Partition) -> (Vec<usize>, Vec<u32>) {
    let mut index: FxHashMap<u32, usize> = FxHashMap::default();
    let mut originals = Vec::new();
    let dense = p
        .labels()
        .iter()
        .map(|&l| {
            *index.entry(l).or_insert_with(|| {
                originals.push(l);
                originals.len() - 1
            })
        })
        .collect();
    (dense, originals)
}

fn contingency(x: &[usize], y: &[usize], size: usize) -> Vec<Vec<i64>> {
    let mut m = vec![vec![0i64; size]; size];
    for (&a, &b) in x.iter().zip(y) {
        m[b][a] += 1;
    }
    m
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapResult {
    /// Nodes whose labels agree under the best bijection.
    pub raw_overlap: usize,
    pub normalized_overlap: f64,
    /// Best bijection from labels of `y` to labels of `x`; labels matched
    /// only to padding are omitted.
    pub mapping: BTreeMap<u32, u32>,
}

/// Maximum overlap between two partitions of the same node set.
pub fn max_overlap(x: &Partition, y: &Partition) -> Result<OverlapResult> {
    if x.len() != y.len() {
        return Err(Error::NodeSetMismatch(x.len(), y.len()));
    }
    let (xd, xl) = dense_labels(x);
    let (yd, yl) = dense_labels(y);
    let size = xl.len().max(yl.len());
    let w = contingency(&xd, &yd, size);
    let assign = hungarian(&w);
    let raw: i64 = assign.iter().enumerate().map(|(r, &c)| w[r][c]).sum();
    let mapping = assign
        .iter()
        .enumerate()
        .filter(|&(r, &c)| r < yl.len() && c < xl.len())
        .map(|(r, &c)| (yl[r], xl[c]))
        .collect();
    let n = x.len();
    Ok(OverlapResult {
        raw_overlap: raw as usize,
        normalized_overlap: if n == 0 { 1.0 } else { raw as f64 / n as f64 },
        mapping,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConsensusResult {
    pub partition: Partition,
    /// `1 - (1/(N M_p)) Σ_i Σ_m δ(μ_m(b_i^m), b̂_i)`.
    pub sigma: f64,
    /// Fraction of input partitions agreeing with the consensus, per node.
    pub agreement: Vec<f64>,
    pub n_partitions: usize,
    /// Objective after every half-step; non-decreasing.
    pub objective_trace: Vec<usize>,
}

/// Consensus partition by alternating label alignment and per-node
/// majority vote, started from the input with the median number of groups.
pub fn consensus(partitions: &[Partition]) -> Result<ConsensusResult> {
    let m_p = partitions.len();
    if m_p < 2 {
        return Err(Error::TooFewPartitions(m_p));
    }
    let n = partitions[0].len();
    if let Some(p) = partitions.iter().find(|p| p.len() != n) {
        return Err(Error::NodeSetMismatch(n, p.len()));
    }
    let dense: Vec<(Vec<usize>, usize)> = partitions
        .iter()
        .map(|p| {
            let (d, l) = dense_labels(p);
            (d, l.len())
        })
        .collect();
    let size = dense.iter().map(|d| d.1).max().unwrap_or(0).max(1);

    let mut by_count: Vec<usize> = (0..m_p).collect();
    by_count.sort_by_key(|&m| (dense[m].1, m));
    let mut hat = dense[by_count[(m_p - 1) / 2]].0.clone();

    // mu[m][label of m] -> consensus label
    let mut mu: Vec<Vec<usize>> = vec![Vec::new(); m_p];
    let objective = |mu: &[Vec<usize>], hat: &[usize]| -> usize {
        dense
            .iter()
            .zip(mu)
            .map(|((d, _), map)| d.iter().zip(hat).filter(|(&l, &h)| map[l] == h).count())
            .sum()
    };
    let mut trace = Vec::new();
    loop {
        mu = dense.par_iter().map(|(d, _)| hungarian(&contingency(&hat, d, size))).collect();
        let after_align = objective(&mu, &hat);
        if trace.last().is_some_and(|&prev| after_align <= prev) {
            trace.push(after_align);
            break;
        }
        trace.push(after_align);

        let mut votes = vec![0usize; size];
        for (i, h) in hat.iter_mut().enumerate() {
            votes.iter_mut().for_each(|c| *c = 0);
            for ((d, _), map) in dense.iter().zip(&mu) {
                votes[map[d[i]]] += 1;
            }
            let best = votes.iter().copied().max().unwrap_or(0);
            *h = votes.iter().position(|&c| c == best).expect("max exists");
        }
        let after_vote = objective(&mu, &hat);
        trace.push(after_vote);
        if after_vote <= after_align {
            break;
        }
    }

    let total = *trace.last().expect("at least one step");
    let agreement = (0..n)
        .map(|i| dense.iter().zip(&mu).filter(|((d, _), map)| map[d[i]] == hat[i]).count() as f64 / m_p as f64)
        .collect();
    let labels = hat.iter().map(|&h| h as u32).collect();
    let partition = Partition::new(labels, partitions[0].types().to_vec())?.compacted();
    Ok(ConsensusResult {
        partition,
        sigma: if n == 0 { 0.0 } else { 1.0 - total as f64 / (n * m_p) as f64 },
        agreement,
        n_partitions: m_p,
        objective_trace: trace,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlapCell {
    pub mean: f64,
    pub std: f64,
    pub pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapMatrix {
    pub classes: Vec<String>,
    pub cells: Vec<Vec<OverlapCell>>,
}

impl OverlapMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<OverlapCell> {
        let i = self.classes.iter().position(|c| c == a)?;
        let j = self.classes.iter().position(|c| c == b)?;
        Some(self.cells[i][j])
    }
}

/// Mean and standard deviation of pairwise normalized overlaps, within a
/// class over distinct runs and between classes over all run pairs.
pub fn overlap_matrix(runs: &[(String, Vec<Partition>)]) -> Result<OverlapMatrix> {
    for (_, parts) in runs {
        if parts.len() < 2 {
            return Err(Error::TooFewPartitions(parts.len()));
        }
    }
    let k = runs.len();
    let cells = (0..k)
        .map(|a| {
            (0..k)
                .map(|b| {
                    let (pa, pb) = (&runs[a].1, &runs[b].1);
                    let pairs: Vec<(usize, usize)> = (0..pa.len())
                        .flat_map(|i| (0..pb.len()).map(move |j| (i, j)))
                        .filter(|&(i, j)| a != b || i < j)
                        .collect();
                    let values = pairs
                        .par_iter()
                        .map(|&(i, j)| max_overlap(&pa[i], &pb[j]).map(|o| o.normalized_overlap))
                        .collect::<Result<Vec<f64>>>()?;
                    let (mean, std) = mean_std(&values);
                    Ok(OverlapCell {
                        mean,
                        std,
                        pairs: values.len(),
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OverlapMatrix {
        classes: runs.iter().map(|r| r.0.clone()).collect(),
        cells,
    })
}
