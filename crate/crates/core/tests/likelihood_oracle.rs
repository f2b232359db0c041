//! The layer likelihood against an exact rational evaluation, and its
//! normalization over every multigraph with a given number of edges.

#![allow(clippy::needless_range_loop)]

use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};

use mlsbm::graph::{LayerGraph, LayerKind};
use mlsbm::likelihood::{description_length, layer_log_marginal, partition_log_prior};
use mlsbm::{BlockState, ModelGraph, NodeType, Partition};

fn fact(n: u64) -> BigInt {
    (1..=n).fold(BigInt::one(), |a, k| a * BigInt::from(k))
}

/// `(n-1)!!` style product for even `n`: `n (n-2) ... 2`.
fn double_fact_even(n: u64) -> BigInt {
    assert!(n.is_multiple_of(2));
    (1..=n / 2).fold(BigInt::one(), |a, k| a * BigInt::from(2 * k))
}

fn binom(n: u64, k: u64) -> BigInt {
    if k > n {
        return BigInt::from(0);
    }
    fact(n) / (fact(k) * fact(n - k))
}

fn multiset(n: u64, k: u64) -> BigInt {
    if n == 0 {
        return BigInt::from((k == 0) as u32);
    }
    binom(n + k - 1, k)
}

fn ratio(num: BigInt, den: BigInt) -> BigRational {
    BigRational::new(num, den)
}

/// Exact `P(A | b)` of the undirected degree-corrected model, with `A_ii`
/// twice the number of self-loops at `i`.
fn exact_undirected(a: &[Vec<u64>], b: &[usize]) -> BigRational {
    let n = a.len();
    let nb = b.iter().max().unwrap() + 1;
    let mut e = vec![vec![0u64; nb]; nb];
    for i in 0..n {
        for j in 0..n {
            e[b[i]][b[j]] += a[i][j];
        }
    }
    let k: Vec<u64> = (0..n).map(|i| a[i].iter().sum()).collect();
    let total: u64 = k.iter().sum::<u64>() / 2;
    let mut sizes = vec![0u64; nb];
    for &g in b {
        sizes[g] += 1;
    }
    let e_r: Vec<u64> = (0..nb).map(|r| e[r].iter().sum()).collect();

    let mut num = BigInt::one();
    let mut den = BigInt::one();
    for r in 0..nb {
        for s in r + 1..nb {
            num *= fact(e[r][s]);
        }
        num *= double_fact_even(e[r][r]);
        den *= fact(e_r[r]);
        den *= multiset(sizes[r], e_r[r]);
    }
    for &ki in &k {
        num *= fact(ki);
    }
    for i in 0..n {
        for j in i + 1..n {
            den *= fact(a[i][j]);
        }
        den *= double_fact_even(a[i][i]);
    }
    let pairs = (nb * (nb + 1) / 2) as u64;
    den *= multiset(pairs, total);
    ratio(num, den)
}

/// Exact `P(b)` for a single node type.
fn exact_prior(b: &[usize]) -> BigRational {
    let n = b.len() as u64;
    let nb = (b.iter().max().unwrap() + 1) as u64;
    let mut sizes = vec![0u64; nb as usize];
    for &g in b {
        sizes[g] += 1;
    }
    let num = sizes.iter().fold(BigInt::one(), |acc, &s| acc * fact(s));
    let den = fact(n) * binom(n - 1, nb - 1) * BigInt::from(n);
    ratio(num, den)
}

fn ln_rational(x: &BigRational) -> f64 {
    x.numer().to_f64().unwrap().ln() - x.denom().to_f64().unwrap().ln()
}

fn single_layer_state(
    kind: LayerKind,
    types: Vec<NodeType>,
    layer_types: [NodeType; 2],
    edges: &[(u32, u32, u32)],
    labels: &[u32],
) -> BlockState {
    let n = types.len();
    let layer = LayerGraph::new("L", kind, layer_types, n, edges);
    let graph = Arc::new(ModelGraph::new(types.clone(), vec![layer], vec![false; n]));
    let p = Partition::new(labels.to_vec(), types).unwrap();
    BlockState::from_partition(graph, &p).unwrap()
}

#[test]
fn four_node_undirected_matches_rational_evaluation() {
    // Two triangles sharing an edge, a doubled edge and a self-loop.
    let edges = [(0u32, 1u32, 2u32), (0, 2, 1), (1, 2, 1), (1, 3, 1), (2, 3, 1), (3, 3, 1)];
    let mut a = vec![vec![0u64; 4]; 4];
    for &(u, v, m) in &edges {
        let (u, v) = (u as usize, v as usize);
        if u == v {
            a[u][u] += 2 * m as u64;
        } else {
            a[u][v] += m as u64;
            a[v][u] += m as u64;
        }
    }
    for labels in [[0usize, 0, 0, 0], [0, 0, 1, 1], [0, 1, 0, 1], [0, 1, 2, 2], [0, 1, 2, 3]] {
        let lab: Vec<u32> = labels.iter().map(|&x| x as u32).collect();
        let state = single_layer_state(LayerKind::Undirected, vec![NodeType::Doc; 4], [NodeType::Doc; 2], &edges, &lab);
        let want = exact_undirected(&a, &labels);
        let got = layer_log_marginal(&state, 0);
        assert!(
            (got - ln_rational(&want)).abs() < 1e-10,
            "{labels:?}: {got} vs {}",
            ln_rational(&want)
        );

        let joint = &want * exact_prior(&labels);
        let dl = description_length(&state).total;
        assert!((dl + ln_rational(&joint)).abs() < 1e-10, "{labels:?}");
    }
}

/// Every multiset of size `e` drawn from `slots`.
fn multisets(slots: &[(u32, u32)], e: usize) -> Vec<Vec<(u32, u32, u32)>> {
    fn rec(slots: &[(u32, u32)], start: usize, left: usize, cur: &mut Vec<(u32, u32, u32)>, out: &mut Vec<Vec<(u32, u32, u32)>>) {
        if left == 0 {
            out.push(cur.clone());
            return;
        }
        for i in start..slots.len() {
            cur.push((slots[i].0, slots[i].1, 1));
            rec(slots, i, left - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(slots, 0, e, &mut Vec::new(), &mut out);
    out
}

fn check_normalization(kind: LayerKind, types: Vec<NodeType>, layer_types: [NodeType; 2], slots: &[(u32, u32)], partitions: &[Vec<u32>]) {
    for labels in partitions {
        for e in 0..=3 {
            let total: f64 = multisets(slots, e)
                .iter()
                .map(|edges| layer_log_marginal(&single_layer_state(kind, types.clone(), layer_types, edges, labels), 0).exp())
                .sum();
            assert!((total - 1.0).abs() < 1e-12, "{kind:?} {labels:?} E={e}: {total}");
        }
    }
}

#[test]
fn directed_layer_is_normalized() {
    let slots: Vec<(u32, u32)> = (0..3).flat_map(|u| (0..3).map(move |v| (u, v))).collect();
    let parts = vec![vec![0, 0, 0], vec![0, 0, 1], vec![0, 1, 2]];
    check_normalization(LayerKind::Directed, vec![NodeType::Doc; 3], [NodeType::Doc; 2], &slots, &parts);
}

#[test]
fn undirected_layer_is_normalized() {
    let slots: Vec<(u32, u32)> = (0..3).flat_map(|u| (u..3).map(move |v| (u, v))).collect();
    let parts = vec![vec![0, 0, 0], vec![0, 1, 1], vec![0, 1, 2]];
    check_normalization(LayerKind::Undirected, vec![NodeType::Doc; 3], [NodeType::Doc; 2], &slots, &parts);
}

#[test]
fn bipartite_layer_is_normalized() {
    // Two documents, two words.
    let types = vec![NodeType::Doc, NodeType::Doc, NodeType::Word, NodeType::Word];
    let slots = [(0, 2), (0, 3), (1, 2), (1, 3)];
    let parts = vec![vec![0, 0, 1, 1], vec![0, 1, 2, 2], vec![0, 1, 2, 3], vec![0, 0, 2, 3]];
    check_normalization(LayerKind::Bipartite, types, [NodeType::Doc, NodeType::Word], &slots, &parts);
}

/// Restricted growth strings of length `n`.
fn set_partitions(n: usize) -> Vec<Vec<u32>> {
    let mut out = vec![vec![0u32]];
    for _ in 1..n {
        out = out
            .into_iter()
            .flat_map(|p| {
                let m = *p.iter().max().unwrap();
                (0..=m + 1).map(move |x| {
                    let mut q = p.clone();
                    q.push(x);
                    q
                })
            })
            .collect();
    }
    out
}

#[test]
fn partition_prior_is_normalized_and_exact() {
    for n in 1..=6 {
        let mut total = 0.0;
        for labels in set_partitions(n) {
            let p = Partition::of_type(labels.clone(), NodeType::Doc);
            let lp = partition_log_prior(&p);
            let want = exact_prior(&labels.iter().map(|&x| x as usize).collect::<Vec<_>>());
            assert!((lp - ln_rational(&want)).abs() < 1e-12);
            // Group labels are distinguishable: B! labelings per set partition.
            let b = *labels.iter().max().unwrap() as u64 + 1;
            total += lp.exp() * fact(b).to_f64().unwrap();
        }
        assert!((total - 1.0).abs() < 1e-12, "n={n}: {total}");
    }
}

#[test]
fn minimum_description_length_is_maximum_joint_probability() {
    let edges = [(0u32, 1u32, 1u32), (1, 0, 1), (2, 3, 2), (3, 4, 1), (4, 2, 1), (0, 4, 1)];
    let types = vec![NodeType::Doc; 5];
    let mut best_dl = (f64::INFINITY, Vec::new());
    let mut best_joint = (f64::NEG_INFINITY, Vec::new());
    let mut z = 0.0;
    for labels in set_partitions(5) {
        let state = single_layer_state(LayerKind::Directed, types.clone(), [NodeType::Doc; 2], &edges, &labels);
        let dl = description_length(&state).total;
        let joint = layer_log_marginal(&state, 0) + partition_log_prior(&state.partition());
        assert!((dl + joint).abs() < 1e-10);
        z += joint.exp();
        if dl < best_dl.0 {
            best_dl = (dl, labels.clone());
        }
        if joint > best_joint.0 {
            best_joint = (joint, labels);
        }
    }
    assert_eq!(best_dl.1, best_joint.1);
    // The best partition carries the largest share of the posterior.
    assert!((-best_dl.0).exp() / z > 1.0 / set_partitions(5).len() as f64);
}
