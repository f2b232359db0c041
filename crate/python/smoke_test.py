"""Smoke test for the Python bindings.

Build and install first:

    pip install --no-build-isolation -e crates/py

Then run with `python python/smoke_test.py` or `pytest python/smoke_test.py`.
"""

import json
import math
import random
import tempfile
from pathlib import Path

import numpy as np
from scipy import stats
from scipy.optimize import linear_sum_assignment
from sklearn.metrics import roc_auc_score

import mlsbm


def write_corpus(path, n=30, seed=0):
    rng = random.Random(seed)
    vocab = [["alpha", "beta", "gamma", "delta", "omega"], ["river", "stone", "forest", "cloud", "field"]]
    with open(path, "w") as f:
        for i in range(n):
            g = i % 2
            same = [j for j in range(n) if j % 2 == g and j != i]
            links = [f"d{j}" for j in rng.sample(same, 4)]
            if i % 5 == 0:
                links.append(f"d{(i + 1) % n}")
            text = " ".join(rng.choice(vocab[g]) for _ in range(25))
            f.write(json.dumps({"id": f"d{i}", "text": text, "links": links, "tags": [f"t{g}"]}) + "\n")


def network():
    tmp = Path(tempfile.mkdtemp())
    write_corpus(tmp / "corpus.jsonl")
    return mlsbm.Network.from_corpus(str(tmp / "corpus.jsonl")), tmp


def test_network_roundtrip():
    net, tmp = network()
    assert len(net.docs) == 30 and len(net.words) == 10 and len(net.tags) == 2
    assert net.n_tokens == 30 * 25
    net.save(str(tmp / "net.json"))
    again = mlsbm.Network.load(str(tmp / "net.json"))
    assert again.docs == net.docs and again.n_hyperlinks == net.n_hyperlinks
    half = net.subsample_tokens(0.5, 3)
    assert 0 < half.n_tokens < net.n_tokens
    assert len(net.restrict_docs([0, 1, 2]).docs) == 3


def test_fit_recovers_communities_and_dl_agrees():
    net, _ = network()
    fit = mlsbm.fit(net, layers="H+T", seed=1, n_sweeps=20, n_chains=3)
    docs = fit["labels"]["doc"]
    truth = [int(d[1:]) % 2 for d in net.docs]
    ov = mlsbm.max_overlap(docs, truth)
    assert ov["normalized_overlap"] == 1.0, ov
    assert len(fit["chain_labels"]) == 3
    dl = mlsbm.description_length(net, fit["labels"], layers="H+T")
    assert math.isclose(dl["total"], fit["dl_total"], rel_tol=1e-9)
    again = mlsbm.fit(net, layers="H+T", seed=1, n_sweeps=20, n_chains=3)
    assert again["labels"] == fit["labels"] and again["dl_total"] == fit["dl_total"]


def test_max_overlap_matches_assignment_solver():
    rng = np.random.default_rng(0)
    for _ in range(20):
        x = rng.integers(0, 4, 25).tolist()
        y = rng.integers(0, 5, 25).tolist()
        m = np.zeros((5, 5))
        for a, b in zip(x, y):
            m[a, b] += 1
        r, c = linear_sum_assignment(-m)
        assert mlsbm.max_overlap(x, y)["raw_overlap"] == int(m[r, c].sum())


def test_consensus_undoes_relabeling():
    base = [0, 0, 1, 1, 2, 2, 2]
    perms = [[2, 0, 1], [1, 2, 0], [0, 1, 2]]
    parts = [[p[b] for b in base] for p in perms]
    c = mlsbm.consensus(parts)
    assert mlsbm.max_overlap(c["labels"], base)["normalized_overlap"] == 1.0
    assert c["sigma"] == 0.0


def test_topic_report():
    net, _ = network()
    fit = mlsbm.fit(net, layers="H+T", seed=2, n_sweeps=10, n_chains=2)
    r = mlsbm.topic_report(net, fit["labels"]["doc"], fit["labels"]["word"], top_n=3)
    tau = np.array(r["mixture"]["tau"])
    assert tau.shape == (2, 2)
    assert np.allclose(np.abs(tau), 1.0)
    assert all(len(t["top_words"]) == 3 for t in r["topics"])


def test_statistics_match_scipy_and_sklearn():
    rng = np.random.default_rng(1)
    a = rng.normal(0.8, 0.05, 12)
    b = a - rng.normal(0.02, 0.01, 12)
    t = mlsbm.paired_ttest(a.tolist(), b.tolist())
    ref = stats.ttest_rel(a, b)
    assert math.isclose(t["t"], ref.statistic, rel_tol=1e-9)
    assert math.isclose(t["p_two_sided"], ref.pvalue, rel_tol=1e-6)
    w = mlsbm.welch_ttest(a.tolist(), b.tolist())
    ref = stats.ttest_ind(a, b, equal_var=False)
    assert math.isclose(w["t"], ref.statistic, rel_tol=1e-9)
    assert math.isclose(w["p_two_sided"], ref.pvalue, rel_tol=1e-6)

    pos = rng.integers(0, 5, 40).astype(float)
    neg = rng.integers(0, 4, 50).astype(float)
    want = roc_auc_score([1] * 40 + [0] * 50, np.concatenate([pos, neg]))
    assert math.isclose(mlsbm.auc(pos.tolist(), neg.tolist()), want, rel_tol=1e-12)


def test_linkpred_and_scaling_run():
    net, _ = network()
    r = mlsbm.evaluate_auc(net, ["H", "H+T"], repeats=2, n_sweeps=5, n_chains=1, burn_in=2, thin=2)
    assert [m["model"] for m in r["models"]] == ["H", "H+T"]
    assert all(0.0 <= x <= 1.0 for m in r["models"] for x in m["aucs"])
    s = mlsbm.degree_scaling(net, [10, 20, 30], repeats=2)
    assert len(s["points"]) == 3


def test_errors_are_value_errors():
    net, _ = network()
    for call in [
        lambda: mlsbm.fit(net, layers="X"),
        lambda: mlsbm.fit(net, n_chains=0),
        lambda: mlsbm.max_overlap([0, 1], [0]),
        lambda: mlsbm.consensus([[0, 1]]),
        lambda: net.restrict_docs([99]),
    ]:
        try:
            call()
        except ValueError:
            continue
        raise AssertionError("expected ValueError")


if __name__ == "__main__":
    tests = [(k, v) for k, v in sorted(globals().items()) if k.startswith("test_")]
    for name, fn in tests:
        fn()
        print(f"ok  {name}")
    print(f"{len(tests)} passed")
