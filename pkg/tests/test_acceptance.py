"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The three full-grid sweeps (two clean, one killed and resumed) are shared
through a module fixture and take several minutes on one core.
"""

import itertools
import math
import signal
import subprocess
import sys
import time
from decimal import Decimal, getcontext
from fractions import Fraction

import numpy as np
import pytest
import scipy.sparse as sp
from scipy.optimize import minimize

from conftest import ACCEPTANCE_LINES
from predcode.corpus import write_dataset
from predcode.evaluation import build_curve, percent_reviewed_at_recall, precision_at_recall
from predcode.features import build_vocabulary, information_gain, token_value
from predcode.learners import decision_function, objective_and_gradient, train
from predcode.sweep import (
    DEFAULT_GRID, ParameterGrid, aggregate_by_parameter, enumerate_grid, extreme_combinations,
    manifest_path, run_sweep,
)
from predcode.synthetic import planted_corpus

PLANTED_SEED = 0
IMBALANCE_SEED = 0


def record(number, title, ok, detail):
    ACCEPTANCE_LINES[number] = f"[{'PASS' if ok else 'FAIL'}] {number}. {title}: {detail}"
    assert ok, detail


# 1 ---------------------------------------------------------------------------

def test_criterion_1_formula_exactness():
    exact = (token_value("ntf", 10, 10) == 1.0 and token_value("ntf", 2, 10) == 0.6
             and all(token_value("tfidf", tr, 9, 30, 30) == 0.0 for tr in range(1, 10)))
    getcontext().prec = 40
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(1000):
        max_tf = int(rng.integers(1, 200))
        tr = int(rng.integers(1, max_tf + 1))
        n = int(rng.integers(1, 5000))
        n_t = int(rng.integers(1, n + 1))
        ntf = Decimal(1) / 2 + Decimal(tr) / (2 * Decimal(max_tf))
        idf = (Decimal(n) / Decimal(n_t)).ln()
        worst = max(worst, abs(token_value("ntf", tr, max_tf) - float(ntf)),
                    abs(token_value("tfidf", tr, max_tf, n, n_t) - float(ntf * idf)))
    ok = exact and worst <= 1e-12
    record(1, "formula exactness", ok,
           f"worked examples exact={exact}, max abs error over 1000 tuples {worst:.2e} (tol 1e-12)")


# 2 ---------------------------------------------------------------------------

def _entropy(labels):
    h = 0.0
    for cls in (True, False):
        p = labels.count(cls) / len(labels) if labels else 0
        if p:
            h -= p * math.log2(p)
    return h


def _brute_ig(docs, labels, token):
    inside = [y for d, y in zip(docs, labels) if token in d]
    outside = [y for d, y in zip(docs, labels) if token not in d]
    n = len(docs)
    return _entropy(labels) - len(inside) / n * _entropy(inside) - len(outside) / n * _entropy(outside)


def _ig_corpora():
    """Every count signature a token can have in a corpus of at most 12 documents.

    IG depends only on (N, N_pos, N_t, pos_t), so covering every feasible
    signature covers every token of every such corpus. Signatures are packed
    six tokens per corpus.
    """
    for n in range(2, 13):
        for n_pos in range(1, n):
            labels = [True] * n_pos + [False] * (n - n_pos)
            sigs = [(a, b) for a in range(n_pos + 1) for b in range(n - n_pos + 1) if a + b > 0]
            for start in range(0, len(sigs), 6):
                docs = [set() for _ in range(n)]
                for j, (a, b) in enumerate(sigs[start:start + 6]):
                    for i in itertools.chain(range(a), range(n_pos, n_pos + b)):
                        docs[i].add(f"t{j}")
                yield docs, labels


def test_criterion_2_information_gain_oracle():
    worst, corpora, tokens = 0.0, 0, 0
    rng = np.random.default_rng(2)
    random_corpora = []
    for _ in range(2000):
        n = int(rng.integers(2, 13))
        labels = [bool(v) for v in rng.random(n) < rng.random()]
        if all(labels) or not any(labels):
            continue
        docs = [{f"t{j}" for j in range(6) if rng.random() < 0.4} for _ in range(n)]
        random_corpora.append((docs, labels))
    for docs, labels in itertools.chain(_ig_corpora(), random_corpora):
        if not any(docs):
            continue
        ig = information_gain(build_vocabulary(docs, labels))
        corpora += 1
        for tok, v in ig.items():
            worst = max(worst, abs(v - _brute_ig(docs, labels, tok)))
            tokens += 1
    record(2, "information-gain oracle", worst <= 1e-12,
           f"{corpora} corpora / {tokens} tokens, max abs error {worst:.2e} (tol 1e-12)")


# 3 ---------------------------------------------------------------------------

def _problem(rng, n, d):
    X = sp.random(n, d, density=0.5, random_state=rng, format="csr") * 3.0
    y = np.where(rng.random(n) < 0.5, 1.0, -1.0)
    y[0], y[1] = 1.0, -1.0
    return X, y


def _fd_rel_error(X, y, alg, theta, h=1e-6):
    _, g = objective_and_gradient(theta[:-1], theta[-1], X, y, alg, 0.8)
    fd = np.empty_like(theta)
    for i in range(len(theta)):
        e = np.zeros_like(theta)
        e[i] = h
        fd[i] = (objective_and_gradient((theta + e)[:-1], (theta + e)[-1], X, y, alg, 0.8)[0]
                 - objective_and_gradient((theta - e)[:-1], (theta - e)[-1], X, y, alg, 0.8)[0]) / (2 * h)
    return np.linalg.norm(g - fd) / np.linalg.norm(g)


def _lr_oracle(X, y, C):
    A = X.toarray()

    def f(theta):
        w, b = theta[:-1], theta[-1]
        m = y * (A @ w + b)
        s = -y / (1 + np.exp(m))
        return (0.5 * w @ w + C * np.logaddexp(0, -m).sum(),
                np.append(w + C * (A.T @ s), C * s.sum()))

    return minimize(f, np.zeros(A.shape[1] + 1), jac=True, method="L-BFGS-B",
                    options=dict(maxiter=50000, ftol=1e-15, gtol=1e-11)).fun


def test_criterion_3_learner_correctness():
    rng = np.random.default_rng(3)
    fd = {}
    for alg in ("lr", "svm"):
        errors = []
        while len(errors) < 100:
            X, y = _problem(rng, 15, 6)
            theta = rng.normal(size=7)
            if alg == "svm" and np.min(np.abs(y * (X @ theta[:-1] + theta[-1]) - 1)) < 1e-3:
                continue  # a central difference straddling a hinge kink is not a gradient
            errors.append(_fd_rel_error(X, y, alg, theta))
        fd[alg] = max(errors)
    gaps = []
    for _ in range(50):
        X, y = _problem(rng, 20, 10)
        C = float(rng.choice([0.1, 1.0, 10.0]))
        gaps.append(abs(train(X, y, "lr", C=C).diagnostics.objective - _lr_oracle(X, y, C)))
    recall = {}
    for alg in ("lr", "svm"):
        hits = []
        for _ in range(10):
            A = rng.random((100, 12))
            y = np.where(rng.random(100) < 0.3, 1.0, -1.0)
            A[:, 0] = (y > 0) * (1.0 + rng.random(100))  # separable on feature 0
            model = train(sp.csr_matrix(A), y, alg)
            s = decision_function(model, sp.csr_matrix(A))
            hits.append(np.mean(s[y > 0] > 0))
        recall[alg] = min(hits)
    ok = (max(fd.values()) < 1e-4 and max(gaps) <= 1e-6 and min(recall.values()) == 1.0)
    record(3, "learner correctness", ok,
           f"FD rel err LR {fd['lr']:.1e} SVM {fd['svm']:.1e} (<1e-4); LR vs oracle max gap "
           f"{max(gaps):.1e} over 50 problems (<=1e-6); separable training recall "
           f"LR {recall['lr']:.0%} SVM {recall['svm']:.0%}")


# 4 ---------------------------------------------------------------------------

def _prefix_scan(labels, r):
    total = sum(labels)
    need = Fraction(str(r)) * total
    for k in range(1, len(labels) + 1):
        found = sum(labels[:k])
        if found >= need:
            return 100.0 * k / len(labels), 100.0 * found / k


def test_criterion_4_metric_oracle():
    rng = np.random.default_rng(4)
    mismatches = checked = 0
    for c in range(1000):
        n = int(rng.integers(1, 201))
        labels = (rng.random(n) < rng.random()).tolist()
        if not any(labels):
            labels[int(rng.integers(n))] = True
        scores = rng.integers(0, max(2, n // 3), size=n).astype(float)  # plenty of ties
        ids = [f"doc{i:03d}" for i in rng.permutation(n)]
        curve = build_curve(dict(zip(ids, scores)), list(zip(ids, labels)))
        order = sorted(range(n), key=lambda i: (-scores[i], ids[i]))
        ranked = [labels[i] for i in order]
        for r in (0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0):
            checked += 1
            if (percent_reviewed_at_recall(curve, r), precision_at_recall(curve, r)) != _prefix_scan(ranked, r):
                mismatches += 1
    record(4, "metric oracle", mismatches == 0,
           f"{mismatches} mismatches in {checked} (curve, recall) checks over 1000 curves")


# shared full-grid sweeps -------------------------------------------------------

@pytest.fixture(scope="module")
def sweeps(tmp_path_factory):
    corpus = planted_corpus(n_docs=2000, prevalence=0.15, n_planted=20, seed=PLANTED_SEED)
    base = tmp_path_factory.mktemp("acceptance")
    out = {}
    for name, workers in (("w1", 1), ("w8", 8)):
        (base / name).mkdir()
        path = base / name / "results.csv"
        start = time.perf_counter()
        table = run_sweep(DEFAULT_GRID, corpus, out_path=path, workers=workers)
        out[name] = dict(path=path, table=table, seconds=time.perf_counter() - start)

    # a real interruption: kill a sweep process half way, then resume it
    data = base / "planted.jsonl"
    write_dataset(corpus, data)
    (base / "killed").mkdir()
    path = base / "killed" / "results.csv"
    cmd = [sys.executable, "-m", "predcode", "sweep", str(data), "--out", str(path), "--workers", "1"]
    proc = subprocess.Popen(cmd, stdout=subprocess.DEVNULL, stderr=subprocess.DEVNULL)
    half = DEFAULT_GRID.size // 2
    while proc.poll() is None:
        if path.exists() and path.read_bytes().count(b"\n") > half:
            break
        time.sleep(0.2)
    proc.send_signal(signal.SIGKILL)
    proc.wait()
    rows_before = max(0, path.read_bytes().count(b"\n") - 1)
    resumed = subprocess.run(cmd + ["--resume"], capture_output=True, text=True)
    out["killed"] = dict(path=path, rows_before=rows_before, returncode=resumed.returncode)
    return out


def test_criterion_5_sweep_integrity(sweeps):
    n_configs = len(enumerate_grid(DEFAULT_GRID))
    w1, w8, killed = sweeps["w1"], sweeps["w8"], sweeps["killed"]
    rows = w1["path"].read_bytes().count(b"\n") - 1
    same_workers = w1["path"].read_bytes() == w8["path"].read_bytes()
    same_resume = (killed["returncode"] == 0
                   and killed["path"].read_bytes() == w1["path"].read_bytes())
    ok = n_configs == 3328 and rows == n_configs == len(w1["table"]) and same_workers and same_resume
    record(5, "sweep integrity", ok,
           f"{n_configs} configs, {rows} CSV rows; workers 1 vs 8 byte-identical={same_workers}; "
           f"killed at {killed['rows_before']} rows then resumed, equals clean run={same_resume}")


def test_criterion_6_planted_signal(sweeps):
    table, seconds = sweeps["w1"]["table"], sweeps["w1"]["seconds"]
    monotone = all(list(r.percent_reviewed) == sorted(r.percent_reviewed) for r in table.succeeded)
    best, worst = extreme_combinations(table, 0.8)
    b80, bp, wp = best.percent_reviewed_at(0.8), best.precision_at(0.8), worst.precision_at(0.8)
    ok = (not table.failed and monotone and b80 <= 20.0 and bp > wp and seconds < 600)
    record(6, "planted-signal replication", ok,
           f"seed {PLANTED_SEED}, {len(table.failed)} failed rows, monotone={monotone}, best reviews "
           f"{b80:.2f}% at 80% recall (<=20), precision best {bp:.2f} > worst {wp:.2f}, "
           f"sweep {seconds:.0f}s (<600)")


def test_criterion_7_down_sampling_direction():
    corpus = planted_corpus(n_docs=2200, prevalence=1 / 11, n_planted=20, seed=IMBALANCE_SEED,
                            name="planted-1-to-10")
    grid = ParameterGrid(ngram_orders=(1, 2), token_counts=(1000, 5000, 20000),
                         sampling_percentages=(25, 100))
    table = run_sweep(grid, corpus)
    agg = {row.value: row for row in aggregate_by_parameter(table, "sampling").rows}
    i = table.recall_targets.index(0.9)
    low, full = agg["25"].percent_reviewed[i], agg["100"].percent_reviewed[i]
    dist = corpus.training()
    pos = sum(d.relevant for d in dist)
    record(7, "down-sampling direction (soft)", low <= full,
           f"seed {IMBALANCE_SEED}, training {pos}:{len(dist) - pos}, {grid.size} configs; "
           f"mean % reviewed at 90% recall: 25% sampling {low:.2f} vs 100% sampling {full:.2f}")


def test_criterion_8_determinism(sweeps):
    w1, w8 = sweeps["w1"], sweeps["w8"]
    same_csv = w1["path"].read_bytes() == w8["path"].read_bytes()
    same_manifest = manifest_path(w1["path"]).read_bytes() == manifest_path(w8["path"]).read_bytes()
    record(8, "determinism", same_csv and same_manifest,
           f"two full sweeps, seed {DEFAULT_GRID.seed}: CSV identical={same_csv}, "
           f"manifest identical={same_manifest}")
