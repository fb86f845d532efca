"""Fit cognitive parameters to a reference group by minimizing mean JS divergence.

The policy is fixed; parameters are policy inputs, so each objective call is
a greedy simulation of ``n_words`` words followed by a per-metric comparison
of binned distributions.
"""
from __future__ import annotations

import json
import logging
import math
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.stats import norm, qmc

from .cases import eval_word_list, make_factory
from .env import PARAM_NAMES, PARAM_RANGES, CognitiveParams, EnvConfig
from .lexicon import WordSet, default_training_set
from .metrics import (DEFAULT_REFERENCE_FILE, METRIC_RANGES, METRICS, ReferenceTable, TypingRecord,
                      js_divergence, load_reference_tables, report)
from .policy import Checkpoint, simulate

log = logging.getLogger(__name__)

N_BINS = 32
BIN_SPAN_SD = 4.0


@dataclass(frozen=True)
class ParamBounds:
    bounds: dict = field(default_factory=lambda: dict(PARAM_RANGES))

    def __post_init__(self):
        for n in PARAM_NAMES:
            lo, hi = self.bounds[n]
            if not lo < hi:
                raise ValueError(f"bounds for {n} must satisfy low < high, got {(lo, hi)}")

    @property
    def low(self) -> np.ndarray:
        return np.array([self.bounds[n][0] for n in PARAM_NAMES], dtype=float)

    @property
    def high(self) -> np.ndarray:
        return np.array([self.bounds[n][1] for n in PARAM_NAMES], dtype=float)

    def from_unit(self, u: np.ndarray) -> np.ndarray:
        return self.low + np.clip(u, 0.0, 1.0) * (self.high - self.low)

    def to_unit(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.low) / (self.high - self.low)

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.low - 1e-12) and np.all(x <= self.high + 1e-12))

    def diagonal(self) -> float:
        return float(np.linalg.norm(self.high - self.low))


@dataclass
class FitResult:
    best_params: tuple
    best_objective: float
    trace: list  # (params tuple, objective, source) in evaluation order
    budget_used: int
    group: str | None = None

    @property
    def best(self) -> CognitiveParams:
        return CognitiveParams(*self.best_params)

    def best_so_far(self) -> list[float]:
        return list(np.minimum.accumulate([t[1] for t in self.trace]))

    def to_dict(self) -> dict:
        return {"group": self.group, "best_params": dict(zip(PARAM_NAMES, self.best_params)),
                "best_objective": self.best_objective, "budget_used": self.budget_used,
                "trace": [{"params": dict(zip(PARAM_NAMES, p)), "objective": o, "source": s}
                          for p, o, s in self.trace]}

    def write(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


# ---------------------------------------------------------------- objective

def metric_bins(metric: str, mean: float, sd: float) -> np.ndarray:
    """Bin edges: N_BINS uniform bins over mean +- 4 sd, intersected with the metric's range."""
    lo, hi = METRIC_RANGES[metric]
    a, b = max(lo, mean - BIN_SPAN_SD * sd), min(hi, mean + BIN_SPAN_SD * sd)
    if not b > a:
        a, b = lo, hi
    return np.linspace(a, b, N_BINS + 1)


def binned_normal(edges: np.ndarray, mean: float, sd: float) -> np.ndarray:
    """Normal(mean, sd) truncated to the bin span, as bin probabilities."""
    p = np.diff(norm.cdf(edges, loc=mean, scale=sd))
    if p.sum() <= 0:
        # all mass far outside the span: put it on the nearest edge bin
        p = np.zeros(len(edges) - 1)
        p[0 if mean < edges[0] else -1] = 1.0
    return p / p.sum()


def binned_samples(edges: np.ndarray, values: Sequence[float]) -> np.ndarray:
    """Gaussian-kernel density of the sample, binned; values beyond the span pile onto edge bins."""
    v = np.asarray(values, dtype=float)
    width = edges[1] - edges[0]
    sd = float(np.std(v, ddof=1)) if len(v) > 1 else 0.0
    h = max(1.06 * sd * len(v) ** -0.2, width)  # Scott's rule, floored at one bin
    inner = edges[1:-1]
    cdf = norm.cdf((inner[None, :] - v[:, None]) / h)
    cdf = np.concatenate([np.zeros((len(v), 1)), cdf, np.ones((len(v), 1))], axis=1)
    p = np.diff(cdf, axis=1).mean(axis=0)
    return p / p.sum()


def block_values(records: Sequence[TypingRecord], block: int = 10) -> dict[str, list[float]]:
    """Metric values over consecutive blocks of ``block`` words."""
    out = {m: [] for m in METRICS}
    for lo in range(0, len(records) - block + 1, block):
        rep = report(records[lo:lo + block]).as_dict()
        for m in METRICS:
            if rep[m] is not None and math.isfinite(rep[m]):
                out[m].append(rep[m])
    return out


def divergence_from_records(records: Sequence[TypingRecord], target: ReferenceTable, block: int = 10) -> float:
    vals = block_values(records, block)
    scores = []
    for m in METRICS:
        if m not in target.stats:
            continue
        mean, sd = target.stats[m]
        if sd <= 0:
            warnings.warn(f"skipping metric {m}: reference sd is {sd}", stacklevel=2)
            continue
        edges = metric_bins(m, mean, sd)
        if not vals[m]:
            scores.append(1.0)
            continue
        scores.append(js_divergence(binned_samples(edges, vals[m]), binned_normal(edges, mean, sd)))
    if not scores:
        raise ValueError("no usable metrics in the reference table")
    return float(np.mean(scores))


def objective(params: CognitiveParams, checkpoint: Checkpoint, target: ReferenceTable, n_words: int = 100,
              seed: int = 0, env_cfg: EnvConfig | None = None, words: WordSet | None = None,
              block: int = 10) -> float:
    if n_words < 100:
        raise ValueError("n_words must be >= 100")
    env_cfg = env_cfg or EnvConfig.from_dict(checkpoint.env_config)
    ws = words or default_training_set()
    wl = eval_word_list(ws, n_words, seed)
    recs = simulate(checkpoint, make_factory(env_cfg), wl, params, seed=seed)
    return divergence_from_records(recs, target, block)


# ---------------------------------------------------------------- optimizer

class _GP:
    """Zero-mean GP with an isotropic RBF kernel on the unit cube; lengthscale by marginal likelihood."""

    def __init__(self, X: np.ndarray, y: np.ndarray, noise: float = 1e-4):
        self.X = X
        self.mu, self.sd = float(y.mean()), float(y.std() or 1.0)
        self.y = (y - self.mu) / self.sd
        best = None
        for ell in (0.05, 0.1, 0.2, 0.3, 0.5, 0.8, 1.2):
            K = self._k(X, X, ell) + noise * np.eye(len(X))
            L = np.linalg.cholesky(K)
            alpha = np.linalg.solve(L.T, np.linalg.solve(L, self.y))
            nll = 0.5 * self.y @ alpha + np.log(np.diag(L)).sum()
            if best is None or nll < best[0]:
                best = (nll, ell, L, alpha)
        _, self.ell, self.L, self.alpha = best

    @staticmethod
    def _k(A, B, ell):
        d2 = ((A[:, None, :] - B[None, :, :]) ** 2).sum(-1)
        return np.exp(-0.5 * d2 / ell ** 2)

    def predict(self, Z: np.ndarray):
        Ks = self._k(Z, self.X, self.ell)
        m = Ks @ self.alpha
        v = np.linalg.solve(self.L, Ks.T)
        var = np.clip(1.0 - (v ** 2).sum(0), 1e-12, None)
        return m * self.sd + self.mu, np.sqrt(var) * self.sd


def expected_improvement(mean: np.ndarray, std: np.ndarray, best: float, xi: float = 0.01) -> np.ndarray:
    z = (best - xi - mean) / std
    return (best - xi - mean) * norm.cdf(z) + std * norm.pdf(z)


def minimize(fn: Callable[[np.ndarray], float], bounds: ParamBounds = ParamBounds(), budget: int = 40,
             seed: int = 0, n_candidates: int = 2000) -> FitResult:
    """Latin-hypercube seeding (a quarter of the budget), then GP expected improvement.

    Falls back to a uniform random proposal whenever the surrogate fails or
    expected improvement vanishes. ``fn`` receives points in original units.
    """
    if budget < 20:
        raise ValueError("budget must be >= 20")
    rng = np.random.default_rng(seed)
    dim = len(PARAM_NAMES)
    n_init = max(2, budget // 4)
    U = list(qmc.LatinHypercube(d=dim, seed=rng).random(n_init))
    sources = ["lhs"] * n_init
    X, y, trace = [], [], []

    def evaluate(u, source):
        x = bounds.from_unit(u)
        val = float(fn(x))
        X.append(np.clip(u, 0.0, 1.0))
        y.append(val)
        trace.append((tuple(float(v) for v in x), val, source))
        log.debug("eval %d %s %s -> %.4f", len(trace), source, np.round(x, 4), val)

    for u, s in zip(U, sources):
        evaluate(u, s)
    while len(trace) < budget:
        u_next, source = None, "random"
        try:
            gp = _GP(np.array(X), np.array(y))
            best_i = int(np.argmin(y))
            cand = np.vstack([rng.random((n_candidates, dim)),
                              np.clip(X[best_i] + 0.05 * rng.normal(size=(n_candidates // 4, dim)), 0, 1)])
            m, s = gp.predict(cand)
            ei = expected_improvement(m, s, float(np.min(y)))
            if np.isfinite(ei).all() and ei.max() > 1e-12:
                u_next, source = cand[int(np.argmax(ei))], "ei"
        except np.linalg.LinAlgError:
            pass
        if u_next is None:
            u_next = rng.random(dim)
        evaluate(u_next, source)
    i = int(np.argmin(y))
    return FitResult(best_params=trace[i][0], best_objective=y[i], trace=trace, budget_used=len(trace))


# ---------------------------------------------------------------- groups

@dataclass(frozen=True)
class FitConfig:
    budget: int = 40
    n_words: int = 100
    seed: int = 0
    block: int = 10
    bounds: ParamBounds = field(default_factory=ParamBounds)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["bounds"] = {k: list(v) for k, v in self.bounds.bounds.items()}
        return d


def fit_group(group: str, checkpoint: Checkpoint, table_file: str | Path = DEFAULT_REFERENCE_FILE,
              cfg: FitConfig = FitConfig(), env_cfg: EnvConfig | None = None,
              out_path: str | Path | None = None) -> FitResult:
    tables = load_reference_tables(table_file)
    if group not in tables:
        raise KeyError(f"unknown group {group!r}; available: {sorted(tables)}")
    target = tables[group]

    def fn(x):
        return objective(CognitiveParams(*x), checkpoint, target, n_words=cfg.n_words, seed=cfg.seed,
                         env_cfg=env_cfg, block=cfg.block)

    res = minimize(fn, cfg.bounds, cfg.budget, seed=cfg.seed)
    res.group = group
    if out_path is not None:
        res.write(out_path)
    return res
