"""Suggestion engine: prefix + fuzzy candidate generation, ranking, overlays.

The bar always holds the literal slot (the typed buffer) followed by
``algo_slots`` algorithmic suggestions.
"""
from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field, fields, replace
from functools import lru_cache
from pathlib import Path

import numpy as np

from .lexicon import Lexicon, WordSet

MODES = ("Baseline", "LengthAscending", "LengthDescending", "CapHigh", "CapLow", "AccuracyControlled")
RANKINGS = ("Baseline", "LengthAscending", "LengthDescending")
CAP_TOP_K = 5

# Frozen by scripts/calibrate_weights.py against the bundled surrogate set.
DEFAULT_W_LEN = 0.001
DEFAULT_W_FREQ = 0.5


@dataclass(frozen=True)
class SuggestionConfig:
    w_len: float = DEFAULT_W_LEN
    w_freq: float = DEFAULT_W_FREQ
    algo_slots: int = 2
    fuzzy_max_distance: int = 2
    mode: str = "Baseline"
    target_accuracy: float | None = None
    appearance_fraction: float = 0.54
    autocorrect_enabled: bool = True
    autocorrect_success: float = 0.80
    cap_demotion: float = 0.60
    # prefix matches are shown only if they save at least this many keystrokes
    min_savings: int = 2
    # ranking used underneath the AccuracyControlled overlay
    accuracy_base: str = "Baseline"
    # probability that a natively suggestible word stays suggestible; < 1
    # thins coverage to match accuracy across ranking modes
    coverage_keep: float = 1.0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown suggestion mode {self.mode!r}; expected one of {MODES}")
        if self.accuracy_base not in RANKINGS:
            raise ValueError(f"accuracy_base must be one of {RANKINGS}")
        if self.w_len < 0 or self.w_freq < 0:
            raise ValueError("weights must be >= 0")
        if self.mode in ("Baseline", "CapHigh", "CapLow") and self.w_len + self.w_freq <= 0:
            raise ValueError("w_len + w_freq must be > 0")
        if self.min_savings < 1:
            raise ValueError("min_savings must be >= 1")
        if self.algo_slots < 1 or self.fuzzy_max_distance < 0:
            raise ValueError("algo_slots >= 1 and fuzzy_max_distance >= 0 required")
        if (self.mode == "AccuracyControlled") != (self.target_accuracy is not None):
            raise ValueError("target_accuracy is required iff mode is AccuracyControlled")
        if self.target_accuracy is not None and not 0.0 <= self.target_accuracy <= 1.0:
            raise ValueError("target_accuracy must lie in [0, 1]")
        if not 0.0 < self.appearance_fraction <= 1.0:
            raise ValueError("appearance_fraction must lie in (0, 1]")
        for name in ("autocorrect_success", "cap_demotion", "coverage_keep"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")

    @property
    def ranking(self) -> str:
        if self.mode in ("LengthAscending", "LengthDescending"):
            return self.mode
        if self.mode == "AccuracyControlled":
            return self.accuracy_base
        return "Baseline"

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SuggestionConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown suggestion config keys: {sorted(unknown)}")
        return cls(**d)

    def with_(self, **kw) -> "SuggestionConfig":
        return replace(self, **kw)


@dataclass(frozen=True)
class SuggestionList:
    literal: str
    algorithmic: tuple[str, ...]

    def __contains__(self, word: str) -> bool:
        return bool(word) and word in self.algorithmic

    @property
    def top(self) -> str:
        return self.algorithmic[0] if self.algorithmic else ""


@dataclass(frozen=True)
class AccuracyReport:
    accuracy: float
    mean_appearance_fraction: float | None
    n_words: int
    per_word: tuple = field(default=(), repr=False)  # (word, first appearance fraction or None)

    def to_json(self) -> str:
        return json.dumps({"accuracy": self.accuracy, "mean_appearance_fraction": self.mean_appearance_fraction,
                           "n_words": self.n_words}, indent=2)

    def write(self, json_path: str | Path, csv_path: str | Path | None = None) -> None:
        Path(json_path).write_text(self.to_json() + "\n")
        if csv_path is not None:
            with open(csv_path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["word", "covered", "appearance_fraction"])
                for word, frac in self.per_word:
                    w.writerow([word, int(frac is not None), "" if frac is None else f"{frac:.6f}"])


@dataclass(frozen=True)
class WordProgress:
    """Per-word random draws taken once at word start."""
    covered: bool = True
    cap_demoted: bool = False


def levenshtein(a: str, b: str) -> int:
    """Unit-cost edit distance (insert, delete, substitute)."""
    if a == b:
        return 0
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def candidates_for_prefix(prefix: str, lex: Lexicon) -> list[str]:
    """Lexicon words starting with ``prefix`` (case-folded), in rank order."""
    if not prefix:
        return list(lex.words)
    return sorted(lex.prefix_range(prefix), key=lambda w: lex.index[w].rank)


def _prefix_distances(typed: str, char_mat: np.ndarray, lengths: np.ndarray) -> np.ndarray:
    """Edit distance of ``typed`` against every word's prefix of the same length.

    Vectorized over the lexicon: one DP row per character of ``typed``.
    """
    m = len(typed)
    n_words = char_mat.shape[0]
    if m == 0:
        return np.zeros(n_words, dtype=np.int64)
    cols = char_mat[:, :m]
    prev = np.tile(np.arange(m + 1, dtype=np.int64), (n_words, 1))
    for i in range(1, m + 1):
        c = ord(typed[i - 1])
        cur = np.empty_like(prev)
        cur[:, 0] = i
        sub = prev[:, :-1] + (cols != c)
        dele = prev[:, 1:] + 1
        best = np.minimum(sub, dele)
        # insertion term runs along the row
        for j in range(1, m + 1):
            cur[:, j] = np.minimum(best[:, j - 1], cur[:, j - 1] + 1)
        prev = cur
    k = np.minimum(lengths, m)
    return prev[np.arange(n_words), k]


def fuzzy_candidates(typed: str, lex: Lexicon, max_d: int) -> list[str]:
    """Words whose prefix at the typed length is within ``max_d`` edits of ``typed``."""
    t = typed.lower()
    return [w for w in lex.words if levenshtein(t, w[: len(t)]) <= max_d]


def _order_key(ranking: str, word: str, lex: Lexicon, cfg: SuggestionConfig, l_max: int):
    e = lex.index[word.lower()]
    if ranking == "LengthAscending":
        return (len(word), e.rank, word)
    if ranking == "LengthDescending":
        return (-len(word), e.rank, word)
    score = cfg.w_len * (len(word) / l_max) + cfg.w_freq * e.norm_freq
    return (-score, e.rank, word)


def rank(candidates, lex: Lexicon, cfg: SuggestionConfig) -> list[str]:
    """Deterministic total order of ``candidates`` under ``cfg``'s ranking."""
    l_max = lex.max_length
    return sorted(candidates, key=lambda w: _order_key(cfg.ranking, w, lex, cfg, l_max))


def autocorrect(typed: str, target: str, cfg: SuggestionConfig, rng: np.random.Generator) -> tuple[str, bool]:
    """Commit-time correction: distance-1 words are fixed with probability ``autocorrect_success``."""
    if not cfg.autocorrect_enabled or typed == target:
        return typed, False
    if levenshtein(typed, target) == 1 and rng.random() < cfg.autocorrect_success:
        return target, True
    return typed, False


class SuggestionEngine:
    """Read-only engine bound to one lexicon and config; results are cached per prefix."""

    def __init__(self, lex: Lexicon, cfg: SuggestionConfig | None = None):
        self.lex = lex
        self.cfg = cfg or SuggestionConfig()
        self._words = list(lex.words)
        self._pos = {w: i for i, w in enumerate(rank(self._words, lex, self.cfg))}
        self._by_pos = sorted(self._words, key=self._pos.__getitem__)
        width = lex.max_length
        mat = np.zeros((len(self._words), width), dtype=np.int64)
        for i, w in enumerate(self._words):
            mat[i, : len(w)] = [ord(c) for c in w]
        self._chars = mat
        self._lengths = np.array([len(w) for w in self._words], dtype=np.int64)
        self._depth = max(CAP_TOP_K, self.cfg.algo_slots) + 2
        self.ranked = lru_cache(maxsize=200_000)(self._ranked)
        self.top_matches = lru_cache(maxsize=200_000)(self._top_matches)

    def _top_matches(self, typed_lower: str) -> tuple[str, ...]:
        """Internal top-k prefix ranking, before display filtering."""
        if not typed_lower:
            return tuple(self._by_pos[:CAP_TOP_K])
        exact = sorted(self.lex.prefix_range(typed_lower), key=self._pos.__getitem__)
        return tuple(exact[:CAP_TOP_K])

    def _ranked(self, typed_lower: str) -> tuple[str, ...]:
        """Top candidates for a case-folded buffer, exact matches before fuzzy ones."""
        depth = self._depth
        n = len(typed_lower) + self.cfg.min_savings
        if not typed_lower:
            return tuple(w for w in self._by_pos if len(w) >= n)[:depth]
        exact = sorted(self.lex.prefix_range(typed_lower), key=self._pos.__getitem__)
        shown = [w for w in exact if len(w) >= n]
        out = shown[:depth]
        if len(shown) < self.cfg.algo_slots and self.cfg.fuzzy_max_distance > 0:
            d = _prefix_distances(typed_lower, self._chars, self._lengths)
            idx = np.nonzero(d <= self.cfg.fuzzy_max_distance)[0]
            exact_set = set(exact)
            fuzzy = [self._words[i] for i in idx if self._words[i] not in exact_set and self._words[i] != typed_lower]
            dist = {self._words[i]: int(d[i]) for i in idx}
            fuzzy.sort(key=lambda w: (dist[w], self._pos[w]))
            out = out + fuzzy[: depth - len(out)]
        return tuple(out)

    def start_word(self, target: str, rng: np.random.Generator) -> WordProgress:
        cfg = self.cfg
        covered = True
        if cfg.mode == "AccuracyControlled":
            covered = bool(rng.random() < cfg.target_accuracy)
        elif cfg.coverage_keep < 1.0:
            covered = bool(rng.random() < cfg.coverage_keep)
        demoted = False
        if cfg.mode == "CapLow" and target[:1].isupper():
            demoted = bool(rng.random() < cfg.cap_demotion)
        return WordProgress(covered=covered, cap_demoted=demoted)

    def suggest(self, typed: str, target: str, progress: WordProgress = WordProgress()) -> SuggestionList:
        cfg = self.cfg
        base = list(self.ranked(typed.lower()))
        tlow = target.lower()
        is_cap = target[:1].isupper() and target != tlow

        if cfg.mode == "AccuracyControlled":
            base = [w for w in base if w != tlow]
            if progress.covered and len(typed) >= cfg.appearance_fraction * len(target):
                base.insert(0, target)
        else:
            if not progress.covered:
                base = [w for w in base if w != tlow]
            if is_cap and cfg.mode == "CapHigh" and progress.covered and tlow in self.top_matches(typed.lower()):
                base = [target] + [w for w in base if w != tlow]
            elif is_cap and tlow in base and not (cfg.mode == "CapLow" and progress.cap_demoted):
                base[base.index(tlow)] = target

        algo = []
        for w in base:
            if w != typed and w not in algo:
                algo.append(w)
            if len(algo) == cfg.algo_slots:
                break
        algo += [""] * (cfg.algo_slots - len(algo))
        return SuggestionList(literal=typed, algorithmic=tuple(algo))


def suggest(typed: str, target: str, progress: WordProgress, lex: Lexicon, cfg: SuggestionConfig) -> SuggestionList:
    return engine_for(lex, cfg).suggest(typed, target, progress)


_ENGINES: dict = {}


def engine_for(lex: Lexicon, cfg: SuggestionConfig) -> SuggestionEngine:
    key = (id(lex), cfg)
    eng = _ENGINES.get(key)
    if eng is None or eng.lex is not lex:
        eng = _ENGINES[key] = SuggestionEngine(lex, cfg)
    return eng


def measure_accuracy(ws: WordSet, lex: Lexicon, cfg: SuggestionConfig, seed: int = 0) -> AccuracyReport:
    """Type every word error-free and record when the target first shows up."""
    if not ws.words:
        raise ValueError("empty word set")
    eng = engine_for(lex, cfg)
    rng = np.random.default_rng(seed)
    per_word = []
    for target in ws.words:
        progress = eng.start_word(target, rng)
        frac = None
        for k in range(len(target)):
            if target in eng.suggest(target[:k], target, progress).algorithmic:
                frac = k / len(target)
                break
        per_word.append((target, frac))
    covered = [f for _, f in per_word if f is not None]
    acc = len(covered) / len(per_word)
    return AccuracyReport(accuracy=acc, mean_appearance_fraction=float(np.mean(covered)) if covered else None,
                          n_words=len(per_word), per_word=tuple(per_word))
