"""Design-case studies and analyses built on trained agents.

Each case configures one manipulated factor, fine-tunes (or trains) a set of
replicate agents, evaluates them greedily on a shared word list and returns
a :class:`CaseResult` with one row per (condition, replicate) plus mean rows.
"""
from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .env import CognitiveParams, EnvConfig, RewardConfig, TypingEnv
from .lexicon import (Lexicon, WordSet, default_caps_set, default_lexicon, default_training_set, length_span_set)
from .metrics import TypingRecord, report
from .policy import Checkpoint, TrainConfig, config_fingerprint, fine_tune, simulate, train
from .suggest import SuggestionConfig, engine_for, measure_accuracy

log = logging.getLogger(__name__)

CASE_IDS = ("AccuracySweep", "LengthPriority", "Capitalization", "Interface", "WordLengthAnalysis", "Ablations")
CASE_ALIASES = {
    "accuracy-sweep": "AccuracySweep", "length-priority": "LengthPriority", "capitalization": "Capitalization",
    "interface": "Interface", "word-length": "WordLengthAnalysis", "ablations": "Ablations",
}


@dataclass(frozen=True)
class CaseSpec:
    case: str
    replicates: int = 4
    seed: int = 0
    train: TrainConfig = field(default_factory=TrainConfig)
    finetune_episodes: int = 5000
    eval_words: int = 200
    eval_params: CognitiveParams = field(default_factory=CognitiveParams)
    levels: tuple = (0.2, 0.4, 0.6, 0.8, 1.0)
    base_env: EnvConfig = field(default_factory=EnvConfig)
    cap_beta: float = 0.5  # stricter error tolerance for the capitalization study
    jobs: int = 1

    def __post_init__(self):
        case = CASE_ALIASES.get(self.case, self.case)
        if case not in CASE_IDS:
            raise ValueError(f"unknown case {self.case!r}; expected one of {CASE_IDS}")
        object.__setattr__(self, "case", case)
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if any(not 0.0 <= x <= 1.0 for x in self.levels):
            raise ValueError("accuracy levels must lie in [0, 1]")
        object.__setattr__(self, "levels", tuple(float(x) for x in self.levels))

    def to_dict(self) -> dict:
        return {"case": self.case, "replicates": self.replicates, "seed": self.seed,
                "train": self.train.to_dict(), "finetune_episodes": self.finetune_episodes,
                "eval_words": self.eval_words, "eval_params": asdict(self.eval_params),
                "levels": list(self.levels), "base_env": self.base_env.to_dict(), "cap_beta": self.cap_beta,
                "jobs": self.jobs}

    @classmethod
    def from_dict(cls, d: dict) -> "CaseSpec":
        d = dict(d)
        if "train" in d:
            d["train"] = TrainConfig.from_dict(d["train"])
        if "eval_params" in d:
            d["eval_params"] = CognitiveParams(**d["eval_params"])
        if "base_env" in d:
            d["base_env"] = EnvConfig.from_dict(d["base_env"])
        if "levels" in d:
            d["levels"] = tuple(d["levels"])
        return cls(**d)


@dataclass
class CaseResult:
    case: str
    rows: list = field(default_factory=list)  # dicts with condition, replicate, metrics...

    def conditions(self) -> list[str]:
        seen = []
        for r in self.rows:
            if r["condition"] not in seen:
                seen.append(r["condition"])
        return seen

    def with_means(self) -> list[dict]:
        out = []
        for cond in self.conditions():
            reps = [r for r in self.rows if r["condition"] == cond and r["replicate"] != "mean"]
            out.extend(reps)
            mean = {"condition": cond, "replicate": "mean"}
            for k in reps[0]:
                if k in mean:
                    continue
                vals = [r.get(k) for r in reps]
                if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in vals):
                    mean[k] = float(np.mean(vals))
                else:
                    finite = [v for v in vals if isinstance(v, (int, float)) and not isinstance(v, bool)]
                    mean[k] = float(np.mean(finite)) if finite else None
            out.append(mean)
        return out

    def mean(self, condition: str, metric: str) -> float:
        for r in self.with_means():
            if r["condition"] == condition and r["replicate"] == "mean":
                return r[metric]
        raise KeyError(condition)

    def columns(self) -> list[str]:
        cols = []
        for r in self.rows:
            for k in r:
                if k not in cols:
                    cols.append(k)
        return cols

    def write(self, out_dir: str | Path) -> tuple[Path, Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        rows = self.with_means()
        cols = self.columns()
        csv_path = out_dir / f"{self.case}.csv"
        with open(csv_path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=cols)
            w.writeheader()
            for r in rows:
                w.writerow({k: r.get(k) for k in cols})
        json_path = out_dir / f"{self.case}.json"
        json_path.write_text(json.dumps({"case": self.case, "columns": cols, "rows": rows}, indent=2) + "\n")
        return csv_path, json_path


# ---------------------------------------------------------------- plumbing

def make_factory(env_cfg: EnvConfig, lex: Lexicon | None = None) -> Callable[[], TypingEnv]:
    lex = lex or default_lexicon()
    engine = engine_for(lex, env_cfg.suggestion)
    return lambda: TypingEnv(env_cfg, lex, engine)


def _pmap(fn, items: list, jobs: int) -> list:
    """Order-preserving map, in worker processes when ``jobs > 1``."""
    if jobs <= 1 or len(items) <= 1:
        return [fn(*it) for it in items]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        futs = [ex.submit(fn, *it) for it in items]
        return [f.result() for f in futs]


def eval_word_list(ws: WordSet, n: int, seed: int) -> list[str]:
    rng = np.random.default_rng(seed)
    return [ws.words[i] for i in rng.integers(len(ws.words), size=n)]


_BASE_CACHE: dict = {}


def _train_one(env_cfg: EnvConfig, ws: WordSet, tcfg: TrainConfig) -> Checkpoint:
    return train(make_factory(env_cfg), ws, cfg=tcfg)


def train_agents(spec: CaseSpec, env_cfg: EnvConfig | None = None, ws: WordSet | None = None) -> list[Checkpoint]:
    """One agent per replicate (seeds spec.seed + r), memoised within the process."""
    env_cfg = env_cfg or spec.base_env
    ws = ws or default_training_set()
    out = [None] * spec.replicates
    todo = []
    for r in range(spec.replicates):
        tcfg = replace(spec.train, seed=spec.seed + r)
        key = (config_fingerprint(env_cfg, env_cfg.obs_dim, tcfg.hidden), json.dumps(tcfg.to_dict(), sort_keys=True),
               ws.label, len(ws))
        if key in _BASE_CACHE:
            out[r] = _BASE_CACHE[key]
        else:
            todo.append((r, key, tcfg))
    trained = _pmap(_train_one, [(env_cfg, ws, t) for _, _, t in todo], spec.jobs)
    for (r, key, _), ck in zip(todo, trained):
        _BASE_CACHE[key] = out[r] = ck
    return out


def _finetune_one(base: Checkpoint, env_cfg: EnvConfig, ws: WordSet, tcfg: TrainConfig) -> Checkpoint:
    return fine_tune(base, make_factory(env_cfg), ws, cfg=tcfg)


def finetune_agents(bases: Sequence[Checkpoint], env_cfg: EnvConfig, spec: CaseSpec,
                    ws: WordSet | None = None) -> list[Checkpoint]:
    ws = ws or default_training_set()
    items = [(b, env_cfg, ws, replace(spec.train, episodes=spec.finetune_episodes, seed=spec.seed + r))
             for r, b in enumerate(bases)]
    return _pmap(_finetune_one, items, spec.jobs)


def evaluate(ck: Checkpoint, env_cfg: EnvConfig, words: Sequence[str], params: CognitiveParams,
             seed: int = 0) -> list[TypingRecord]:
    return simulate(ck, make_factory(env_cfg), list(words), params, seed=seed)


def metric_row(records: Sequence[TypingRecord]) -> dict:
    d = report(records).as_dict()
    d["gaze_shifts_per_word"] = d.pop("gaze_shifts")
    return d


def _eval_rows(condition: str, ckpts, env_cfg, words, spec: CaseSpec, extra: Callable | None = None) -> list[dict]:
    rows = []
    for r, ck in enumerate(ckpts):
        recs = evaluate(ck, env_cfg, words, spec.eval_params, seed=spec.seed + 10_000 + r)
        row = {"condition": condition, "replicate": r, **metric_row(recs)}
        if extra is not None:
            row.update(extra(recs))
        rows.append(row)
    return rows


# ---------------------------------------------------------------- cases

def run_accuracy_sweep(bases: Sequence[Checkpoint], levels: Sequence[float], spec: CaseSpec) -> CaseResult:
    ws = default_training_set()
    words = eval_word_list(ws, spec.eval_words, spec.seed + 1)
    res = CaseResult("AccuracySweep")
    for level in levels:
        sc = replace(spec.base_env.suggestion, mode="AccuracyControlled", target_accuracy=float(level))
        env_cfg = replace(spec.base_env, suggestion=sc)
        tuned = finetune_agents(bases, env_cfg, spec, ws)
        for row in _eval_rows(f"acc={level:.2f}", tuned, env_cfg, words, spec):
            row["level"] = float(level)
            res.rows.append(row)
    return res


def matched_length_configs(base: SuggestionConfig, ws: WordSet, lex: Lexicon | None = None,
                           seed: int = 0) -> dict[str, SuggestionConfig]:
    """Length-only rankings thinned to the same overall accuracy (the lower native one)."""
    lex = lex or default_lexicon()
    native = {}
    for mode in ("LengthAscending", "LengthDescending"):
        native[mode] = measure_accuracy(ws, lex, replace(base, mode=mode, coverage_keep=1.0), seed=seed).accuracy
    target = min(native.values())
    return {m: replace(base, mode=m, coverage_keep=min(1.0, target / a) if a > 0 else 1.0)
            for m, a in native.items()}


def run_length_priority(bases: Sequence[Checkpoint], spec: CaseSpec) -> CaseResult:
    ws = default_training_set()
    words = eval_word_list(ws, spec.eval_words, spec.seed + 1)
    cfgs = matched_length_configs(spec.base_env.suggestion, ws, seed=spec.seed)
    res = CaseResult("LengthPriority")
    for label, mode in (("ShorterPriority", "LengthAscending"), ("LongerPriority", "LengthDescending")):
        env_cfg = replace(spec.base_env, suggestion=cfgs[mode])
        tuned = finetune_agents(bases, env_cfg, spec, ws)
        acc = measure_accuracy(ws, default_lexicon(), cfgs[mode], seed=spec.seed).accuracy
        for row in _eval_rows(label, tuned, env_cfg, words, spec):
            row["engine_accuracy"] = acc
            res.rows.append(row)
    return res


def capital_stats(records: Sequence[TypingRecord]) -> dict:
    caps = [r for r in records if r.target[:1].isupper()]
    if not caps:
        return {"picked_cap": None, "failed_cap": None, "skip_rate": None, "n_cap": 0}
    skipped = sum(1 for r in caps if any(e.kind == "Keystroke" and e.payload.get("skip") for e in r.events))
    picked = sum(1 for r in caps if r.fixated(r.sugg_region) and r.picks > 0)
    failed = sum(1 for r in caps if r.fixated(r.sugg_region) and r.picks == 0)
    n = len(caps)
    return {"picked_cap": picked / n, "failed_cap": failed / n, "skip_rate": skipped / n, "n_cap": n}


def capitalization_env(spec: CaseSpec, mode: str = "Baseline") -> EnvConfig:
    sc = replace(spec.base_env.suggestion, mode=mode, autocorrect_enabled=False)
    rw = replace(spec.base_env.reward, beta=spec.cap_beta)
    return replace(spec.base_env, variant="Capitalization", suggestion=sc, reward=rw)


def run_capitalization(spec: CaseSpec) -> CaseResult:
    ws = default_caps_set()
    words = eval_word_list(ws, spec.eval_words, spec.seed + 1)
    base_env = capitalization_env(spec, "Baseline")
    bases = train_agents(spec, base_env, ws)
    res = CaseResult("Capitalization")
    for label, mode in (("High", "CapHigh"), ("Baseline", "Baseline"), ("Low", "CapLow")):
        env_cfg = capitalization_env(spec, mode)
        agents = bases if mode == "Baseline" else finetune_agents(bases, env_cfg, spec, ws)
        res.rows.extend(_eval_rows(label, agents, env_cfg, words, spec, extra=capital_stats))
    return res


def run_interface(bases: Sequence[Checkpoint], spec: CaseSpec) -> CaseResult:
    ws = default_training_set()
    words = eval_word_list(ws, spec.eval_words, spec.seed + 1)
    res = CaseResult("Interface")
    res.rows.extend(_eval_rows("Original", bases, spec.base_env, words, spec))
    for label, variant in (("InputSugg", "InputSugg"), ("InputSuggShortcut", "InputSuggShortcut")):
        env_cfg = replace(spec.base_env, variant=variant)
        tuned = finetune_agents(bases, env_cfg, spec, ws)
        res.rows.extend(_eval_rows(label, tuned, env_cfg, words, spec))
    return res


def run_word_length_analysis(ckpts: Sequence[Checkpoint], ws: WordSet | None, spec: CaseSpec) -> CaseResult:
    """Picked / Failed / engine accuracy per target length."""
    lex = default_lexicon()
    ws = ws or length_span_set(lex)
    acc = measure_accuracy(ws, lex, spec.base_env.suggestion, seed=spec.seed)
    covered = {w: f is not None for w, f in acc.per_word}
    by_len: dict[int, list] = {}
    for r, ck in enumerate(ckpts):
        recs = evaluate(ck, spec.base_env, ws.words, spec.eval_params, seed=spec.seed + 10_000 + r)
        for rec in recs:
            by_len.setdefault(len(rec.target), []).append((r, rec))
    res = CaseResult("WordLengthAnalysis")
    for n in sorted(by_len):
        for r in range(len(ckpts)):
            recs = [rec for rr, rec in by_len[n] if rr == r]
            res.rows.append({
                "condition": f"len={n}", "replicate": r, "length": n, "n_words": len(recs),
                "picked": float(np.mean([x.fixated(x.sugg_region) and x.picks > 0 for x in recs])),
                "failed": float(np.mean([x.fixated(x.sugg_region) and x.picks == 0 for x in recs])),
                "engine_accuracy": float(np.mean([covered[x.target] for x in recs])),
            })
    return res


def run_ablations(spec: CaseSpec) -> CaseResult:
    ws = default_training_set()
    words = eval_word_list(ws, spec.eval_words, spec.seed + 1)
    res = CaseResult("Ablations")
    for label, abl in (("WSTypist", ()), ("WS-NoPs", ("NoPs",)), ("WS-NoPk", ("NoPk",)), ("WS-NoCom", ("NoCom",))):
        env_cfg = replace(spec.base_env, ablations=frozenset(abl))
        agents = train_agents(spec, env_cfg, ws)
        res.rows.extend(_eval_rows(label, agents, env_cfg, words, spec))
    return res


def run_case(spec: CaseSpec, bases: Sequence[Checkpoint] | None = None) -> CaseResult:
    if spec.case == "Capitalization":
        return run_capitalization(spec)
    if spec.case == "Ablations":
        return run_ablations(spec)
    bases = list(bases) if bases is not None else train_agents(spec)
    if spec.case == "AccuracySweep":
        return run_accuracy_sweep(bases, spec.levels, spec)
    if spec.case == "LengthPriority":
        return run_length_priority(bases, spec)
    if spec.case == "Interface":
        return run_interface(bases, spec)
    return run_word_length_analysis(bases, None, spec)
