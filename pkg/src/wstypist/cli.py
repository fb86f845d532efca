"""Command-line entry point: ``wstypist <command> [flags]``.

Every command writes into a fresh run directory ``<out>/<run-name>_<timestamp>``
holding the resolved config snapshot next to its outputs.
Exit codes: 0 success, 1 runtime failure, 2 usage or config error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import time
from dataclasses import asdict, replace
from pathlib import Path

from . import __version__

log = logging.getLogger("wstypist")

VARIANT_FLAGS = {
    "full": "Full", "no-suggestions": "NoSuggestions", "no-autocorrect": "NoAutocorrect",
    "capitalization": "Capitalization", "input-sugg": "InputSugg", "input-sugg-shortcut": "InputSuggShortcut",
}
ABLATION_FLAGS = {"no-ps": "NoPs", "no-pk": "NoPk", "no-com": "NoCom"}
MODE_FLAGS = {
    "baseline": "Baseline", "length-ascending": "LengthAscending", "length-descending": "LengthDescending",
    "cap-high": "CapHigh", "cap-low": "CapLow", "accuracy-controlled": "AccuracyControlled",
}


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- config

def resolve_seed(args, config: dict) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("WSTYPIST_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"WSTYPIST_SEED must be an integer, got {env!r}") from None
    return int(config.get("seed", 0))


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.exists():
        raise UsageError(f"config file not found: {p}")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as e:
        raise UsageError(f"config file {p} is not valid JSON: {e}") from None


def build_env_config(args, config: dict):
    from .env import EnvConfig, RewardConfig
    from .suggest import SuggestionConfig

    env_d = dict(config.get("env", {}))
    sugg_d = dict(env_d.pop("suggestion", config.get("suggestion", {})))
    rew_d = dict(env_d.pop("reward", config.get("reward", {})))
    if getattr(args, "variant", None):
        env_d["variant"] = VARIANT_FLAGS[args.variant]
    if getattr(args, "ablation", None):
        env_d["ablations"] = sorted({ABLATION_FLAGS[a] for a in args.ablation})
    if getattr(args, "mode", None):
        sugg_d["mode"] = MODE_FLAGS[args.mode]
    if getattr(args, "target_accuracy", None) is not None:
        sugg_d["mode"] = "AccuracyControlled"
        sugg_d["target_accuracy"] = args.target_accuracy
    try:
        sc = SuggestionConfig.from_dict(sugg_d)
        rc = RewardConfig(**rew_d)
        return EnvConfig.from_dict({**env_d, "suggestion": sc, "reward": rc})
    except (TypeError, ValueError) as e:
        raise UsageError(f"invalid environment config: {e}") from None


def build_train_config(args, config: dict, seed: int):
    from .policy import TrainConfig

    d = dict(config.get("train", {}))
    if getattr(args, "episodes", None) is not None:
        d["episodes"] = args.episodes
    d["seed"] = seed
    try:
        return TrainConfig.from_dict(d)
    except (TypeError, ValueError) as e:
        raise UsageError(f"invalid train config: {e}") from None


def make_run_dir(args, command: str, snapshot: dict) -> Path:
    name = args.run_name or command
    stamp = time.strftime("%Y%m%d-%H%M%S")
    base = Path(args.out) / f"{name}_{stamp}"
    run_dir, k = base, 1
    while run_dir.exists():
        k += 1
        run_dir = base.with_name(f"{base.name}-{k}")
    run_dir.mkdir(parents=True)
    (run_dir / "config.json").write_text(json.dumps(snapshot, indent=2, sort_keys=True, default=str) + "\n")
    return run_dir


def _require_file(path: str, what: str) -> Path:
    p = Path(path)
    if not p.exists():
        raise UsageError(f"{what} not found: {p}")
    return p


def _load_ckpt(path: str):
    from .policy import load_checkpoint

    p = _require_file(path, "checkpoint")
    try:
        return load_checkpoint(p)
    except ValueError as e:
        raise UsageError(str(e)) from None


def _lexicon(args):
    from .lexicon import LexiconError, default_lexicon, load_frequency_list

    if getattr(args, "freq", None):
        p = _require_file(args.freq, "frequency list")
        try:
            return load_frequency_list(p)
        except LexiconError as e:
            raise UsageError(str(e)) from None
    return default_lexicon()


def _parse_params(text: str | None):
    from .env import CognitiveParams

    if text is None:
        return CognitiveParams()
    try:
        vals = [float(x) for x in text.split(",")]
        if len(vals) != 4:
            raise ValueError(f"got {len(vals)} values")
        return CognitiveParams(*vals)
    except (TypeError, ValueError) as e:
        raise UsageError(f"--params expects p_m,p_f,p_k,p_s: {e}") from None


# ---------------------------------------------------------------- commands

def cmd_lexicon(args, config) -> int:
    from .lexicon import capitalized_set, save_wordset, surrogate_training_set

    lex = _lexicon(args)
    if args.action == "stats":
        lengths = [len(w) for w in lex.words]
        print(f"entries: {len(lex)}")
        print(f"max_length: {lex.max_length}")
        print(f"mean_length: {sum(lengths) / len(lengths):.3f}")
        print(f"top: {', '.join(lex.words[:10])}")
        return 0
    run_dir = make_run_dir(args, "lexicon", {"command": "lexicon build", "freq": args.freq})
    train_ws = surrogate_training_set(lex)
    caps_ws = capitalized_set(train_ws)
    save_wordset(train_ws, run_dir / "wordset_train.txt")
    save_wordset(caps_ws, run_dir / "wordset_caps.txt")
    h = hashlib.sha256()
    for name in ("wordset_train.txt", "wordset_caps.txt"):
        h.update((run_dir / name).read_bytes())
    print(f"entries: {len(lex)}")
    print(f"training set: {len(train_ws)} words; capitalized set: {len(caps_ws)} words")
    print(f"sha256: {h.hexdigest()}")
    print(f"written to {run_dir}")
    return 0


def cmd_suggest_bench(args, config) -> int:
    from .lexicon import load_wordset, default_training_set
    from .suggest import measure_accuracy

    env_cfg = build_env_config(args, config)
    lex = _lexicon(args)
    ws = load_wordset(_require_file(args.words_file, "word set")) if args.words_file else default_training_set()
    seed = resolve_seed(args, config)
    run_dir = make_run_dir(args, "suggest-bench", {"command": "suggest-bench", "seed": seed,
                                                    "suggestion": env_cfg.suggestion.to_dict()})
    rep = measure_accuracy(ws, lex, env_cfg.suggestion, seed=seed)
    rep.write(run_dir / "accuracy.json", run_dir / "accuracy.csv")
    print(rep.to_json())
    return 0


def cmd_train(args, config) -> int:
    from .cases import make_factory
    from .lexicon import default_training_set
    from .policy import save_checkpoint, train

    seed = resolve_seed(args, config)
    env_cfg = build_env_config(args, config)
    tcfg = build_train_config(args, config, seed)
    run_dir = make_run_dir(args, "train", {"command": "train", "seed": seed, "env": env_cfg.to_dict(),
                                           "train": tcfg.to_dict()})
    if tcfg.checkpoint_every:
        tcfg = replace(tcfg, checkpoint_dir=str(run_dir / "checkpoints"))
    ck = train(make_factory(env_cfg), default_training_set(), cfg=tcfg, curve_path=run_dir / "curve.csv")
    save_checkpoint(ck, run_dir / "checkpoint.json")
    print(f"trained {ck.episode} episodes; final mean reward {ck.curve[-1][1]:.4f}")
    print(f"written to {run_dir}")
    return 0


def cmd_finetune(args, config) -> int:
    from .cases import make_factory
    from .lexicon import default_caps_set, default_training_set
    from .policy import fine_tune, save_checkpoint

    base = _load_ckpt(args.checkpoint)
    seed = resolve_seed(args, config)
    env_cfg = build_env_config(args, config)
    tcfg = build_train_config(args, config, seed)
    run_dir = make_run_dir(args, "finetune", {"command": "finetune", "seed": seed, "base": args.checkpoint,
                                              "env": env_cfg.to_dict(), "train": tcfg.to_dict()})
    ws = default_caps_set() if env_cfg.capitalization else default_training_set()
    try:
        ck = fine_tune(base, make_factory(env_cfg), ws, cfg=tcfg, curve_path=run_dir / "curve.csv")
    except ValueError as e:
        raise UsageError(str(e)) from None
    save_checkpoint(ck, run_dir / "checkpoint.json")
    print(f"fine-tuned to episode {ck.episode}")
    print(f"written to {run_dir}")
    return 0


def cmd_eval(args, config) -> int:
    from .cases import eval_word_list, evaluate
    from .env import EnvConfig
    from .lexicon import default_training_set
    from .metrics import compare, load_reference_tables, report, write_comparison_csv, write_jsonl

    ck = _load_ckpt(args.checkpoint)
    seed = resolve_seed(args, config)
    overridden = args.variant or args.ablation or args.mode or args.target_accuracy is not None or args.config
    env_cfg = build_env_config(args, config) if overridden else EnvConfig.from_dict(ck.env_config)
    params = _parse_params(args.params)
    tables = load_reference_tables()
    if args.group is not None and args.group not in tables:
        raise UsageError(f"unknown group {args.group!r}; available: {', '.join(sorted(tables))}")
    run_dir = make_run_dir(args, "eval", {"command": "eval", "seed": seed, "checkpoint": args.checkpoint,
                                          "env": env_cfg.to_dict(), "params": asdict(params),
                                          "words": args.words, "group": args.group})
    words = eval_word_list(default_training_set(), args.words, seed)
    recs = evaluate(ck, env_cfg, words, params, seed=seed)
    rep = report(recs)
    write_jsonl(recs, run_dir / "events.jsonl")
    (run_dir / "metrics.json").write_text(rep.to_json() + "\n")
    print(rep.to_json())
    if args.group is not None:
        cmp = compare(rep, tables[args.group])
        write_comparison_csv(cmp, args.group, run_dir / "comparison.csv")
        for m, row in cmp.items():
            z = "n/a" if row["z"] is None else f"{row['z']:+.2f}"
            print(f"{m:>10}  model={row['model']}  ref={row['mean']}±{row['sd']}  z={z}")
    return 0


def cmd_fit(args, config) -> int:
    from .fit import FitConfig, ParamBounds, fit_group
    from .metrics import load_reference_tables

    ck = _load_ckpt(args.checkpoint)
    seed = resolve_seed(args, config)
    tables = load_reference_tables()
    if args.group not in tables:
        raise UsageError(f"unknown group {args.group!r}; available: {', '.join(sorted(tables))}")
    d = {**config.get("fit", {}), "seed": seed}
    if args.budget is not None:
        d["budget"] = args.budget
    if args.words is not None:
        d["n_words"] = args.words
    try:
        if "bounds" in d:
            d["bounds"] = ParamBounds({k: tuple(v) for k, v in d["bounds"].items()})
        fcfg = FitConfig(**d)
    except (TypeError, ValueError, KeyError) as e:
        raise UsageError(f"invalid fit config: {e}") from None
    if fcfg.budget < 20 or fcfg.n_words < 100:
        raise UsageError("fit needs --budget >= 20 and --words >= 100")
    run_dir = make_run_dir(args, "fit", {"command": "fit", "seed": seed, "group": args.group,
                                         "checkpoint": args.checkpoint, "fit": fcfg.to_dict()})
    res = fit_group(args.group, ck, cfg=fcfg, out_path=run_dir / "fit.json")
    print(json.dumps({"group": args.group, "best_params": res.to_dict()["best_params"],
                      "best_objective": res.best_objective}, indent=2))
    return 0


def cmd_case(args, config) -> int:
    from .cases import CASE_ALIASES, CaseSpec, run_case

    if args.name not in CASE_ALIASES:
        raise UsageError(f"unknown case {args.name!r}; available: {', '.join(CASE_ALIASES)}")
    seed = resolve_seed(args, config)
    d = dict(config.get("case", {}))
    d.update(case=args.name, seed=seed, jobs=args.jobs)
    if args.replicates is not None:
        d["replicates"] = args.replicates
    if args.levels is not None:
        try:
            d["levels"] = [float(x) for x in args.levels.split(",")]
        except ValueError:
            raise UsageError(f"--levels expects comma-separated numbers, got {args.levels!r}") from None
    if args.episodes is not None:
        d["train"] = {**d.get("train", {}), "episodes": args.episodes}
        d["finetune_episodes"] = args.episodes
    if args.words is not None:
        d["eval_words"] = args.words
    try:
        spec = CaseSpec.from_dict(d)
    except (TypeError, ValueError) as e:
        raise UsageError(f"invalid case spec: {e}") from None
    bases = [_load_ckpt(p) for p in args.checkpoint] if args.checkpoint else None
    run_dir = make_run_dir(args, f"case-{args.name}", {"command": "case", "spec": spec.to_dict(),
                                                       "checkpoints": args.checkpoint})
    res = run_case(spec, bases)
    csv_path, _ = res.write(run_dir)
    print(csv_path.read_text())
    return 0


# ---------------------------------------------------------------- parser

def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON run config; flags override its values")
    p.add_argument("--seed", type=int, help="global seed (falls back to $WSTYPIST_SEED, then the config)")
    p.add_argument("--out", default="runs", help="parent directory for run outputs (default: runs)")
    p.add_argument("--run-name", help="run directory prefix (default: the command name)")
    p.add_argument("--jobs", type=int, default=1, help="max concurrent worker processes (default: 1)")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")


def _env_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--variant", choices=sorted(VARIANT_FLAGS), help="environment variant")
    p.add_argument("--ablation", choices=sorted(ABLATION_FLAGS), action="append",
                   help="ablation to apply (repeatable)")
    p.add_argument("--mode", choices=sorted(MODE_FLAGS), help="suggestion engine mode")
    p.add_argument("--target-accuracy", type=float, help="use the accuracy-controlled engine at this level")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wstypist", description="Word-suggestion typing simulator.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("lexicon", help="build word sets from a frequency list, or print lexicon stats")
    p.add_argument("action", choices=["build", "stats"])
    p.add_argument("--freq", help="frequency list file (default: bundled list)")
    _common(p)

    p = sub.add_parser("suggest-bench", help="measure suggestion accuracy by error-free typing")
    p.add_argument("--freq", help="frequency list file (default: bundled list)")
    p.add_argument("--words-file", help="word set file (default: bundled training set)")
    _env_flags(p)
    _common(p)

    p = sub.add_parser("train", help="train an agent from scratch")
    p.add_argument("--episodes", type=int, help="training episodes (default 5000)")
    _env_flags(p)
    _common(p)

    p = sub.add_parser("finetune", help="fine-tune a checkpoint in a new environment at lr/10")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--episodes", type=int, help="episode cap (early stopping may end sooner)")
    _env_flags(p)
    _common(p)

    p = sub.add_parser("eval", help="greedy evaluation, optionally compared with a reference group")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--words", type=int, default=100, help="number of words (default 100)")
    p.add_argument("--group", help="reference group, e.g. Avg, 2-T, 1-F, H-WPM, L-WPM, WS, WS+AC")
    p.add_argument("--params", help="cognitive parameters p_m,p_f,p_k,p_s")
    _env_flags(p)
    _common(p)

    p = sub.add_parser("fit", help="fit cognitive parameters to a reference group")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--group", required=True)
    p.add_argument("--budget", type=int, help="objective evaluations (default 40, >= 20)")
    p.add_argument("--words", type=int, help="words per objective evaluation (default 100)")
    _common(p)

    p = sub.add_parser("case", help="run a design case study")
    p.add_argument("name", help="accuracy-sweep, length-priority, capitalization, interface, word-length, ablations")
    p.add_argument("--checkpoint", action="append", help="base checkpoint(s); trained fresh if omitted")
    p.add_argument("--levels", help="accuracy levels for accuracy-sweep, e.g. 0.2,0.4,0.6,0.8,1.0")
    p.add_argument("--replicates", type=int, help="agents per condition (default 4)")
    p.add_argument("--episodes", type=int, help="training / fine-tuning episodes")
    p.add_argument("--words", type=int, help="evaluation words per replicate")
    _common(p)
    return ap


COMMANDS = {"lexicon": cmd_lexicon, "suggest-bench": cmd_suggest_bench, "train": cmd_train,
            "finetune": cmd_finetune, "eval": cmd_eval, "fit": cmd_fit, "case": cmd_case}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = load_config(args.config)
        return COMMANDS[args.command](args, config)
    except UsageError as e:
        print(f"wstypist {args.command}: error: {e}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        return 1
    except Exception as e:  # runtime failure
        log.debug("failure", exc_info=True)
        print(f"wstypist {args.command}: failed: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
