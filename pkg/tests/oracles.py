"""Independent reference implementations used by the tests.

Written from the metric and formula definitions only, deliberately naive,
and sharing no code with the package.
"""
import math
from functools import lru_cache

import numpy as np

from wstypist.metrics import Event, TypingRecord


def lev_oracle(a: str, b: str) -> int:
    """Textbook recursive definition, memoised."""
    @lru_cache(maxsize=None)
    def d(i, j):
        if i == 0:
            return j
        if j == 0:
            return i
        return min(d(i - 1, j) + 1, d(i, j - 1) + 1, d(i - 1, j - 1) + (a[i - 1] != b[j - 1]))
    return d(len(a), len(b))


def cer_oracle(a: str, b: str) -> float:
    n = max(len(a), len(b))
    return lev_oracle(a, b) / n if n else 0.0


def reward_oracle(final, target, t, picked, p_s, beta, gamma):
    u = cer_oracle(final, target)
    bonus = p_s if (picked and final == target) else 0.0
    return (1 - u ** beta) - gamma * t / len(target) + bonus


# -- metrics, straight-line

def metrics_oracle(records, sugg="SuggList"):
    chars = 0
    keys = 0
    backs = 0
    total_t = 0.0
    dwell = {"Keyboard": 0.0, "SuggList": 0.0, "InputField": 0.0}
    picked = failed = 0
    starts = []
    uers = []
    for r in records:
        chars += len(r.final)
        total_t += r.duration
        uers.append(cer_oracle(r.final, r.target))
        region, since = None, 0.0
        seen, n_picks, typed, first = False, 0, 0, None
        for e in r.events:
            if e.kind == "GazeEnter":
                if region is not None:
                    dwell[region] += e.t - since
                region, since = e.payload["region"], e.t
                if region == sugg and not seen:
                    seen, first = True, typed
            elif e.kind == "Keystroke":
                keys += 1
                typed += 1
            elif e.kind == "Backspace":
                backs += 1
            elif e.kind == "Pick":
                n_picks += 1
        if region is not None:
            dwell[region] += r.duration - since
        if seen:
            picked += n_picks > 0
            failed += n_picks == 0
            starts.append(first / len(r.target))
    n = len(records)
    tot = sum(dwell.values())
    return {
        "picked": picked / n, "failed": failed / n,
        "start": sum(starts) / len(starts) if starts else None,
        "gaze_sugg": dwell[sugg] / tot if tot else 0.0,
        "gaze_kbd": dwell["Keyboard"] / tot if tot else 0.0,
        "bpc": backs / chars, "uer": sum(uers) / n,
        "wpm": chars / 5 / (total_t / 60), "ks": 1 - (keys + backs) / chars,
    }


def random_record(rng: np.random.Generator, alphabet="abcde") -> TypingRecord:
    target = "".join(rng.choice(list(alphabet), size=int(rng.integers(1, 9))))
    final = "".join(rng.choice(list(alphabet), size=int(rng.integers(1, 10))))
    t = 0.0
    events = [Event("Start", 0.0, {"target": target, "sugg_region": "SuggList"}),
              Event("GazeEnter", 0.0, {"region": str(rng.choice(["Keyboard", "SuggList", "InputField"]))})]
    for _ in range(int(rng.integers(0, 15))):
        t += float(rng.exponential(0.3))
        kind = str(rng.choice(["GazeEnter", "Keystroke", "Keystroke", "Backspace", "Pick"]))
        payload = {"region": str(rng.choice(["Keyboard", "SuggList", "InputField"]))} if kind == "GazeEnter" else {}
        events.append(Event(kind, t, payload))
    t += float(rng.exponential(0.3)) + 1e-3
    events.append(Event("End", t, {"final": final}))
    return TypingRecord(target, final, events, t)


def close(a, b, tol=1e-9):
    if a is None or b is None:
        return a is b
    return math.isclose(a, b, rel_tol=tol, abs_tol=tol)
