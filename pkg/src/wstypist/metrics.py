"""Benchmark metrics computed from per-word typing event logs.

Ratio metrics aggregate by pooled sums over words; ``uer`` and ``start`` are
per-word means.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .suggest import levenshtein

REGIONS = ("Keyboard", "SuggList", "InputField")
EVENT_KINDS = ("Start", "GazeEnter", "Keystroke", "Backspace", "Pick", "Commit", "AutocorrectFired", "End")
METRICS = ("picked", "failed", "start", "gaze_sugg", "gaze_kbd", "bpc", "uer", "wpm", "ks")
# valid range of each metric, used for binning target distributions
METRIC_RANGES = {
    "picked": (0.0, 1.0), "failed": (0.0, 1.0), "start": (0.0, 1.0), "gaze_sugg": (0.0, 1.0),
    "gaze_kbd": (0.0, 1.0), "bpc": (0.0, 5.0), "uer": (0.0, 1.0), "wpm": (0.0, 200.0), "ks": (-2.0, 1.0),
}


class Event(NamedTuple):
    kind: str
    t: float
    payload: dict = {}


@dataclass
class TypingRecord:
    target: str
    final: str
    events: list[Event]
    duration: float
    sugg_region: str = "SuggList"

    def __post_init__(self):
        ts = [e.t for e in self.events]
        if any(b < a for a, b in zip(ts, ts[1:])):
            raise ValueError("event timestamps must be nondecreasing")

    def count(self, kind: str) -> int:
        return sum(1 for e in self.events if e.kind == kind)

    @property
    def keystrokes(self) -> int:
        """Character keystrokes, commit excluded."""
        return self.count("Keystroke")

    @property
    def backspaces(self) -> int:
        return self.count("Backspace")

    @property
    def picks(self) -> int:
        return self.count("Pick")

    def dwell(self) -> dict[str, float]:
        """Time attributed to each region, from each GazeEnter to the next one or the end."""
        out = dict.fromkeys(REGIONS, 0.0)
        gazes = [e for e in self.events if e.kind == "GazeEnter"]
        for cur, nxt in zip(gazes, gazes[1:] + [None]):
            end = self.duration if nxt is None else nxt.t
            out[cur.payload["region"]] += max(0.0, end - cur.t)
        return out

    def fixated(self, region: str) -> bool:
        return any(e.kind == "GazeEnter" and e.payload["region"] == region for e in self.events)

    def gaze_shifts(self) -> int:
        return max(0, sum(1 for e in self.events if e.kind == "GazeEnter") - 1)

    def keystrokes_before_first_fixation(self, region: str) -> int | None:
        n = 0
        for e in self.events:
            if e.kind == "GazeEnter" and e.payload["region"] == region:
                return n
            if e.kind == "Keystroke":
                n += 1
        return None

    def to_jsonl_lines(self) -> list[str]:
        return [json.dumps({"kind": e.kind, "timestamp_s": e.t, "payload": e.payload}) for e in self.events]


def write_jsonl(records: Iterable[TypingRecord], path: str | Path) -> None:
    with open(path, "w") as fh:
        for rec in records:
            for line in rec.to_jsonl_lines():
                fh.write(line + "\n")


def read_jsonl(path: str | Path) -> list[TypingRecord]:
    """Rebuild records from a log; each word runs from a ``Start`` to an ``End`` event."""
    records, events, head = [], [], None
    with open(path) as fh:
        for line in fh:
            if not line.strip():
                continue
            d = json.loads(line)
            ev = Event(d["kind"], float(d["timestamp_s"]), d.get("payload", {}))
            if ev.kind == "Start":
                head, events = ev, [ev]
            else:
                events.append(ev)
            if ev.kind == "End":
                records.append(TypingRecord(target=head.payload["target"], final=ev.payload["final"], events=events,
                                            duration=ev.t, sugg_region=head.payload.get("sugg_region", "SuggList")))
                head, events = None, []
    return records


def _final_chars(records) -> int:
    return sum(len(r.final) for r in records)


def wpm(records: Sequence[TypingRecord]) -> float:
    total = sum(r.duration for r in records)
    if total <= 0:
        raise ValueError("total typing time must be > 0")
    return (_final_chars(records) / 5.0) / (total / 60.0)


def gaze_ratio(records: Sequence[TypingRecord], region: str) -> float:
    dwell = dict.fromkeys(REGIONS, 0.0)
    for r in records:
        for k, v in r.dwell().items():
            dwell[k] += v
    total = sum(dwell.values())
    return dwell[region] / total if total > 0 else 0.0


def bpc(records: Sequence[TypingRecord]) -> float:
    chars = _final_chars(records)
    if chars == 0:
        raise ValueError("no final characters")
    return sum(r.backspaces for r in records) / chars


def uer_word(final: str, target: str) -> float:
    longest = max(len(final), len(target))
    return levenshtein(final, target) / longest if longest else 0.0


def uer(records: Sequence[TypingRecord]) -> float:
    if not records:
        return 0.0
    return float(np.mean([uer_word(r.final, r.target) for r in records]))


def picked_rate(records: Sequence[TypingRecord]) -> float:
    if not records:
        return 0.0
    return sum(1 for r in records if r.fixated(r.sugg_region) and r.picks > 0) / len(records)


def failed_rate(records: Sequence[TypingRecord]) -> float:
    if not records:
        return 0.0
    return sum(1 for r in records if r.fixated(r.sugg_region) and r.picks == 0) / len(records)


def start_checking(records: Sequence[TypingRecord]) -> float | None:
    vals = []
    for r in records:
        n = r.keystrokes_before_first_fixation(r.sugg_region)
        if n is not None:
            vals.append(n / len(r.target))
    return float(np.mean(vals)) if vals else None


def keystroke_savings(records: Sequence[TypingRecord]) -> float:
    chars = _final_chars(records)
    if chars == 0:
        raise ValueError("no final characters")
    return 1.0 - sum(r.keystrokes + r.backspaces for r in records) / chars


def gaze_shifts_per_word(records: Sequence[TypingRecord]) -> float:
    return float(np.mean([r.gaze_shifts() for r in records])) if records else 0.0


@dataclass
class MetricReport:
    picked: float
    failed: float
    start: float | None
    gaze_sugg: float
    gaze_kbd: float
    bpc: float | None
    uer: float
    wpm: float
    ks: float | None
    extras: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        d = asdict(self)
        d.update(d.pop("extras"))
        return d

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2)


def report(records: Sequence[TypingRecord]) -> MetricReport:
    """All nine metrics; BPC and KS are None when every final string is empty."""
    has_chars = _final_chars(records) > 0
    return MetricReport(
        picked=picked_rate(records), failed=failed_rate(records), start=start_checking(records),
        gaze_sugg=gaze_ratio(records, records[0].sugg_region if records else "SuggList"),
        gaze_kbd=gaze_ratio(records, "Keyboard"),
        bpc=bpc(records) if has_chars else None, uer=uer(records), wpm=wpm(records),
        ks=keystroke_savings(records) if has_chars else None,
        extras={"gaze_input": gaze_ratio(records, "InputField"), "gaze_shifts": gaze_shifts_per_word(records),
                "n_words": len(records)},
    )


def per_word_values(rec: TypingRecord) -> dict[str, float | None]:
    """The nine metrics evaluated on a single word."""
    one = [rec]
    has_chars = len(rec.final) > 0
    return {
        "picked": picked_rate(one), "failed": failed_rate(one), "start": start_checking(one),
        "gaze_sugg": gaze_ratio(one, rec.sugg_region), "gaze_kbd": gaze_ratio(one, "Keyboard"),
        "bpc": bpc(one) if has_chars else None, "uer": uer(one),
        "wpm": wpm(one) if rec.duration > 0 else None, "ks": keystroke_savings(one) if has_chars else None,
    }


# ---------------------------------------------------------------- references

@dataclass(frozen=True)
class ReferenceTable:
    group: str
    stats: dict  # metric -> (mean, sd)

    def __post_init__(self):
        for m, (_, sd) in self.stats.items():
            if sd < 0:
                raise ValueError(f"negative sd for {m}")


DEFAULT_REFERENCE_FILE = Path(__file__).parent / "data" / "reference_tables.csv"


def load_reference_tables(path: str | Path = DEFAULT_REFERENCE_FILE) -> dict[str, ReferenceTable]:
    rows: dict[str, dict] = {}
    with open(path) as fh:
        lines = [ln for ln in fh if ln.strip() and not ln.startswith("#")]
    for row in csv.DictReader(lines):
        rows.setdefault(row["group"], {})[row["metric"]] = (float(row["mean"]), float(row["sd"]))
    return {g: ReferenceTable(g, s) for g, s in rows.items()}


def compare(rep: MetricReport, ref: ReferenceTable) -> dict[str, dict]:
    out = {}
    values = rep.as_dict()
    for m, (mean, sd) in ref.stats.items():
        v = values.get(m)
        if v is None or sd <= 0:
            out[m] = {"model": v, "mean": mean, "sd": sd, "z": None, "within_1sd": None}
            continue
        z = (v - mean) / sd
        out[m] = {"model": v, "mean": mean, "sd": sd, "z": z, "within_1sd": abs(z) <= 1.0 + 1e-12}
    return out


def write_comparison_csv(cmp: dict, group: str, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["group", "metric", "mean", "sd", "model", "z", "within_1sd"])
        for m, row in cmp.items():
            w.writerow([group, m, row["mean"], row["sd"], row["model"], row["z"], row["within_1sd"]])


# ---------------------------------------------------------------- divergence

def js_divergence(p, q) -> float:
    """Jensen-Shannon divergence in bits between two discrete distributions."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError(f"support mismatch: {p.shape} vs {q.shape}")
    if (p < 0).any() or (q < 0).any() or p.sum() <= 0 or q.sum() <= 0:
        raise ValueError("distributions must be nonnegative with positive mass")
    p = p / p.sum()
    q = q / q.sum()
    m = 0.5 * (p + q)

    def kl(a, b):
        nz = a > 0
        return float(np.sum(a[nz] * np.log2(a[nz] / b[nz])))

    return min(1.0, max(0.0, 0.5 * kl(p, m) + 0.5 * kl(q, m)))


def isfinite(x) -> bool:
    return x is not None and math.isfinite(x)
