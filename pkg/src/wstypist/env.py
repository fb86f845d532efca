"""Typing environment: gaze/finger actions, working memory, timing, errors, reward."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from .lexicon import Lexicon
from .metrics import Event, TypingRecord
from .suggest import SuggestionConfig, SuggestionEngine, SuggestionList, WordProgress, autocorrect, engine_for, levenshtein

GAZE = ("Keyboard", "SuggList", "InputField")
FINGER = ("Type", "Backspace", "Pick", "NoAct")
KEYBOARD, SUGGLIST, INPUT = range(3)
TYPE, BACKSPACE, PICK, NOACT = range(4)
SUGG_STATUS = ("Yes", "No", "Unknown")

VARIANTS = ("Full", "NoSuggestions", "NoAutocorrect", "Capitalization", "InputSugg", "InputSuggShortcut")
ABLATIONS = ("NoPs", "NoPk", "NoCom")

PARAM_NAMES = ("p_m", "p_f", "p_k", "p_s")
PARAM_RANGES = {"p_m": (0.0, 0.2), "p_f": (0.15, 0.35), "p_k": (0.3, 0.5), "p_s": (0.5, 0.7)}

WORD_LENGTH_NORM = 15.0

_QWERTY = ("qwertyuiop", "asdfghjkl", "zxcvbnm")


def _neighbours() -> dict[str, str]:
    """Adjacent keys on a staggered QWERTY layout (each row sits half a key right of the one above)."""
    out = {}
    for r, row in enumerate(_QWERTY):
        for i, c in enumerate(row):
            cand = [(r, i - 1), (r, i + 1), (r - 1, i), (r - 1, i + 1), (r + 1, i - 1), (r + 1, i)]
            out[c] = "".join(_QWERTY[rr][ii] for rr, ii in cand if 0 <= rr < 3 and 0 <= ii < len(_QWERTY[rr]))
    return out


NEIGHBOURS = _neighbours()
ALPHABET = "abcdefghijklmnopqrstuvwxyz"


@dataclass(frozen=True)
class CognitiveParams:
    p_m: float = 0.1
    p_f: float = 0.25
    p_k: float = 0.4
    p_s: float = 0.6

    def __post_init__(self):
        if self.p_m < 0 or self.p_f <= 0 or not 0 <= self.p_k <= 1 or self.p_s < 0:
            raise ValueError(f"invalid cognitive parameters {self}")

    def scaled(self) -> np.ndarray:
        """Each parameter min-max scaled over the training range."""
        return np.array([(getattr(self, n) - PARAM_RANGES[n][0]) / (PARAM_RANGES[n][1] - PARAM_RANGES[n][0])
                         for n in PARAM_NAMES])

    def as_tuple(self) -> tuple:
        return tuple(getattr(self, n) for n in PARAM_NAMES)

    @classmethod
    def sample(cls, rng: np.random.Generator, bounds: dict | None = None) -> "CognitiveParams":
        bounds = bounds or PARAM_RANGES
        return cls(**{n: float(rng.uniform(*bounds[n])) for n in PARAM_NAMES})

    @classmethod
    def midpoint(cls) -> "CognitiveParams":
        return cls(**{n: sum(PARAM_RANGES[n]) / 2 for n in PARAM_NAMES})


@dataclass(frozen=True)
class RewardConfig:
    beta: float = 1.0
    gamma: float = 1.0
    lambda_c: float = 0.7
    shaping_enabled: bool = True
    shaping_backspace_penalty: float = -0.05
    shaping_anneal_fraction: float = 0.5
    mask_penalty: float = -0.02

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, float) and not math.isfinite(v):
                raise ValueError(f"{f.name} must be finite")
        if self.beta <= 0 or self.gamma <= 0 or self.lambda_c <= 0:
            raise ValueError("beta, gamma and lambda_c must be > 0")
        if self.shaping_backspace_penalty > 0 or self.mask_penalty > 0:
            raise ValueError("shaping penalties must be <= 0")


@dataclass(frozen=True)
class EnvConfig:
    variant: str = "Full"
    ablations: frozenset = frozenset()
    gaze_shift_ms: tuple = (200.0, 100.0)
    pick_ms: tuple = (760.0, 150.0)
    err_kbd: float = 0.05
    err_sugg: float = 0.06
    err_input: float = 0.10
    eta: float = 0.05
    max_steps: int = 30
    keystroke_cv: float = 0.2
    min_keystroke_s: float = 0.03
    min_pick_ms: float = 100.0
    unguided_keystroke_factor: float = 2.0  # keystrokes without the keyboard in view are slower
    suggestion: SuggestionConfig = field(default_factory=SuggestionConfig)
    reward: RewardConfig = field(default_factory=RewardConfig)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        object.__setattr__(self, "ablations", frozenset(self.ablations))
        bad = self.ablations - set(ABLATIONS)
        if bad:
            raise ValueError(f"unknown ablations {sorted(bad)}; expected a subset of {ABLATIONS}")
        for name in ("err_kbd", "err_sugg", "err_input"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.unguided_keystroke_factor < 1:
            raise ValueError("unguided_keystroke_factor must be >= 1")
        if self.max_steps <= 0 or self.eta < 0:
            raise ValueError("max_steps > 0 and eta >= 0 required")
        # variants pin the pieces of the suggestion config they depend on
        if self.variant in ("NoAutocorrect", "Capitalization") and self.suggestion.autocorrect_enabled:
            object.__setattr__(self, "suggestion", replace(self.suggestion, autocorrect_enabled=False))

    @property
    def has_suggestions(self) -> bool:
        return self.variant != "NoSuggestions"

    @property
    def reveal_region(self) -> int:
        return INPUT if self.variant.startswith("InputSugg") else SUGGLIST

    @property
    def capitalization(self) -> bool:
        return self.variant == "Capitalization"

    @property
    def obs_dim(self) -> int:
        return 15 + int(self.capitalization)

    def gaze_mask(self) -> np.ndarray:
        m = np.ones(3, dtype=bool)
        if not self.has_suggestions:
            m[SUGGLIST] = False
        elif self.reveal_region == INPUT:
            m[INPUT] = False  # reached through the suggestion action instead
        return m

    def gaze_region(self, cmd: int) -> int:
        """Screen region a gaze action lands on.

        Inline variants have no separate list: the suggestion action looks at
        the input field, where the suggestions are shown.
        """
        return INPUT if cmd == SUGGLIST and self.reveal_region == INPUT else cmd

    def gaze_code(self, region: int) -> int:
        """Inverse of gaze_region for the observation's gaze one-hot."""
        return SUGGLIST if region == INPUT and self.reveal_region == INPUT else region

    def finger_mask(self) -> np.ndarray:
        m = np.ones(4, dtype=bool)
        if not self.has_suggestions:
            m[PICK] = False
        return m

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ablations"] = sorted(self.ablations)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EnvConfig":
        d = dict(d)
        if "suggestion" in d and isinstance(d["suggestion"], dict):
            d["suggestion"] = SuggestionConfig.from_dict(d["suggestion"])
        if "reward" in d and isinstance(d["reward"], dict):
            d["reward"] = RewardConfig(**d["reward"])
        for k in ("gaze_shift_ms", "pick_ms"):
            if k in d:
                d[k] = tuple(d[k])
        if "ablations" in d:
            d["ablations"] = frozenset(d["ablations"])
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown env config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class Action:
    gaze_cmd: int
    finger_cmd: int

    def __str__(self):
        return f"{GAZE[self.gaze_cmd]}+{FINGER[self.finger_cmd]}"


@dataclass
class EnvState:
    target: str
    params: CognitiveParams
    buffer: str = ""
    intended_index: int = 0
    gaze: int = KEYBOARD
    sugg_list: SuggestionList = SuggestionList("", ())
    sugg_status: int = 2  # Unknown
    sighted_target: bool = False
    elapsed_s: float = 0.0
    time_since_proofread_s: float = 0.0
    step_count: int = 0
    keystrokes: int = 0
    backspaces: int = 0
    picked: bool = False
    picked_word: str = ""
    pick_count: int = 0
    coverage_draw: bool = True
    progress: WordProgress = WordProgress()
    committed: bool = False
    final: str | None = None
    done: bool = False
    certainty: float = 1.0
    correctness: float = 1.0
    completeness: float = 0.0
    skipped_capital: bool = False

    @property
    def cap_pending(self) -> bool:
        i = self.intended_index
        return i < len(self.target) and self.target[i].isupper() and len(self.buffer) == i


@dataclass(frozen=True)
class Observation:
    w_l: float
    w_f: float
    gaze: int
    sugg_status: int
    certainty: float
    correctness: float
    completeness: float
    params: tuple
    cap_indicator: int | None = None

    def vector(self) -> np.ndarray:
        v = np.zeros(15 + (self.cap_indicator is not None))
        v[0] = self.w_l
        v[1] = self.w_f
        v[2 + self.gaze] = 1.0
        v[5 + self.sugg_status] = 1.0
        v[8] = self.certainty
        v[9] = self.correctness
        v[10] = self.completeness
        v[11:15] = self.params
        if self.cap_indicator is not None:
            v[15] = self.cap_indicator
        return v


@dataclass
class StepResult:
    obs: Observation
    reward: float
    done: bool
    events: list
    shaping: float = 0.0


def cer(a: str, b: str) -> float:
    longest = max(len(a), len(b))
    return levenshtein(a, b) / longest if longest else 0.0


def certainty(p_m: float, t: float) -> float:
    return math.exp(-p_m * t)


def completeness(buffer_len: int, target_len: int, cert: float) -> float:
    return min(1.0, max(0.0, buffer_len / target_len * cert))


def correctness(buffer: str, target: str, intended_index: int, lambda_c: float) -> float:
    return 1.0 - cer(buffer + target[intended_index:], target) ** lambda_c


def episode_reward(final: str, target: str, elapsed_s: float, picked: bool, params: CognitiveParams,
                   rcfg: RewardConfig, ablations=frozenset()) -> float:
    """Terminal reward: accuracy term, minus time per target character, plus pick bonus.

    The bonus is paid only when a pick took place and the word ended up correct,
    so picking an unrelated suggestion earns nothing.
    """
    uer = cer(final, target)
    r = (1.0 - uer ** rcfg.beta) - rcfg.gamma * (elapsed_s / len(target))
    if picked and uer == 0 and "NoPs" not in ablations:
        r += params.p_s
    return r


def shaping_reward(kind: str, rcfg: RewardConfig, progress: float, *, empty_buffer: bool = False,
                   deleted_correct: bool = False) -> float:
    if not rcfg.shaping_enabled or progress >= rcfg.shaping_anneal_fraction:
        return 0.0
    if kind == "Backspace" and (empty_buffer or deleted_correct):
        return rcfg.shaping_backspace_penalty
    if kind == "Masked":
        return rcfg.mask_penalty
    return 0.0


def pick_choice(sugg: SuggestionList, target: str) -> str:
    """Word a Pick inserts: the slot holding the target if shown, else the closest slot to it."""
    shown = [w for w in sugg.algorithmic if w]
    if not shown:
        return ""
    if target in shown:
        return target
    return min(shown, key=lambda w: levenshtein(w, target))


def check_termination(state: EnvState, cfg: EnvConfig) -> bool:
    if state.step_count >= cfg.max_steps:
        return True
    if state.picked and state.picked_word == state.target and state.buffer == state.target:
        return True
    return state.committed


def log_frequency(norm_freq: float) -> float:
    """Map a count/max frequency onto [0, 1] on a log scale (1e-4 -> 0, 1 -> 1)."""
    return min(1.0, max(0.0, 1.0 + math.log10(max(norm_freq, 1e-12)) / 4.0))


class TypingEnv:
    """One word per episode. Single owner, sequential."""

    def __init__(self, cfg: EnvConfig, lex: Lexicon, engine: SuggestionEngine | None = None):
        self.cfg = cfg
        self.lex = lex
        self.engine = engine or engine_for(lex, cfg.suggestion)
        self.training_progress = 1.0  # set by the trainer; shaping is active early on
        self.state: EnvState | None = None
        self.events: list[Event] = []
        self.rng: np.random.Generator | None = None

    @property
    def obs_dim(self) -> int:
        return self.cfg.obs_dim

    # -- sampling helpers
    def _keystroke_time(self, guided: bool = True) -> float:
        p_f = self.state.params.p_f
        t = max(self.cfg.min_keystroke_s, float(self.rng.normal(p_f, self.cfg.keystroke_cv * p_f)))
        return t if guided else t * self.cfg.unguided_keystroke_factor

    def _gaze_shift_time(self) -> float:
        m, sd = self.cfg.gaze_shift_ms
        return max(0.0, float(self.rng.normal(m, sd))) / 1000.0

    def _pick_time(self) -> float:
        if self.cfg.variant == "InputSuggShortcut":
            return self._keystroke_time()
        m, sd = self.cfg.pick_ms
        return max(self.cfg.min_pick_ms, float(self.rng.normal(m, sd))) / 1000.0

    def error_probability(self, gaze: int | None = None) -> float:
        s = self.state
        gaze = s.gaze if gaze is None else gaze
        base = (self.cfg.err_kbd, self.cfg.err_sugg, self.cfg.err_input)[gaze]
        if "NoPk" in self.cfg.ablations or s.sighted_target:
            return base
        return min(1.0, base + self.cfg.eta * (1.0 - s.params.p_k))

    def _wrong_char(self, intended: str) -> str:
        low = intended.lower()
        pool = NEIGHBOURS.get(low) or ALPHABET.replace(low, "")
        c = pool[int(self.rng.integers(len(pool)))]
        return c.upper() if intended.isupper() else c

    def _emit(self, kind: str, **payload):
        self.events.append(Event(kind, self.state.elapsed_s, payload))

    def _advance(self, dt: float):
        self.state.elapsed_s += dt
        self.state.time_since_proofread_s += dt

    def _refresh_suggestions(self):
        s = self.state
        if self.cfg.has_suggestions:
            s.sugg_list = self.engine.suggest(s.buffer, s.target, s.progress)
        else:
            s.sugg_list = SuggestionList(s.buffer, ())

    def _revealed(self) -> bool:
        """Target among the suggestions shown in the revealing region."""
        s = self.state
        return s.target in s.sugg_list.algorithmic

    def _proofread(self):
        s = self.state
        s.time_since_proofread_s = 0.0

    def _update_memory(self):
        s = self.state
        rc = self.cfg.reward
        s.certainty = certainty(s.params.p_m, s.time_since_proofread_s)
        s.completeness = completeness(len(s.buffer), len(s.target), s.certainty)
        s.correctness = correctness(s.buffer, s.target, s.intended_index, rc.lambda_c)

    def observation(self) -> Observation:
        s = self.state
        return Observation(
            w_l=min(1.0, len(s.target) / WORD_LENGTH_NORM),
            w_f=log_frequency(self.lex.get(s.target).norm_freq),
            gaze=self.cfg.gaze_code(s.gaze),
            sugg_status=s.sugg_status,
            certainty=s.certainty,
            correctness=s.correctness,
            completeness=0.0 if "NoCom" in self.cfg.ablations else s.completeness,
            params=tuple(s.params.scaled()),
            cap_indicator=int(s.cap_pending) if self.cfg.capitalization else None,
        )

    def reset(self, word: str, params: CognitiveParams, rng: np.random.Generator) -> Observation:
        if word not in self.lex:
            raise ValueError(f"word {word!r} is not in the lexicon")
        self.rng = rng
        mask = self.cfg.gaze_mask()
        cmd = int(rng.integers(3))
        if not mask[cmd]:
            other = SUGGLIST if mask[SUGGLIST] else INPUT
            cmd = KEYBOARD if rng.random() < 0.5 else other
        gaze = self.cfg.gaze_region(cmd)
        progress = self.engine.start_word(word, rng) if self.cfg.has_suggestions else WordProgress()
        self.state = EnvState(target=word, params=params, gaze=gaze, progress=progress,
                              coverage_draw=progress.covered)
        if gaze == INPUT:
            self._proofread()
        self.events = []
        region = "InputField" if self.cfg.reveal_region == INPUT else "SuggList"
        self._emit("Start", target=word, sugg_region=region, params=list(params.as_tuple()))
        self._emit("GazeEnter", region=GAZE[gaze])
        self._refresh_suggestions()
        self._update_memory()
        return self.observation()

    def step(self, action: Action | tuple, rng: np.random.Generator | None = None) -> StepResult:
        s = self.state
        if s is None or s.done:
            raise RuntimeError("step() called on a finished episode; call reset() first")
        if rng is not None:
            self.rng = rng
        if not isinstance(action, Action):
            action = Action(*action)
        cfg = self.cfg
        n_events = len(self.events)
        shaping = 0.0
        s.step_count += 1

        # (1) gaze
        gaze_cmd = cfg.gaze_region(action.gaze_cmd) if cfg.gaze_mask()[action.gaze_cmd] else s.gaze
        if gaze_cmd != s.gaze:
            self._emit("GazeEnter", region=GAZE[gaze_cmd])
            self._advance(self._gaze_shift_time())
            s.gaze = gaze_cmd
            s.sugg_status = 2

        # (2) reveal / proofread
        if cfg.has_suggestions and s.gaze == cfg.reveal_region:
            if self._revealed():
                s.sugg_status = 0
                s.sighted_target = True
            else:
                s.sugg_status = 1
        if s.gaze == INPUT:
            self._proofread()

        # (3) finger
        before = s.buffer
        finger = action.finger_cmd
        if finger == TYPE:
            if s.intended_index >= len(s.target):
                self._advance(self._keystroke_time())
                final, fired = autocorrect(s.buffer, s.target, cfg.suggestion, self.rng)
                if fired:
                    self._emit("AutocorrectFired", before=s.buffer, after=final)
                s.buffer = final
                s.committed = True
                self._emit("Commit", final=final)
            else:
                intended = s.target[s.intended_index]
                dt = self._keystroke_time(s.gaze == KEYBOARD)
                if cfg.capitalization and s.cap_pending:
                    dt *= 2.0
                error = self.rng.random() < self.error_probability()
                char = self._wrong_char(intended) if error else intended
                self._emit("Keystroke", char=char, error=bool(error))
                self._advance(dt)
                s.buffer += char
                s.intended_index = len(s.buffer)
                s.keystrokes += 1
        elif finger == BACKSPACE:
            empty = not s.buffer
            deleted_correct = bool(s.buffer) and s.target.startswith(s.buffer)
            self._emit("Backspace", empty=empty)
            self._advance(self._keystroke_time(s.gaze == KEYBOARD))
            s.buffer = s.buffer[:-1]
            s.intended_index = len(s.buffer)
            s.backspaces += 1
            shaping += shaping_reward("Backspace", cfg.reward, self.training_progress,
                                      empty_buffer=empty, deleted_correct=deleted_correct)
        elif finger == PICK:
            word = pick_choice(s.sugg_list, s.target)
            legal = cfg.has_suggestions and bool(word) and (
                cfg.variant == "InputSuggShortcut" or s.gaze == cfg.reveal_region)
            if legal:
                self._emit("Pick", word=word)
                self._advance(self._pick_time())
                s.buffer = word
                s.intended_index = len(word)
                s.picked = True
                s.picked_word = word
                s.pick_count += 1
        elif finger == NOACT:
            if cfg.capitalization and s.cap_pending:
                char = s.target[s.intended_index].lower()
                self._emit("Keystroke", char=char, error=False, skip=True)
                s.buffer += char
                s.intended_index = len(s.buffer)
                s.keystrokes += 1
                s.skipped_capital = True
        else:
            raise ValueError(f"unknown finger command {finger}")
        if s.gaze == INPUT:
            self._proofread()

        # (4) suggestions follow the buffer; a gaze resting on the list re-reads it
        if s.buffer != before:
            self._refresh_suggestions()
            s.sugg_status = 2
            if cfg.has_suggestions and s.gaze == cfg.reveal_region:
                seen = self._revealed()
                s.sugg_status = 0 if seen else 1
                s.sighted_target = s.sighted_target or seen

        # (5) memory
        self._update_memory()

        # (6) termination and reward
        reward = 0.0
        s.done = check_termination(s, cfg)
        if s.done:
            s.final = s.buffer
            reward = episode_reward(s.final, s.target, s.elapsed_s, s.picked, s.params, cfg.reward, cfg.ablations)
            self._emit("End", final=s.final)
        return StepResult(obs=self.observation(), reward=reward, done=s.done,
                          events=self.events[n_events:], shaping=shaping)

    def record(self) -> TypingRecord:
        s = self.state
        region = "InputField" if self.cfg.reveal_region == INPUT else "SuggList"
        final = s.final if s.final is not None else s.buffer
        return TypingRecord(target=s.target, final=final, events=list(self.events), duration=s.elapsed_s,
                            sugg_region=region)
