"""Word-frequency lexicon, word sets and word sampling."""
from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

DATA_DIR = Path(str(resources.files("wstypist") / "data"))
DEFAULT_FREQ_LIST = DATA_DIR / "en_freq_5000.tsv"
DEFAULT_TRAIN_SET = DATA_DIR / "wordset_train.txt"
DEFAULT_CAPS_SET = DATA_DIR / "wordset_caps.txt"

SURROGATE_SEED = 2006
SURROGATE_SIZE = 1080
SURROGATE_RANKS = (200, 5000)
CAPS_SEED = 403
CAPS_SPLIT = (216, 187)  # lowercase, capitalized


class LexiconError(ValueError):
    pass


@dataclass(frozen=True)
class LexiconEntry:
    word: str
    count: int
    rank: int
    norm_freq: float


@dataclass(frozen=True, eq=False)
class Lexicon:
    entries: tuple[LexiconEntry, ...]
    index: dict[str, LexiconEntry] = field(repr=False)

    @classmethod
    def from_counts(cls, counts: dict[str, int] | list[tuple[str, int]]) -> "Lexicon":
        items = list(counts.items()) if isinstance(counts, dict) else list(counts)
        if not items:
            raise LexiconError("empty lexicon")
        words = [w for w, _ in items]
        if len(set(words)) != len(words):
            raise LexiconError("duplicate words in lexicon")
        items.sort(key=lambda wc: (-wc[1], wc[0]))
        top = items[0][1]
        entries = tuple(
            LexiconEntry(word=w, count=c, rank=i + 1, norm_freq=c / top)
            for i, (w, c) in enumerate(items)
        )
        return cls(entries=entries, index={e.word: e for e in entries})

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, word: str) -> bool:
        return word.lower() in self.index

    def __eq__(self, other) -> bool:
        return isinstance(other, Lexicon) and self.entries == other.entries

    def __hash__(self) -> int:
        return hash(self.entries)

    def get(self, word: str) -> LexiconEntry:
        try:
            return self.index[word.lower()]
        except KeyError:
            raise LexiconError(f"unknown word: {word!r}") from None

    @property
    def words(self) -> tuple[str, ...]:
        """Words in rank order."""
        return tuple(e.word for e in self.entries)

    @property
    def max_length(self) -> int:
        return max(len(e.word) for e in self.entries)

    @property
    def sorted_words(self) -> list[str]:
        # lazily built, cached on the instance for prefix bisection
        cached = self.__dict__.get("_sorted")
        if cached is None:
            cached = sorted(self.index)
            object.__setattr__(self, "_sorted", cached)
        return cached

    def prefix_range(self, prefix: str) -> list[str]:
        """All words starting with ``prefix`` (case-folded), alphabetical."""
        words = self.sorted_words
        p = prefix.lower()
        lo = bisect.bisect_left(words, p)
        hi = bisect.bisect_left(words, p + "￿")
        return words[lo:hi]


def load_frequency_list(path: str | Path = DEFAULT_FREQ_LIST) -> Lexicon:
    """Parse a ``word<TAB>count`` file into a :class:`Lexicon`.

    Blank lines and lines starting with ``#`` are skipped. Any whitespace is
    accepted as the separator.
    """
    path = Path(path)
    items = []
    with path.open(encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise LexiconError(f"{path}:{lineno}: expected 'word<TAB>count', got {raw.rstrip()!r}")
            word, count = parts
            try:
                n = int(count)
            except ValueError:
                raise LexiconError(f"{path}:{lineno}: count is not an integer: {count!r}") from None
            if n <= 0:
                raise LexiconError(f"{path}:{lineno}: count must be positive")
            items.append((word, n))
    if not items:
        raise LexiconError(f"{path}: no entries")
    seen = set()
    for word, _ in items:
        if word in seen:
            raise LexiconError(f"{path}: duplicate word {word!r}")
        seen.add(word)
    return Lexicon.from_counts(items)


@dataclass(frozen=True)
class WordSet:
    words: tuple[str, ...]
    label: str = "words"

    def __post_init__(self):
        object.__setattr__(self, "words", tuple(self.words))

    def __len__(self) -> int:
        return len(self.words)

    def validate(self, lex: Lexicon) -> "WordSet":
        missing = [w for w in self.words if w not in lex]
        if missing:
            raise LexiconError(f"{len(missing)} words of set {self.label!r} not in lexicon, e.g. {missing[:5]}")
        return self


def load_wordset(path: str | Path, label: str | None = None) -> WordSet:
    path = Path(path)
    words = []
    with path.open(encoding="utf-8") as fh:
        for line in fh:
            w = line.strip()
            if w and not w.startswith("#"):
                words.append(w)
    return WordSet(tuple(words), label or path.stem)


def save_wordset(ws: WordSet, path: str | Path) -> None:
    Path(path).write_text("".join(w + "\n" for w in ws.words), encoding="utf-8")


def sample_word(ws: WordSet, rng: np.random.Generator) -> str:
    if not ws.words:
        raise LexiconError("cannot sample from an empty word set")
    return ws.words[int(rng.integers(len(ws.words)))]


def word_stats(word: str, lex: Lexicon) -> tuple[int, float]:
    return len(word), lex.get(word).norm_freq


def surrogate_training_set(lex: Lexicon, size: int = SURROGATE_SIZE, seed: int = SURROGATE_SEED) -> WordSet:
    """Seeded sample of alphabetic words (length >= 3) from ranks 200..5000."""
    lo, hi = SURROGATE_RANKS
    pool = [e.word for e in lex.entries if lo <= e.rank <= hi and e.word.isalpha() and len(e.word) >= 3]
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(len(pool), size=min(size, len(pool)), replace=False))
    return WordSet(tuple(pool[i] for i in idx), "ws_surrogate")


def capitalized_set(base: WordSet, split: tuple[int, int] = CAPS_SPLIT, seed: int = CAPS_SEED) -> WordSet:
    n_lower, n_cap = split
    rng = np.random.default_rng(seed)
    idx = rng.choice(len(base.words), size=n_lower + n_cap, replace=False)
    chosen = [base.words[i] for i in idx]
    words = chosen[:n_lower] + [w[0].upper() + w[1:] for w in chosen[n_lower:]]
    return WordSet(tuple(words), "ws_caps")


def length_span_set(lex: Lexicon, lengths=range(2, 13), per_length: int = 40, seed: int = 11) -> WordSet:
    """Evaluation set with an equal number of words for each length."""
    rng = np.random.default_rng(seed)
    words = []
    for n in lengths:
        pool = [e.word for e in lex.entries if len(e.word) == n and e.rank >= 50]
        if not pool:
            continue
        k = min(per_length, len(pool))
        words.extend(pool[i] for i in np.sort(rng.choice(len(pool), size=k, replace=False)))
    return WordSet(tuple(words), "length_span")


_cache: dict = {}


def default_lexicon() -> Lexicon:
    if "lex" not in _cache:
        _cache["lex"] = load_frequency_list(DEFAULT_FREQ_LIST)
    return _cache["lex"]


def default_training_set() -> WordSet:
    if "train" not in _cache:
        _cache["train"] = load_wordset(DEFAULT_TRAIN_SET, "ws_surrogate")
    return _cache["train"]


def default_caps_set() -> WordSet:
    if "caps" not in _cache:
        _cache["caps"] = load_wordset(DEFAULT_CAPS_SET, "ws_caps")
    return _cache["caps"]
