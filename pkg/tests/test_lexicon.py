import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wstypist.lexicon import (
    CAPS_SPLIT, DEFAULT_FREQ_LIST, SURROGATE_SIZE, Lexicon, LexiconError, WordSet, capitalized_set,
    default_caps_set, default_lexicon, default_training_set, load_frequency_list, load_wordset, sample_word,
    save_wordset, surrogate_training_set, word_stats,
)


def write(tmp_path, text, name="freq.tsv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_two_entry_ordering(tmp_path):
    lex = load_frequency_list(write(tmp_path, "return\t10\nthe\t1000\n"))
    assert lex.get("the").rank == 1 and lex.get("return").rank == 2
    assert lex.get("the").norm_freq == 1.0
    assert lex.get("return").norm_freq == pytest.approx(0.01)


def test_ties_break_lexicographically(tmp_path):
    lex = load_frequency_list(write(tmp_path, "ab 5\naa 5\n"))
    assert [e.word for e in lex.entries] == ["aa", "ab"]


def test_bundled_list():
    lex = load_frequency_list(DEFAULT_FREQ_LIST)
    lines = DEFAULT_FREQ_LIST.read_text().splitlines()
    n_lines = sum(1 for line in lines if line.strip() and not line.startswith("#"))
    assert len(lex) == n_lines == 5000
    assert lex.entries[0].norm_freq == 1.0


def test_reload_is_identical():
    assert load_frequency_list(DEFAULT_FREQ_LIST) == load_frequency_list(DEFAULT_FREQ_LIST)


@pytest.mark.parametrize("text, msg", [
    ("the 10\nbroken\n", ":2:"),
    ("the ten\n", "not an integer"),
    ("the 0\n", "positive"),
    ("the 3\nthe 4\n", "duplicate"),
    ("", "no entries"),
])
def test_malformed_files(tmp_path, text, msg):
    with pytest.raises(LexiconError, match=msg):
        load_frequency_list(write(tmp_path, text))


def test_sample_word_singleton_and_empty():
    rng = np.random.default_rng(0)
    assert sample_word(WordSet(("return",)), rng) == "return"
    with pytest.raises(LexiconError):
        sample_word(WordSet(()), rng)


def test_sample_word_reproducible():
    ws = WordSet(tuple(f"w{i}" for i in range(10)))
    r1, r2 = np.random.default_rng(5), np.random.default_rng(5)
    assert [sample_word(ws, r1) for _ in range(50)] == [sample_word(ws, r2) for _ in range(50)]


def test_sample_word_uniform():
    ws = WordSet(("a", "b", "c", "d"))
    rng = np.random.default_rng(123)
    draws = [sample_word(ws, rng) for _ in range(10_000)]
    for w in ws.words:
        # 25% +- 2 pp: about 4.6 binomial sd at n = 10,000
        assert abs(draws.count(w) / 10_000 - 0.25) < 0.02


def test_word_stats_case_fold():
    lex = default_lexicon()
    assert word_stats("return", lex) == word_stats("Return", lex)
    assert word_stats("return", lex)[0] == 6
    assert word_stats(lex.entries[0].word, lex)[1] == 1.0
    with pytest.raises(LexiconError):
        word_stats("qqqqzzz", lex)


def test_bundled_wordsets_match_builders():
    lex = default_lexicon()
    train = surrogate_training_set(lex)
    assert train.words == default_training_set().words
    assert len(train) == SURROGATE_SIZE
    caps = capitalized_set(train)
    assert caps.words == default_caps_set().words
    n_cap = sum(w[0].isupper() for w in caps.words)
    assert (len(caps) - n_cap, n_cap) == CAPS_SPLIT
    caps.validate(lex)
    train.validate(lex)


def test_wordset_roundtrip(tmp_path):
    ws = WordSet(("alpha", "Beta"), "x")
    save_wordset(ws, tmp_path / "ws.txt")
    assert load_wordset(tmp_path / "ws.txt").words == ws.words


def test_validate_reports_missing():
    with pytest.raises(LexiconError, match="not in lexicon"):
        WordSet(("return", "qqqqzzz")).validate(default_lexicon())


counts = st.dictionaries(st.text("abcdef", min_size=1, max_size=6), st.integers(1, 50), min_size=1, max_size=30)


@given(counts)
@settings(max_examples=60)
def test_rank_respects_counts(d):
    lex = Lexicon.from_counts(d)
    es = lex.entries
    assert [e.rank for e in es] == list(range(1, len(es) + 1))
    assert all(a.count >= b.count for a, b in zip(es, es[1:]))
    assert max(e.norm_freq for e in es) == 1.0


@given(counts, st.text("abcdef", max_size=3))
@settings(max_examples=60)
def test_prefix_range_matches_scan(d, prefix):
    lex = Lexicon.from_counts(d)
    assert sorted(lex.prefix_range(prefix)) == sorted(w for w in d if w.startswith(prefix))
