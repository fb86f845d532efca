"""Grid-search the Baseline ranking weights against the surrogate word set.

Picks the (w_len, w_freq) pair whose accuracy / mean appearance fraction lie
closest to (0.65, 0.54) inside the [0.62, 0.68] x [0.50, 0.58] band. The
result is printed; copy it into DEFAULT_W_LEN / DEFAULT_W_FREQ in suggest.py.
"""
import itertools

from wstypist.lexicon import default_lexicon, default_training_set
from wstypist.suggest import SuggestionConfig, measure_accuracy

W_LEN = (0.0, 0.001, 0.002, 0.003, 0.005, 0.01, 0.02, 0.03)
W_FREQ = (0.5, 1.0, 2.0)
TARGET = (0.65, 0.54)


def main():
    lex, ws = default_lexicon(), default_training_set()
    best = None
    for w_len, w_freq in itertools.product(W_LEN, W_FREQ):
        rep = measure_accuracy(ws, lex, SuggestionConfig(w_len=w_len, w_freq=w_freq))
        acc, frac = rep.accuracy, rep.mean_appearance_fraction
        in_band = 0.62 <= acc <= 0.68 and 0.50 <= frac <= 0.58
        err = (acc - TARGET[0]) ** 2 + (frac - TARGET[1]) ** 2
        print(f"w_len={w_len:<6} w_freq={w_freq:<4} accuracy={acc:.3f} appearance={frac:.3f} {'*' if in_band else ''}")
        if in_band and (best is None or err < best[0]):
            best = (err, w_len, w_freq, acc, frac)
    if best is None:
        raise SystemExit("no grid point inside the band")
    _, w_len, w_freq, acc, frac = best
    print(f"\nselected w_len={w_len} w_freq={w_freq} (accuracy {acc:.3f}, appearance {frac:.3f})")


if __name__ == "__main__":
    main()
