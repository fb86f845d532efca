"""Regenerate the bundled 5,000-word frequency list.

Needs the optional ``wordfreq`` package (not a runtime dependency). Counts are
per-billion token estimates rounded to integers.

    python scripts/build_frequency_list.py > src/wstypist/data/en_freq_5000.tsv
"""
import sys

from wordfreq import top_n_list, word_frequency

N_WORDS = 5000
SINGLE_LETTER_WORDS = {"a", "i"}


def main():
    out = sys.stdout
    out.write("# English word frequencies, top 5000 alphabetic words.\n")
    out.write("# Source: wordfreq 3.1 'en' large list (CC-BY-SA 4.0), counts per 1e9 tokens.\n")
    out.write("# Columns: word<TAB>count\n")
    n = 0
    for word in top_n_list("en", 20000):
        if not (word.isascii() and word.isalpha()):
            continue
        if len(word) == 1 and word not in SINGLE_LETTER_WORDS:
            continue
        count = max(1, round(word_frequency(word, "en") * 1e9))
        out.write(f"{word}\t{count}\n")
        n += 1
        if n == N_WORDS:
            break


if __name__ == "__main__":
    main()
