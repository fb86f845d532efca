"""Regenerate the bundled surrogate word sets from the bundled frequency list."""
from wstypist.lexicon import (DEFAULT_CAPS_SET, DEFAULT_TRAIN_SET, capitalized_set,
                              load_frequency_list, DEFAULT_FREQ_LIST, save_wordset,
                              surrogate_training_set)

if __name__ == "__main__":
    lex = load_frequency_list(DEFAULT_FREQ_LIST)
    train = surrogate_training_set(lex)
    save_wordset(train, DEFAULT_TRAIN_SET)
    caps = capitalized_set(train)
    save_wordset(caps, DEFAULT_CAPS_SET)
    print(f"{DEFAULT_TRAIN_SET}: {len(train)} words")
    print(f"{DEFAULT_CAPS_SET}: {len(caps)} words")
