"""Parameter recovery check: simulate with known params, fit them back.

A short-trained agent types 200 words under hidden parameters; block-level
metric means/SDs of that run become the target table, and the optimizer
searches p_f with the others pinned near their hidden values.
"""
import time

import numpy as np

from wstypist.cases import eval_word_list, make_factory
from wstypist.env import CognitiveParams, EnvConfig
from wstypist.fit import ParamBounds, block_values, divergence_from_records, minimize, objective
from wstypist.lexicon import default_training_set
from wstypist.metrics import ReferenceTable
from wstypist.policy import TrainConfig, simulate, train

HIDDEN = CognitiveParams(0.1, 0.30, 0.4, 0.6)


def main():
    t0 = time.time()
    ck = train(make_factory(EnvConfig()), default_training_set(), cfg=TrainConfig(episodes=256, seed=0))
    print(f"trained in {time.time() - t0:.0f}s")
    words = eval_word_list(default_training_set(), 200, 5)
    recs = simulate(ck, make_factory(EnvConfig()), words, HIDDEN, seed=5)
    stats = {m: (float(np.mean(v)), float(np.std(v, ddof=1)))
             for m, v in block_values(recs).items() if len(v) > 1 and np.std(v) > 0}
    tab = ReferenceTable("synthetic", stats)
    print("self divergence", round(divergence_from_records(recs, tab), 4))
    b = ParamBounds({"p_m": (0.099, 0.101), "p_f": (0.15, 0.35), "p_k": (0.399, 0.401), "p_s": (0.599, 0.601)})
    t0 = time.time()
    res = minimize(lambda x: objective(CognitiveParams(*x), ck, tab, n_words=100, seed=0), b, 20, seed=0)
    print(f"fit in {time.time() - t0:.0f}s: p_f={res.best.p_f:.3f} (hidden {HIDDEN.p_f}), "
          f"objective {res.best_objective:.4f}")


if __name__ == "__main__":
    main()
