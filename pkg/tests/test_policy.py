import json
import warnings
from dataclasses import dataclass, field

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wstypist.env import KEYBOARD, NOACT, PICK, TYPE, Action, CognitiveParams, EnvConfig, RewardConfig, TypingEnv
from wstypist.lexicon import WordSet, default_lexicon
from wstypist.metrics import Event, TypingRecord
from wstypist.policy import (
    CurriculumSchedule, LossConfig, TrainConfig, act, act_one, apply_curriculum_mask, fine_tune, forward,
    gae, head_probs, init_params, load_checkpoint, ppo_loss_and_grad, save_checkpoint, simulate, train,
)
from wstypist.suggest import SuggestionList


def toy_batch(rng, params, n=6, obs_dim=3, ratio_spread=0.05):
    obs = rng.normal(size=(n, obs_dim))
    gm = np.ones((n, 3), bool)
    fm = np.ones((n, 4), bool)
    fm[::2, PICK] = False
    ag = rng.integers(0, 3, n)
    af = np.where(fm[np.arange(n), 1], rng.integers(0, 2, n), rng.integers(0, 2, n))
    zg, zf, _, _ = forward(params, obs)
    lg = zg - np.log(np.exp(zg).sum(1, keepdims=True))
    zf = np.where(fm, zf, -1e9)
    lf = zf - zf.max(1, keepdims=True)
    lf = lf - np.log(np.exp(lf).sum(1, keepdims=True))
    logp = lg[np.arange(n), ag] + lf[np.arange(n), af]
    return {"obs": obs, "ag": ag, "af": af, "logp_old": logp + rng.uniform(-ratio_spread, ratio_spread, n),
            "adv": rng.normal(size=n), "ret": rng.normal(size=n), "gaze_mask": gm, "finger_mask": fm}


@pytest.mark.parametrize("hidden", [(3,), (4, 3)])
def test_gradients_match_finite_differences(hidden):
    rng = np.random.default_rng(11)
    params = init_params(3, hidden, seed=5)
    for k in ("Wg", "Wf"):
        params[k] = rng.normal(scale=0.5, size=params[k].shape)  # away from the near-uniform init
    batch = toy_batch(rng, params)
    lc = LossConfig(clip_eps=0.2, vf_coef=0.5, ent_coef=0.05)
    _, grads, _ = ppo_loss_and_grad(params, batch, lc)
    h = 1e-6
    worst = 0.0
    for k, w in params.items():
        for idx in np.ndindex(w.shape):
            old = w[idx]
            w[idx] = old + h
            lp = ppo_loss_and_grad(params, batch, lc)[0]
            w[idx] = old - h
            lm = ppo_loss_and_grad(params, batch, lc)[0]
            w[idx] = old
            num = (lp - lm) / (2 * h)
            ana = grads[k][idx]
            worst = max(worst, abs(num - ana) / max(abs(num), abs(ana), 1e-6))
    assert worst < 1e-4


def test_clipped_transitions_contribute_nothing():
    rng = np.random.default_rng(0)
    params = init_params(3, (4,), seed=1)
    batch = toy_batch(rng, params)
    batch["logp_old"] = batch["logp_old"] - 0.5  # ratio ~1.65, outside 1 +- 0.2
    batch["adv"] = np.abs(batch["adv"]) + 0.1    # positive advantage pushes further out
    _, grads, stats = ppo_loss_and_grad(params, batch, LossConfig(vf_coef=0.0, ent_coef=0.0))
    assert stats["clip_frac"] == 1.0
    assert all(np.all(g == 0) for g in grads.values())


def test_zero_advantage_leaves_policy_loss_zero():
    rng = np.random.default_rng(2)
    params = init_params(3, (4,), seed=1)
    batch = toy_batch(rng, params)
    batch["adv"] = np.zeros(len(batch["adv"]))
    _, grads, stats = ppo_loss_and_grad(params, batch, LossConfig(vf_coef=0.0, ent_coef=0.0))
    assert stats["policy_loss"] == 0.0
    assert all(np.all(g == 0) for g in grads.values())


def test_positive_advantage_raises_chosen_logit():
    params = init_params(2, (3,), seed=0)
    x = np.array([[0.3, -0.2]])
    zg, zf, _, _ = forward(params, x)
    lg = zg - np.log(np.exp(zg).sum())
    lf = zf - np.log(np.exp(zf).sum())
    batch = {"obs": x, "ag": np.array([2]), "af": np.array([1]), "logp_old": np.array([lg[0, 2] + lf[0, 1]]),
             "adv": np.array([1.0]), "ret": np.zeros(1)}
    _, grads, _ = ppo_loss_and_grad(params, batch, LossConfig(vf_coef=0.0, ent_coef=0.0))
    assert -grads["bg"][2] > 0 and -grads["bf"][1] > 0  # descent direction raises them
    assert -grads["bg"][0] < 0


@given(st.integers(0, 10_000))
@settings(max_examples=30, deadline=None)
def test_head_probabilities_normalised(seed):
    rng = np.random.default_rng(seed)
    params = init_params(15, (8, 8), seed=seed)
    for k in params:
        params[k] = params[k] + rng.normal(scale=1.0, size=params[k].shape)
    x = rng.normal(scale=3.0, size=(5, 15))
    fm = np.ones((5, 4), bool)
    fm[:, PICK] = False
    pg, pf, _ = head_probs(params, x, finger_mask=fm)
    assert np.allclose(pg.sum(1), 1, atol=1e-9) and np.allclose(pf.sum(1), 1, atol=1e-9)
    assert np.all(pf[:, PICK] == 0)
    _, _, logp, _ = act(x, params, rng, finger_mask=fm)
    assert np.all(logp <= 0)


def test_uniform_heads_and_greedy_determinism():
    params = init_params(4, (5,), seed=0)
    for k in ("Wg", "bg", "Wf", "bf"):
        params[k] = np.zeros_like(params[k])
    pg, pf, _ = head_probs(params, np.ones(4))
    assert np.allclose(pg, 1 / 3) and np.allclose(pf, 1 / 4)
    params = init_params(4, (5,), seed=3)
    a = [act_one(np.arange(4.0), params, greedy=True)[0] for _ in range(5)]
    assert len(set(a)) == 1


def test_gae_hand_computed():
    r = np.array([0.0, 1.0, 0.5])
    v = np.array([0.2, 0.4, 0.1])
    d = np.array([False, True, True])
    g, lam = 0.9, 0.8
    d1 = 1.0 - 0.4
    d0 = 0.0 + g * 0.4 - 0.2
    d2 = 0.5 - 0.1
    adv, ret = gae(r, v, d, g, lam)
    assert adv == pytest.approx([d0 + g * lam * d1, d1, d2])
    assert ret == pytest.approx(adv + v)


# -- curriculum

def test_curriculum_examples():
    sch = CurriculumSchedule()
    st_ = type("S", (), {})()
    st_.target = "return"
    st_.sugg_list = SuggestionList("re", ("return", ""))
    assert apply_curriculum_mask(Action(KEYBOARD, PICK), st_, sch, 0.1) == (Action(KEYBOARD, PICK), False)
    st_.sugg_list = SuggestionList("re", ("retuzz", ""))  # distance 2
    assert apply_curriculum_mask(Action(KEYBOARD, PICK), st_, sch, 0.1) == (Action(KEYBOARD, NOACT), True)
    st_.sugg_list = SuggestionList("re", ("retzzz", ""))  # distance 3
    assert apply_curriculum_mask(Action(KEYBOARD, PICK), st_, sch, 0.8)[1] is False
    assert apply_curriculum_mask(Action(KEYBOARD, TYPE), st_, sch, 0.0) == (Action(KEYBOARD, TYPE), False)


@given(st.lists(st.floats(0, 1), min_size=2, max_size=20))
def test_curriculum_monotone(ps):
    sch = CurriculumSchedule()
    ps = sorted(ps)
    ds = [sch.max_distance(p) for p in ps]
    assert ds == sorted(ds)


def test_curriculum_validation():
    with pytest.raises(ValueError):
        CurriculumSchedule(((0.1, 0),))
    with pytest.raises(ValueError):
        CurriculumSchedule(((0.0, 2), (0.5, 1)))


# -- a 2-armed bandit behind the environment interface

@dataclass
class BanditConfig:
    reward: RewardConfig = field(default_factory=RewardConfig)
    reveal_region: int = 1

    def gaze_mask(self):
        return np.ones(3, bool)

    def finger_mask(self):
        return np.array([True, True, False, False])

    def to_dict(self):
        return {"bandit": True}


class _Obs:
    def vector(self):
        return np.array([1.0, 0.0])


@dataclass
class _Res:
    obs: object
    reward: float
    done: bool
    events: list
    shaping: float = 0.0


class BanditEnv:
    """One step per episode: finger Type pays 1, Backspace pays 0."""
    obs_dim = 2

    def __init__(self):
        self.cfg = BanditConfig()
        self.training_progress = 0.0
        self.state = None

    def reset(self, word, params, rng):
        self.state = type("S", (), {"target": word, "elapsed_s": 0.0,
                                    "sugg_list": SuggestionList("", ("", ""))})()
        self.word = word
        self.pay = 0.0
        return _Obs()

    def step(self, a):
        self.pay = 1.0 if a.finger_cmd == TYPE else 0.0
        return _Res(_Obs(), self.pay, True, [Event("Keystroke", 0.0, {})])

    def record(self):
        return TypingRecord(self.word, self.word, [Event("Start", 0.0, {})], 0.0)


def test_bandit_learns_good_arm():
    cfg = TrainConfig(episodes=1024, batch_episodes=32, lr=3e-3, seed=0, curriculum=CurriculumSchedule(((0.0, 5),)))
    ck = train(BanditEnv, WordSet(("arm",)), cfg=cfg)
    a, _, _ = act_one(np.array([1.0, 0.0]), ck.params, greedy=True, finger_mask=np.array([[1, 1, 0, 0]], bool))
    assert a.finger_cmd == TYPE
    assert ck.curve[-1][1] > 0.9


# -- real environment: determinism, checkpoints, fine-tuning

@pytest.fixture(scope="module")
def lex():
    return default_lexicon()


def factory(lex, **kw):
    return lambda: TypingEnv(EnvConfig(**kw), lex)


WORDS = WordSet(("return", "people", "though", "simple", "market"))
SMALL = TrainConfig(episodes=64, batch_episodes=16, epochs_per_batch=2, seed=3)


@pytest.fixture(scope="module")
def small_ckpt(lex):
    return train(factory(lex), WORDS, cfg=SMALL)


def test_identical_seeds_identical_curves(lex, small_ckpt):
    again = train(factory(lex), WORDS, cfg=SMALL)
    assert again.curve == small_ckpt.curve
    assert all(np.array_equal(again.params[k], small_ckpt.params[k]) for k in again.params)


def test_checkpoint_roundtrip(tmp_path, lex, small_ckpt):
    p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
    save_checkpoint(small_ckpt, p1)
    back = load_checkpoint(p1)
    save_checkpoint(back, p2)
    assert p1.read_bytes() == p2.read_bytes()
    words = list(WORDS.words) * 2
    r1 = simulate(small_ckpt, factory(lex), words, CognitiveParams(), seed=9)
    r2 = simulate(back, factory(lex), words, CognitiveParams(), seed=9)
    assert [r.events for r in r1] == [r.events for r in r2]
    assert not list(tmp_path.glob("*.tmp"))


def test_checkpoint_errors(tmp_path, small_ckpt):
    p = tmp_path / "c.json"
    save_checkpoint(small_ckpt, p)
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        load_checkpoint(p, expected_fingerprint="0" * 16)
    assert any("different config" in str(x.message) for x in w)
    d = json.loads(p.read_text())
    d["version"] = 99
    p.write_text(json.dumps(d))
    with pytest.raises(ValueError, match="version"):
        load_checkpoint(p)
    p.write_text("{not json")
    with pytest.raises(ValueError, match="corrupt"):
        load_checkpoint(p)


def test_finetune_lr_and_obs_dim_guard(lex, small_ckpt):
    cfg = TrainConfig(episodes=32, batch_episodes=16, epochs_per_batch=1, seed=3)
    tuned = fine_tune(small_ckpt, factory(lex, variant="NoAutocorrect"), WORDS, cfg=cfg)
    assert tuned.adam.lr == pytest.approx(SMALL.lr / 10)
    assert tuned.env_config["variant"] == "NoAutocorrect"
    assert small_ckpt.env_config["variant"] == "Full"  # base untouched
    with pytest.raises(ValueError, match="from scratch"):
        fine_tune(small_ckpt, factory(lex, variant="Capitalization"), WordSet(("Return",)), cfg=cfg)


def test_periodic_checkpoints(tmp_path, lex):
    cfg = TrainConfig(episodes=32, batch_episodes=16, epochs_per_batch=1, checkpoint_every=16,
                      checkpoint_dir=str(tmp_path))
    train(factory(lex), WORDS, cfg=cfg)
    assert len(list(tmp_path.glob("ckpt_*.json"))) == 2


def test_train_config_roundtrip():
    cfg = TrainConfig(hidden=(32, 16), curriculum=CurriculumSchedule(((0.0, 1), (0.5, 2))))
    assert TrainConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg
