"""Supervisor agent: factored categorical policy trained with clipped PPO.

The network is a two-layer tanh MLP with a gaze head (3 logits), a finger
head (4 logits) and a value head, written in numpy with hand-derived
backprop so that gradients can be checked against finite differences.
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import os
import tempfile
import warnings
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .env import PICK, NOACT, Action, CognitiveParams, EnvConfig, TypingEnv, pick_choice, shaping_reward
from .lexicon import WordSet, sample_word
from .metrics import TypingRecord
from .suggest import levenshtein

log = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1
N_GAZE, N_FINGER = 3, 4
_NEG = -1e9


# ---------------------------------------------------------------- network

def init_params(obs_dim: int, hidden: Sequence[int] = (64, 64), seed: int = 0) -> dict[str, np.ndarray]:
    """Orthogonal init; small gain on the policy heads so early behaviour is near uniform."""
    rng = np.random.default_rng(seed)

    def ortho(n_in, n_out, gain):
        a = rng.normal(size=(max(n_in, n_out), min(n_in, n_out)))
        q, r = np.linalg.qr(a)
        q = q * np.sign(np.diag(r))
        w = q if n_in >= n_out else q.T
        return gain * w[:n_in, :n_out]

    p = {}
    sizes = [obs_dim, *hidden]
    for i in range(len(hidden)):
        p[f"W{i}"] = ortho(sizes[i], sizes[i + 1], math.sqrt(2))
        p[f"b{i}"] = np.zeros(sizes[i + 1])
    h = sizes[-1]
    p["Wg"], p["bg"] = ortho(h, N_GAZE, 0.01), np.zeros(N_GAZE)
    p["Wf"], p["bf"] = ortho(h, N_FINGER, 0.01), np.zeros(N_FINGER)
    p["Wv"], p["bv"] = ortho(h, 1, 1.0), np.zeros(1)
    return p


def n_hidden(params) -> int:
    return sum(1 for k in params if k.startswith("W") and k[1:].isdigit())


def forward(params, x: np.ndarray):
    """Returns gaze logits, finger logits, values and the activations needed for backprop."""
    acts = [x]
    h = x
    for i in range(n_hidden(params)):
        h = np.tanh(h @ params[f"W{i}"] + params[f"b{i}"])
        acts.append(h)
    zg = h @ params["Wg"] + params["bg"]
    zf = h @ params["Wf"] + params["bf"]
    v = (h @ params["Wv"] + params["bv"])[:, 0]
    return zg, zf, v, acts


def _log_softmax(z: np.ndarray, mask: np.ndarray | None) -> np.ndarray:
    if mask is not None:
        z = np.where(mask, z, _NEG)
    z = z - z.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def head_probs(params, x, gaze_mask=None, finger_mask=None):
    zg, zf, v, _ = forward(params, np.atleast_2d(x))
    return np.exp(_log_softmax(zg, gaze_mask)), np.exp(_log_softmax(zf, finger_mask)), v


def act(obs: np.ndarray, params, rng: np.random.Generator | None = None, greedy: bool = False,
        gaze_mask=None, finger_mask=None):
    """Sample (or argmax) one action per row; returns actions, joint log-probs, values."""
    x = np.atleast_2d(obs)
    zg, zf, v, _ = forward(params, x)
    lg = _log_softmax(zg, gaze_mask)
    lf = _log_softmax(zf, finger_mask)
    if greedy:
        ag = lg.argmax(axis=1)
        af = lf.argmax(axis=1)
    else:
        # inverse-CDF sampling, one uniform per head per row
        u = rng.random((x.shape[0], 2))
        ag = (np.exp(lg).cumsum(axis=1) < u[:, :1]).sum(axis=1).clip(max=N_GAZE - 1)
        af = (np.exp(lf).cumsum(axis=1) < u[:, 1:]).sum(axis=1).clip(max=N_FINGER - 1)
    rows = np.arange(x.shape[0])
    logp = lg[rows, ag] + lf[rows, af]
    return ag, af, logp, v


def act_one(obs, params, rng=None, greedy=False, gaze_mask=None, finger_mask=None) -> tuple[Action, float, float]:
    ag, af, logp, v = act(obs, params, rng, greedy, gaze_mask, finger_mask)
    return Action(int(ag[0]), int(af[0])), float(logp[0]), float(v[0])


@dataclass(frozen=True)
class LossConfig:
    clip_eps: float = 0.2
    vf_coef: float = 0.5
    ent_coef: float = 0.01


def ppo_loss_and_grad(params, batch: dict, lc: LossConfig):
    """Clipped surrogate + value MSE - entropy bonus, with exact gradients.

    ``batch`` holds obs, ag, af, logp_old, adv, ret and optional gaze_mask /
    finger_mask arrays.
    """
    x = batch["obs"]
    n = x.shape[0]
    rows = np.arange(n)
    zg, zf, v, acts = forward(params, x)
    gm, fm = batch.get("gaze_mask"), batch.get("finger_mask")
    lg, lf = _log_softmax(zg, gm), _log_softmax(zf, fm)
    pg, pf = np.exp(lg), np.exp(lf)
    logp = lg[rows, batch["ag"]] + lf[rows, batch["af"]]
    ratio = np.exp(logp - batch["logp_old"])
    adv = batch["adv"]
    surr1 = ratio * adv
    surr2 = np.clip(ratio, 1 - lc.clip_eps, 1 + lc.clip_eps) * adv
    pol_loss = -np.mean(np.minimum(surr1, surr2))
    unclipped = surr1 <= surr2
    d_logp = np.where(unclipped, -adv * ratio, 0.0) / n

    ent_g = -np.sum(np.where(pg > 0, pg * lg, 0.0), axis=1)
    ent_f = -np.sum(np.where(pf > 0, pf * lf, 0.0), axis=1)
    ent = np.mean(ent_g + ent_f)
    v_err = v - batch["ret"]
    v_loss = np.mean(v_err ** 2)
    loss = pol_loss + lc.vf_coef * v_loss - lc.ent_coef * ent

    def head_grad(p, lp, a, ent_h):
        onehot = np.zeros_like(p)
        onehot[rows, a] = 1.0
        g = d_logp[:, None] * (onehot - p)
        # dH/dz_j = -p_j (log p_j + H)
        plogp = np.where(p > 0, p * lp, 0.0)
        dH = -(plogp + p * ent_h[:, None])
        return g - (lc.ent_coef / n) * dH

    dzg = head_grad(pg, lg, batch["ag"], ent_g)
    dzf = head_grad(pf, lf, batch["af"], ent_f)
    dv = lc.vf_coef * 2.0 * v_err / n

    h = acts[-1]
    grads = {
        "Wg": h.T @ dzg, "bg": dzg.sum(0),
        "Wf": h.T @ dzf, "bf": dzf.sum(0),
        "Wv": h.T @ dv[:, None], "bv": np.array([dv.sum()]),
    }
    dh = dzg @ params["Wg"].T + dzf @ params["Wf"].T + dv[:, None] @ params["Wv"].T
    for i in reversed(range(n_hidden(params))):
        da = dh * (1.0 - acts[i + 1] ** 2)
        grads[f"W{i}"] = acts[i].T @ da
        grads[f"b{i}"] = da.sum(0)
        dh = da @ params[f"W{i}"].T
    stats = {"loss": float(loss), "policy_loss": float(pol_loss), "value_loss": float(v_loss),
             "entropy": float(ent), "clip_frac": float(np.mean(~unclipped))}
    return float(loss), grads, stats


def gae(rewards: np.ndarray, values: np.ndarray, dones: np.ndarray, gamma: float, lam: float):
    """Advantages and returns for a flat sequence of steps; ``dones`` marks episode ends."""
    n = len(rewards)
    adv = np.zeros(n)
    last = 0.0
    for t in reversed(range(n)):
        nonterminal = 0.0 if dones[t] else 1.0
        next_v = values[t + 1] if t + 1 < n else 0.0
        delta = rewards[t] + gamma * next_v * nonterminal - values[t]
        last = delta + gamma * lam * nonterminal * last
        adv[t] = last
    return adv, adv + values


@dataclass
class Adam:
    lr: float
    b1: float = 0.9
    b2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def step(self, params, grads):
        self.t += 1
        for k, g in grads.items():
            if k not in self.m:
                self.m[k] = np.zeros_like(g)
                self.v[k] = np.zeros_like(g)
            self.m[k] = self.b1 * self.m[k] + (1 - self.b1) * g
            self.v[k] = self.b2 * self.v[k] + (1 - self.b2) * g * g
            mh = self.m[k] / (1 - self.b1 ** self.t)
            vh = self.v[k] / (1 - self.b2 ** self.t)
            params[k] = params[k] - self.lr * mh / (np.sqrt(vh) + self.eps)


# ---------------------------------------------------------------- curriculum

@dataclass(frozen=True)
class CurriculumSchedule:
    stages: tuple = ((0.00, 0), (0.25, 1), (0.50, 2), (0.75, 3))

    def __post_init__(self):
        fr = [s[0] for s in self.stages]
        ds = [s[1] for s in self.stages]
        if not fr or fr[0] != 0.0 or any(b <= a for a, b in zip(fr, fr[1:])):
            raise ValueError("curriculum fractions must start at 0 and strictly increase")
        if any(b < a for a, b in zip(ds, ds[1:])):
            raise ValueError("curriculum distances must be nondecreasing")

    def max_distance(self, progress: float) -> int:
        d = self.stages[0][1]
        for frac, dist in self.stages:
            if progress >= frac:
                d = dist
        return d

    def stage(self, progress: float) -> int:
        return sum(1 for frac, _ in self.stages if progress >= frac) - 1


def apply_curriculum_mask(action: Action, state, schedule: CurriculumSchedule, progress: float) -> tuple[Action, bool]:
    """Veto picks of suggestions too far from the target; the veto turns into NoAct."""
    if action.finger_cmd != PICK:
        return action, False
    word = pick_choice(state.sugg_list, state.target)
    if word and levenshtein(word, state.target) <= schedule.max_distance(progress):
        return action, False
    return Action(action.gaze_cmd, NOACT), True


# ---------------------------------------------------------------- training

@dataclass(frozen=True)
class TrainConfig:
    episodes: int = 5000
    lr: float = 3e-4
    clip_eps: float = 0.2
    gae_gamma: float = 0.99
    gae_lambda: float = 0.95
    epochs_per_batch: int = 10
    batch_episodes: int = 32
    minibatch_size: int = 64
    vf_coef: float = 0.5
    ent_coef: float = 0.03
    finetune_ent_coef: float = 0.01
    stall_penalty: float = 0.02
    max_grad_norm: float = 0.5
    hidden: tuple = (64, 64)
    curriculum: CurriculumSchedule = field(default_factory=CurriculumSchedule)
    seed: int = 0
    checkpoint_every: int = 0  # episodes; 0 disables periodic checkpoints
    checkpoint_dir: str | None = None
    early_stop_window: int = 200
    early_stop_tol: float = 0.01
    dense_time_cost: bool = True  # pay the time term step by step; the episode return is unchanged

    def to_dict(self) -> dict:
        d = asdict(self)
        d["curriculum"] = [list(s) for s in self.curriculum.stages]
        d["hidden"] = list(self.hidden)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        if "curriculum" in d and not isinstance(d["curriculum"], CurriculumSchedule):
            d["curriculum"] = CurriculumSchedule(tuple(tuple(s) for s in d["curriculum"]))
        if "hidden" in d:
            d["hidden"] = tuple(d["hidden"])
        return cls(**d)


@dataclass
class Checkpoint:
    params: dict
    adam: Adam
    episode: int
    progress: float
    rng_state: dict
    fingerprint: str
    obs_dim: int
    train_config: dict
    env_config: dict
    curve: list = field(default_factory=list)  # (episode, mean_reward, mean_picked)

    @property
    def curriculum_stage(self) -> int:
        return TrainConfig.from_dict(self.train_config).curriculum.stage(self.progress)


def config_fingerprint(env_cfg: EnvConfig, obs_dim: int, hidden) -> str:
    blob = json.dumps({"env": env_cfg.to_dict(), "obs_dim": obs_dim, "hidden": list(hidden)}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _clip_grads(grads, max_norm):
    norm = math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if not math.isfinite(norm):
        raise FloatingPointError("non-finite gradient norm")
    if max_norm and norm > max_norm:
        scale = max_norm / norm
        grads = {k: g * scale for k, g in grads.items()}
    return grads, norm


def ppo_update(traj: dict, params, adam: Adam, cfg: TrainConfig, rng: np.random.Generator,
               ent_coef: float | None = None) -> dict:
    """Several epochs of minibatch PPO on one batch of transitions (updates ``params`` in place)."""
    adv, ret = gae(traj["rew"], traj["val"], traj["done"], cfg.gae_gamma, cfg.gae_lambda)
    adv_n = (adv - adv.mean()) / (adv.std() + 1e-8)
    lc = LossConfig(clip_eps=cfg.clip_eps, vf_coef=cfg.vf_coef,
                    ent_coef=cfg.ent_coef if ent_coef is None else ent_coef)
    n = len(adv)
    stats = {}
    for _ in range(cfg.epochs_per_batch):
        order = rng.permutation(n)
        for lo in range(0, n, cfg.minibatch_size):
            idx = order[lo:lo + cfg.minibatch_size]
            batch = {"obs": traj["obs"][idx], "ag": traj["ag"][idx], "af": traj["af"][idx],
                     "logp_old": traj["logp"][idx], "adv": adv_n[idx], "ret": ret[idx],
                     "gaze_mask": traj["gmask"][idx], "finger_mask": traj["fmask"][idx]}
            loss, grads, stats = ppo_loss_and_grad(params, batch, lc)
            if not math.isfinite(loss):
                raise FloatingPointError(f"non-finite PPO loss: {stats}")
            grads, _ = _clip_grads(grads, cfg.max_grad_norm)
            adam.step(params, grads)
    return stats


def run_lockstep(envs: list[TypingEnv], tasks: list[tuple[str, CognitiveParams]], params,
                 rng: np.random.Generator, *, greedy: bool = False, schedule: CurriculumSchedule | None = None,
                 progress: float = 1.0, collect: bool = False, dense_time_cost: bool = False,
                 stall_penalty: float = 0.0):
    """Run one episode per env in lockstep (batched forward passes).

    ``stall_penalty`` is charged (training signal only) for a step that emits no
    event, e.g. an illegal pick or a NoAct without a gaze move; such steps cost
    no time, so otherwise nothing stops a greedy policy from repeating them.
    Returns (records, episode_rewards, transitions or None).
    """
    k = len(tasks)
    envs = envs[:k]
    obs = np.stack([env.reset(w, p, rng).vector() for env, (w, p) in zip(envs, tasks)])
    gm = np.stack([e.cfg.gaze_mask() for e in envs])
    fm = np.stack([e.cfg.finger_mask() for e in envs])
    alive = np.ones(k, dtype=bool)
    ep_reward = np.zeros(k)
    steps = [[] for _ in range(k)] if collect else None
    while alive.any():
        idx = np.nonzero(alive)[0]
        ag, af, logp, v = act(obs[idx], params, rng, greedy, gm[idx], fm[idx])
        for j, i in enumerate(idx):
            env = envs[i]
            a = Action(int(ag[j]), int(af[j]))
            shaping = 0.0
            if schedule is not None:
                a, masked = apply_curriculum_mask(a, env.state, schedule, progress)
                if masked:
                    shaping += shaping_reward("Masked", env.cfg.reward, env.training_progress)
            t0 = env.state.elapsed_s
            res = env.step(a)
            shaping += res.shaping
            if not res.events:
                shaping -= stall_penalty
            r = res.reward
            if dense_time_cost:
                # redistribute -gamma*T/WL over the steps that spent the time
                scale = env.cfg.reward.gamma / len(env.state.target)
                r -= scale * (env.state.elapsed_s - t0)
                if res.done:
                    r += scale * env.state.elapsed_s
            if collect:
                steps[i].append((obs[i].copy(), int(ag[j]), int(af[j]), float(logp[j]), float(v[j]),
                                 r + shaping, res.done))
            obs[i] = res.obs.vector()
            if res.done:
                ep_reward[i] = res.reward
                alive[i] = False
    records = [env.record() for env in envs]
    traj = None
    if collect:
        flat = [s for ep in steps for s in ep]
        traj = {
            "obs": np.stack([s[0] for s in flat]),
            "ag": np.array([s[1] for s in flat]), "af": np.array([s[2] for s in flat]),
            "logp": np.array([s[3] for s in flat]), "val": np.array([s[4] for s in flat]),
            "rew": np.array([s[5] for s in flat]), "done": np.array([s[6] for s in flat]),
            "gmask": np.concatenate([np.repeat(gm[i:i + 1], len(steps[i]), 0) for i in range(k)]),
            "fmask": np.concatenate([np.repeat(fm[i:i + 1], len(steps[i]), 0) for i in range(k)]),
        }
    return records, ep_reward, traj


def _new_checkpoint(env_cfg: EnvConfig, obs_dim: int, cfg: TrainConfig) -> Checkpoint:
    params = init_params(obs_dim, cfg.hidden, seed=cfg.seed)
    return Checkpoint(params=params, adam=Adam(lr=cfg.lr), episode=0, progress=0.0,
                      rng_state=np.random.default_rng(cfg.seed + 1).bit_generator.state,
                      fingerprint=config_fingerprint(env_cfg, obs_dim, cfg.hidden), obs_dim=obs_dim,
                      train_config=cfg.to_dict(), env_config=env_cfg.to_dict())


def default_param_sampler(rng: np.random.Generator) -> CognitiveParams:
    return CognitiveParams.sample(rng)


def _train_loop(ckpt: Checkpoint, env_factory: Callable[[], TypingEnv], wordset: WordSet,
                param_sampler, cfg: TrainConfig, *, fixed_progress: float | None = None,
                early_stop: bool = False, curve_path: str | Path | None = None) -> Checkpoint:
    rng = np.random.default_rng()
    rng.bit_generator.state = ckpt.rng_state
    envs = [env_factory() for _ in range(cfg.batch_episodes)]
    total = cfg.episodes
    start_ep = ckpt.episode
    done_eps = 0
    window: list[float] = []
    window_means: list[float] = []
    next_ckpt = cfg.checkpoint_every
    while done_eps < total:
        n = min(cfg.batch_episodes, total - done_eps)
        progress = fixed_progress if fixed_progress is not None else done_eps / total
        for env in envs:
            env.training_progress = progress
        tasks = [(sample_word(wordset, rng), param_sampler(rng)) for _ in range(n)]
        records, ep_rewards, traj = run_lockstep(envs, tasks, ckpt.params, rng, schedule=cfg.curriculum,
                                                 progress=progress, collect=True,
                                                 dense_time_cost=cfg.dense_time_cost,
                                                 stall_penalty=cfg.stall_penalty)
        ent = cfg.ent_coef * (1.0 - progress) if fixed_progress is None else cfg.finetune_ent_coef
        ppo_update(traj, ckpt.params, ckpt.adam, cfg, rng, ent_coef=ent)
        done_eps += n
        ckpt.episode += n
        ckpt.progress = progress if fixed_progress is not None else done_eps / total
        picked = float(np.mean([r.picks > 0 for r in records]))
        ckpt.curve.append((ckpt.episode, float(np.mean(ep_rewards)), picked))
        if cfg.checkpoint_every and cfg.checkpoint_dir and done_eps >= next_ckpt:
            ckpt.rng_state = rng.bit_generator.state
            save_checkpoint(ckpt, Path(cfg.checkpoint_dir) / f"ckpt_{ckpt.episode:07d}.json")
            next_ckpt += cfg.checkpoint_every
        if early_stop:
            window.extend(ep_rewards.tolist())
            while len(window) >= cfg.early_stop_window:
                window_means.append(float(np.mean(window[:cfg.early_stop_window])))
                window = window[cfg.early_stop_window:]
            if len(window_means) >= 3:
                a, b, c = window_means[-3:]
                gains = [(b - a) / max(abs(a), 1e-6), (c - b) / max(abs(b), 1e-6)]
                if all(g < cfg.early_stop_tol for g in gains):
                    log.info("early stop after %d fine-tuning episodes", done_eps)
                    break
    ckpt.rng_state = rng.bit_generator.state
    if curve_path is not None:
        write_curve(ckpt.curve, curve_path)
    log.info("trained %d episodes (from %d)", ckpt.episode - start_ep, start_ep)
    return ckpt


def train(env_factory: Callable[[], TypingEnv], wordset: WordSet, param_sampler=default_param_sampler,
          cfg: TrainConfig = TrainConfig(), curve_path=None) -> Checkpoint:
    probe = env_factory()
    ckpt = _new_checkpoint(probe.cfg, probe.obs_dim, cfg)
    return _train_loop(ckpt, env_factory, wordset, param_sampler, cfg, curve_path=curve_path)


def fine_tune(base: Checkpoint, env_factory: Callable[[], TypingEnv], wordset: WordSet,
              param_sampler=default_param_sampler, cfg: TrainConfig | None = None, curve_path=None) -> Checkpoint:
    """Continue training in a new environment at a tenth of the base learning rate, with early stopping."""
    probe = env_factory()
    if probe.obs_dim != base.obs_dim:
        raise ValueError(f"observation size changed ({base.obs_dim} -> {probe.obs_dim}); "
                         "this variant must be trained from scratch")
    base_cfg = TrainConfig.from_dict(base.train_config)
    cfg = cfg or base_cfg
    cfg = replace(cfg, lr=base_cfg.lr / 10.0, hidden=base_cfg.hidden)
    ckpt = Checkpoint(params={k: v.copy() for k, v in base.params.items()},
                      adam=Adam(lr=cfg.lr, t=base.adam.t, m={k: v.copy() for k, v in base.adam.m.items()},
                                v={k: v.copy() for k, v in base.adam.v.items()}),
                      episode=base.episode, progress=1.0,
                      rng_state=np.random.default_rng(cfg.seed + 7919).bit_generator.state,
                      fingerprint=config_fingerprint(probe.cfg, probe.obs_dim, cfg.hidden), obs_dim=base.obs_dim,
                      train_config=cfg.to_dict(), env_config=probe.cfg.to_dict(), curve=[])
    return _train_loop(ckpt, env_factory, wordset, param_sampler, cfg, fixed_progress=1.0, early_stop=True,
                       curve_path=curve_path)


def simulate(ckpt_or_params, env_factory: Callable[[], TypingEnv], words: Sequence[str],
             params: CognitiveParams | Sequence[CognitiveParams], seed: int = 0, greedy: bool = True,
             batch: int = 64) -> list[TypingRecord]:
    """Evaluate a policy on a list of words (unmasked, no shaping)."""
    weights = ckpt_or_params.params if isinstance(ckpt_or_params, Checkpoint) else ckpt_or_params
    if isinstance(params, CognitiveParams):
        params = [params] * len(words)
    rng = np.random.default_rng(seed)
    envs = [env_factory() for _ in range(min(batch, len(words)))]
    for e in envs:
        e.training_progress = 1.0
    out = []
    for lo in range(0, len(words), batch):
        tasks = list(zip(words[lo:lo + batch], params[lo:lo + batch]))
        recs, _, _ = run_lockstep(envs, tasks, weights, rng, greedy=greedy)
        out.extend(recs)
    return out


# ---------------------------------------------------------------- persistence

def _enc(a: np.ndarray) -> dict:
    return {"shape": list(a.shape), "data": [float(x) for x in a.ravel()]}


def _dec(d: dict) -> np.ndarray:
    return np.array(d["data"], dtype=np.float64).reshape(d["shape"])


def checkpoint_to_dict(ck: Checkpoint) -> dict:
    return {
        "format": "wstypist-checkpoint", "version": CHECKPOINT_VERSION,
        "params": {k: _enc(v) for k, v in sorted(ck.params.items())},
        "adam": {"lr": ck.adam.lr, "b1": ck.adam.b1, "b2": ck.adam.b2, "eps": ck.adam.eps, "t": ck.adam.t,
                 "m": {k: _enc(v) for k, v in sorted(ck.adam.m.items())},
                 "v": {k: _enc(v) for k, v in sorted(ck.adam.v.items())}},
        "episode": ck.episode, "progress": ck.progress, "rng_state": ck.rng_state,
        "fingerprint": ck.fingerprint, "obs_dim": ck.obs_dim,
        "train_config": ck.train_config, "env_config": ck.env_config,
        "curve": [list(c) for c in ck.curve],
    }


def checkpoint_from_dict(d: dict) -> Checkpoint:
    if d.get("format") != "wstypist-checkpoint":
        raise ValueError("not a checkpoint file")
    if d.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"checkpoint version {d.get('version')} != supported {CHECKPOINT_VERSION}")
    a = d["adam"]
    adam = Adam(lr=a["lr"], b1=a["b1"], b2=a["b2"], eps=a["eps"], t=a["t"],
                m={k: _dec(v) for k, v in a["m"].items()}, v={k: _dec(v) for k, v in a["v"].items()})
    return Checkpoint(params={k: _dec(v) for k, v in d["params"].items()}, adam=adam, episode=d["episode"],
                      progress=d["progress"], rng_state=d["rng_state"], fingerprint=d["fingerprint"],
                      obs_dim=d["obs_dim"], train_config=d["train_config"], env_config=d["env_config"],
                      curve=[tuple(c) for c in d.get("curve", [])])


def save_checkpoint(ck: Checkpoint, path: str | Path) -> None:
    """Atomic write: temp file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(checkpoint_to_dict(ck), sort_keys=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    with os.fdopen(fd, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def load_checkpoint(path: str | Path, expected_fingerprint: str | None = None) -> Checkpoint:
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise ValueError(f"corrupt checkpoint {path}: {e}") from None
    ck = checkpoint_from_dict(d)
    if expected_fingerprint is not None and expected_fingerprint != ck.fingerprint:
        warnings.warn(f"checkpoint {path} was trained under a different config "
                      f"({ck.fingerprint} != {expected_fingerprint})", stacklevel=2)
    return ck


def write_curve(curve, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["episode", "mean_reward", "mean_picked"])
        for ep, r, p in curve:
            w.writerow([ep, repr(float(r)), repr(float(p))])
