"""The five intrinsic reward signals and their learned auxiliary parts.

All rewards are computed after an episode finishes, from the logged
(observation, action, model-state) stream, and never mutate world-model
parameters. Exactly one kind is active per run:

    adversarial    per-step masked one-step prediction loss of the world model
    disagreement   variance across an ensemble of next-belief predictors
    rnd            prediction error against a frozen random embedding network
    delta-progress loss improvement over a parameter snapshot from earlier
    gamma-progress loss improvement over an exponentially mixed anchor
"""

from __future__ import annotations

from typing import Dict, List, Optional, Tuple

import numpy as np

from .actions import NUM_ACTIONS
from .config import RewardConfig
from .nn import tensor as T
from .nn.adam import Adam
from .nn.layers import (MlpSpec, extract_grads, init_mlp, mlp_forward_np,
                        mlp_forward_t, wrap_params)
from .nn.tensor import Tensor
from .observation import (BELIEF_DIM, OBS_DIM, obs_to_belief_target,
                          visibility_mask)
from .replay import EpisodeRecord
from .world_model import WorldModel, WorldModelState, one_hot_actions

Params = Dict[str, np.ndarray]

_STD_EPS = 1e-8


class RewardStandardizer:
    """Divides rewards by a running standard deviation; keeps the sign.

    No mean subtraction: progress rewards must stay negative when the model
    got worse. Scaling by a positive scalar also preserves reward ordering.
    """

    def __init__(self):
        self.count = 0
        self.mean = 0.0
        self.m2 = 0.0

    def update(self, values: np.ndarray) -> None:
        for v in np.asarray(values, dtype=np.float64).reshape(-1):
            self.count += 1
            d = v - self.mean
            self.mean += d / self.count
            self.m2 += d * (v - self.mean)

    @property
    def std(self) -> float:
        if self.count < 2:
            return 1.0
        return float(np.sqrt(self.m2 / self.count))

    def normalize(self, rewards: np.ndarray) -> np.ndarray:
        return np.asarray(rewards, dtype=np.float64) / (self.std + _STD_EPS)


def _episode_initial_state(episode: EpisodeRecord) -> WorldModelState:
    return WorldModelState(episode.h[0].copy(), episode.c[0].copy(),
                           episode.b[0].copy())


def policy_state_inputs(obs: np.ndarray, h: np.ndarray, b: np.ndarray,
                        actions: np.ndarray) -> np.ndarray:
    """(T, features) inputs the acting policy saw, plus the one-hot action.

    h is the stored pre-assimilation recurrent stack; assimilation only
    touches b, so the post-assimilation belief is rebuilt from obs.
    """
    mask = visibility_mask(obs)
    tgt = obs_to_belief_target(obs)
    b_post = b * (1.0 - mask) + tgt * mask
    return np.concatenate([h[:, -1, :], b_post,
                           one_hot_actions(actions)], axis=-1).astype(np.float32)


# ---------- adversarial ----------

def reward_adversarial(episode: EpisodeRecord, wm: WorldModel,
                       params: Optional[Params] = None) -> np.ndarray:
    """Per-step masked model loss; the first step has no prediction, so 0."""
    losses, _ = wm.replay_losses(episode.obs, episode.actions,
                                 _episode_initial_state(episode), params=params)
    return losses


# ---------- disagreement ----------

class DisagreementEnsemble:
    """K independently initialized next-belief predictors.

    Each member maps (top-layer h, post-assimilation belief, one-hot action)
    to the next belief target; the reward is the per-dim population variance
    across members, averaged over output dims.
    """

    def __init__(self, cfg: RewardConfig, lstm_hidden: int,
                 rng: np.random.Generator):
        self.cfg = cfg
        in_dim = lstm_hidden + BELIEF_DIM + NUM_ACTIONS
        self.spec = MlpSpec((in_dim, cfg.ensemble_hidden, cfg.ensemble_hidden,
                             BELIEF_DIM), activation="relu")
        self.members: List[Params] = [init_mlp(self.spec, rng)
                                      for _ in range(cfg.ensemble_size)]
        self.optims = [Adam(m, lr=cfg.learning_rate) for m in self.members]

    def predictions(self, x: np.ndarray) -> np.ndarray:
        """(K, n, BELIEF_DIM) member outputs for inputs (n, in_dim)."""
        return np.stack([mlp_forward_np(m, self.spec, x) for m in self.members])

    def reward(self, episode: EpisodeRecord) -> np.ndarray:
        x = policy_state_inputs(episode.obs, episode.h, episode.b,
                                episode.actions)
        preds = self.predictions(x)
        return preds.var(axis=0).mean(axis=-1)

    def train(self, x: np.ndarray, targets: np.ndarray, weights: np.ndarray,
              rng: np.random.Generator) -> float:
        """One update: every member gets its own shuffled minibatch."""
        n = len(x)
        mb = min(self.cfg.ensemble_minibatch, n)
        total = 0.0
        for member, opt in zip(self.members, self.optims):
            idx = rng.choice(n, size=mb, replace=False)
            tp = wrap_params(member)
            pred = mlp_forward_t(tp, self.spec, Tensor(x[idx]))
            err = T.mul(T.square(T.sub(pred, T.constant(targets[idx]))),
                        T.constant(weights[idx]))
            loss = T.mul(T.tsum(err),
                         T.constant(np.asarray(1.0 / mb, dtype=np.float32)))
            loss.backward()
            opt.update(member, extract_grads(tp))
            total += float(loss.data)
        return total / len(self.members)


def transition_dataset(episode: EpisodeRecord
                       ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(inputs, next-belief targets, visibility weights) for predictor training."""
    x = policy_state_inputs(episode.obs, episode.h, episode.b,
                            episode.actions)[:-1]
    nxt = episode.obs[1:]
    return x, obs_to_belief_target(nxt).astype(np.float32), \
        visibility_mask(nxt).astype(np.float32)


# ---------- random network distillation ----------

class ObsNormalizer:
    """Running per-dim whitening with a symmetric clip."""

    def __init__(self, dim: int, clip: float):
        self.clip = clip
        self.count = 0
        self.mean = np.zeros(dim, dtype=np.float64)
        self.m2 = np.zeros(dim, dtype=np.float64)

    def update(self, obs: np.ndarray) -> None:
        for row in np.asarray(obs, dtype=np.float64).reshape(-1, self.mean.size):
            self.count += 1
            d = row - self.mean
            self.mean += d / self.count
            self.m2 += d * (row - self.mean)

    def normalize(self, obs: np.ndarray) -> np.ndarray:
        if self.count < 2:
            return np.clip(obs, -self.clip, self.clip).astype(np.float32)
        std = np.sqrt(self.m2 / self.count) + 1e-8
        z = (obs - self.mean) / std
        return np.clip(z, -self.clip, self.clip).astype(np.float32)


class RndReward:
    """Frozen random target network, trained predictor, shared whitening."""

    def __init__(self, cfg: RewardConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.spec = MlpSpec((OBS_DIM, cfg.rnd_hidden, cfg.rnd_hidden,
                             cfg.rnd_embed_dim), activation="relu")
        self.target: Params = init_mlp(self.spec, rng)
        self.predictor: Params = init_mlp(self.spec, rng)
        self.optim = Adam(self.predictor, lr=cfg.learning_rate)
        self.normalizer = ObsNormalizer(OBS_DIM, cfg.rnd_obs_clip)

    def reward(self, obs: np.ndarray) -> np.ndarray:
        z = self.normalizer.normalize(obs)
        diff = (mlp_forward_np(self.predictor, self.spec, z)
                - mlp_forward_np(self.target, self.spec, z))
        return np.sum(np.square(diff), axis=-1)

    def train(self, obs: np.ndarray, rng: np.random.Generator) -> float:
        """One predictor update on a minibatch of observations."""
        n = len(obs)
        mb = min(self.cfg.rnd_minibatch, n)
        idx = rng.choice(n, size=mb, replace=False)
        self.normalizer.update(obs[idx])
        z = self.normalizer.normalize(obs[idx])
        frozen = mlp_forward_np(self.target, self.spec, z)
        tp = wrap_params(self.predictor)
        pred = mlp_forward_t(tp, self.spec, Tensor(z))
        loss = T.mul(T.tsum(T.square(T.sub(pred, T.constant(frozen)))),
                     T.constant(np.asarray(1.0 / mb, dtype=np.float32)))
        loss.backward()
        self.optim.update(self.predictor, extract_grads(tp))
        return float(loss.data)


# ---------- learning progress ----------

class ProgressAnchor:
    """Historical world-model parameters used as the comparison baseline.

    delta mode refreshes the anchor from the live model on an env-step
    schedule; gamma mode mixes the anchor toward the live model after every
    world-model update (gamma = 1 freezes the anchor forever).
    """

    def __init__(self, cfg: RewardConfig, wm: WorldModel, mode: str):
        if mode not in ("delta", "gamma"):
            raise ValueError(f"unknown progress mode: {mode}")
        self.cfg = cfg
        self.mode = mode
        self.params: Params = wm.clone_params()
        self._anchor_step = 0

    def reward(self, episode: EpisodeRecord, wm: WorldModel) -> np.ndarray:
        s0 = _episode_initial_state(episode)
        old, _ = wm.replay_losses(episode.obs, episode.actions, s0,
                                  params=self.params)
        new, _ = wm.replay_losses(episode.obs, episode.actions, s0)
        return old - new

    def after_env_steps(self, total_env_steps: int, wm: WorldModel) -> bool:
        """delta mode: refresh the anchor once the lag budget has elapsed."""
        if self.mode != "delta":
            return False
        if total_env_steps - self._anchor_step >= self.cfg.delta_steps:
            self.params = wm.clone_params()
            self._anchor_step = total_env_steps
            return True
        return False

    def after_model_update(self, wm: WorldModel) -> None:
        """gamma mode: exponential mixing toward the live parameters."""
        if self.mode != "gamma":
            return
        g = self.cfg.gamma_mix
        for k, v in self.params.items():
            v *= g
            v += (1.0 - g) * wm.params[k]
