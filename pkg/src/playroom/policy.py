"""Discrete stochastic policy and value function over world-model state.

The actor and critic are small dense networks reading concat(top-layer h, b).
Training is the clipped-surrogate policy-gradient update with generalized
advantage estimation, run on the most recent episode only (on-policy).
"""

from __future__ import annotations

from typing import Dict, Optional, Tuple

import numpy as np

from .actions import NUM_ACTIONS
from .config import PpoConfig
from .nn import tensor as T
from .nn.adam import Adam
from .nn.layers import (MlpSpec, extract_grads, global_norm_clip, init_mlp,
                        mlp_forward_np, mlp_forward_t, wrap_params)
from .nn.tensor import Tensor

Params = Dict[str, np.ndarray]


def softmax_np(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax_np(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def compute_gae(rewards: np.ndarray, values: np.ndarray, discount: float,
                lam: float) -> Tuple[np.ndarray, np.ndarray]:
    """Backward advantage recursion with a terminal bootstrap value of 0.

    Returns (advantages, returns) where returns = advantages + values.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if rewards.shape != values.shape:
        raise ValueError("rewards and values must have equal length")
    n = len(rewards)
    adv = np.zeros(n, dtype=np.float64)
    gae = 0.0
    for t in range(n - 1, -1, -1):
        v_next = values[t + 1] if t + 1 < n else 0.0
        delta = rewards[t] + discount * v_next - values[t]
        gae = delta + discount * lam * gae
        adv[t] = gae
    return adv, adv + values


class Policy:
    def __init__(self, cfg: PpoConfig, input_dim: int,
                 rng: np.random.Generator):
        self.cfg = cfg
        self.input_dim = input_dim
        self.actor_spec = MlpSpec((input_dim, cfg.hidden, cfg.hidden,
                                   NUM_ACTIONS))
        self.critic_spec = MlpSpec((input_dim, cfg.hidden, cfg.hidden, 1))
        self.params: Params = {}
        self.params.update(init_mlp(self.actor_spec, rng, prefix="actor."))
        self.params.update(init_mlp(self.critic_spec, rng, prefix="critic."))
        self.optim = Adam(self.params, lr=cfg.learning_rate)

    def logits(self, features: np.ndarray) -> np.ndarray:
        return mlp_forward_np(self.params, self.actor_spec, features,
                              prefix="actor.")

    def value(self, features: np.ndarray) -> np.ndarray:
        return mlp_forward_np(self.params, self.critic_spec, features,
                              prefix="critic.")[..., 0]

    def sample_action(self, features: np.ndarray, rng: np.random.Generator
                      ) -> Tuple[int, float, float]:
        """Draw one action; returns (action, logprob, value estimate)."""
        logits = self.logits(features)
        probs = softmax_np(logits)
        a = int(rng.choice(NUM_ACTIONS, p=probs))
        logp = float(log_softmax_np(logits)[a])
        return a, logp, float(self.value(features))

    def entropy(self, features: np.ndarray) -> float:
        lp = log_softmax_np(self.logits(features))
        return float(-(np.exp(lp) * lp).sum(axis=-1).mean())

    def clone_params(self) -> Params:
        return {k: v.copy() for k, v in self.params.items()}

    def ppo_update(self, features: np.ndarray, actions: np.ndarray,
                   logprobs_old: np.ndarray, advantages: np.ndarray,
                   returns: np.ndarray, rng: np.random.Generator
                   ) -> Dict[str, float]:
        """Clipped-surrogate update over the configured epochs and minibatches.

        Advantages are normalized over the whole batch. A non-finite loss
        aborts the update and restores the pre-update parameters.
        """
        cfg = self.cfg
        n = len(actions)
        adv = np.asarray(advantages, dtype=np.float32)
        adv = (adv - adv.mean()) / (adv.std() + 1e-8)
        feats = np.asarray(features, dtype=np.float32)
        ret = np.asarray(returns, dtype=np.float32)
        lp_old = np.asarray(logprobs_old, dtype=np.float32)
        snapshot = self.clone_params()
        last = {"loss": 0.0, "actor": 0.0, "value": 0.0, "entropy": 0.0,
                "aborted": 0.0}
        for _ in range(cfg.epochs):
            order = rng.permutation(n)
            for lo in range(0, n, cfg.minibatch_size):
                idx = order[lo:lo + cfg.minibatch_size]
                stats = self._minibatch_step(feats[idx], actions[idx],
                                             lp_old[idx], adv[idx], ret[idx])
                if stats is None:
                    self.params.clear()
                    self.params.update(snapshot)
                    last["aborted"] = 1.0
                    return last
                last.update(stats)
        return last

    def _minibatch_step(self, feats, actions, lp_old, adv, ret
                        ) -> Optional[Dict[str, float]]:
        cfg = self.cfg
        tp = wrap_params(self.params)
        logits = mlp_forward_t(tp, self.actor_spec, Tensor(feats),
                               prefix="actor.")
        lp_all = T.log_softmax(logits)
        lp = T.take_per_row(lp_all, actions)
        ratio = T.exp(T.sub(lp, T.constant(lp_old)))
        adv_t = T.constant(adv)
        surr = T.minimum(T.mul(ratio, adv_t),
                         T.mul(T.clamp(ratio, 1.0 - cfg.clip_eps,
                                       1.0 + cfg.clip_eps), adv_t))
        actor_loss = T.neg(T.tmean(surr))
        ent = T.neg(T.tsum(T.mul(T.exp(lp_all), lp_all), axis=-1))
        entropy = T.tmean(ent)
        v = mlp_forward_t(tp, self.critic_spec, Tensor(feats),
                          prefix="critic.")
        vdiff = T.sub(v, T.constant(ret.reshape(-1, 1)))
        value_loss = T.tmean(T.square(vdiff))
        loss = T.add(actor_loss,
                     T.sub(T.mul(T.constant(np.float32(cfg.value_coef)),
                                 value_loss),
                           T.mul(T.constant(np.float32(cfg.entropy_coef)),
                                 entropy)))
        if not np.isfinite(loss.data):
            return None
        loss.backward()
        grads = global_norm_clip(extract_grads(tp), cfg.grad_clip)
        self.optim.update(self.params, grads)
        return {"loss": float(loss.data), "actor": float(actor_loss.data),
                "value": float(value_loss.data),
                "entropy": float(entropy.data), "aborted": 0.0}
