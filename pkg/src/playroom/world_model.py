"""Latent dynamics model with an explicit belief vector.

State is (h, c, b): two LSTM layers' hidden/cell vectors plus a belief vector
in the observation layout minus visibility flags. Assimilation overwrites the
belief entries of currently-visible objects (and proprioception) with observed
values; prediction advances the LSTM on [b, one-hot action] and applies an MLP
delta decoder to b, renormalizing (sin, cos) pairs.

Training is supervised on stored sequences with stored initial states: a
gradient-free burn-in prefix warms the recurrent state, then the masked
squared error of visible components is minimized.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from .actions import NUM_ACTIONS
from .config import WorldModelConfig
from .nn import tensor as T
from .nn.adam import Adam
from .nn.layers import (LstmSpec, MlpSpec, extract_grads, global_norm_clip,
                        init_lstm, init_mlp, lstm_step_np, lstm_step_t,
                        mlp_forward_np, mlp_forward_t, wrap_params)
from .nn.tensor import Tensor
from .observation import (ANGLE_PAIRS, BELIEF_DIM, OBS_DIM, full_belief,
                          obs_to_belief_target, visibility_mask)

Params = Dict[str, np.ndarray]

_PAIR_I = np.array([p[0] for p in ANGLE_PAIRS])
_PAIR_J = np.array([p[1] for p in ANGLE_PAIRS])
_RENORM_EPS = 1e-12


@dataclass
class WorldModelState:
    h: np.ndarray   # (layers, hidden)
    c: np.ndarray   # (layers, hidden)
    b: np.ndarray   # (BELIEF_DIM,)

    def copy(self) -> "WorldModelState":
        return WorldModelState(self.h.copy(), self.c.copy(), self.b.copy())


def one_hot_actions(actions: np.ndarray, dtype=np.float32) -> np.ndarray:
    out = np.zeros(np.shape(actions) + (NUM_ACTIONS,), dtype=dtype)
    np.put_along_axis(out.reshape(-1, NUM_ACTIONS),
                      np.reshape(actions, (-1, 1)).astype(np.int64), 1.0, axis=1)
    return out


def renormalize_pairs_np(b: np.ndarray) -> np.ndarray:
    """Scale each (sin, cos) pair to unit norm (smooth epsilon form)."""
    out = b.copy()
    s = b[..., _PAIR_I]
    c = b[..., _PAIR_J]
    n = np.sqrt(s * s + c * c + _RENORM_EPS)
    out[..., _PAIR_I] = s / n
    out[..., _PAIR_J] = c / n
    return out


def _renormalize_pairs_t(b: Tensor) -> Tensor:
    s = T.gather_columns(b, _PAIR_I)
    c = T.gather_columns(b, _PAIR_J)
    n = T.sqrt(T.add(T.add(T.square(s), T.square(c)),
                     T.constant(np.asarray(_RENORM_EPS, dtype=b.data.dtype))))
    keep = np.ones(BELIEF_DIM, dtype=b.data.dtype)
    keep[_PAIR_I] = 0.0
    keep[_PAIR_J] = 0.0
    out = T.mul(b, T.constant(keep))
    out = T.add(out, T.scatter_columns(T.div(s, n), _PAIR_I, BELIEF_DIM))
    out = T.add(out, T.scatter_columns(T.div(c, n), _PAIR_J, BELIEF_DIM))
    return out


def masked_squared_error(pred_b: np.ndarray, target_obs: np.ndarray
                         ) -> Tuple[float, np.ndarray]:
    """Loss of a belief-layout prediction against an observation.

    Object dims count only when the object is visible; proprioception always
    counts. Returns (scalar, per-dim error array in belief layout).
    """
    tgt = obs_to_belief_target(target_obs)
    mask = visibility_mask(target_obs)
    per_dim = np.square(pred_b - tgt) * mask
    return float(per_dim.sum()), per_dim


def sequence_loss(pred_seq: np.ndarray, target_obs_seq: np.ndarray
                  ) -> Tuple[float, np.ndarray]:
    """Masked squared error summed over a sequence; keeps the per-dim tensor."""
    if len(pred_seq) != len(target_obs_seq):
        raise ValueError("prediction and target sequences differ in length")
    tgt = obs_to_belief_target(target_obs_seq)
    mask = visibility_mask(target_obs_seq)
    per_dim = np.square(pred_seq - tgt) * mask
    return float(per_dim.sum()), per_dim


class WorldModel:
    def __init__(self, cfg: WorldModelConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.lstm_spec = LstmSpec(BELIEF_DIM + NUM_ACTIONS, cfg.lstm_hidden,
                                  cfg.lstm_layers)
        self.dec_spec = MlpSpec((cfg.lstm_hidden, cfg.decoder_hidden, BELIEF_DIM))
        self.params: Params = {}
        self.params.update(init_lstm(self.lstm_spec, rng, prefix="lstm."))
        self.params.update(init_mlp(self.dec_spec, rng, prefix="dec."))
        self.adam = Adam(self.params, lr=cfg.learning_rate)

    # ---------- acting-time (single state) ----------

    def initial_state(self, world) -> WorldModelState:
        """Episode-start state: zero recurrent state, ground-truth reset belief."""
        k = self.cfg.lstm_layers
        h = np.zeros((k, self.cfg.lstm_hidden), dtype=np.float32)
        c = np.zeros((k, self.cfg.lstm_hidden), dtype=np.float32)
        return WorldModelState(h, c, full_belief(world))

    def assimilate(self, s: WorldModelState, obs: np.ndarray) -> WorldModelState:
        mask = visibility_mask(obs)
        tgt = obs_to_belief_target(obs)
        b = s.b * (1.0 - mask) + tgt * mask
        return WorldModelState(s.h, s.c, b.astype(np.float32))

    def predict(self, s: WorldModelState, action: int,
                params: Optional[Params] = None) -> WorldModelState:
        p = self.params if params is None else params
        x = np.concatenate([s.b, one_hot_actions(np.asarray(action))])
        hs = [s.h[k] for k in range(self.cfg.lstm_layers)]
        cs = [s.c[k] for k in range(self.cfg.lstm_layers)]
        y, hs2, cs2 = lstm_step_np(p, self.lstm_spec, x.astype(np.float32),
                                   hs, cs, prefix="lstm.")
        delta = mlp_forward_np(p, self.dec_spec, y, prefix="dec.")
        b_next = renormalize_pairs_np(s.b + delta).astype(np.float32)
        if not np.all(np.isfinite(b_next)):
            raise FloatingPointError("non-finite world-model prediction")
        return WorldModelState(np.stack(hs2), np.stack(cs2), b_next)

    @staticmethod
    def readout(s: WorldModelState) -> np.ndarray:
        """Predicted observation (pose/velocity dims only) is b itself."""
        return s.b

    def policy_features(self, s: WorldModelState) -> np.ndarray:
        """Input the policy sees: top-layer h concatenated with b."""
        return np.concatenate([s.h[-1], s.b]).astype(np.float32)

    # ---------- batched replay (numpy, no tape) ----------

    def _batch_state(self, h0: np.ndarray, c0: np.ndarray, b0: np.ndarray):
        hs = [np.ascontiguousarray(h0[:, k, :]) for k in range(self.cfg.lstm_layers)]
        cs = [np.ascontiguousarray(c0[:, k, :]) for k in range(self.cfg.lstm_layers)]
        return hs, cs, b0.copy()

    def _step_np(self, p: Params, b, hs, cs, obs_t, act_t):
        mask = visibility_mask(obs_t)
        tgt = obs_to_belief_target(obs_t)
        b = b * (1.0 - mask) + tgt * mask
        x = np.concatenate([b, one_hot_actions(act_t)], axis=-1)
        y, hs, cs = lstm_step_np(p, self.lstm_spec, x, hs, cs, prefix="lstm.")
        delta = mlp_forward_np(p, self.dec_spec, y, prefix="dec.")
        b = renormalize_pairs_np(b + delta)
        return b, hs, cs

    def replay_losses(self, obs_seq: np.ndarray, act_seq: np.ndarray,
                      init_state: WorldModelState,
                      params: Optional[Params] = None
                      ) -> Tuple[np.ndarray, np.ndarray]:
        """Per-step one-step-prediction losses over a logged episode.

        Step t scores the prediction carried into t (readout before
        assimilation) against o_t; the first step is reported as 0 because no
        prediction preceded it. Returns (losses (T,), per-dim (T, BELIEF_DIM)).
        """
        p = self.params if params is None else params
        Tlen = len(obs_seq)
        losses = np.zeros(Tlen, dtype=np.float64)
        per_dim = np.zeros((Tlen, BELIEF_DIM), dtype=np.float64)
        s = init_state.copy()
        hs = [s.h[k] for k in range(self.cfg.lstm_layers)]
        cs = [s.c[k] for k in range(self.cfg.lstm_layers)]
        b = s.b.astype(np.float32)
        for t in range(Tlen):
            if t > 0:
                losses[t], per_dim[t] = masked_squared_error(b, obs_seq[t])
            b, hs, cs = self._step_np(p, b, hs, cs, obs_seq[t], act_seq[t])
        return losses, per_dim

    def replay_states(self, obs_seq: np.ndarray, act_seq: np.ndarray,
                      init_state: WorldModelState
                      ) -> List[WorldModelState]:
        """Pre-assimilation state stream from re-running a logged episode."""
        out = []
        s = init_state.copy()
        for t in range(len(obs_seq)):
            out.append(s)
            s = self.predict(self.assimilate(s, obs_seq[t]), int(act_seq[t]))
        return out

    def rollout_loss(self, obs_seq: np.ndarray, act_seq: np.ndarray,
                     h0: np.ndarray, c0: np.ndarray, b0: np.ndarray,
                     burn_in: int, horizon: int,
                     params: Optional[Params] = None
                     ) -> Tuple[np.ndarray, np.ndarray]:
        """Open-loop evaluation on batched segments.

        Burn-in steps assimilate observations; the `horizon` scored steps are
        pure prediction. Returns (total loss per segment (N,), per-dim error
        summed over scored steps (N, BELIEF_DIM)).
        """
        p = self.params if params is None else params
        N = obs_seq.shape[0]
        hs, cs, b = self._batch_state(h0, c0, b0)
        for i in range(burn_in):
            b, hs, cs = self._step_np(p, b, hs, cs, obs_seq[:, i], act_seq[:, i])
        totals = np.zeros(N, dtype=np.float64)
        per_dim = np.zeros((N, BELIEF_DIM), dtype=np.float64)
        for k in range(horizon):
            i = burn_in + k
            tgt = obs_to_belief_target(obs_seq[:, i])
            mask = visibility_mask(obs_seq[:, i])
            err = np.square(b - tgt) * mask
            totals += err.sum(axis=-1)
            per_dim += err
            if k < horizon - 1:
                # open loop: no assimilation during scored steps
                x = np.concatenate([b, one_hot_actions(act_seq[:, i])], axis=-1)
                y, hs, cs = lstm_step_np(p, self.lstm_spec, x, hs, cs,
                                         prefix="lstm.")
                delta = mlp_forward_np(p, self.dec_spec, y, prefix="dec.")
                b = renormalize_pairs_np(b + delta)
        return totals, per_dim

    # ---------- training ----------

    def train_batch(self, obs: np.ndarray, act: np.ndarray, h0: np.ndarray,
                    c0: np.ndarray, b0: np.ndarray) -> float:
        """One optimizer step on a batch of stored sequences.

        The first burn_in steps run forward without gradient; the remaining
        steps contribute the masked loss. Non-finite loss aborts the update.
        Returns the mean per-sequence loss over the scored steps.
        """
        cfg = self.cfg
        N, L = act.shape
        B = cfg.burn_in
        hs, cs, b = self._batch_state(h0, c0, b0)
        for i in range(B):
            b, hs, cs = self._step_np(self.params, b, hs, cs, obs[:, i], act[:, i])

        tp = wrap_params(self.params)
        th = [Tensor(h) for h in hs]
        tc = [Tensor(c) for c in cs]
        tb = Tensor(b)
        loss_total = None
        for i in range(B, L):
            tgt = obs_to_belief_target(obs[:, i])
            mask = visibility_mask(obs[:, i])
            diff = T.sub(tb, T.constant(tgt))
            step_loss = T.tsum(T.mul(T.square(diff), T.constant(mask)))
            loss_total = step_loss if loss_total is None else T.add(loss_total,
                                                                    step_loss)
            if i < L - 1:
                tb = T.add(T.mul(tb, T.constant(1.0 - mask)),
                           T.constant(tgt * mask))
                x = T.concat([tb, T.constant(one_hot_actions(act[:, i]))], axis=-1)
                y, th, tc = lstm_step_t(tp, self.lstm_spec, x, th, tc,
                                        prefix="lstm.")
                delta = mlp_forward_t(tp, self.dec_spec, y, prefix="dec.")
                tb = _renormalize_pairs_t(T.add(tb, delta))
        mean_loss = float(loss_total.data) / N
        if not np.isfinite(mean_loss):
            return mean_loss  # abort: parameters untouched
        scaled = T.mul(loss_total, T.constant(np.asarray(1.0 / N, dtype=np.float32)))
        scaled.backward()
        grads = global_norm_clip(extract_grads(tp), cfg.grad_clip)
        self.adam.update(self.params, grads)
        return mean_loss

    def clone_params(self) -> Params:
        return {k: v.copy() for k, v in self.params.items()}
