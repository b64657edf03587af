"""The infant's 13-action vocabulary and its mapping to per-tick body deltas."""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .config import SimConfig


class Action(IntEnum):
    NOOP = 0
    TURN_LEFT = 1
    TURN_RIGHT = 2
    FORWARD = 3
    BACK = 4
    L_SHOULDER_CW = 5
    L_SHOULDER_CCW = 6
    L_ELBOW_CW = 7
    L_ELBOW_CCW = 8
    R_SHOULDER_CW = 9
    R_SHOULDER_CCW = 10
    R_ELBOW_CW = 11
    R_ELBOW_CCW = 12


NUM_ACTIONS = len(Action)

# Joint order everywhere: left shoulder, left elbow, right shoulder, right elbow.
_JOINT_OF_ACTION = {
    Action.L_SHOULDER_CW: (0, -1.0), Action.L_SHOULDER_CCW: (0, +1.0),
    Action.L_ELBOW_CW: (1, -1.0), Action.L_ELBOW_CCW: (1, +1.0),
    Action.R_SHOULDER_CW: (2, -1.0), Action.R_SHOULDER_CCW: (2, +1.0),
    Action.R_ELBOW_CW: (3, -1.0), Action.R_ELBOW_CCW: (3, +1.0),
}


@dataclass
class BodyIntent:
    """Per-tick motion request, in the infant's body frame.

    `translation` is (lateral, forward) meters; the simulator rotates it by the
    current yaw, so FORWARD from yaw=pi/2 moves the body along world +x.
    """

    yaw_delta: float = 0.0
    translation: np.ndarray = None
    joint_deltas: np.ndarray = None

    def __post_init__(self):
        if self.translation is None:
            self.translation = np.zeros(2)
        if self.joint_deltas is None:
            self.joint_deltas = np.zeros(4)


def action_to_intent(a: Action, cfg: SimConfig) -> BodyIntent:
    """Map one discrete action to its body-frame delta. NOOP maps to zero."""
    a = Action(a)
    intent = BodyIntent()
    dt = cfg.dt
    if a == Action.TURN_LEFT:
        intent.yaw_delta = -cfg.infant_turn_rate * dt
    elif a == Action.TURN_RIGHT:
        intent.yaw_delta = +cfg.infant_turn_rate * dt
    elif a == Action.FORWARD:
        intent.translation = np.array([0.0, cfg.infant_move_speed * dt])
    elif a == Action.BACK:
        intent.translation = np.array([0.0, -cfg.infant_move_speed * dt])
    elif a in _JOINT_OF_ACTION:
        idx, sign = _JOINT_OF_ACTION[a]
        intent.joint_deltas = np.zeros(4)
        intent.joint_deltas[idx] = sign * cfg.joint_rate * dt
    return intent
