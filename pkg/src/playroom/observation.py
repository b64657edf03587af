"""The infant's partial egocentrically-gated observation and its fixed layout.

Layout (41 dims, world-frame coordinates, float32):

    per tracked object, in order pink ball, green ball, caregiver (9 dims each):
        [0] visible flag (0/1)
        [1:4] position x, y, z (m)
        [4:6] orientation as (sin yaw, cos yaw)
        [6:9] velocity x, y, z (m/s)
    proprioception (14 dims, always filled):
        [27:29] infant position x, z
        [29:31] infant orientation (sin yaw, cos yaw)
        [31:39] four joint angles as (sin, cos) pairs
        [39:41] hit sensors (left, right)

An object is visible iff its center lies in the infant's 120-degree forward
cone; invisible objects have their 8 pose/velocity dims zeroed. Ball
"orientation" is the yaw of the velocity heading (zero velocity reads (0, 1)).

The belief layout is the same table minus the 3 visibility flags (38 dims).
"""

from __future__ import annotations

import hashlib
import math
from typing import List

import numpy as np

from .config import CaregiverConfig, SimConfig
from .geometry import in_fov
from .sim import GREEN, PINK, WorldState

OBJECT_NAMES = ("pink_ball", "green_ball", "caregiver")
OBJ_SLOT = 9
NUM_OBJECTS = 3
PROPRIO_DIM = 14
OBS_DIM = NUM_OBJECTS * OBJ_SLOT + PROPRIO_DIM          # 41
VIS_IDX = tuple(i * OBJ_SLOT for i in range(NUM_OBJECTS))  # (0, 9, 18)
PROPRIO_START = NUM_OBJECTS * OBJ_SLOT                   # 27

BELIEF_DIM = OBS_DIM - NUM_OBJECTS                       # 38
BELIEF_OBJ_SLOT = OBJ_SLOT - 1                           # 8
BELIEF_PROPRIO_START = NUM_OBJECTS * BELIEF_OBJ_SLOT     # 24

# obs index for each belief dim (skips the visibility flags).
BELIEF_TO_OBS = np.array(
    [i for i in range(OBS_DIM) if i not in VIS_IDX], dtype=np.int64)

# (sin, cos) pairs in the belief layout, renormalized after delta prediction.
ANGLE_PAIRS = [(obj * BELIEF_OBJ_SLOT + 3, obj * BELIEF_OBJ_SLOT + 4)
               for obj in range(NUM_OBJECTS)]
ANGLE_PAIRS += [(BELIEF_PROPRIO_START + 2, BELIEF_PROPRIO_START + 3)]
ANGLE_PAIRS += [(BELIEF_PROPRIO_START + 4 + 2 * j, BELIEF_PROPRIO_START + 5 + 2 * j)
                for j in range(4)]

# Component groups over the belief layout, used by the loss decomposition.
GROUP_SLICES = {
    "ball1": slice(0, BELIEF_OBJ_SLOT),
    "ball2": slice(BELIEF_OBJ_SLOT, 2 * BELIEF_OBJ_SLOT),
    "caregiver": slice(2 * BELIEF_OBJ_SLOT, 3 * BELIEF_OBJ_SLOT),
    "self": slice(BELIEF_PROPRIO_START, BELIEF_DIM),
}


def _field_names() -> List[str]:
    names = []
    for obj in OBJECT_NAMES:
        names.append(f"{obj}.visible")
        names += [f"{obj}.pos.{ax}" for ax in "xyz"]
        names += [f"{obj}.ori.sin", f"{obj}.ori.cos"]
        names += [f"{obj}.vel.{ax}" for ax in "xyz"]
    names += ["infant.pos.x", "infant.pos.z", "infant.ori.sin", "infant.ori.cos"]
    for j in ("l_shoulder", "l_elbow", "r_shoulder", "r_elbow"):
        names += [f"infant.joint.{j}.sin", f"infant.joint.{j}.cos"]
    names += ["infant.hit.left", "infant.hit.right"]
    return names


FIELD_NAMES = _field_names()
assert len(FIELD_NAMES) == OBS_DIM

LAYOUT_HASH = hashlib.sha256("\n".join(FIELD_NAMES).encode()).hexdigest()[:16]


def _heading_pair(vx: float, vz: float) -> tuple:
    if vx * vx + vz * vz < 1e-12:
        return 0.0, 1.0
    yaw = math.atan2(vx, vz)
    return math.sin(yaw), math.cos(yaw)


def _object_slots(world: WorldState) -> np.ndarray:
    """Ground-truth 8-dim pose/velocity slot per object (no gating)."""
    out = np.zeros((NUM_OBJECTS, BELIEF_OBJ_SLOT))
    for i, bid in enumerate((PINK, GREEN)):
        ball = world.balls[bid]
        out[i, 0:3] = ball.position
        out[i, 3:5] = _heading_pair(ball.velocity[0], ball.velocity[2])
        out[i, 5:8] = ball.velocity
    cg = world.caregiver
    out[2, 0:3] = (cg.position[0], 0.0, cg.position[1])
    out[2, 3] = math.sin(cg.yaw)
    out[2, 4] = math.cos(cg.yaw)
    out[2, 5:8] = (cg.velocity[0], 0.0, cg.velocity[1])
    return out


def object_floor_positions(world: WorldState) -> np.ndarray:
    """(3, 2) floor-plane positions of pink, green, caregiver."""
    return np.array([
        [world.balls[PINK].position[0], world.balls[PINK].position[2]],
        [world.balls[GREEN].position[0], world.balls[GREEN].position[2]],
        [world.caregiver.position[0], world.caregiver.position[1]],
    ])


def _proprio(world: WorldState) -> np.ndarray:
    inf = world.infant
    out = np.zeros(PROPRIO_DIM)
    out[0:2] = inf.position
    out[2] = math.sin(inf.yaw)
    out[3] = math.cos(inf.yaw)
    for j in range(4):
        out[4 + 2 * j] = math.sin(inf.joints[j])
        out[5 + 2 * j] = math.cos(inf.joints[j])
    out[12] = 1.0 if inf.hit_sensors[0] else 0.0
    out[13] = 1.0 if inf.hit_sensors[1] else 0.0
    return out


def observe(world: WorldState, cg_cfg: CaregiverConfig) -> np.ndarray:
    """Egocentrically-gated observation (float32, OBS_DIM)."""
    obs = np.zeros(OBS_DIM, dtype=np.float32)
    slots = _object_slots(world)
    positions = object_floor_positions(world)
    inf = world.infant
    for i in range(NUM_OBJECTS):
        base = i * OBJ_SLOT
        if in_fov(inf.position, inf.yaw, positions[i], cg_cfg.fov_half_angle):
            obs[base] = 1.0
            obs[base + 1:base + OBJ_SLOT] = slots[i]
    obs[PROPRIO_START:] = _proprio(world)
    return obs


def full_belief(world: WorldState) -> np.ndarray:
    """Ground-truth belief vector (no visibility gating), float32 BELIEF_DIM.

    Used to initialize b at episode start from the public canonical layout.
    """
    b = np.zeros(BELIEF_DIM, dtype=np.float32)
    slots = _object_slots(world)
    for i in range(NUM_OBJECTS):
        b[i * BELIEF_OBJ_SLOT:(i + 1) * BELIEF_OBJ_SLOT] = slots[i]
    b[BELIEF_PROPRIO_START:] = _proprio(world)
    return b


def obs_to_belief_target(obs: np.ndarray) -> np.ndarray:
    """Drop the visibility flags: observation -> belief-layout target."""
    return obs[..., BELIEF_TO_OBS]


def visibility_mask(obs: np.ndarray) -> np.ndarray:
    """Per-belief-dim loss mask from an observation's visibility flags.

    Object dims inherit the object's visible flag; proprioception counts as
    always visible. Works on (..., OBS_DIM) arrays.
    """
    shape = obs.shape[:-1] + (BELIEF_DIM,)
    mask = np.ones(shape, dtype=obs.dtype if obs.dtype.kind == "f" else np.float32)
    for i in range(NUM_OBJECTS):
        vis = obs[..., VIS_IDX[i]:VIS_IDX[i] + 1]
        mask[..., i * BELIEF_OBJ_SLOT:(i + 1) * BELIEF_OBJ_SLOT] = vis
    return mask
