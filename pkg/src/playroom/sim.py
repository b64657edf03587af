"""Deterministic fixed-timestep physics for the room, bodies, and balls.

Semi-implicit Euler at dt=0.1s. Balls are spheres, bodies are vertical
cylinders (circles in the floor plane), arms are capsules at ball height.
Contacts transfer the contact point's velocity plus a restitution-scaled
reflection of the relative velocity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .actions import BodyIntent
from .config import SimConfig
from .geometry import point_segment_closest, wrap_angle

PINK, GREEN = 0, 1
BALL_NAMES = ("pink", "green")
CAREGIVER_HOLDER = "caregiver"

_EPS = 1e-9


class SimulationError(RuntimeError):
    """Raised when integration produces non-finite state (an integrator bug)."""


@dataclass
class BallState:
    id: int
    position: np.ndarray          # 3D (x, y, z), y up
    velocity: np.ndarray          # 3D m/s
    held_by: Optional[str] = None

    def copy(self) -> "BallState":
        return BallState(self.id, self.position.copy(), self.velocity.copy(),
                         self.held_by)


@dataclass
class InfantBody:
    position: np.ndarray          # 2D floor plane (x, z)
    yaw: float
    joints: np.ndarray            # [l_shoulder, l_elbow, r_shoulder, r_elbow]
    joint_limits: np.ndarray      # (4, 2) [min, max] radians
    hit_sensors: np.ndarray = field(
        default_factory=lambda: np.zeros(2, dtype=bool))  # [left, right]

    def copy(self) -> "InfantBody":
        return InfantBody(self.position.copy(), self.yaw, self.joints.copy(),
                          self.joint_limits.copy(), self.hit_sensors.copy())


@dataclass
class CaregiverBody:
    position: np.ndarray          # 2D floor plane
    yaw: float
    held_ball: Optional[int] = None
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def copy(self) -> "CaregiverBody":
        return CaregiverBody(self.position.copy(), self.yaw, self.held_ball,
                             self.velocity.copy())


@dataclass
class WorldState:
    tick: int
    infant: InfantBody
    caregiver: CaregiverBody
    balls: List[BallState]
    rng: np.random.Generator

    def copy(self) -> "WorldState":
        # The RNG object is shared, not copied: there is one env stream per run.
        return WorldState(self.tick, self.infant.copy(), self.caregiver.copy(),
                          [b.copy() for b in self.balls], self.rng)


@dataclass
class CaregiverCommand:
    """One tick of scripted caregiver intent, produced by the FSM."""

    move_target: Optional[np.ndarray] = None   # walk toward this floor point
    face_target: Optional[np.ndarray] = None   # turn to face this floor point
    pickup: Optional[int] = None               # try to grab this ball id
    release_velocity: Optional[np.ndarray] = None  # 3D velocity for held ball
    release_on_floor: bool = False             # place at ball height (a roll)


def joint_limits(cfg: SimConfig) -> np.ndarray:
    sh = (-cfg.shoulder_limit, cfg.shoulder_limit)
    el = (cfg.elbow_limit_lo, cfg.elbow_limit_hi)
    return np.array([sh, el, sh, el])


# Canonical reset layout: infant at the center facing +z toward the caregiver,
# balls behind the infant at small lateral offsets, elbows bent 90 degrees.
RESET_INFANT_POS = (0.0, 0.0)
RESET_INFANT_YAW = 0.0
RESET_JOINTS = (0.0, math.pi / 2, 0.0, math.pi / 2)
RESET_CAREGIVER_POS = (0.0, 3.0)
RESET_BALL_POS = {PINK: (-0.7, -2.5), GREEN: (0.7, -2.5)}


def reset(cfg: SimConfig, seed: int) -> WorldState:
    """Fresh episode state in the canonical layout, with a seeded env RNG."""
    infant = InfantBody(
        position=np.array(RESET_INFANT_POS),
        yaw=RESET_INFANT_YAW,
        joints=np.array(RESET_JOINTS),
        joint_limits=joint_limits(cfg),
    )
    caregiver = CaregiverBody(position=np.array(RESET_CAREGIVER_POS), yaw=math.pi)
    balls = []
    for bid in (PINK, GREEN):
        x, z = RESET_BALL_POS[bid]
        balls.append(BallState(
            id=bid,
            position=np.array([x, cfg.ball_radius, z]),
            velocity=np.zeros(3),
        ))
    return WorldState(tick=0, infant=infant, caregiver=caregiver, balls=balls,
                      rng=np.random.default_rng(seed))


def _rot_body_to_world(vec2: np.ndarray, yaw: float) -> np.ndarray:
    """Rotate a body-frame (lateral, forward) vector into world (x, z)."""
    s, c = math.sin(yaw), math.cos(yaw)
    bx, bz = vec2
    return np.array([bx * c + bz * s, -bx * s + bz * c])


def arm_kinematics(body: InfantBody, cfg: SimConfig) -> List[np.ndarray]:
    """Forward kinematics of both arms.

    Returns [left, right], each a (3, 3) array of shoulder, elbow, hand points
    in 3D. Arms lie in the horizontal plane at cfg.arm_height.
    """
    out = []
    y = cfg.arm_height
    for arm, lateral in ((0, -cfg.shoulder_lateral), (1, cfg.shoulder_lateral)):
        sh_angle = body.joints[2 * arm]
        el_angle = body.joints[2 * arm + 1]
        shoulder2 = body.position + _rot_body_to_world(
            np.array([lateral, 0.0]), body.yaw)
        a1 = body.yaw + sh_angle
        a2 = a1 + el_angle
        elbow2 = shoulder2 + cfg.arm_upper_len * np.array([math.sin(a1), math.cos(a1)])
        hand2 = elbow2 + cfg.arm_fore_len * np.array([math.sin(a2), math.cos(a2)])
        pts = np.array([[shoulder2[0], y, shoulder2[1]],
                        [elbow2[0], y, elbow2[1]],
                        [hand2[0], y, hand2[1]]])
        out.append(pts)
    return out


def carry_point(cg: CaregiverBody, cfg: SimConfig) -> np.ndarray:
    fwd = np.array([math.sin(cg.yaw), math.cos(cg.yaw)])
    p2 = cg.position + cfg.carry_forward * fwd
    return np.array([p2[0], cfg.carry_height, p2[1]])


def _clamp_to_room(pos2: np.ndarray, radius: float, cfg: SimConfig) -> np.ndarray:
    lim = cfg.room_half_extent - radius
    return np.clip(pos2, -lim, lim)


def _integrate_ball(ball: BallState, cfg: SimConfig) -> None:
    r = cfg.ball_radius
    e = cfg.restitution
    dt = cfg.dt
    v, p = ball.velocity, ball.position
    on_floor = p[1] <= r + 1e-6 and abs(v[1]) <= 1e-9
    if on_floor:
        decay = max(0.0, 1.0 - cfg.rolling_friction * dt)
        v[0] *= decay
        v[2] *= decay
        v[1] = 0.0
    else:
        v[1] -= cfg.gravity * dt
    p += v * dt
    # Floor bounce; settle when the rebound would be eaten by gravity next tick.
    if p[1] < r:
        p[1] = r
        if v[1] < 0.0:
            v[1] = -e * v[1]
            if v[1] <= cfg.gravity * dt:
                v[1] = 0.0
    # Wall reflection in x and z.
    lim = cfg.room_half_extent - r
    for i in (0, 2):
        if p[i] < -lim:
            p[i] = -lim
            if v[i] < 0.0:
                v[i] = -e * v[i]
        elif p[i] > lim:
            p[i] = lim
            if v[i] > 0.0:
                v[i] = -e * v[i]


def _ball_ball_collision(b0: BallState, b1: BallState, cfg: SimConfig) -> None:
    d = b1.position - b0.position
    dist = float(np.linalg.norm(d))
    min_dist = 2.0 * cfg.ball_radius
    if dist >= min_dist or dist < _EPS:
        return
    n = d / dist
    push = 0.5 * (min_dist - dist)
    b0.position -= push * n
    b1.position += push * n
    v0n = float(np.dot(b0.velocity, n))
    v1n = float(np.dot(b1.velocity, n))
    if v0n - v1n > 0.0:  # approaching: equal-mass elastic exchange of normal parts
        b0.velocity += (v1n - v0n) * n
        b1.velocity += (v0n - v1n) * n


def _push_ball_from_contact(ball: BallState, closest: np.ndarray,
                            contact_vel: np.ndarray, min_dist: float,
                            e: float) -> None:
    d = ball.position - closest
    dist = float(np.linalg.norm(d))
    if dist < _EPS:
        n = np.array([0.0, 1.0, 0.0])
        dist = _EPS
    else:
        n = d / dist
    ball.position = closest + min_dist * n
    v_rel = ball.velocity - contact_vel
    vn = float(np.dot(v_rel, n))
    if vn < 0.0:
        ball.velocity = contact_vel + v_rel - (1.0 + e) * vn * n


def _body_ball_collision(ball: BallState, body_pos2: np.ndarray,
                         body_vel2: np.ndarray, cfg: SimConfig) -> None:
    if ball.position[1] - cfg.ball_radius > cfg.body_height:
        return
    d = np.array([ball.position[0] - body_pos2[0], ball.position[2] - body_pos2[1]])
    dist = float(np.linalg.norm(d))
    min_dist = cfg.body_radius + cfg.ball_radius
    if dist >= min_dist:
        return
    if dist < _EPS:
        n2 = np.array([0.0, 1.0])
    else:
        n2 = d / dist
    contact_vel = np.array([body_vel2[0], 0.0, body_vel2[1]])
    ball.position[0] = body_pos2[0] + min_dist * n2[0]
    ball.position[2] = body_pos2[1] + min_dist * n2[1]
    n = np.array([n2[0], 0.0, n2[1]])
    v_rel = ball.velocity - contact_vel
    vn = float(np.dot(v_rel, n))
    if vn < 0.0:
        ball.velocity = contact_vel + v_rel - (1.0 + cfg.restitution) * vn * n


def step_physics(state: WorldState, infant_intent: BodyIntent,
                 caregiver_cmd: CaregiverCommand,
                 cfg: SimConfig) -> WorldState:
    """Advance the world one tick. Pure function of (state, inputs, cfg)."""
    s = state.copy()
    s.tick = state.tick + 1
    dt = cfg.dt

    prev_arms = arm_kinematics(state.infant, cfg)
    prev_infant_pos = state.infant.position.copy()
    prev_cg_pos = state.caregiver.position.copy()

    # --- infant body ---
    inf = s.infant
    inf.yaw = wrap_angle(inf.yaw + infant_intent.yaw_delta)
    inf.position = inf.position + _rot_body_to_world(
        np.asarray(infant_intent.translation, dtype=float), inf.yaw)
    inf.position = _clamp_to_room(inf.position, cfg.body_radius, cfg)
    inf.joints = np.clip(inf.joints + infant_intent.joint_deltas,
                         inf.joint_limits[:, 0], inf.joint_limits[:, 1])
    inf.hit_sensors = np.zeros(2, dtype=bool)

    # --- caregiver body ---
    cg = s.caregiver
    cmd = caregiver_cmd
    if cmd.face_target is not None:
        d = np.asarray(cmd.face_target, dtype=float) - cg.position
        if abs(d[0]) > _EPS or abs(d[1]) > _EPS:
            cg.yaw = math.atan2(d[0], d[1])
    if cmd.move_target is not None:
        d = np.asarray(cmd.move_target, dtype=float) - cg.position
        dist = float(np.linalg.norm(d))
        if dist > _EPS:
            step = min(cfg.caregiver_move_speed * dt, dist)
            cg.position = cg.position + (step / dist) * d
    cg.position = _clamp_to_room(cg.position, cfg.body_radius, cfg)
    # Keep the two bodies from interpenetrating (caregiver yields).
    sep = cg.position - inf.position
    sep_d = float(np.linalg.norm(sep))
    min_sep = 2.0 * cfg.body_radius
    if sep_d < min_sep:
        n = sep / sep_d if sep_d > _EPS else np.array([0.0, 1.0])
        cg.position = _clamp_to_room(inf.position + min_sep * n, cfg.body_radius, cfg)

    if cmd.pickup is not None and cg.held_ball is None:
        ball = s.balls[cmd.pickup]
        if ball.held_by is None:
            d2 = np.array([ball.position[0], ball.position[2]]) - cg.position
            if float(np.linalg.norm(d2)) <= cfg.pickup_radius:
                ball.held_by = CAREGIVER_HOLDER
                cg.held_ball = ball.id
                ball.velocity = np.zeros(3)
    if cmd.release_velocity is not None and cg.held_ball is not None:
        ball = s.balls[cg.held_ball]
        ball.held_by = None
        cg.held_ball = None
        if cmd.release_on_floor:
            fwd = np.array([math.sin(cg.yaw), math.cos(cg.yaw)])
            drop = cg.position + (cfg.body_radius + cfg.ball_radius + 0.05) * fwd
            ball.position = np.array([drop[0], cfg.ball_radius, drop[1]])
        else:
            ball.position = carry_point(cg, cfg)
        ball.velocity = np.asarray(cmd.release_velocity, dtype=float).copy()

    # --- balls ---
    for ball in s.balls:
        if ball.held_by is not None:
            ball.position = carry_point(cg, cfg)
            ball.velocity = np.zeros(3)
        else:
            _integrate_ball(ball, cfg)
    free = [b for b in s.balls if b.held_by is None]
    if len(free) == 2:
        _ball_ball_collision(free[0], free[1], cfg)

    inf_vel2 = (inf.position - prev_infant_pos) / dt
    cg_vel2 = (cg.position - prev_cg_pos) / dt
    cg.velocity = cg_vel2.copy()
    for ball in free:
        _body_ball_collision(ball, inf.position, inf_vel2, cfg)
        _body_ball_collision(ball, cg.position, cg_vel2, cfg)

    # --- arm contacts and hit sensors ---
    new_arms = arm_kinematics(inf, cfg)
    contact_dist = cfg.ball_radius + cfg.arm_radius
    for arm_idx in (0, 1):
        pts_new = new_arms[arm_idx]
        pts_old = prev_arms[arm_idx]
        for seg in (0, 1):
            a_new, b_new = pts_new[seg], pts_new[seg + 1]
            a_old, b_old = pts_old[seg], pts_old[seg + 1]
            for ball in free:
                closest, t = point_segment_closest(ball.position, a_new, b_new)
                if float(np.linalg.norm(ball.position - closest)) <= contact_dist:
                    inf.hit_sensors[arm_idx] = True
                    old_point = a_old + t * (b_old - a_old)
                    contact_vel = (closest - old_point) / dt
                    _push_ball_from_contact(ball, closest, contact_vel,
                                            contact_dist, cfg.restitution)

    # Re-clamp balls that contacts may have pushed out.
    lim = cfg.room_half_extent - cfg.ball_radius
    for ball in free:
        ball.position[0] = min(lim, max(-lim, ball.position[0]))
        ball.position[2] = min(lim, max(-lim, ball.position[2]))
        if ball.position[1] < cfg.ball_radius:
            ball.position[1] = cfg.ball_radius

    for ball in s.balls:
        if not (np.all(np.isfinite(ball.position)) and
                np.all(np.isfinite(ball.velocity))):
            raise SimulationError(f"non-finite state for ball {ball.id}")
    if not (np.all(np.isfinite(inf.position)) and math.isfinite(inf.yaw) and
            np.all(np.isfinite(cg.position))):
        raise SimulationError("non-finite body state")
    return s


def ball_energy(state: WorldState, cfg: SimConfig) -> float:
    """Total kinetic + potential energy of the free balls (unit mass)."""
    total = 0.0
    for ball in state.balls:
        if ball.held_by is None:
            total += 0.5 * float(np.dot(ball.velocity, ball.velocity))
            total += cfg.gravity * float(ball.position[1])
    return total
