"""Gated five-term reward for rolling over, standing up and walking forward."""
from dataclasses import dataclass

import numpy as np

from core.errors import OutOfRangeError

GATE_THRESHOLD = 0.7
UNIT_TOLERANCE = 1e-6
TERM_NAMES = ("upright", "hip", "shoulder", "knee", "velocity")

HIP_TARGET = -0.2
SHOULDER_TARGET = -0.2
KNEE_TARGET = 1.0
TARGET_SPEED = 0.3


@dataclass(frozen=True)
class QuadrupedState:
    """Body up-vector in world frame, joint angles per leg group and body-frame velocity."""

    up: np.ndarray
    q_hip: np.ndarray
    q_shoulder: np.ndarray
    q_knee: np.ndarray
    v: np.ndarray


@dataclass(frozen=True)
class RewardBreakdown:
    total: float
    terms: tuple[float, ...]
    gates: tuple[bool, ...]


def _pose_term(q: np.ndarray, target: float) -> float:
    return 1.0 - 0.25 * float(np.abs(np.asarray(q, dtype=np.float64) - target).sum())


def a1_reward(s: QuadrupedState, upright_unit_range: bool = False) -> RewardBreakdown:
    """Evaluate every term and gate term ``i`` on the satisfaction of terms ``0..i-1``.

    Satisfaction of the upright term is ``(up_z + 1) / 2``; pose terms are
    clipped to ``[0, 1]``. With ``upright_unit_range`` the upright term itself
    becomes ``(up_z + 1) / 2``, which lifts the maximum total from 13 to 14.

    Raises:
        OutOfRangeError: If ``s.up`` is not a unit vector.
    """
    up = np.asarray(s.up, dtype=np.float64)
    if abs(np.linalg.norm(up) - 1.0) > UNIT_TOLERANCE:
        raise OutOfRangeError("up", f"up vector must be unit length, got norm {np.linalg.norm(up):.6f}")
    up_z = float(up[2])

    r_upright = (up_z + 1.0) / 2.0 if upright_unit_range else (up_z - 1.0) / 2.0
    r_hip = _pose_term(s.q_hip, HIP_TARGET)
    r_shoulder = _pose_term(s.q_shoulder, SHOULDER_TARGET)
    r_knee = _pose_term(s.q_knee, KNEE_TARGET)

    v = np.asarray(s.v, dtype=np.float64)
    speed = float(np.linalg.norm(v))
    v_x = float(v[0])
    heading = max(0.0, v_x) / speed if speed >= 1e-6 else 0.0
    r_velocity = 5.0 * (heading * float(np.clip(v_x / TARGET_SPEED, -1.0, 1.0)) + 1.0)

    terms = (r_upright, r_hip, r_shoulder, r_knee, r_velocity)
    satisfaction = (
        (up_z + 1.0) / 2.0,
        float(np.clip(r_hip, 0.0, 1.0)),
        float(np.clip(r_shoulder, 0.0, 1.0)),
        float(np.clip(r_knee, 0.0, 1.0)),
    )
    gates = []
    open_so_far = True
    for i in range(len(terms)):
        gates.append(open_so_far)
        if i < len(satisfaction):
            open_so_far = open_so_far and satisfaction[i] >= GATE_THRESHOLD
    total = float(sum(term for term, gate in zip(terms, gates) if gate))
    return RewardBreakdown(total=total, terms=terms, gates=tuple(gates))
