"""Tumbling target attitude.

Quaternions are scalar-first ``(w, x, y, z)``, right-handed, and describe
active rotations taking body-frame vectors into the Hill frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import ConfigError, DomainError

MAX_STEP = 0.01


@dataclass(frozen=True)
class UnitQuaternion:
    w: float = 1.0
    x: float = 0.0
    y: float = 0.0
    z: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.w, self.x, self.y, self.z])

    @classmethod
    def from_array(cls, q) -> "UnitQuaternion":
        w, x, y, z = (float(v) for v in q)
        return cls(w, x, y, z)

    @property
    def norm(self) -> float:
        return math.sqrt(self.w**2 + self.x**2 + self.y**2 + self.z**2)

    def normalized(self) -> "UnitQuaternion":
        return UnitQuaternion.from_array(self.as_array() / self.norm)

    def __mul__(self, other: "UnitQuaternion") -> "UnitQuaternion":
        return UnitQuaternion.from_array(quat_multiply(self.as_array(), other.as_array()))

    @classmethod
    def from_axis_angle(cls, axis, angle: float) -> "UnitQuaternion":
        axis = np.asarray(axis, dtype=float)
        axis = axis / np.linalg.norm(axis)
        s = math.sin(0.5 * angle)
        return cls(math.cos(0.5 * angle), *(s * axis))


def quat_multiply(p, q) -> np.ndarray:
    """Hamilton product ``p * q`` of scalar-first quaternions."""
    pw, px, py, pz = p
    qw, qx, qy, qz = q
    return np.array([
        pw * qw - px * qx - py * qy - pz * qz,
        pw * qx + px * qw + py * qz - pz * qy,
        pw * qy - px * qz + py * qw + pz * qx,
        pw * qz + px * qy - py * qx + pz * qw,
    ])


def _unit_axis(axis, what):
    a = np.asarray(axis, dtype=float).reshape(3)
    norm = float(np.linalg.norm(a))
    if not norm > 0 or not math.isfinite(norm):
        raise ConfigError(what, f"axis must have non-zero finite norm, got {a.tolist()}")
    if abs(norm - 1.0) > 1e-15:
        a = a / norm
    return tuple(float(v) for v in a)


@dataclass(frozen=True)
class TumbleProfile:
    """Constant-rate spin of the target.

    Parameters
    ----------
    axis : sequence of 3 floats
        Primary spin axis (normalised on construction).
    rate : float
        Primary spin rate [deg/s].
    secondary : sequence of (axis, rate) pairs
        Extra body-fixed spin components; their vector sum with the
        primary term is the constant body angular velocity.
    """

    axis: tuple = (0.0, 0.0, 1.0)
    rate: float = 3.0
    secondary: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "axis", _unit_axis(self.axis, "tumble_axis"))
        if not (self.rate >= 0 and math.isfinite(self.rate)):
            raise ConfigError("tumble_rate_deg_s", f"rate must be finite and >= 0, got {self.rate}")
        pairs = []
        for i, (ax, r) in enumerate(self.secondary):
            if not (r >= 0 and math.isfinite(r)):
                raise ConfigError(f"tumble_secondary[{i}]", f"rate must be finite and >= 0, got {r}")
            pairs.append((_unit_axis(ax, f"tumble_secondary[{i}]"), float(r)))
        object.__setattr__(self, "secondary", tuple(pairs))

    @property
    def is_single_axis(self) -> bool:
        return all(r == 0 for _, r in self.secondary)

    @property
    def body_rate(self) -> np.ndarray:
        """Body angular velocity [rad/s]."""
        w = np.radians(self.rate) * np.asarray(self.axis)
        for ax, r in self.secondary:
            w = w + np.radians(r) * np.asarray(ax)
        return w

    @property
    def period(self) -> float:
        """Time for a full revolution [s]; infinite when static."""
        rate = float(np.degrees(np.linalg.norm(self.body_rate)))
        return math.inf if rate == 0 else 360.0 / rate


@njit(cache=True)
def _integrate_body_rate(q0, omega, t, max_step):
    # RK4 on qdot = 0.5 q * (0, omega), renormalised every step
    if t == 0.0:
        return q0.copy()
    steps = int(math.ceil(abs(t) / max_step))
    h = t / steps
    wx, wy, wz = omega[0], omega[1], omega[2]
    q = q0.copy()
    k = np.empty((4, 4))
    tmp = np.empty(4)
    for _ in range(steps):
        for stage in range(4):
            if stage == 0:
                for j in range(4):
                    tmp[j] = q[j]
            else:
                c = h if stage == 3 else 0.5 * h
                for j in range(4):
                    tmp[j] = q[j] + c * k[stage - 1, j]
            qw, qx, qy, qz = tmp[0], tmp[1], tmp[2], tmp[3]
            k[stage, 0] = 0.5 * (-qx * wx - qy * wy - qz * wz)
            k[stage, 1] = 0.5 * (qw * wx + qy * wz - qz * wy)
            k[stage, 2] = 0.5 * (qw * wy - qx * wz + qz * wx)
            k[stage, 3] = 0.5 * (qw * wz + qx * wy - qy * wx)
        norm = 0.0
        for j in range(4):
            q[j] += h / 6.0 * (k[0, j] + 2.0 * k[1, j] + 2.0 * k[2, j] + k[3, j])
            norm += q[j] * q[j]
        norm = math.sqrt(norm)
        for j in range(4):
            q[j] /= norm
    return q


def propagate_attitude(p: TumbleProfile, t: float, max_step: float = MAX_STEP) -> UnitQuaternion:
    """Target orientation at time ``t`` [s], starting from identity at t = 0.

    Single-axis profiles use the exact axis-angle rotation.  Multi-axis
    profiles integrate the quaternion kinematics with fixed RK4 steps no
    longer than ``max_step``.
    """
    if not math.isfinite(t):
        raise DomainError(f"time must be finite, got {t}")
    if p.is_single_axis:
        return UnitQuaternion.from_axis_angle(p.axis, math.radians(p.rate) * t)
    q = _integrate_body_rate(np.array([1.0, 0.0, 0.0, 0.0]), p.body_rate, float(t), float(max_step))
    return UnitQuaternion.from_array(q)


def attitude_to_dcm(q: UnitQuaternion) -> np.ndarray:
    """Rotation matrix of a unit quaternion."""
    if abs(q.norm - 1.0) > 1e-6:
        raise DomainError(f"quaternion norm {q.norm} is not unit")
    w, x, y, z = q.as_array()
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def dcm_to_attitude(R: np.ndarray) -> UnitQuaternion:
    """Inverse of :func:`attitude_to_dcm` (Shepperd's method), with ``w >= 0``."""
    R = np.asarray(R, dtype=float)
    tr = R[0, 0] + R[1, 1] + R[2, 2]
    cands = np.array([tr, R[0, 0], R[1, 1], R[2, 2]])
    i = int(np.argmax(cands))
    if i == 0:
        w = 0.5 * math.sqrt(1.0 + tr)
        f = 0.25 / w
        q = [w, (R[2, 1] - R[1, 2]) * f, (R[0, 2] - R[2, 0]) * f, (R[1, 0] - R[0, 1]) * f]
    elif i == 1:
        x = 0.5 * math.sqrt(1.0 + 2 * R[0, 0] - tr)
        f = 0.25 / x
        q = [(R[2, 1] - R[1, 2]) * f, x, (R[0, 1] + R[1, 0]) * f, (R[0, 2] + R[2, 0]) * f]
    elif i == 2:
        y = 0.5 * math.sqrt(1.0 + 2 * R[1, 1] - tr)
        f = 0.25 / y
        q = [(R[0, 2] - R[2, 0]) * f, (R[0, 1] + R[1, 0]) * f, y, (R[1, 2] + R[2, 1]) * f]
    else:
        z = 0.5 * math.sqrt(1.0 + 2 * R[2, 2] - tr)
        f = 0.25 / z
        q = [(R[1, 0] - R[0, 1]) * f, (R[0, 2] + R[2, 0]) * f, (R[1, 2] + R[2, 1]) * f, z]
    q = np.array(q)
    q /= np.linalg.norm(q)
    if q[0] < 0:
        q = -q
    return UnitQuaternion.from_array(q)
