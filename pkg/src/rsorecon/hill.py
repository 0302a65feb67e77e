"""Clohessy-Wiltshire relative motion about a circular chief orbit.

States are expressed in the Hill frame centred on the chief, with axes
ordered (r, theta, h): radial, along-track and orbit normal.  The
unforced equations of motion are::

    xdd =  3 n^2 x + 2 n yd
    ydd = -2 n xd
    zdd = -n^2 z

where ``n`` is the chief's mean motion.  All quantities are SI.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DomainError, PropagationError

MU_EARTH = 3.986004418e14
R_EARTH = 6_378_137.0
DEFAULT_ALTITUDE = 500_000.0

TRAJECTORY_HEADER = ("t", "x", "y", "z", "vx", "vy", "vz")


def mean_motion(mu: float, radius: float) -> float:
    """Angular rate of a circular orbit, ``sqrt(mu / radius**3)`` [rad/s]."""
    if not (mu > 0 and radius > 0):
        raise DomainError(f"mean_motion needs mu > 0 and radius > 0, got mu={mu}, radius={radius}")
    return math.sqrt(mu / radius**3)


@dataclass(frozen=True)
class OrbitParams:
    """Circular chief orbit.

    Parameters
    ----------
    mu : float
        Gravitational parameter [m^3/s^2].
    chief_radius : float
        Orbit radius [m].
    """

    mu: float = MU_EARTH
    chief_radius: float = R_EARTH + DEFAULT_ALTITUDE

    def __post_init__(self):
        if not (self.mu > 0 and self.chief_radius > 0):
            raise DomainError("OrbitParams needs mu > 0 and chief_radius > 0")

    @classmethod
    def from_altitude(cls, altitude: float, mu: float = MU_EARTH) -> "OrbitParams":
        return cls(mu=mu, chief_radius=R_EARTH + altitude)

    @property
    def mean_motion(self) -> float:
        return mean_motion(self.mu, self.chief_radius)

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.mean_motion


@dataclass(frozen=True)
class RelativeState:
    """Hill-frame position [m] and velocity [m/s] at epoch ``t`` [s]."""

    x: float = 0.0
    y: float = 0.0
    z: float = 0.0
    vx: float = 0.0
    vy: float = 0.0
    vz: float = 0.0
    t: float = 0.0

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.x, self.y, self.z, self.vx, self.vy, self.vz, self.t)):
            raise DomainError(f"non-finite relative state: {self}")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z, self.vx, self.vy, self.vz])

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    @property
    def velocity(self) -> np.ndarray:
        return np.array([self.vx, self.vy, self.vz])

    @classmethod
    def from_array(cls, v, t: float = 0.0) -> "RelativeState":
        v = [float(c) for c in v]
        if len(v) != 6:
            raise DomainError(f"expected 6 state components, got {len(v)}")
        return cls(*v, t=float(t))


@dataclass(frozen=True)
class Trajectory:
    """Sampled relative trajectory.

    ``times`` has shape (N,), ``states`` has shape (N, 6).
    """

    times: np.ndarray
    states: np.ndarray
    params: OrbitParams

    def __post_init__(self):
        if self.states.shape != (len(self.times), 6):
            raise DomainError("states must have shape (len(times), 6)")
        if len(self.times) > 1 and not np.all(np.diff(self.times) > 0):
            raise DomainError("trajectory timestamps must be strictly increasing")

    def __len__(self):
        return len(self.times)

    @property
    def samples(self) -> list[RelativeState]:
        return [RelativeState.from_array(s, t) for t, s in zip(self.times, self.states)]

    @property
    def positions(self) -> np.ndarray:
        return self.states[:, :3]

    def to_csv(self, path) -> Path:
        """Write ``t,x,y,z,vx,vy,vz`` rows with round-trip float precision."""
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TRAJECTORY_HEADER)
            for t, s in zip(self.times, self.states):
                w.writerow([repr(float(t))] + [repr(float(v)) for v in s])
        return path

    @classmethod
    def from_csv(cls, path, params: OrbitParams | None = None) -> "Trajectory":
        with Path(path).open(newline="") as fh:
            rows = list(csv.reader(fh))
        if tuple(rows[0]) != TRAJECTORY_HEADER:
            raise DomainError(f"unexpected trajectory header {rows[0]}")
        data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float).reshape(-1, 7)
        return cls(data[:, 0].copy(), data[:, 1:].copy(), params or OrbitParams())


def _check_n(n):
    if not n > 0:
        raise DomainError(f"mean motion must be positive, got {n}")


def cw_matrix(n: float) -> np.ndarray:
    """Plant matrix ``A`` of the unforced linear system ``xdot = A x``."""
    A = np.zeros((6, 6))
    A[0, 3] = A[1, 4] = A[2, 5] = 1.0
    A[3, 0] = 3.0 * n * n
    A[3, 4] = 2.0 * n
    A[4, 3] = -2.0 * n
    A[5, 2] = -n * n
    return A


def cw_derivative(s, n: float, accel=None) -> np.ndarray:
    """Time derivative of a Hill-frame state.

    Parameters
    ----------
    s : RelativeState or array_like
        State ``(x, y, z, vx, vy, vz)``.
    n : float
        Mean motion [rad/s].
    accel : array_like, optional
        Control acceleration ``u`` [m/s^2]; zero when omitted.
    """
    _check_n(n)
    x, y, z, vx, vy, vz = s.as_array() if isinstance(s, RelativeState) else np.asarray(s, dtype=float)
    ux, uy, uz = (0.0, 0.0, 0.0) if accel is None else (float(a) for a in accel)
    return np.array([
        vx,
        vy,
        vz,
        3.0 * n * n * x + 2.0 * n * vy + ux,
        -2.0 * n * vx + uy,
        -n * n * z + uz,
    ])


def _closed_form(s0: np.ndarray, n: float, t) -> np.ndarray:
    # vectorised over t; the secular along-track term is written with the
    # drift constant so that it cancels exactly for bounded states
    t = np.asarray(t, dtype=float)
    x0, y0, z0, vx0, vy0, vz0 = s0
    nt = n * t
    s = np.sin(nt)
    c = np.cos(nt)
    omc = 2.0 * np.sin(0.5 * nt) ** 2  # 1 - cos(nt) without cancellation
    drift = vy0 + 2.0 * n * x0
    x = x0 + 3.0 * omc * x0 + (s / n) * vx0 + (2.0 * omc / n) * vy0
    y = y0 + 6.0 * s * x0 - (2.0 * omc / n) * vx0 + (4.0 * s / n) * vy0 - 3.0 * t * drift
    z = c * z0 + (s / n) * vz0
    vx = 3.0 * n * s * x0 + c * vx0 + 2.0 * s * vy0
    vy = -6.0 * n * omc * x0 - 2.0 * s * vx0 + (1.0 - 4.0 * omc) * vy0
    vz = -n * s * z0 + c * vz0
    return np.stack([x, y, z, vx, vy, vz], axis=-1)


def cw_closed_form(s0: RelativeState, n: float, t: float) -> RelativeState:
    """Exact solution of the unforced CW equations at absolute epoch ``t``.

    The elapsed time is ``t - s0.t``.  At zero elapsed time the input is
    returned unchanged.
    """
    _check_n(n)
    dt = t - s0.t
    if dt == 0:
        return s0
    return RelativeState.from_array(_closed_form(s0.as_array(), n, dt), t)


def cw_closed_form_many(s0: RelativeState, n: float, times, params: OrbitParams | None = None) -> Trajectory:
    """Evaluate the closed form at each epoch in ``times``."""
    _check_n(n)
    times = np.asarray(times, dtype=float)
    states = _closed_form(s0.as_array(), n, times - s0.t)
    states[times == s0.t] = s0.as_array()
    return Trajectory(times, states, params or OrbitParams())


def propagate_rk4(s0: RelativeState, n: float, dt: float, steps: int,
                  params: OrbitParams | None = None) -> Trajectory:
    """Fixed-step classical RK4 integration of the CW equations.

    The state update uses compensated (Kahan) summation; without it the
    accumulated rounding error over one orbit swamps the truncation error
    at step sizes of a second or below.
    """
    _check_n(n)
    if not dt > 0:
        raise DomainError(f"dt must be positive, got {dt}")
    if steps < 1:
        raise DomainError(f"steps must be >= 1, got {steps}")
    A = cw_matrix(n)
    out = np.empty((steps + 1, 6))
    s = s0.as_array()
    out[0] = s
    comp = np.zeros(6)
    half = 0.5 * dt
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(1, steps + 1):
            k1 = A @ s
            k2 = A @ (s + half * k1)
            k3 = A @ (s + half * k2)
            k4 = A @ (s + dt * k3)
            inc = (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            y = inc - comp
            nxt = s + y
            comp = (nxt - s) - y
            s = nxt
            if not np.all(np.isfinite(s)):
                raise PropagationError(f"non-finite state at step {i} (t={s0.t + i * dt})")
            out[i] = s
    times = s0.t + dt * np.arange(steps + 1)
    return Trajectory(times, out, params or OrbitParams())


def bounded_ic(x0: float, n: float) -> RelativeState:
    """Planar drift-free initial state ``(x0, 0, 0, 0, -2 n x0, 0)``."""
    _check_n(n)
    return RelativeState(x=float(x0), vy=-2.0 * n * x0)


def _rot_x(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def _rot_y(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def _rot_z(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def euler_dcm(theta: float, phi: float, psi: float) -> np.ndarray:
    """Rotation that re-orients a planar relative orbit.

    ``psi`` turns the state about the orbit normal (h), ``phi`` about the
    along-track axis, and ``theta`` tilts the orbit plane about the radial
    axis, positive ``theta`` lifting a negative along-track velocity
    toward +h.  The composition is ``Rz(psi) Ry(phi) Rx(-theta)`` with
    right-handed active elementary rotations.

    With ``theta=45 deg, phi=0, psi=90 deg`` the planar bounded state
    ``(x0, 0, 0, 0, -2 n x0, 0)`` maps onto the 45 degree inclined state
    ``(0, x0, 0, v, 0, v)`` with ``v = 2 n x0 / sqrt(2)``.
    """
    for a in (theta, phi, psi):
        if not math.isfinite(a):
            raise DomainError("euler_dcm angles must be finite")
    return _rot_z(psi) @ _rot_y(phi) @ _rot_x(-theta)


def rotate_state(R: np.ndarray, s: RelativeState) -> RelativeState:
    """Apply a 3x3 rotation to position and velocity blocks."""
    v = s.as_array()
    return RelativeState.from_array(np.concatenate([R @ v[:3], R @ v[3:]]), s.t)


def inclined_bounded_ic(x0: float, n: float) -> RelativeState:
    """45 degree inclined drift-free state ``(0, x0, 0, v, 0, v)``.

    ``v = 2 n x0 / sqrt(2)``.  Evaluated directly rather than through
    :func:`euler_dcm` so the zero components are exact.
    """
    _check_n(n)
    v = 2.0 * n * x0 / math.sqrt(2.0)
    return RelativeState(x=0.0, y=float(x0), z=0.0, vx=v, vy=0.0, vz=v)


def drift_constant(s, n: float) -> float:
    """Along-track drift invariant ``vy + 2 n x`` [m/s]; zero for bounded motion."""
    _check_n(n)
    if isinstance(s, RelativeState):
        return s.vy + 2.0 * n * s.x
    s = np.asarray(s, dtype=float)
    return s[..., 4] + 2.0 * n * s[..., 0]
