"""Fly-around scenarios: camera poses on an inclined bounded orbit around a tumbling target.

The chief sits at the Hill-frame origin; the deputy camera rides the
45 degree inclined drift-free CW orbit and always looks at the chief.
Camera frames follow the usual novel-view-synthesis convention: X right,
Y up, Z backward, camera-to-world.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .attitude import TumbleProfile, UnitQuaternion, dcm_to_attitude, propagate_attitude
from .errors import ConfigError, GeometryError
from .hill import MU_EARTH, R_EARTH, OrbitParams, cw_closed_form_many, inclined_bounded_ic

HILL_R = np.array([1.0, 0.0, 0.0])
HILL_THETA = np.array([0.0, 1.0, 0.0])
HILL_H = np.array([0.0, 0.0, 1.0])

GROUND_TRUTH_HEADER = (
    "index", "t", "time_normalized",
    "cam_px", "cam_py", "cam_pz",
    "cam_qw", "cam_qx", "cam_qy", "cam_qz",
    "rso_qw", "rso_qx", "rso_qy", "rso_qz",
)
IMAGE_PATTERN = "./images/frame_{index:05}.png"


@dataclass(frozen=True)
class CameraIntrinsics:
    width: int = 800
    height: int = 800
    horizontal_fov: float = math.radians(40.0)

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ConfigError("width/height", f"image size must be >= 1, got {self.width}x{self.height}")
        if not 0 < self.horizontal_fov < math.pi:
            raise ConfigError("horizontal_fov_deg", f"fov must lie in (0, 180) deg, got {math.degrees(self.horizontal_fov)}")

    @property
    def focal_px(self) -> float:
        return 0.5 * self.width / math.tan(0.5 * self.horizontal_fov)

    @classmethod
    def from_focal(cls, width: int, height: int, focal_px: float) -> "CameraIntrinsics":
        return cls(width, height, 2.0 * math.atan(0.5 * width / focal_px))


@dataclass(frozen=True)
class ScenarioConfig:
    orbit: OrbitParams = field(default_factory=OrbitParams)
    x0: float = 40.0
    tumble: TumbleProfile = field(default_factory=TumbleProfile)
    frame_count: int = 200
    duration: float | None = None  # None -> one orbital period
    intrinsics: CameraIntrinsics = field(default_factory=CameraIntrinsics)
    seed: int = 0

    def __post_init__(self):
        if self.duration is None:
            object.__setattr__(self, "duration", self.orbit.period)
        if self.frame_count < 2:
            raise ConfigError("frame_count", f"need at least 2 frames, got {self.frame_count}")
        if not (self.duration > 0 and math.isfinite(self.duration)):
            raise ConfigError("duration", f"must be positive, got {self.duration}")
        if not self.x0 > 0:
            raise ConfigError("x0", f"must be positive, got {self.x0}")


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """Camera-to-world pose: ``p_world = rotation @ p_cam + translation``."""

    rotation: np.ndarray
    translation: np.ndarray

    @property
    def matrix(self) -> np.ndarray:
        M = np.eye(4)
        M[:3, :3] = self.rotation
        M[:3, 3] = self.translation
        return M

    @classmethod
    def from_matrix(cls, M) -> "RigidTransform":
        M = np.asarray(M, dtype=float)
        return cls(M[:3, :3].copy(), M[:3, 3].copy())

    def __eq__(self, other):
        if not isinstance(other, RigidTransform):
            return NotImplemented
        return bool(np.array_equal(self.rotation, other.rotation) and np.array_equal(self.translation, other.translation))


@dataclass(frozen=True)
class FrameRecord:
    index: int
    t: float
    time_normalized: float
    camera_pose: RigidTransform
    rso_attitude: UnitQuaternion
    image_path: str


@dataclass(frozen=True)
class Dataset:
    config: ScenarioConfig
    frames: tuple

    def __post_init__(self):
        if len(self.frames) != self.config.frame_count:
            raise ConfigError("frame_count", f"dataset holds {len(self.frames)} frames, config says {self.config.frame_count}")


def camera_lookat(position, target=(0.0, 0.0, 0.0), up_hint=HILL_H) -> RigidTransform:
    """Camera-to-world pose at ``position`` looking at ``target`` along camera -Z.

    ``up_hint`` is projected perpendicular to the viewing direction to form
    camera +Y.  When that projection vanishes (norm < 1e-9) the Hill radial
    axis is used instead, then the along-track axis.
    """
    position = np.asarray(position, dtype=float)
    target = np.asarray(target, dtype=float)
    look = target - position
    dist = np.linalg.norm(look)
    if not dist > 0:
        raise GeometryError(f"camera position coincides with target {target.tolist()}")
    fwd = look / dist
    for hint in (np.asarray(up_hint, dtype=float), HILL_R, HILL_THETA):
        up = hint - np.dot(hint, fwd) * fwd
        norm = np.linalg.norm(up)
        if norm >= 1e-9:
            break
    up = up / norm
    z = -fwd
    x = np.cross(up, z)
    x /= np.linalg.norm(x)
    y = np.cross(z, x)
    return RigidTransform(np.column_stack([x, y, z]), position.copy())


def _frame_times(config: ScenarioConfig) -> np.ndarray:
    return np.linspace(0.0, config.duration, config.frame_count)


def _build_frame(config, index, t, position) -> FrameRecord:
    try:
        pose = camera_lookat(position)
    except GeometryError as exc:
        raise GeometryError(f"frame {index}: {exc}") from exc
    return FrameRecord(
        index=index,
        t=float(t),
        time_normalized=float(t) / config.duration,
        camera_pose=pose,
        rso_attitude=propagate_attitude(config.tumble, float(t)),
        image_path=IMAGE_PATTERN.format(index=index),
    )


def build_scenario(config: ScenarioConfig) -> Dataset:
    """Sample the inclined bounded orbit and target attitude at evenly spaced frames."""
    n = config.orbit.mean_motion
    times = _frame_times(config)
    traj = cw_closed_form_many(inclined_bounded_ic(config.x0, n), n, times, config.orbit)
    frames = tuple(
        _build_frame(config, i, t, traj.states[i, :3]) for i, t in enumerate(times)
    )
    return Dataset(config, frames)


# -- config mapping ---------------------------------------------------------

CONFIG_KEYS = {
    "mu", "chief_radius", "altitude_km", "x0", "frame_count", "duration",
    "tumble_axis", "tumble_rate_deg_s", "tumble_secondary",
    "width", "height", "horizontal_fov_deg", "horizontal_fov", "seed",
}


def parse_axis(value, key="tumble_axis"):
    """Accept ``x``/``y``/``z``, ``"a,b,c"`` or a 3-sequence."""
    if isinstance(value, str):
        named = {"x": (1.0, 0.0, 0.0), "y": (0.0, 1.0, 0.0), "z": (0.0, 0.0, 1.0)}
        if value.strip().lower() in named:
            return named[value.strip().lower()]
        value = value.split(",")
    try:
        vec = tuple(float(v) for v in value)
    except (TypeError, ValueError):
        raise ConfigError(key, f"cannot parse axis {value!r}") from None
    if len(vec) != 3:
        raise ConfigError(key, f"axis needs 3 components, got {len(vec)}")
    return vec


def config_from_mapping(values: dict) -> ScenarioConfig:
    """Build a config from flat key/value pairs, naming the offending key on failure."""
    unknown = set(values) - CONFIG_KEYS
    if unknown:
        key = sorted(unknown)[0]
        raise ConfigError(key, "unknown configuration key")

    def num(key, default, kind=float):
        v = values.get(key, default)
        if isinstance(v, bool):
            raise ConfigError(key, f"expected a number, got {v!r}")
        try:
            out = kind(v)
        except (TypeError, ValueError):
            raise ConfigError(key, f"expected a number, got {v!r}") from None
        if kind is int and out != v and not isinstance(v, str):
            raise ConfigError(key, f"expected an integer, got {v!r}")
        return out

    mu = num("mu", MU_EARTH)
    if "chief_radius" in values and "altitude_km" in values:
        raise ConfigError("altitude_km", "give either chief_radius or altitude_km, not both")
    if "chief_radius" in values:
        radius = num("chief_radius", None)
    else:
        radius = R_EARTH + 1000.0 * num("altitude_km", 500.0)
    try:
        orbit = OrbitParams(mu, radius)
    except ValueError as exc:
        raise ConfigError("chief_radius" if "chief_radius" in values else "mu", str(exc)) from None

    duration = values.get("duration", "period")
    if isinstance(duration, str) and duration.strip().lower() == "period":
        duration = orbit.period
    else:
        duration = num("duration", None)

    secondary = []
    for i, item in enumerate(values.get("tumble_secondary", [])):
        try:
            *ax, rate = item
            secondary.append((parse_axis(ax, f"tumble_secondary[{i}]"), float(rate)))
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError("tumble_secondary", f"entry {i} must be [ax, ay, az, rate_deg_s]") from None
    tumble = TumbleProfile(
        axis=parse_axis(values.get("tumble_axis", "z")),
        rate=num("tumble_rate_deg_s", 3.0),
        secondary=tuple(secondary),
    )
    if "horizontal_fov" in values:
        fov = num("horizontal_fov", None)
    else:
        fov = math.radians(num("horizontal_fov_deg", 40.0))
    intr = CameraIntrinsics(width=num("width", 800, int), height=num("height", 800, int), horizontal_fov=fov)
    return ScenarioConfig(
        orbit=orbit,
        x0=num("x0", 40.0),
        tumble=tumble,
        frame_count=num("frame_count", 200, int),
        duration=duration,
        intrinsics=intr,
        seed=num("seed", 0, int),
    )


def config_to_mapping(config: ScenarioConfig) -> dict:
    """Flat mapping that :func:`config_from_mapping` turns back into ``config``."""
    return {
        "mu": config.orbit.mu,
        "chief_radius": config.orbit.chief_radius,
        "x0": config.x0,
        "frame_count": config.frame_count,
        "duration": config.duration,
        "tumble_axis": list(config.tumble.axis),
        "tumble_rate_deg_s": config.tumble.rate,
        "tumble_secondary": [[*ax, r] for ax, r in config.tumble.secondary],
        "width": config.intrinsics.width,
        "height": config.intrinsics.height,
        "horizontal_fov": config.intrinsics.horizontal_fov,
        "seed": config.seed,
    }


def load_config(path) -> dict:
    """Read a flat TOML config file into a mapping."""
    import tomli

    try:
        with Path(path).open("rb") as fh:
            return tomli.load(fh)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(str(path), f"TOML syntax error: {exc}") from None


# -- export -----------------------------------------------------------------

def _dataset_document(d: Dataset) -> dict:
    intr = d.config.intrinsics
    return {
        "camera_angle_x": intr.horizontal_fov,
        "w": intr.width,
        "h": intr.height,
        "fl_x": intr.focal_px,
        "fl_y": intr.focal_px,
        "cx": 0.5 * intr.width,
        "cy": 0.5 * intr.height,
        "scenario": config_to_mapping(d.config),
        "frames": [
            {
                "file_path": f.image_path,
                "time": f.time_normalized,
                "transform_matrix": f.camera_pose.matrix.tolist(),
                "index": f.index,
                "t": f.t,
                "rso_attitude": f.rso_attitude.as_array().tolist(),
            }
            for f in d.frames
        ],
    }


def export_transforms(d: Dataset, path) -> Path:
    """Write a camera-transforms JSON file (``camera_angle_x`` + ``frames``).

    Besides the standard keys each frame carries ``index``, ``t`` and
    ``rso_attitude``, and a ``scenario`` block records the generating config,
    so :func:`read_transforms` can rebuild the dataset exactly.
    """
    path = Path(path)
    text = json.dumps(_dataset_document(d), indent=2, allow_nan=False)
    path.write_text(text + "\n", encoding="utf-8")
    return path


def read_transforms(path) -> Dataset:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if "scenario" in doc:
        config = config_from_mapping(doc["scenario"])
    else:
        config = ScenarioConfig(
            frame_count=len(doc["frames"]),
            intrinsics=CameraIntrinsics(doc.get("w", 800), doc.get("h", 800), doc["camera_angle_x"]),
        )
    frames = []
    for i, fr in enumerate(doc["frames"]):
        frames.append(FrameRecord(
            index=fr.get("index", i),
            t=fr.get("t", fr["time"] * config.duration),
            time_normalized=fr["time"],
            camera_pose=RigidTransform.from_matrix(fr["transform_matrix"]),
            rso_attitude=UnitQuaternion.from_array(fr.get("rso_attitude", (1.0, 0.0, 0.0, 0.0))),
            image_path=fr["file_path"],
        ))
    return Dataset(config, tuple(frames))


def export_ground_truth(d: Dataset, path) -> Path:
    """Per-frame camera position/orientation and target attitude as CSV."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(GROUND_TRUTH_HEADER)
        for f in d.frames:
            cq = dcm_to_attitude(f.camera_pose.rotation).as_array()
            row = [f.index, f.t, f.time_normalized, *f.camera_pose.translation, *cq, *f.rso_attitude.as_array()]
            w.writerow([r if isinstance(r, int) else repr(float(r)) for r in row])
    return path
