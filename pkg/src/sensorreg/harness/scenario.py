"""Scenario definitions: sensors, targets, filters, and run settings.

Scenarios are stored as JSON with SI units throughout (meters, radians,
seconds, m^2/s^3).  Frame 0 is track initialization; ``frames`` counts the
measurement frames after it, so epochs run k = 0..frames.  Each sensor
reports to the fusion center at multiples of its lag.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from ..coords import BiasVector
from ..errors import ScenarioError

__all__ = [
    "SensorSpec",
    "SegmentSpec",
    "TargetSpec",
    "LocalFilterSpec",
    "Scenario",
    "load_scenario",
    "builtin_scenario_path",
    "BUILTIN_SCENARIOS",
]

BUILTIN_SCENARIOS = (
    "two_sensor",
    "five_sensor_offset",
    "five_sensor_offset_scale",
)

LOCAL_FILTER_TYPES = ("kf", "imm_ncv_ncv", "imm_nca_ncv")


@dataclass
class SensorSpec:
    position: np.ndarray
    sigma_r: float
    sigma_theta: float
    bias: BiasVector
    lag: int

    def __post_init__(self) -> None:
        self.position = np.asarray(self.position, dtype=float).reshape(2)


@dataclass
class SegmentSpec:
    """One leg of a target's motion schedule; the last leg extends to the
    end of the run."""

    model: str
    frames: int
    omega: float = 0.0


@dataclass
class TargetSpec:
    initial_state: np.ndarray
    segments: list[SegmentSpec]

    def __post_init__(self) -> None:
        self.initial_state = np.asarray(self.initial_state, dtype=float).reshape(4)


@dataclass
class LocalFilterSpec:
    """Local tracker configuration.

    ``kf`` uses a single constant-velocity filter with intensity ``q``.
    The IMM variants run two modes with intensities ``q1`` (maneuvering /
    accelerating mode) and ``q2`` (quiet mode).
    """

    type: str = "kf"
    q: float = 1.0
    q1: float = 10.0
    q2: float = 2.0


@dataclass
class Scenario:
    name: str
    sensors: list[SensorSpec]
    targets: list[TargetSpec]
    frames: int
    mc_runs: int
    dt: float = 1.0
    process_noise_q: float = 0.1
    local_filter: LocalFilterSpec = field(default_factory=LocalFilterSpec)
    fusion_q: float = 1.0
    estimate_scale_bias: bool = False
    rng_seed: int = 0
    bias_prior_offset: tuple[float, float] = (20.0, 1e-3)
    bias_prior_scale: float = 0.01

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        if len(self.sensors) < 2:
            raise ScenarioError("scenario needs at least two sensors")
        if not self.targets:
            raise ScenarioError("scenario needs at least one target")
        if self.frames < 2:
            raise ScenarioError("scenario needs at least two frames")
        if self.mc_runs < 1:
            raise ScenarioError("mc_runs must be at least 1")
        if self.dt <= 0:
            raise ScenarioError("dt must be positive")
        if self.process_noise_q < 0 or self.fusion_q < 0:
            raise ScenarioError("noise intensities must be non-negative")
        if self.local_filter.type not in LOCAL_FILTER_TYPES:
            raise ScenarioError(
                f"unknown local filter type {self.local_filter.type!r}; "
                f"expected one of {LOCAL_FILTER_TYPES}"
            )
        for i, s in enumerate(self.sensors):
            if s.sigma_r <= 0 or s.sigma_theta <= 0:
                raise ScenarioError(f"sensor {i}: noise sigmas must be positive")
            if s.lag < 1:
                raise ScenarioError(f"sensor {i}: reporting lag must be >= 1")
        for i, t in enumerate(self.targets):
            if not t.segments:
                raise ScenarioError(f"target {i}: needs at least one motion segment")
            for seg in t.segments:
                if seg.model not in ("ncv", "turn"):
                    raise ScenarioError(
                        f"target {i}: unknown segment model {seg.model!r}"
                    )
                if seg.frames < 1:
                    raise ScenarioError(f"target {i}: segment frames must be >= 1")

    @property
    def bias_dim(self) -> int:
        return 4 if self.estimate_scale_bias else 2

    def bias_prior_sigma(self) -> np.ndarray:
        off = np.array(self.bias_prior_offset, dtype=float)
        if self.estimate_scale_bias:
            return np.concatenate([off, [self.bias_prior_scale, self.bias_prior_scale]])
        return off

    def update_epochs(self) -> list[int]:
        """Frames at which at least two sensors report (excluding frame 0)."""
        epochs = []
        for k in range(1, self.frames + 1):
            if sum(1 for s in self.sensors if k % s.lag == 0) >= 2:
                epochs.append(k)
        return epochs

    def reporters_at(self, k: int) -> list[int]:
        if k == 0:
            return list(range(len(self.sensors)))
        return [i for i, s in enumerate(self.sensors) if k % s.lag == 0]


def _scenario_from_dict(doc: dict) -> Scenario:
    try:
        sensors = [
            SensorSpec(
                position=s["position"],
                sigma_r=float(s["sigma_r"]),
                sigma_theta=float(s["sigma_theta"]),
                bias=BiasVector(
                    b_r=float(s["bias"].get("b_r", 0.0)),
                    b_theta=float(s["bias"].get("b_theta", 0.0)),
                    eps_r=float(s["bias"].get("eps_r", 0.0)),
                    eps_theta=float(s["bias"].get("eps_theta", 0.0)),
                ),
                lag=int(s.get("lag", 1)),
            )
            for s in doc["sensors"]
        ]
        targets = [
            TargetSpec(
                initial_state=t["initial_state"],
                segments=[
                    SegmentSpec(
                        model=seg["model"],
                        frames=int(seg["frames"]),
                        omega=float(seg.get("omega", 0.0)),
                    )
                    for seg in t["segments"]
                ],
            )
            for t in doc["targets"]
        ]
        lf = doc.get("local_filter", {})
        scenario = Scenario(
            name=doc.get("name", "scenario"),
            sensors=sensors,
            targets=targets,
            frames=int(doc["frames"]),
            mc_runs=int(doc.get("mc_runs", 1)),
            dt=float(doc.get("dt", 1.0)),
            process_noise_q=float(doc.get("process_noise_q", 0.1)),
            local_filter=LocalFilterSpec(
                type=lf.get("type", "kf"),
                q=float(lf.get("q", 1.0)),
                q1=float(lf.get("q1", 10.0)),
                q2=float(lf.get("q2", 2.0)),
            ),
            fusion_q=float(doc.get("fusion_q", 1.0)),
            estimate_scale_bias=bool(doc.get("estimate_scale_bias", False)),
            rng_seed=int(doc.get("rng_seed", 0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError(f"malformed scenario document: {exc}") from exc
    return scenario


def load_scenario(source: str | Path | dict) -> Scenario:
    """Load a scenario from a JSON path, a builtin name, or a parsed dict."""
    if isinstance(source, dict):
        return _scenario_from_dict(source)
    path = Path(source)
    if not path.exists() and str(source) in BUILTIN_SCENARIOS:
        path = builtin_scenario_path(str(source))
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except FileNotFoundError as exc:
        raise ScenarioError(f"scenario file not found: {source}") from exc
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"scenario file is not valid JSON: {exc}") from exc
    return _scenario_from_dict(doc)


def builtin_scenario_path(name: str) -> Path:
    """Filesystem path of one of the packaged scenario files."""
    if name not in BUILTIN_SCENARIOS:
        raise ScenarioError(
            f"unknown builtin scenario {name!r}; available: {BUILTIN_SCENARIOS}"
        )
    ref = resources.files("sensorreg") / "scenarios" / f"{name}.json"
    return Path(str(ref))
