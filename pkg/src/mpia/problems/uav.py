"""Biparty UAV path planning: map generation, objectives, constraints and cases.

Coordinates: ``x``/``y`` in the decision vector and in mission definitions
are grid units (one unit is one cell); waypoint arrays handed to the
objective functions are in metres.  Grids are stored row-major as
``grid[iy, ix]``.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from ..core import ContractError, PartyScheme

SCENARIO_SCHEMA = "mpia.scenario/1"
NOMINAL_GRID = 50
MAP_SEEDS = {"MAP-A": 20230, "MAP-B": 20231}

LOGNORMAL_MU = 3.04670
LOGNORMAL_SIGMA = 0.76023


@dataclass(frozen=True)
class UavConstants:
    """Physical, risk and limit constants.

    The risk parameters are not published with the problem; the values here
    are documented defaults and can be overridden in a scenario file.
    """

    mass: float = 1.38
    speed: float = 10.0
    rho0: float = 1.225
    rotors: int = 4
    disk_area: float = 0.1
    gravity: float = 9.8
    density_scale_height: float = 10.7
    density_altitude_unit: float = 1000.0  # z is divided by this before the air-density exponent
    p_crash: float = 1e-4
    impact_area: float = 0.5
    alpha_energy: float = 1e2
    beta_energy: float = 1e6
    shelter: float = 0.5
    drag: float = 0.3
    noise_k: float = 1.0
    noise_level: float = 80.0
    noise_distance: float = 50.0
    noise_cutoff: float = 100.0
    h_min: float = 10.0
    h_max: float = 120.0
    alpha_max: float = math.pi / 3
    beta_max: float = math.pi / 4
    mu: float = LOGNORMAL_MU
    sigma: float = LOGNORMAL_SIGMA


@dataclass
class UavScenario:
    name: str
    building_height: np.ndarray
    pop_density: np.ndarray
    vehicle_density: np.ndarray
    start: tuple[float, float] = (1.0, 1.0)
    end: tuple[float, float] = (45.0, 45.0)
    hover_points: tuple[tuple[float, float], ...] = ((25.0, 30.0), (34.0, 20.0), (40.0, 35.0))
    hover_altitude: float = 50.0
    cell_size: float = 100.0
    constants: UavConstants = field(default_factory=UavConstants)
    seed: int | None = None

    def __post_init__(self) -> None:
        self.building_height = np.asarray(self.building_height, dtype=float)
        self.pop_density = np.asarray(self.pop_density, dtype=float)
        self.vehicle_density = np.asarray(self.vehicle_density, dtype=float)
        shape = self.building_height.shape
        if len(shape) != 2 or self.pop_density.shape != shape or self.vehicle_density.shape != shape:
            raise ContractError("grids must be 2-D and share one shape")
        if (self.building_height < 0).any() or (self.pop_density < 0).any() or (self.vehicle_density < 0).any():
            raise ContractError("grid values must be non-negative")
        self.start = tuple(float(v) for v in self.start)
        self.end = tuple(float(v) for v in self.end)
        self.hover_points = tuple(tuple(float(v) for v in p) for p in self.hover_points)
        for p in (self.start, self.end, *self.hover_points):
            if not (0 <= p[0] <= self.width and 0 <= p[1] <= self.height):
                raise ContractError(f"point {p} lies outside the {self.width}x{self.height} grid")
        if not self.constants.h_min < self.constants.h_max:
            raise ContractError("h_min must be below h_max")

    @property
    def width(self) -> int:
        return self.building_height.shape[1]

    @property
    def height(self) -> int:
        return self.building_height.shape[0]

    def hover_points_m(self) -> np.ndarray:
        pts = np.array(self.hover_points, dtype=float) * self.cell_size
        return np.column_stack([pts, np.full(len(pts), self.hover_altitude)])

    def lookup(self, grid: np.ndarray, P: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Grid value at the cell containing each waypoint, and an outside-grid mask."""
        gx = P[..., 0] / self.cell_size
        gy = P[..., 1] / self.cell_size
        outside = (gx < 0) | (gy < 0) | (gx > self.width) | (gy > self.height)
        ix = np.clip(np.floor(gx).astype(int), 0, self.width - 1)
        iy = np.clip(np.floor(gy).astype(int), 0, self.height - 1)
        vals = np.where(outside, 0.0, grid[iy, ix])
        return vals, outside

    # -- serialization -------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "schema": SCENARIO_SCHEMA,
            "name": self.name,
            "seed": self.seed,
            "width": self.width,
            "height": self.height,
            "cell_size": self.cell_size,
            "mission": {"start": list(self.start), "end": list(self.end)},
            "hover_points": [list(p) for p in self.hover_points],
            "hover_altitude": self.hover_altitude,
            "constants": asdict(self.constants),
            "grids": {
                "building_height": self.building_height.ravel().tolist(),
                "pop_density": self.pop_density.ravel().tolist(),
                "vehicle_density": self.vehicle_density.ravel().tolist(),
            },
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "UavScenario":
        if doc.get("schema") != SCENARIO_SCHEMA:
            raise ContractError(f"unsupported scenario schema {doc.get('schema')!r}")
        shape = (int(doc["height"]), int(doc["width"]))
        grids = {k: np.asarray(v, dtype=float).reshape(shape) for k, v in doc["grids"].items()}
        return cls(
            name=doc["name"],
            seed=doc.get("seed"),
            cell_size=float(doc["cell_size"]),
            start=tuple(doc["mission"]["start"]),
            end=tuple(doc["mission"]["end"]),
            hover_points=tuple(tuple(p) for p in doc["hover_points"]),
            hover_altitude=float(doc["hover_altitude"]),
            constants=UavConstants(**doc.get("constants", {})),
            **grids,
        )

    def checksum(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "UavScenario":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass(frozen=True)
class MapParams:
    width: int = NOMINAL_GRID
    height: int = NOMINAL_GRID
    cell_size: float = 100.0
    building_fraction: float = 0.25
    mu: float = LOGNORMAL_MU
    sigma: float = LOGNORMAL_SIGMA
    pop_bumps: int = 5
    vehicle_bumps: int = 6
    pop_peak: tuple[float, float] = (2e-3, 1e-2)  # people per m^2
    vehicle_peak: tuple[float, float] = (5e-4, 3e-3)  # vehicles per m^2
    bump_width: tuple[float, float] = (0.06, 0.2)  # fraction of the grid width
    name: str = "custom"


def _bumps(rng, n, peak, width_frac, W, H) -> np.ndarray:
    field_ = np.zeros((H, W))
    if n <= 0:
        return field_
    cx = (np.arange(W) + 0.5)[None, :]
    cy = (np.arange(H) + 0.5)[:, None]
    centers = rng.random((n, 2)) * (W, H)
    amps = rng.uniform(peak[0], peak[1], size=n)
    widths = rng.uniform(width_frac[0], width_frac[1], size=n) * W
    for (px, py), a, w in zip(centers, amps, widths):
        field_ += a * np.exp(-((cx - px) ** 2 + (cy - py) ** 2) / (2.0 * w * w))
    return field_


def generate_map(seed: int, params: MapParams = MapParams()) -> UavScenario:
    """Seeded synthetic city.

    Building cells are Bernoulli(``building_fraction``) with lognormal
    heights; population and vehicle densities are sums of Gaussian radial
    bumps evaluated at cell centres.  Mission endpoints and hover points are
    the nominal 50x50 positions scaled to the grid width.
    """
    rng = np.random.default_rng(seed)
    W, H = int(params.width), int(params.height)
    if W < 2 or H < 2:
        raise ContractError("grid must be at least 2x2")
    mask = rng.random((H, W)) < params.building_fraction
    heights = rng.lognormal(params.mu, params.sigma, size=(H, W)) * mask
    pop = _bumps(rng, params.pop_bumps, params.pop_peak, params.bump_width, W, H)
    veh = _bumps(rng, params.vehicle_bumps, params.vehicle_peak, params.bump_width, W, H)
    s = W / NOMINAL_GRID
    return UavScenario(
        name=params.name,
        seed=int(seed),
        building_height=np.round(heights, 3),
        pop_density=np.round(pop, 9),
        vehicle_density=np.round(veh, 9),
        start=(1.0 * s, 1.0 * s),
        end=(45.0 * s, 45.0 * s),
        hover_points=((25.0 * s, 30.0 * s), (34.0 * s, 20.0 * s), (40.0 * s, 35.0 * s)),
        cell_size=params.cell_size,
        constants=UavConstants(mu=params.mu, sigma=params.sigma),
    )


def default_map(name: str, width: int = NOMINAL_GRID) -> UavScenario:
    """MAP-A or MAP-B: same generator parameters, different seeds."""
    if name not in MAP_SEEDS:
        raise ContractError(f"unknown map {name!r}")
    label = name if width == NOMINAL_GRID else f"{name}-{width}"
    return generate_map(MAP_SEEDS[name], MapParams(width=width, height=width, name=label))


# --------------------------------------------------------------------------
# objectives; ``P`` has shape (..., n+1, 3) in metres


def _segments(P):
    return np.diff(np.asarray(P, dtype=float), axis=-2)


def f_length(P) -> np.ndarray:
    return np.linalg.norm(_segments(P), axis=-1).sum(axis=-1)


def f_height(P) -> np.ndarray:
    return np.abs(np.diff(np.asarray(P, dtype=float)[..., 2], axis=-1)).sum(axis=-1)


def air_density(z1, z2, c: UavConstants) -> np.ndarray:
    mean_alt = (np.asarray(z1) + np.asarray(z2)) / (2.0 * c.density_altitude_unit)
    return c.rho0 * np.exp(-mean_alt / c.density_scale_height)


def f_fuel(P, c: UavConstants = UavConstants()) -> np.ndarray:
    P = np.asarray(P, dtype=float)
    seg = _segments(P)
    length = np.linalg.norm(seg, axis=-1)
    z = P[..., 2]
    rho = air_density(z[..., :-1], z[..., 1:], c)
    W, G = c.mass, c.gravity
    cruise = W**1.5 * np.sqrt(G**3 / (2.0 * rho * c.disk_area * c.rotors)) * length / c.speed
    climb = W * G * np.maximum(seg[..., 2], 0.0)
    return (cruise + climb).sum(axis=-1)


def f_distance(P, hover_points) -> np.ndarray:
    P = np.asarray(P, dtype=float)
    Hp = np.asarray(hover_points, dtype=float)
    dist = np.linalg.norm(P[..., :, None, :] - Hp, axis=-1)  # (..., n+1, n_hover)
    return dist.min(axis=-2).sum(axis=-1)


def crash_velocity(z, c: UavConstants = UavConstants()) -> np.ndarray:
    """Ground-impact speed of a fall from ``z`` metres under quadratic drag."""
    z = np.maximum(np.asarray(z, dtype=float), 0.0)
    k = c.drag * c.impact_area * c.rho0
    return np.sqrt(2.0 * c.mass * c.gravity / k * (1.0 - np.exp(-z * k / c.mass)))


def fatality_probability(z, c: UavConstants = UavConstants()) -> np.ndarray:
    v = crash_velocity(z, c)
    energy = 0.5 * c.mass * v * v
    with np.errstate(divide="ignore"):
        ratio = np.where(energy > 0, c.beta_energy / np.where(energy > 0, energy, 1.0), np.inf)
    return 1.0 / (1.0 + math.sqrt(c.alpha_energy / c.beta_energy) * ratio ** (1.0 / (4.0 * c.shelter)))


def f_fatal(P, scenario: UavScenario) -> np.ndarray:
    P = np.asarray(P, dtype=float)
    c = scenario.constants
    sp, _ = scenario.lookup(scenario.pop_density, P)
    sv, _ = scenario.lookup(scenario.vehicle_density, P)
    r = c.p_crash * c.impact_area * fatality_probability(P[..., 2], c)
    return (r * sp).sum(axis=-1) + (r * sv).sum(axis=-1)


def lognormal_pdf(z, mu: float = LOGNORMAL_MU, sigma: float = LOGNORMAL_SIGMA) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    return np.exp(-((np.log(z) - mu) ** 2) / (2.0 * sigma * sigma)) / (z * sigma * math.sqrt(2.0 * math.pi))


def property_cost(z, mu: float = LOGNORMAL_MU, sigma: float = LOGNORMAL_SIGMA) -> np.ndarray:
    """Per-waypoint property risk: the pdf value, held at its value at e^mu below that altitude."""
    z = np.asarray(z, dtype=float)
    if np.any(z <= 0):
        raise ContractError("property risk needs strictly positive altitudes")
    knee = math.exp(mu)
    return lognormal_pdf(np.maximum(z, knee), mu, sigma)


def f_eco(P, scenario: UavScenario | None = None) -> np.ndarray:
    c = scenario.constants if scenario is not None else UavConstants()
    return property_cost(np.asarray(P, dtype=float)[..., 2], c.mu, c.sigma).sum(axis=-1)


def f_noise(P, scenario: UavScenario) -> np.ndarray:
    P = np.asarray(P, dtype=float)
    c = scenario.constants
    sp, _ = scenario.lookup(scenario.pop_density, P)
    z = P[..., 2]
    term = c.noise_k * sp * c.noise_level / (z * z + c.noise_distance**2)
    return np.where(z > c.noise_cutoff, 0.0, term).sum(axis=-1)


CONSTRAINT_CHANNELS = ("altitude", "turning", "slope", "building", "outside")


def path_angles(P) -> tuple[np.ndarray, np.ndarray]:
    """Turning angles between consecutive horizontal projections, and per-segment slopes.

    Zero-length projections give a turning angle of 0 and a slope of
    ``pi/2 * sign(dz)``.
    """
    seg = _segments(P)
    h = seg[..., :2]
    hl = np.linalg.norm(h, axis=-1)
    a, b = h[..., :-1, :], h[..., 1:, :]
    la, lb = hl[..., :-1], hl[..., 1:]
    ok = (la > 0) & (lb > 0)
    cosang = np.where(ok, (a * b).sum(axis=-1) / np.where(ok, la * lb, 1.0), 1.0)
    alpha = np.arccos(np.clip(cosang, -1.0, 1.0))
    dz = seg[..., 2]
    beta = np.where(hl > 0, np.arctan(dz / np.where(hl > 0, hl, 1.0)), np.sign(dz) * (np.pi / 2))
    return alpha, beta


def constraint_eval(P, scenario: UavScenario) -> np.ndarray:
    """Non-negative violation per channel (see ``CONSTRAINT_CHANNELS``); zeros mean feasible."""
    P = np.asarray(P, dtype=float)
    c = scenario.constants
    z = P[..., 2]
    altitude = (np.maximum(c.h_min - z, 0.0) + np.maximum(z - c.h_max, 0.0)).sum(axis=-1)
    alpha, beta = path_angles(P)
    turning = np.maximum(np.abs(alpha) - c.alpha_max, 0.0).sum(axis=-1)
    slope = np.maximum(np.abs(beta) - c.beta_max, 0.0).sum(axis=-1)
    bh, outside = scenario.lookup(scenario.building_height, P)
    building = np.where(bh > 0, np.maximum(bh - z, 0.0), 0.0).sum(axis=-1)
    gx, gy = P[..., 0] / scenario.cell_size, P[..., 1] / scenario.cell_size
    off = (
        np.maximum(-gx, 0)
        + np.maximum(gx - scenario.width, 0)
        + np.maximum(-gy, 0)
        + np.maximum(gy - scenario.height, 0)
    ).sum(axis=-1)
    return np.stack([altitude, turning, slope, building, off], axis=-1)


def total_violation(V, scenario: UavScenario) -> np.ndarray:
    """Scale-free sum of the violation channels."""
    c = scenario.constants
    band = c.h_max - c.h_min
    scale = np.array([band, c.alpha_max, c.beta_max, band, max(scenario.width, scenario.height)])
    return (np.asarray(V) / scale).sum(axis=-1)


# --------------------------------------------------------------------------
# paths and problems


@dataclass
class UavPath:
    waypoints: np.ndarray  # (n+1, 3), metres


def decode(x, scenario: UavScenario) -> np.ndarray:
    """Decision vector(s) to waypoint arrays in metres.

    The vector holds ``(x, y, z)`` for each interior waypoint; the endpoints
    sit at the mission start/end and copy the altitude of their neighbour.
    """
    X = np.asarray(x, dtype=float)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    n = X.shape[0]
    inner = X.reshape(n, -1, 3).copy()
    inner[..., :2] *= scenario.cell_size
    s = np.array(scenario.start) * scenario.cell_size
    e = np.array(scenario.end) * scenario.cell_size
    first = np.column_stack([np.tile(s, (n, 1)), inner[:, 0, 2]])
    last = np.column_stack([np.tile(e, (n, 1)), inner[:, -1, 2]])
    P = np.concatenate([first[:, None], inner, last[:, None]], axis=1)
    return P[0] if single else P


def encode(P, scenario: UavScenario) -> np.ndarray:
    P = np.asarray(P, dtype=float)
    inner = P[..., 1:-1, :].copy()
    inner[..., :2] /= scenario.cell_size
    return inner.reshape(*P.shape[:-2], -1)


OBJECTIVES: dict[str, Callable] = {
    "length": lambda P, s: f_length(P),
    "fuel": lambda P, s: f_fuel(P, s.constants),
    "height": lambda P, s: f_height(P),
    "distance": lambda P, s: f_distance(P, s.hover_points_m()),
    "fatal": f_fatal,
    "eco": f_eco,
    "noise": f_noise,
    "length+height": lambda P, s: f_length(P) + f_height(P),
}

CASES: dict[int, tuple[tuple[str, str], tuple[str, str], str]] = {}
for _i, (_eff, _safe) in enumerate(
    [
        (("length", "distance"), ("fatal", "eco")),
        (("length+height", "distance"), ("fatal", "eco")),
        (("fuel", "distance"), ("fatal", "eco")),
        (("length", "distance"), ("fatal", "noise")),
        (("length+height", "distance"), ("fatal", "noise")),
        (("fuel", "distance"), ("fatal", "noise")),
    ]
):
    CASES[_i + 1] = (_eff, _safe, "MAP-A")
    CASES[_i + 7] = (_eff, _safe, "MAP-B")


class UavProblem:
    """Biparty path-planning instance: efficiency party first, safety party second."""

    constrained = True

    def __init__(
        self,
        scenario: UavScenario,
        efficiency: Sequence[str],
        safety: Sequence[str],
        n_waypoints: int = 28,
        name: str = "uav",
    ):
        for o in (*efficiency, *safety):
            if o not in OBJECTIVES:
                raise ContractError(f"unknown objective {o!r}")
        self.scenario = scenario
        self.objective_names = [*efficiency, *safety]
        ne = len(efficiency)
        self.scheme = PartyScheme([tuple(range(ne)), tuple(range(ne, len(self.objective_names)))])
        self.n_waypoints = int(n_waypoints)
        self.name = name
        c = scenario.constants
        lo = np.tile([0.0, 0.0, c.h_min], self.n_waypoints)
        hi = np.tile([float(scenario.width), float(scenario.height), c.h_max], self.n_waypoints)
        self.lower, self.upper = lo, hi

    @property
    def n_var(self) -> int:
        return 3 * self.n_waypoints

    @property
    def n_obj(self) -> int:
        return len(self.objective_names)

    def decode(self, X) -> np.ndarray:
        return decode(X, self.scenario)

    def evaluate(self, X) -> tuple[np.ndarray, np.ndarray]:
        P = decode(np.atleast_2d(X), self.scenario)
        F = np.column_stack([OBJECTIVES[o](P, self.scenario) for o in self.objective_names])
        cv = total_violation(constraint_eval(P, self.scenario), self.scenario)
        return F, cv

    def sample_initial(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return init_uav_population(self.scenario, n, rng, self.n_waypoints)


def build_case(case_id: int, scenario: UavScenario | None = None, n_waypoints: int = 28) -> UavProblem:
    """Problem instance for one row of the case table.

    Without a scenario the case's default map is generated.  A scenario
    named MAP-A or MAP-B must match the case's map.
    """
    if case_id not in CASES:
        raise ContractError(f"unknown case {case_id}; expected 1..12")
    eff, safe, map_name = CASES[case_id]
    if scenario is None:
        scenario = default_map(map_name)
    elif scenario.name.split("-")[:2] != map_name.split("-") and scenario.name.startswith("MAP-"):
        raise ContractError(f"case {case_id} runs on {map_name}, got scenario {scenario.name}")
    return UavProblem(scenario, eff, safe, n_waypoints, name=f"case{case_id}")


def init_uav_population(
    scenario: UavScenario,
    n: int,
    rng: np.random.Generator,
    n_waypoints: int = 28,
    *,
    xy_sigma: float | None = None,
    z_spread: float | None = None,
    passes: int = 30,
    clearance: float = 5.0,
) -> np.ndarray:
    """Near-straight start-to-end paths, smoothed and lifted over buildings.

    Waypoints are spaced along the start-end line with Gaussian ``xy`` noise
    and altitudes uniform in ``mid +- z_spread``; repeated [1, 2, 1]/4
    smoothing passes remove sharp turns and slopes, and each pass lifts
    waypoints that sit inside a building.
    """
    c = scenario.constants
    m = int(n_waypoints)
    if xy_sigma is None:
        xy_sigma = 4.0 * scenario.width / NOMINAL_GRID
    if z_spread is None:
        z_spread = (c.h_max - c.h_min) / 2
    mid = 0.5 * (c.h_min + c.h_max)
    s, e = np.array(scenario.start), np.array(scenario.end)
    t = np.arange(1, m + 1) / (m + 1)
    base = s + t[:, None] * (e - s)
    xy = base[None] + rng.normal(0.0, 1.0, (n, m, 2)) * xy_sigma
    z = mid + rng.uniform(-1.0, 1.0, (n, m)) * z_spread
    xy_full = np.concatenate([np.tile(s, (n, 1, 1)), xy, np.tile(e, (n, 1, 1))], axis=1)
    for _ in range(passes):
        xy_full[:, 1:-1] = 0.25 * xy_full[:, :-2] + 0.5 * xy_full[:, 1:-1] + 0.25 * xy_full[:, 2:]
        zp = np.concatenate([z[:, :1], z, z[:, -1:]], axis=1)
        z = 0.25 * zp[:, :-2] + 0.5 * zp[:, 1:-1] + 0.25 * zp[:, 2:]
        z = _lift(scenario, xy_full[:, 1:-1], z, clearance)
    xy = np.clip(xy_full[:, 1:-1], 0.0, [scenario.width, scenario.height])
    z = np.clip(z, c.h_min, c.h_max)
    return np.concatenate([xy, z[..., None]], axis=-1).reshape(n, 3 * m)


def _lift(scenario: UavScenario, xy: np.ndarray, z: np.ndarray, clearance: float) -> np.ndarray:
    P = np.concatenate([xy * scenario.cell_size, z[..., None]], axis=-1)
    bh, _ = scenario.lookup(scenario.building_height, P)
    need = np.where(bh > 0, bh + clearance, -np.inf)
    return np.minimum(np.maximum(z, need), scenario.constants.h_max)


def straight_path(scenario: UavScenario, n_waypoints: int = 28, altitude: float | None = None) -> np.ndarray:
    """Decision vector of the straight start-to-end path at a constant altitude."""
    c = scenario.constants
    alt = 0.5 * (c.h_min + c.h_max) if altitude is None else altitude
    s, e = np.array(scenario.start), np.array(scenario.end)
    t = np.arange(1, n_waypoints + 1) / (n_waypoints + 1)
    xy = s + t[:, None] * (e - s)
    return np.column_stack([xy, np.full(n_waypoints, alt)]).ravel()


def with_constants(scenario: UavScenario, **overrides) -> UavScenario:
    return replace(scenario, constants=replace(scenario.constants, **overrides))
