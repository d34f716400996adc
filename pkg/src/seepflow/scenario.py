"""Scenario descriptions, named presets and the time loop.

A :class:`ScenarioConfig` is an immutable description of one experiment. It
maps one-to-one onto a JSON document; see :func:`config_to_dict` for the key
names. Time and length keys carry their unit in the name (``dt_hours`` or
``dt_seconds``, ``h_m``), exactly one unit variant per quantity.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, replace, fields
from pathlib import Path
from typing import Callable

import numpy as np

from .constitutive import MaterialParams, lscheme_bound, soil as soil_preset
from .mesh import (BOTTOM, TriMesh, build_profile_mesh, build_rectangle_mesh, import_mesh)
from .seepage import (BoundaryConditions, ConvergenceError, FieldState, RichardsProblem,
                      SolverSettings, StepReport, step)

__all__ = [
    "ConfigError",
    "Geometry",
    "BottomBC",
    "InitialCondition",
    "OutputRequest",
    "ScenarioConfig",
    "PRESET_NAMES",
    "preset",
    "config_to_dict",
    "config_from_dict",
    "load_config",
    "save_config",
    "apply_overrides",
    "build_mesh",
    "bottom_profile",
    "initial_psi",
    "initial_state",
    "rain_normal",
    "boundary_conditions",
    "build_problem",
    "SimulationResult",
    "simulate",
    "with_solver",
]

log = logging.getLogger(__name__)

HOUR = 3600.0
HYDROSTATIC_COMPATIBLE = "hydrostatic-compatible"


class ConfigError(ValueError):
    """Invalid or inconsistent scenario configuration."""


def _points(seq) -> tuple:
    return tuple((float(x), float(z)) for x, z in seq)


@dataclass(frozen=True)
class Geometry:
    """``rectangle`` (width, height, h), ``profile`` (top, bottom, h_top, h_bot)
    or ``mesh_file`` (path)."""

    kind: str
    width: float | None = None
    height: float | None = None
    h: float | None = None
    top: tuple | None = None
    bottom: tuple | None = None
    h_top: float | None = None
    h_bot: float | None = None
    path: str | None = None

    def __post_init__(self):
        need = {"rectangle": ("width", "height", "h"),
                "profile": ("top", "bottom", "h_top", "h_bot"),
                "mesh_file": ("path",)}
        if self.kind not in need:
            raise ConfigError(f"unknown geometry kind {self.kind!r}")
        missing = [n for n in need[self.kind] if getattr(self, n) is None]
        if missing:
            raise ConfigError(f"{self.kind} geometry needs {', '.join(missing)}")
        if self.top is not None:
            object.__setattr__(self, "top", _points(self.top))
        if self.bottom is not None:
            object.__setattr__(self, "bottom", _points(self.bottom))


@dataclass(frozen=True)
class BottomBC:
    """``no_flux`` or ``head`` with a value in m or ``"hydrostatic-compatible"``."""

    kind: str = "no_flux"
    value: float | str | None = None

    def __post_init__(self):
        if self.kind == "no_flux":
            if self.value is not None:
                raise ConfigError("no_flux bottom condition takes no value")
        elif self.kind == "head":
            if isinstance(self.value, str):
                if self.value != HYDROSTATIC_COMPATIBLE:
                    raise ConfigError(f"bottom head must be a number or {HYDROSTATIC_COMPATIBLE!r}")
            elif self.value is None or not math.isfinite(float(self.value)):
                raise ConfigError("bottom head needs a finite value")
            else:
                object.__setattr__(self, "value", float(self.value))
        else:
            raise ConfigError(f"unknown bottom condition {self.kind!r}")


@dataclass(frozen=True)
class InitialCondition:
    """Initial head at cell centroids.

    ``uniform``: ``psi0``. ``hydrostatic``: ``z_ref - z``.
    ``linear_in_depth``: ``a - b (z - z_bot(x))``.
    """

    kind: str
    psi0: float | None = None
    z_ref: float | None = None
    a: float | None = None
    b: float | None = None

    def __post_init__(self):
        need = {"uniform": ("psi0",), "hydrostatic": ("z_ref",), "linear_in_depth": ("a", "b")}
        if self.kind not in need:
            raise ConfigError(f"unknown initial condition {self.kind!r}")
        for n in need[self.kind]:
            v = getattr(self, n)
            if v is None or not math.isfinite(float(v)):
                raise ConfigError(f"{self.kind} initial condition needs a finite {n}")

    def evaluate(self, x, z, z_bot=None) -> np.ndarray:
        x, z = np.asarray(x, float), np.asarray(z, float)
        if self.kind == "uniform":
            return np.full(z.shape, float(self.psi0))
        if self.kind == "hydrostatic":
            return self.z_ref - z
        if z_bot is None:
            raise ConfigError("linear_in_depth needs the bottom profile")
        return self.a - self.b * (z - z_bot(x))


OUTPUT_KINDS = ("vtk_series", "profile_csv", "report_json", "boundary_csv")


@dataclass(frozen=True)
class OutputRequest:
    kind: str
    every: int = 1
    prefix: str = "out"
    x: float | None = None

    def __post_init__(self):
        if self.kind not in OUTPUT_KINDS:
            raise ConfigError(f"unknown output kind {self.kind!r}")
        if int(self.every) < 1:
            raise ConfigError("output cadence must be at least 1")
        if self.kind == "profile_csv" and self.x is None:
            raise ConfigError("profile_csv needs an x position")


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    geometry: Geometry
    soil: str | MaterialParams
    rain_ratio: float
    bottom_bc: BottomBC
    initial_condition: InitialCondition
    t_final: float
    dt: float
    solver: SolverSettings = field(default_factory=SolverSettings)
    outputs: tuple = ()

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigError("dt must be positive")
        if not self.t_final >= self.dt:
            raise ConfigError("t_final must be at least dt")
        if not self.rain_ratio >= 0:
            raise ConfigError("rain_ratio must be non-negative")
        object.__setattr__(self, "outputs", tuple(self.outputs))
        self.material  # validates the soil name

    @property
    def material(self) -> MaterialParams:
        if isinstance(self.soil, MaterialParams):
            return self.soil
        try:
            return soil_preset(self.soil)
        except KeyError as exc:
            raise ConfigError(str(exc)) from None

    @property
    def n_steps(self) -> int:
        return int(round(self.t_final / self.dt))


# ------------------------------------------------------------------- presets

def _rectangle(ratio, dt_h, tfin_h, name, soil="clay", h=0.05, **solver):
    return ScenarioConfig(
        name=name,
        geometry=Geometry("rectangle", width=0.1, height=5.0, h=h),
        soil=soil,
        rain_ratio=ratio,
        bottom_bc=BottomBC("head", 0.0),
        initial_condition=InitialCondition("hydrostatic", z_ref=0.0),
        t_final=tfin_h * HOUR,
        dt=dt_h * HOUR,
        solver=SolverSettings(**{"eps_a": 1e-5, **solver}),
    )


# two plateaus joined by an inclined face; lower plateau at the slope toe
SLOPE_TOP = ((0.0, 2.0), (3.0, 2.0), (5.0, 3.0), (8.0, 3.0))
SLOPE_BOTTOM = ((0.0, 0.0), (8.0, 0.0))

# synthetic hillside, ~600 m long, regolith 4-14 m over an impervious substrate
NATURAL_TOP = ((0.0, 560.0), (80.0, 552.0), (160.0, 538.0), (240.0, 531.0), (320.0, 518.0),
               (400.0, 511.0), (470.0, 500.0), (540.0, 492.0), (600.0, 487.0))
NATURAL_BOTTOM = ((0.0, 553.0), (80.0, 543.0), (160.0, 527.0), (240.0, 517.0), (320.0, 508.0),
                  (400.0, 499.0), (470.0, 490.0), (540.0, 485.0), (600.0, 483.0))
# mesh sizes of the field study are 0.25 m (top) and 0.5 m (bottom); coarsened 8x
NATURAL_COARSENING = 8.0


# the slope studies run the L-scheme at the lower admissible bound L = sup(theta') / 2
HALF_L_CLAY = 0.5 * lscheme_bound(soil_preset("clay"))


def _slope(name, ic, **solver):
    return ScenarioConfig(
        name=name,
        geometry=Geometry("profile", top=SLOPE_TOP, bottom=SLOPE_BOTTOM, h_top=0.1, h_bot=0.3),
        soil="clay",
        rain_ratio=10.0,
        bottom_bc=BottomBC("head", HYDROSTATIC_COMPATIBLE),
        initial_condition=ic,
        t_final=20 * HOUR,
        dt=5 * HOUR,
        solver=SolverSettings(**{"scheme": "non_hybridized", "gamma0": 1e-10, "eps_a": 1e-5,
                                 **solver}),
    )


def _natural(name, bottom_bc, ic, dt_h, tfin_h, **solver):
    return ScenarioConfig(
        name=name,
        geometry=Geometry("profile", top=NATURAL_TOP, bottom=NATURAL_BOTTOM,
                          h_top=0.25 * NATURAL_COARSENING, h_bot=0.5 * NATURAL_COARSENING),
        soil="clay",
        rain_ratio=10.0,
        bottom_bc=bottom_bc,
        initial_condition=ic,
        t_final=tfin_h * HOUR,
        dt=dt_h * HOUR,
        solver=SolverSettings(**{"scheme": "hybridized", "eps_a": 1e-5, **solver}),
    )


_PRESETS: dict[str, Callable[[], ScenarioConfig]] = {
    "rect_01": lambda: _rectangle(0.1, 10, 100, "rect_01", linearization="combined"),
    "rect_1": lambda: _rectangle(1.0, 5, 50, "rect_1", linearization="combined"),
    "rect_10": lambda: _rectangle(10.0, 5, 50, "rect_10", linearization="combined"),
    "rect_silt_relaxed": lambda: _rectangle(1.0, 1, 1000, "rect_silt_relaxed", soil="silt", h=0.1,
                                            epsilon_relax=1e-2, max_iter=20,
                                            accept_unconverged=True),
    "rect_sand": lambda: _rectangle(10.0, 0.5, 6, "rect_sand", soil="sand", h=0.01,
                                    linearization="newton", eps_a=1e-7,
                                    # smooth soil: plain Newton; damping stalls at w_min
                                    adaptive_relaxation=False),
    "slope_wetting": lambda: _slope("slope_wetting", InitialCondition("uniform", psi0=-20.0),
                                    L_override=HALF_L_CLAY),
    "slope_exitpoint": lambda: _slope("slope_exitpoint",
                                      InitialCondition("hydrostatic", z_ref=2.0)),
    "natural_slope_1": lambda: _natural("natural_slope_1", BottomBC("head", HYDROSTATIC_COMPATIBLE),
                                        InitialCondition("uniform", psi0=-20.0), 5, 50),
    "natural_slope_2": lambda: _natural("natural_slope_2", BottomBC("no_flux"),
                                        InitialCondition("linear_in_depth", a=1.0, b=0.2), 20, 40,
                                        linearization="combined", combined_require_both=True,
                                        L_override=HALF_L_CLAY),
}

PRESET_NAMES = tuple(_PRESETS)


def preset(name: str) -> ScenarioConfig:
    try:
        return _PRESETS[name]()
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESET_NAMES)}") from None


# ------------------------------------------------------------- serialization

_GEOM_KEYS = {"width": "width_m", "height": "height_m", "h": "h_m", "top": "top_m",
              "bottom": "bottom_m", "h_top": "h_top_m", "h_bot": "h_bot_m", "path": "path"}
_IC_KEYS = {"psi0": "psi0_m", "z_ref": "z_ref_m", "a": "a_m", "b": "b"}
_TIME_UNITS = {"seconds": 1.0, "hours": HOUR}


def config_to_dict(cfg: ScenarioConfig) -> dict:
    """Canonical JSON-ready form (times in seconds)."""
    geom = {"kind": cfg.geometry.kind}
    for attr, key in _GEOM_KEYS.items():
        v = getattr(cfg.geometry, attr)
        if v is not None:
            geom[key] = [list(p) for p in v] if attr in ("top", "bottom") else v
    ic = {"kind": cfg.initial_condition.kind}
    for attr, key in _IC_KEYS.items():
        v = getattr(cfg.initial_condition, attr)
        if v is not None:
            ic[key] = v
    bbc = {"kind": cfg.bottom_bc.kind}
    if cfg.bottom_bc.value is not None:
        bbc["value_m"] = cfg.bottom_bc.value
    return {
        "name": cfg.name,
        "geometry": geom,
        "soil": cfg.soil.to_dict() if isinstance(cfg.soil, MaterialParams) else cfg.soil,
        "rain_ratio": cfg.rain_ratio,
        "bottom_bc": bbc,
        "initial_condition": ic,
        "dt_seconds": cfg.dt,
        "t_final_seconds": cfg.t_final,
        "solver": cfg.solver.to_dict(),
        "outputs": [{k: v for k, v in vars(o).items() if v is not None} for o in cfg.outputs],
    }


def _time(d: dict, stem: str) -> float:
    found = [(u, d[f"{stem}_{u}"]) for u in _TIME_UNITS if f"{stem}_{u}" in d]
    if len(found) != 1:
        raise ConfigError(f"give exactly one of {', '.join(f'{stem}_{u}' for u in _TIME_UNITS)}")
    unit, value = found[0]
    return float(value) * _TIME_UNITS[unit]


def _remap(d: dict, keys: dict, what: str) -> dict:
    inv = {v: k for k, v in keys.items()}
    out = {}
    for k, v in d.items():
        if k == "kind":
            continue
        if k not in inv:
            raise ConfigError(f"unknown {what} key {k!r}")
        out[inv[k]] = v
    return out


def config_from_dict(d: dict) -> ScenarioConfig:
    known = {"name", "geometry", "soil", "rain_ratio", "bottom_bc", "initial_condition",
             "dt_seconds", "dt_hours", "t_final_seconds", "t_final_hours", "solver", "outputs"}
    extra = set(d) - known
    if extra:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(extra))}")
    try:
        geom = Geometry(d["geometry"]["kind"], **_remap(d["geometry"], _GEOM_KEYS, "geometry"))
        ic = InitialCondition(d["initial_condition"]["kind"],
                              **_remap(d["initial_condition"], _IC_KEYS, "initial_condition"))
        bb = dict(d.get("bottom_bc", {"kind": "no_flux"}))
        bbc = BottomBC(bb.pop("kind"), bb.pop("value_m", None))
        if bb:
            raise ConfigError(f"unknown bottom_bc keys: {', '.join(sorted(bb))}")
        soil = d["soil"]
        if isinstance(soil, dict):
            soil = MaterialParams(**soil)
        solver = SolverSettings(**d.get("solver", {}))
        outputs = tuple(OutputRequest(**o) for o in d.get("outputs", []))
        return ScenarioConfig(name=d.get("name", "scenario"), geometry=geom, soil=soil,
                              rain_ratio=float(d["rain_ratio"]), bottom_bc=bbc,
                              initial_condition=ic, t_final=_time(d, "t_final"),
                              dt=_time(d, "dt"), solver=solver, outputs=outputs)
    except KeyError as exc:
        raise ConfigError(f"missing config key {exc}") from None
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: {exc.msg}") from None
    return config_from_dict(data)


def save_config(cfg: ScenarioConfig, path) -> None:
    Path(path).write_text(json.dumps(config_to_dict(cfg), indent=2, sort_keys=True) + "\n")


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(cfg: ScenarioConfig, overrides) -> ScenarioConfig:
    """Apply ``dotted.key=value`` overrides; values are parsed as JSON when possible.

    A unit-suffixed time key may replace its sibling (``dt_hours`` over
    ``dt_seconds``). Unknown keys raise :class:`ConfigError`.
    """
    d = config_to_dict(cfg)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, raw = item.split("=", 1)
        parts = key.strip().split(".")
        node = d
        for p in parts[:-1]:
            if not isinstance(node, dict) or p not in node:
                raise ConfigError(f"unknown config key {key!r}")
            node = node[p]
        leaf = parts[-1]
        if not isinstance(node, dict):
            raise ConfigError(f"unknown config key {key!r}")
        if leaf not in node:
            sibling = None
            for unit in _TIME_UNITS:
                if leaf.endswith("_" + unit):
                    stem = leaf[: -len(unit) - 1]
                    sibling = next((f"{stem}_{u}" for u in _TIME_UNITS if f"{stem}_{u}" in node),
                                   None)
            allowed = (node is d["solver"] and leaf in {f.name for f in fields(SolverSettings)})
            if sibling is not None:
                del node[sibling]
            elif not allowed:
                raise ConfigError(f"unknown config key {key!r}")
        node[leaf] = _parse_value(raw)
    return config_from_dict(d)


# ----------------------------------------------------------------- builders

def build_mesh(cfg: ScenarioConfig) -> TriMesh:
    g = cfg.geometry
    if g.kind == "rectangle":
        return build_rectangle_mesh(g.width, g.height, g.h)
    if g.kind == "profile":
        return build_profile_mesh(g.top, g.bottom, g.h_top, g.h_bot)
    path = Path(g.path)
    try:
        return import_mesh(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read mesh file {path}: {exc.strerror}") from None


def bottom_profile(cfg: ScenarioConfig, mesh: TriMesh) -> Callable:
    """``z_bot(x)`` by linear interpolation of the bottom boundary."""
    g = cfg.geometry
    if g.kind == "rectangle":
        return lambda x: np.zeros_like(np.asarray(x, float))
    if g.kind == "profile":
        pts = np.array(g.bottom)
    else:
        nodes = np.unique(mesh.edges[mesh.edges_with_tag(BOTTOM)])
        pts = mesh.nodes[nodes]
    order = np.argsort(pts[:, 0])
    xs, zs = pts[order, 0], pts[order, 1]
    return lambda x: np.interp(x, xs, zs)


def initial_psi(cfg: ScenarioConfig, mesh: TriMesh) -> np.ndarray:
    c = mesh.centroids
    psi = cfg.initial_condition.evaluate(c[:, 0], c[:, 1], bottom_profile(cfg, mesh))
    if not np.all(np.isfinite(psi)):
        raise ConfigError("initial condition is not finite on every cell")
    return psi


def rain_normal(cfg: ScenarioConfig, mesh: TriMesh) -> np.ndarray:
    """``p . n`` per top edge for ``p = -(rain_ratio K_S) e_z``."""
    return -cfg.rain_ratio * cfg.material.k_s * mesh.edge_normals[mesh.top_edges, 1]


def boundary_conditions(cfg: ScenarioConfig, mesh: TriMesh) -> BoundaryConditions:
    bot = mesh.edges_with_tag(BOTTOM)
    b = cfg.bottom_bc
    if b.kind == "no_flux":
        return BoundaryConditions.no_flux_except(mesh)
    if b.value == HYDROSTATIC_COMPATIBLE:
        mid = mesh.edge_midpoints[bot]
        values = cfg.initial_condition.evaluate(mid[:, 0], mid[:, 1], bottom_profile(cfg, mesh))
    else:
        values = np.full(bot.size, float(b.value))
    return BoundaryConditions.no_flux_except(mesh, bot, values)


def build_problem(cfg: ScenarioConfig, mesh: TriMesh | None = None) -> RichardsProblem:
    mesh = build_mesh(cfg) if mesh is None else mesh
    return RichardsProblem(mesh, cfg.material, rain_normal(cfg, mesh),
                           boundary_conditions(cfg, mesh), cfg.solver)


def initial_state(cfg: ScenarioConfig, mesh: TriMesh, problem: RichardsProblem | None = None
                  ) -> FieldState:
    """Initial heads at centroids, zero (or prescribed) fluxes, ``lam`` from adjacent cells."""
    problem = build_problem(cfg, mesh) if problem is None else problem
    return problem.initial_state(initial_psi(cfg, mesh))


# ---------------------------------------------------------------- time loop

@dataclass
class SimulationResult:
    config: ScenarioConfig
    problem: RichardsProblem
    initial: FieldState
    states: list
    reports: list
    completed: bool = True
    error: str | None = None

    @property
    def mesh(self) -> TriMesh:
        return self.problem.mesh

    @property
    def final(self) -> FieldState:
        return self.states[-1] if self.states else self.initial


def simulate(cfg: ScenarioConfig, mesh: TriMesh | None = None,
             observer: Callable[[int, FieldState, StepReport], None] | None = None,
             keep_states: bool = True, raise_on_failure: bool = False) -> SimulationResult:
    """Run the full time loop of ``cfg``.

    ``observer(step_index, state, report)`` is called after every step. A step
    that fails to converge stops the loop; the result is then marked
    incomplete and holds the failing report (the exception is re-raised when
    ``raise_on_failure`` is set).
    """
    problem = build_problem(cfg, mesh)
    state = problem.initial_state(initial_psi(cfg, problem.mesh))
    res = SimulationResult(cfg, problem, state.copy(), [], [])
    for n in range(cfg.n_steps):
        try:
            state, report = step(problem, state, cfg.dt)
        except ConvergenceError as exc:
            res.reports.append(exc.report)
            res.completed = False
            res.error = str(exc)
            if observer is not None and exc.state is not None:
                observer(n, exc.state, exc.report)
            if raise_on_failure:
                raise
            log.error("%s", exc)
            break
        res.reports.append(report)
        if keep_states:
            res.states.append(state)
        else:
            res.states[:] = [state]
        if observer is not None:
            observer(n, state, report)
    return res


def with_solver(cfg: ScenarioConfig, **changes) -> ScenarioConfig:
    """Copy of ``cfg`` with solver fields replaced."""
    return replace(cfg, solver=replace(cfg.solver, **changes))
