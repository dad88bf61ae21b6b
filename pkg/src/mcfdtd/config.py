"""Run configuration files.

A config is a TOML document (``.cfg`` extension).  ``[run] kind`` names the
subcommand it drives; the remaining tables depend on the kind and are
documented in the README.  Everything is validated before any field array is
allocated, and physics-bearing keys (time-step policy, step counts, mesh)
have no defaults.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .scenarios.cavity import CavitySetup
from .scenarios.filter import PARAMETERS as FILTER_PARAMETERS
from .scenarios.filter import FilterLayout

KINDS = ("stub-sweep", "cavity", "filter", "taylor", "bench-ops")
DEFAULT_CONFIGS = {
    "stub-sweep": "stub.cfg",
    "cavity": "cavity-150x100.cfg",
    "filter": "filter-desk.cfg",
    "taylor": "filter-desk.cfg",
    "bench-ops": "bench-ops.cfg",
}


class ConfigError(ValueError):
    """Invalid configuration; the message names the file and the offending field."""


def shipped(name: str) -> Path:
    return Path(str(resources.files("mcfdtd") / "configs" / name))


# ---------------------------------------------------------------------------
# field access with diagnostics

class _Section:
    def __init__(self, data: dict, where: str, origin: str):
        self.data = data
        self.where = where
        self.origin = origin
        self.used = set()

    def error(self, key, msg) -> ConfigError:
        return ConfigError(f"{self.origin}: [{self.where}].{key}: {msg}")

    def has(self, key) -> bool:
        return key in self.data

    def get(self, key, kind, default=..., check=None, msg="invalid value"):
        self.used.add(key)
        if key not in self.data:
            if default is ...:
                raise ConfigError(f"{self.origin}: [{self.where}]: missing required key {key!r}")
            return default
        value = self.data[key]
        if kind is float and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        if not isinstance(value, kind) or isinstance(value, bool) and kind is not bool:
            names = kind.__name__ if isinstance(kind, type) else "/".join(k.__name__ for k in kind)
            raise self.error(key, f"expected {names}, got {type(value).__name__}")
        if check is not None and not check(value):
            raise self.error(key, msg)
        return value

    def floats(self, key, default=..., check=None, msg="invalid value", length=None):
        raw = self.get(key, list, default)
        if raw is default and default is not ...:
            return default
        out = []
        for v in raw:
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise self.error(key, "expected a list of numbers")
            out.append(float(v))
        if length is not None and len(out) != length:
            raise self.error(key, f"expected {length} entries")
        if not out:
            raise self.error(key, "list is empty")
        if check is not None and not all(check(v) for v in out):
            raise self.error(key, msg)
        return out

    def ints(self, key, default=..., length=None):
        raw = self.get(key, list, default)
        if raw is default and default is not ...:
            return default
        if any(isinstance(v, bool) or not isinstance(v, int) for v in raw):
            raise self.error(key, "expected a list of integers")
        if length is not None and len(raw) != length:
            raise self.error(key, f"expected {length} entries")
        return list(raw)

    def finish(self) -> None:
        extra = sorted(set(self.data) - self.used)
        if extra:
            raise ConfigError(f"{self.origin}: [{self.where}]: unknown key(s) {', '.join(extra)}")


def _positive(v):
    return v > 0 and math.isfinite(v)


# ---------------------------------------------------------------------------
# plans

@dataclass
class StubSweep:
    name: str
    derivative: int
    methods: list
    h_values: list


@dataclass
class StubPlan:
    length: float
    wavelength: float
    sweeps: list


@dataclass
class CavityPlan:
    setup: CavitySetup
    study: str
    request: dict
    h_values: list
    methods: list
    spacings: list
    normalize: str
    guard: float
    sample_every: int
    series: bool


@dataclass
class FilterPlan:
    layout: FilterLayout
    orders: dict
    requests: list
    h_values: list
    methods: list
    which: str
    band_hz: tuple


@dataclass
class TaylorPlan:
    layout: FilterLayout
    max_order: int
    h: float
    span: float
    points: int
    band_db: float
    frequency: float | None


@dataclass
class BenchPlan:
    size: int
    orders: list
    steps: int
    tolerance: float


@dataclass
class RunConfig:
    path: Path
    kind: str
    sha256: str
    plan: object
    raw: dict = field(repr=False, default_factory=dict)

    def header_lines(self) -> list[str]:
        return [f"mcfdtd {__version__}", f"config {self.path.name} sha256 {self.sha256}"]


def _h_list(sec, key="h_values"):
    return sec.floats(key, check=_positive, msg="steps must be positive")


def _dt_policy(sec, grid_limit_fn=None):
    policy = sec.get("dt_policy", str, check=lambda v: v in ("fixed", "cfl-fraction"),
                     msg="choose 'fixed' or 'cfl-fraction'")
    if policy == "fixed":
        return policy, sec.get("dt", float, check=_positive, msg="must be positive")
    frac = sec.get("cfl_fraction", float, check=lambda v: 0 < v <= 1, msg="must lie in (0, 1]")
    return policy, frac


def _stub(root, origin) -> StubPlan:
    s = _Section(root.get("stub", {}), "stub", origin)
    length = s.get("length", float)
    wavelength = s.get("wavelength", float, check=_positive, msg="must be positive")
    s.get("sweep", list, [])
    s.finish()
    sweeps = []
    if not root.get("stub", {}).get("sweep"):
        raise ConfigError(f"{origin}: [stub]: at least one [[stub.sweep]] table is required")
    from .csd import METHODS
    for i, raw in enumerate(root["stub"]["sweep"]):
        sw = _Section(raw, f"stub.sweep.{i}", origin)
        name = sw.get("name", str, check=lambda v: v.replace("-", "").replace("_", "").isalnum(),
                      msg="use letters, digits, '-' or '_'")
        der = sw.get("derivative", int, check=lambda v: v in (1, 2), msg="1 or 2")
        methods = sw.get("methods", list)
        for m in methods:
            if m not in METHODS:
                raise sw.error("methods", f"unknown method {m!r}")
            if m == "csd" and der != 1 or m == "centered-second" and der != 2:
                raise sw.error("methods", f"{m} does not estimate derivative {der}")
            if m in ("forward", "backward", "centered") and der != 1:
                raise sw.error("methods", f"{m} is a first-derivative stencil")
        hs = _h_list(sw)
        sw.finish()
        sweeps.append(StubSweep(name, der, list(methods), hs))
    if len({s.name for s in sweeps}) != len(sweeps):
        raise ConfigError(f"{origin}: [stub.sweep]: names must be unique")
    return StubPlan(length, wavelength, sweeps)


def _cavity(root, origin) -> CavityPlan:
    mesh = _Section(root.get("mesh", {}), "mesh", origin)
    a = mesh.get("a", float, check=_positive, msg="must be positive")
    b = mesh.get("b", float, check=_positive, msg="must be positive")
    spacings = mesh.floats("spacing", check=_positive, msg="must be positive")
    mesh.finish()
    tm = _Section(root.get("time", {}), "time", origin)
    steps = tm.get("steps", int, check=lambda v: v >= 1, msg="must be at least 1")
    policy, value = _dt_policy(tm)
    tm.finish()
    if policy != "cfl-fraction":
        raise tm.error("dt_policy", "cavity runs scale dt with the mesh; use 'cfl-fraction'")
    mode = _Section(root.get("mode", {}), "mode", origin)
    m = mode.get("m", int, check=lambda v: v >= 1, msg="must be at least 1")
    n = mode.get("n", int, check=lambda v: v >= 1, msg="must be at least 1")
    e0 = mode.get("e0", float)
    mode.finish()
    st = _Section(root.get("study", {}), "study", origin)
    study = st.get("kind", str, check=lambda v: v in ("h-sweep", "mesh-sweep"), msg="'h-sweep' or 'mesh-sweep'")
    request = st.get("request", dict)
    if not request or any(k not in ("a", "b") for k in request) or any(
            isinstance(v, bool) or not isinstance(v, int) or v < 0 for v in request.values()):
        raise st.error("request", "map 'a' and/or 'b' to non-negative integer orders")
    if sum(request.values()) < 1 or sum(request.values()) > 2:
        raise st.error("request", "orders must total 1 or 2 (the oracle supplies up to second derivatives)")
    hs = _h_list(st)
    methods = st.get("methods", list)
    if not methods or any(mm not in ("mcsd", "cfd") for mm in methods):
        raise st.error("methods", "choose from 'mcsd', 'cfd'")
    normalize = st.get("normalize", str, "per_step", check=lambda v: v in ("per_step", "pointwise"),
                       msg="'per_step' or 'pointwise'")
    guard = st.get("guard", float, 1e-6, check=_positive, msg="must be positive")
    every = st.get("sample_every", int, 1, check=lambda v: v >= 1, msg="must be at least 1")
    series = st.get("series", bool, False)
    st.finish()
    if study == "h-sweep" and len(spacings) != 1:
        raise mesh.error("spacing", "an h-sweep uses a single spacing")
    if study == "mesh-sweep" and len(hs) != 1:
        raise st.error("h_values", "a mesh sweep uses a single step")
    setup = CavitySetup(a, b, spacings[0], (m, n), e0, steps, value)
    for d in spacings:
        try:
            setup.with_spacing(d).dims
        except ValueError as exc:
            raise mesh.error("spacing", str(exc)) from None
    return CavityPlan(setup, study, {k: v for k, v in request.items() if v}, hs, list(methods), spacings,
                      normalize, guard, every, series)


def _layout(root, origin) -> FilterLayout:
    lay = _Section(root.get("layout", {}), "layout", origin)
    preset = lay.get("preset", str, check=lambda v: v in ("desk", "full"), msg="'desk' or 'full'")
    kw = {}
    if lay.has("dims"):
        kw["dims"] = tuple(lay.ints("dims", length=3))
    if lay.has("spacing"):
        kw["spacing"] = tuple(lay.floats("spacing", length=3, check=_positive, msg="must be positive"))
    if lay.has("eps_sub"):
        kw["eps_sub"] = lay.get("eps_sub", float, check=lambda v: v >= 1, msg="must be at least 1")
    if lay.has("sub_cells"):
        kw["sub_cells"] = lay.get("sub_cells", int)
    for key in ("strip1", "patch", "strip2"):
        if lay.has(key):
            kw[key] = tuple(lay.ints(key, length=4))
    for key in ("source_y", "port1_y", "port2_y"):
        if lay.has(key):
            kw[key] = lay.get(key, int)
    lay.finish()
    tm = _Section(root.get("time", {}), "time", origin)
    steps = tm.get("steps", int, check=lambda v: v >= 2, msg="must be at least 2")
    policy, dt = _dt_policy(tm)
    tm.finish()
    if policy != "fixed":
        raise tm.error("dt_policy", "filter runs pin the time step; use 'fixed'")
    src = _Section(root.get("source", {}), "source", origin)
    width = src.get("pulse_width", float, check=_positive, msg="must be positive")
    src.finish()
    fr = _Section(root.get("frequency", {}), "frequency", origin)
    f_max = fr.get("f_max", float, check=_positive, msg="must be positive")
    df = fr.get("df", float, check=_positive, msg="must be positive")
    fr.finish()
    base = FilterLayout.desk if preset == "desk" else FilterLayout.full
    layout = base(**kw, dt=dt, steps=steps, pulse_width=width, f_max=f_max, df=df)
    try:
        layout.validate()
        from .fdtd.grid import YeeGrid
        limit = YeeGrid.uniform(layout.dims, layout.spacing).cfl_limit()
    except ValueError as exc:
        raise ConfigError(f"{origin}: [layout]: {exc}") from None
    if dt > limit:
        raise tm.error("dt", f"{dt:.4g} s exceeds the CFL limit {limit:.4g} s")
    return layout


def _filter(root, origin) -> FilterPlan:
    layout = _layout(root, origin)
    se = _Section(root.get("sensitivity", {}), "sensitivity", origin)
    orders = se.get("parameters", dict)
    if not orders or any(k not in FILTER_PARAMETERS for k in orders) or any(
            isinstance(v, bool) or not isinstance(v, int) or v < 1 for v in orders.values()):
        raise se.error("parameters", f"map names from {FILTER_PARAMETERS} to orders >= 1")
    if sum(orders.values()) > 8:
        raise se.error("parameters", "at most 8 imaginary units")
    reqs = se.get("requests", list)
    requests = []
    for r in reqs:
        if not isinstance(r, dict) or not r or any(k not in orders or not isinstance(v, int) or isinstance(v, bool)
                                                    or v < 1 or v > orders[k] for k, v in r.items()):
            raise se.error("requests", f"{r!r} is not within the declared parameter orders")
        if sum(r.values()) > 3:
            raise se.error("requests", "finite-difference baselines go up to third order")
        requests.append(dict(r))
    hs = _h_list(se)
    if any(h >= 0.5 for h in hs):
        raise se.error("h_values", "fractional steps must stay below 0.5")
    methods = se.get("methods", list)
    if not methods or any(m not in ("mcsd", "cfd") for m in methods):
        raise se.error("methods", "choose from 'mcsd', 'cfd'")
    which = se.get("which", str, check=lambda v: v in ("S11", "S21"), msg="'S11' or 'S21'")
    band = tuple(se.floats("band_hz", length=2, check=lambda v: v >= 0, msg="must be non-negative"))
    se.finish()
    if band[0] >= band[1]:
        raise se.error("band_hz", "lower edge must be below the upper edge")
    return FilterPlan(layout, dict(orders), requests, hs, list(methods), which, band)


def _taylor(root, origin) -> TaylorPlan:
    layout = _layout(root, origin)
    ta = _Section(root.get("taylor", {}), "taylor", origin)
    order = ta.get("max_order", int, check=lambda v: 1 <= v <= 8, msg="between 1 and 8")
    h = ta.get("h", float, check=_positive, msg="must be positive")
    span = ta.get("span", float, check=lambda v: 0 < v < 1, msg="must lie in (0, 1)")
    points = ta.get("points", int, check=lambda v: v >= 1, msg="must be at least 1")
    band = ta.get("band_db", float, check=_positive, msg="must be positive")
    freq = ta.get("frequency", float, None, check=_positive, msg="must be positive")
    ta.finish()
    # the compressed air layer must keep the pinned step stable
    from .fdtd.grid import YeeGrid
    sx, sy, sz = layout.spacing
    shrink = 1 - span * layout.sub_cells
    if shrink <= 0:
        raise ta.error("span", "compensating layer would collapse")
    limit = YeeGrid.uniform(layout.dims, (sx, sy, sz * shrink)).cfl_limit()
    if layout.dt > limit:
        raise ta.error("span", f"the compressed layer needs dt <= {limit:.4g} s")
    return TaylorPlan(layout, order, h, span, points, band, freq)


def _bench(root, origin) -> BenchPlan:
    be = _Section(root.get("bench", {}), "bench", origin)
    size = be.get("size", int, check=lambda v: v >= 2, msg="must be at least 2")
    orders = be.ints("orders")
    if not orders or any(o < 1 or o > 8 for o in orders):
        raise be.error("orders", "orders between 1 and 8")
    steps = be.get("steps", int, 1, check=lambda v: v >= 1, msg="must be at least 1")
    tol = be.get("tolerance", float, 0.05, check=_positive, msg="must be positive")
    be.finish()
    return BenchPlan(size, orders, steps, tol)


_PLANNERS = {"stub-sweep": _stub, "cavity": _cavity, "filter": _filter, "taylor": _taylor, "bench-ops": _bench}
_SECTIONS = {
    "stub-sweep": {"run", "stub"},
    "cavity": {"run", "mesh", "time", "mode", "study"},
    "filter": {"run", "layout", "time", "source", "frequency", "sensitivity", "taylor"},
    "taylor": {"run", "layout", "time", "source", "frequency", "sensitivity", "taylor"},
    "bench-ops": {"run", "bench"},
}


def load(path, command: str) -> RunConfig:
    """Parse and validate ``path`` for ``command``; raises :class:`ConfigError`."""
    if command not in KINDS:
        raise ConfigError(f"unknown command {command!r}")
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read ({exc.strerror})") from None
    try:
        root = tomllib.loads(data.decode("utf-8"))
    except UnicodeDecodeError:
        raise ConfigError(f"{path}: not UTF-8 text") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    run = _Section(root.get("run", {}), "run", str(path))
    kind = run.get("kind", str)
    run.get("name", str, "")
    run.finish()
    allowed = {"filter", "taylor"} if command in ("filter", "taylor") else {command}
    if kind not in allowed:
        raise ConfigError(f"{path}: [run].kind: {kind!r} config cannot drive '{command}'")
    extra = set(root) - _SECTIONS[command]
    if extra:
        raise ConfigError(f"{path}: unknown section(s) {', '.join(sorted(extra))}")
    plan = _PLANNERS[command](root, str(path))
    return RunConfig(path, command, hashlib.sha256(data).hexdigest(), plan, root)
