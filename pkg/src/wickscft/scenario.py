"""Plain-text scenario files and the staged pipeline that runs them.

Grammar: one ``section.key = value`` per line, ``#`` starts a comment. Values
are integers, reals, bare strings, or comma-separated lists of those.

    grid.n_points = 256
    grid.length = 20
    potential.kind = harmonic
    contour.beta = 20
    run.kind = scft
"""

from __future__ import annotations

import datetime as _dt
import hashlib
import logging
import platform
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__
from .contour import Contour, decay_energy
from .functionals import ExternalPotential, FunctionalSpec, gaussian_kernel
from .grid import ComplexField, Grid1D, RealField, UnitsConfig
from .io import export_field, import_field, write_json_atomic, write_table
from .realtime import TimeTable, propagate_tdks, wick_rotation_check
from .scft import ScftConfig, equilibrium_density, ground_state_limit, solve_scft
from .spectral import (
    eigendecompose,
    fermi_dirac_occupancy,
    finite_T_density,
    tilde_occupancy,
)
from .weakvalue import OrthogonalPostSelectionError, Selection, weak_density, weak_value_decomposition

log = logging.getLogger(__name__)

RUN_KINDS = ("scft", "ground-state", "finite-T", "tdks", "weak-value", "wick-check")
EXIT_OK, EXIT_INVALID, EXIT_NOT_CONVERGED, EXIT_RUNTIME = 0, 2, 3, 4


# ---------------------------------------------------------------- schema

@dataclass(frozen=True)
class Key:
    kind: str  # int | posint | real | posreal | nonneg | str | choice | reals | strs | shape
    default: Any = None
    required: bool = False
    choices: tuple[str, ...] = ()


def _req(kind, **kw):
    return Key(kind, required=True, **kw)


SCHEMA: dict[str, dict[str, Key]] = {
    "grid": {"n_points": _req("pow2"), "length": _req("posreal")},
    "units": {"hbar": Key("posreal", 1.0), "mass": Key("posreal", 1.0), "k_B": Key("posreal", 1.0)},
    "potential": {
        "kind": _req("choice", choices=("harmonic", "box-cosine", "uniform", "tabulated")),
        "omega": Key("posreal", 1.0),
        "depth": Key("real", 0.0),
        "wavenumber": Key("posint", 1),
        "value": Key("real", 0.0),
        "center": Key("real"),
        "file": Key("str"),
    },
    "functional": {
        "g": Key("nonneg", 0.0),
        "lambda": Key("real", 0.0),
        "kernel": Key("choice", "none", choices=("none", "gaussian")),
        "kernel_width": Key("posreal", 1.0),
    },
    "particles": {"n": Key("posreal", 1.0), "spin_degeneracy": Key("choice", "2", choices=("1", "2"))},
    "contour": {"beta": _req("posreal"), "ds": Key("posreal", 0.002), "ladder": Key("reals")},
    "scft": {
        "mixing": Key("unit", 0.1),
        "tolerance": Key("tol", 1e-10),
        "max_iterations": Key("posint", 2000),
    },
    "thermal": {
        "beta": Key("posreal"),
        "n_states": Key("posint", 16),
        "occupancy": Key("choice", "fermi-dirac", choices=("fermi-dirac", "tilde")),
    },
    "time": {
        "tau": _req("posreal"),
        "n_steps": _req("posint"),
        "mode": Key("choice", "fixed-field", choices=("fixed-field", "self-consistent")),
        "t": Key("nonneg"),
        "record_every": Key("posint", 10),
        "n_orbitals": Key("posint", 1),
        "kick": Key("real", 0.0),
        "displace": Key("real", 0.0),
    },
    "run": {"kind": _req("choice", choices=RUN_KINDS)},
    "selection": {"pre": _req("shape"), "post": _req("shape"), "overlap_floor": Key("posreal", 1e-10)},
    "output": {"directory": Key("str", "out"), "formats": Key("strs", ("csv",))},
}

REQUIRED_SECTIONS = {
    "scft": ("grid", "potential", "contour"),
    "ground-state": ("grid", "potential", "contour"),
    "finite-T": ("grid", "potential", "contour"),
    "tdks": ("grid", "potential", "contour", "time"),
    "weak-value": ("grid", "potential", "time", "selection"),
    "wick-check": ("grid", "potential", "contour"),
}

SHAPES = {"gaussian": 3, "eigenstate": 1, "uniform": 0}


@dataclass(frozen=True)
class Diagnostic:
    line: int
    column: int
    message: str

    def __str__(self) -> str:
        return f"line {self.line}, column {self.column}: {self.message}"


class ScenarioError(ValueError):
    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = diagnostics
        super().__init__("\n".join(str(d) for d in diagnostics))


def _scalar(text: str):
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def _coerce(key: Key, raw: str):
    """Convert raw text for ``key``; returns (value, error message or None)."""
    parts = [p.strip() for p in raw.split(",")]
    k = key.kind
    if k in ("reals", "strs", "shape"):
        if any(p == "" for p in parts):
            return None, "empty list element"
        if k == "strs":
            return tuple(parts), None
        if k == "reals":
            vals = [_scalar(p) for p in parts]
            if not all(isinstance(v, (int, float)) and np.isfinite(v) for v in vals):
                return None, "comma list of finite reals required"
            return tuple(float(v) for v in vals), None
        head, *args = parts
        if head not in SHAPES:
            return None, f"unknown shape {head!r}; expected one of {tuple(SHAPES)}"
        if len(args) != SHAPES[head]:
            return None, f"shape {head} takes {SHAPES[head]} parameters, got {len(args)}"
        vals = [_scalar(a) for a in args]
        if not all(isinstance(v, (int, float)) and np.isfinite(v) for v in vals):
            return None, f"shape {head} parameters must be finite reals"
        if head == "eigenstate":
            if not isinstance(vals[0], int) or vals[0] < 0:
                return None, "eigenstate index must be a non-negative integer"
            return (head, vals[0]), None
        if head == "gaussian" and vals[1] <= 0:
            return None, "gaussian width must be > 0"
        return (head, *[float(v) for v in vals]), None
    if len(parts) != 1:
        return None, "single value required, got a list"
    v = _scalar(raw.strip())
    if k in ("str", "choice"):
        s = raw.strip()
        if k == "choice" and s not in key.choices:
            return None, f"expected one of {key.choices}, got {s!r}"
        return (s if s else None), (None if s else "value required")
    if k in ("int", "posint", "pow2"):
        if not isinstance(v, int):
            return None, "positive integer required" if k != "int" else "integer required"
        if k == "posint" and v < 1:
            return None, "positive integer required"
        if k == "pow2" and (v < 8 or v & (v - 1)):
            return None, "power of two >= 8 required"
        return v, None
    if not isinstance(v, (int, float)) or not np.isfinite(v):
        return None, "finite real required"
    v = float(v)
    if k == "posreal" and v <= 0:
        return None, "positive real required"
    if k == "nonneg" and v < 0:
        return None, "non-negative real required"
    if k == "unit" and not 0 < v <= 1:
        return None, "real in (0, 1] required"
    if k == "tol" and v < 1e-14:
        return None, "tolerance >= 1e-14 required"
    return v, None


# ---------------------------------------------------------------- scenario


@dataclass(frozen=True)
class Scenario:
    """Validated scenario: ``values[section][key]`` with defaults applied to every present section."""

    values: dict
    present: frozenset
    base_dir: Path = field(default=Path("."), compare=False)

    def __getitem__(self, section: str) -> dict:
        return self.values[section]

    @property
    def kind(self) -> str:
        return self.values["run"]["kind"]

    def get(self, section: str, key: str):
        return self.values.get(section, {}).get(key, SCHEMA[section][key].default)

    # typed views
    @property
    def grid(self) -> Grid1D:
        return Grid1D(self["grid"]["n_points"], self["grid"]["length"])

    @property
    def units(self) -> UnitsConfig:
        return UnitsConfig(self.get("units", "hbar"), self.get("units", "mass"), self.get("units", "k_B"))

    @property
    def n_particles(self) -> float:
        return self.get("particles", "n")

    @property
    def spin_degeneracy(self) -> int:
        return int(self.get("particles", "spin_degeneracy"))

    def potential(self, grid: Grid1D) -> ExternalPotential:
        p = self["potential"]
        kind = p["kind"]
        if kind == "harmonic":
            return ExternalPotential.harmonic(p["omega"], p.get("center"))
        if kind == "box-cosine":
            return ExternalPotential.box_cosine(p["depth"], p["wavenumber"], p.get("center"))
        if kind == "uniform":
            return ExternalPotential.uniform(p["value"])
        if p.get("file") is None:
            raise ValueError("tabulated potential needs potential.file")
        table = import_field(self.base_dir / p["file"], grid)
        return ExternalPotential.tabulated(table)

    def functional(self, grid: Grid1D) -> FunctionalSpec:
        kernel = None
        lam = self.get("functional", "lambda")
        if self.get("functional", "kernel") == "gaussian":
            kernel = gaussian_kernel(grid, self.get("functional", "kernel_width"))
        return FunctionalSpec(
            self.potential(grid),
            contact_strength=self.get("functional", "g"),
            hartree_kernel=kernel,
            hartree_strength=lam if kernel is not None else 0.0,
        )

    def scft_config(self) -> ScftConfig:
        return ScftConfig(
            beta=self["contour"]["beta"],
            ds=self["contour"]["ds"],
            mixing_alpha=self.get("scft", "mixing"),
            tolerance=self.get("scft", "tolerance"),
            max_iterations=self.get("scft", "max_iterations"),
        )

    def time_table(self) -> TimeTable:
        return TimeTable(self["time"]["tau"], self["time"]["n_steps"])


def _strip_comment(line: str) -> str:
    i = line.find("#")
    return line if i < 0 else line[:i]


def parse_scenario(text: str, base_dir: Path | str = ".") -> Scenario:
    diags: list[Diagnostic] = []
    raw: dict[str, dict[str, Any]] = {}
    where: dict[tuple[str, str], tuple[int, int]] = {}
    rejected: set[tuple[str, str]] = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = _strip_comment(line)
        if not body.strip():
            continue
        if "=" not in body:
            diags.append(Diagnostic(lineno, 1, "expected 'section.key = value'"))
            continue
        lhs, rhs = body.split("=", 1)
        name = lhs.strip()
        key_col = len(lhs) - len(lhs.lstrip()) + 1
        val_col = len(lhs) + 2 + (len(rhs) - len(rhs.lstrip()))
        if name.count(".") != 1:
            diags.append(Diagnostic(lineno, key_col, f"key {name!r} must have the form section.key"))
            continue
        section, key = name.split(".")
        if section not in SCHEMA:
            diags.append(Diagnostic(lineno, key_col, f"unknown section {section!r}"))
            continue
        if key not in SCHEMA[section]:
            diags.append(Diagnostic(lineno, key_col, f"unknown key {name!r}"))
            continue
        if (section, key) in where:
            diags.append(Diagnostic(lineno, key_col, f"duplicate key {name!r} (first set on line {where[section, key][0]})"))
            continue
        value, err = _coerce(SCHEMA[section][key], rhs.strip())
        if err:
            diags.append(Diagnostic(lineno, val_col, f"{name}: {err}"))
            rejected.add((section, key))
            continue
        raw.setdefault(section, {})[key] = value
        where[section, key] = (lineno, val_col)

    kind = raw.get("run", {}).get("kind")
    if kind is None and ("run", "kind") not in rejected:
        diags.append(Diagnostic(0, 0, "missing required key run.kind"))
    needed = set(REQUIRED_SECTIONS.get(kind, ())) | {"run"}
    for section in sorted(needed):
        if section not in raw and section != "run" and not any(sec == section for sec, _ in rejected):
            diags.append(Diagnostic(0, 0, f"run kind {kind!r} requires the {section!r} block"))
    for section in sorted(raw):
        for key, spec in SCHEMA[section].items():
            if spec.required and key not in raw[section] and (section, key) not in rejected:
                diags.append(Diagnostic(0, 0, f"missing required key {section}.{key}"))
    if kind == "ground-state" and "ladder" not in raw.get("contour", {}):
        diags.append(Diagnostic(0, 0, "ground-state runs require contour.ladder"))
    if diags:
        raise ScenarioError(diags)

    values = {s: {k: v.default for k, v in SCHEMA[s].items()} | raw[s] for s in raw}
    scenario = Scenario(values, frozenset(raw), Path(base_dir))
    _cross_check(scenario, where)
    return scenario


def _cross_check(s: Scenario, where) -> None:
    """Validation that spans keys."""
    diags = []

    def at(section, key):
        return where.get((section, key), (0, 0))

    if "time" in s.present:
        t = s["time"]
        if t["t"] is not None and t["t"] > t["tau"]:
            diags.append(Diagnostic(*at("time", "t"), "time.t must not exceed time.tau"))
    ladder = s.values.get("contour", {}).get("ladder")
    if ladder is not None and any(b1 <= b0 for b0, b1 in zip(ladder, ladder[1:])):
        diags.append(Diagnostic(*at("contour", "ladder"), "contour.ladder must be strictly increasing"))
    if ladder is not None and len(ladder) < 2:
        diags.append(Diagnostic(*at("contour", "ladder"), "contour.ladder needs at least two rungs"))
    for fmt in s.get("output", "formats"):
        if fmt not in ("csv", "json"):
            diags.append(Diagnostic(*at("output", "formats"), f"unknown output format {fmt!r}"))
    if diags:
        raise ScenarioError(diags)


def _render(value) -> str:
    if isinstance(value, tuple):
        return ", ".join(_render(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def serialize_scenario(s: Scenario) -> str:
    lines = []
    for section in SCHEMA:
        if section not in s.present:
            continue
        for key in SCHEMA[section]:
            value = s.values[section][key]
            if value is not None:
                lines.append(f"{section}.{key} = {_render(value)}")
    return "\n".join(lines) + "\n"


def load_scenario(path) -> Scenario:
    path = Path(path)
    return parse_scenario(path.read_text(encoding="utf-8"), base_dir=path.parent)


# ---------------------------------------------------------------- running


@dataclass
class RunManifest:
    scenario_text: str
    output_dir: Path
    started: str
    finished: str = ""
    stages: list[dict] = field(default_factory=list)
    files: list[dict] = field(default_factory=list)
    converged: bool = True
    exit_code: int = EXIT_OK

    def as_dict(self) -> dict:
        import scipy

        return {
            "scenario": self.scenario_text,
            "versions": {
                "wickscft": __version__,
                "numpy": np.__version__,
                "scipy": scipy.__version__,
                "python": platform.python_version(),
            },
            "started": self.started,
            "finished": self.finished,
            "stages": self.stages,
            "files": self.files,
            "converged": self.converged,
            "exit_code": self.exit_code,
        }


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


class _Writer:
    """Tracks every emitted file so the manifest inventory is complete."""

    def __init__(self, out: Path, formats):
        self.out = out
        self.formats = tuple(formats)
        self.paths: list[Path] = []

    def field(self, name: str, f) -> None:
        for fmt in self.formats:
            self.paths.append(export_field(f, self.out / f"{name}.{fmt}", fmt))

    def table(self, name: str, header, rows) -> None:
        self.paths.append(write_table(self.out / f"{name}.csv", header, rows))

    def results(self, doc: dict) -> None:
        self.paths.append(write_json_atomic(self.out / "results.json", doc))


def seed_state(shape, grid: Grid1D, w: RealField, units: UnitsConfig) -> ComplexField:
    """Normalized state from a selection shape tuple (gaussian, eigenstate, or uniform)."""
    head = shape[0]
    if head == "uniform":
        psi = np.ones(grid.n_points, dtype=complex)
    elif head == "gaussian":
        center, width, momentum = shape[1:]
        d = grid.minimal_image(center)
        psi = np.exp(-(d**2) / (4 * width**2) + 1j * momentum * d)
    else:
        index = shape[1]
        eig = eigendecompose(w, units, n_states=index + 1)
        psi = eig.orbitals[index]
    psi = psi / np.sqrt(np.sum(np.abs(psi) ** 2) * grid.spacing)
    return ComplexField(grid, psi)


def _shift(psi: np.ndarray, grid: Grid1D, displacement: float, kick: float) -> np.ndarray:
    """phi(r - d) exp(i k (r - center)) via a Fourier phase ramp; keeps band-limited data exact."""
    shifted = np.fft.ifft(np.fft.fft(psi, axis=-1) * np.exp(-1j * grid.wavenumbers * displacement), axis=-1)
    return shifted * np.exp(1j * kick * grid.minimal_image(grid.length / 2))


def _stage_scft(s, w_out, grid, units, manifest):
    spec = s.functional(grid)
    state = solve_scft(spec, s.n_particles, grid, s.scft_config(), units)
    w_out.table("convergence", ["iteration", "residual", "Q"], state.history)
    manifest.converged &= state.converged
    return spec, state


def _run_scft(s, w_out, grid, units, manifest):
    spec, state = _stage_scft(s, w_out, grid, units, manifest)
    _, _, forward = equilibrium_density(state.w, s.n_particles, s.scft_config().contour, units)
    w_out.field("density", state.n)
    w_out.field("field", state.w)
    w_out.results({
        "Q": state.Q,
        "converged": state.converged,
        "iterations": state.iterations,
        "residual": state.residual,
        "decay_energy": decay_energy(forward),
    })
    return state.converged


def _run_ground_state(s, w_out, grid, units, manifest):
    spec = s.functional(grid)
    ladder = ground_state_limit(spec, s.n_particles, grid, s.scft_config(), s["contour"]["ladder"], units)
    w_out.field("density", ladder.state.n)
    w_out.field("field", ladder.state.w)
    w_out.table("ladder", ["beta", "drift"], zip(ladder.betas[1:], ladder.drifts))
    w_out.table("convergence", ["iteration", "residual", "Q"], ladder.state.history)
    w_out.results({
        "betas": list(ladder.betas),
        "drifts": list(ladder.drifts),
        "converged": ladder.converged,
        "Q": ladder.state.Q,
    })
    manifest.converged &= ladder.converged
    return ladder.converged


def _run_finite_T(s, w_out, grid, units, manifest):
    spec, state = _stage_scft(s, w_out, grid, units, manifest)
    beta_T = s.get("thermal", "beta") or s["contour"]["beta"]
    n_states = min(s.get("thermal", "n_states"), grid.n_points)
    eig = eigendecompose(state.w, units, n_states)
    tilde = tilde_occupancy(eig, beta_T)
    fd = fermi_dirac_occupancy(eig, beta_T, s.n_particles, s.spin_degeneracy)
    if s.get("thermal", "occupancy") == "tilde":
        n = finite_T_density(eig, tilde, prefactor=s.n_particles)
    else:
        n = finite_T_density(eig, fd)
    rows = zip(range(len(eig)), eig.energies, fd.occupancies, tilde.occupancies, tilde.chemical_potentials)
    w_out.table("spectrum", ["index", "energy", "fermi_dirac", "tilde", "tilde_mu"], rows)
    w_out.field("density", n)
    w_out.field("field", state.w)
    w_out.results({"mu": fd.mu, "beta": beta_T, "converged": state.converged,
                   "occupancy": s.get("thermal", "occupancy")})
    return state.converged


def _run_tdks(s, w_out, grid, units, manifest):
    spec, state = _stage_scft(s, w_out, grid, units, manifest)
    t = s["time"]
    eig = eigendecompose(state.w, units, t["n_orbitals"])
    psi0 = _shift(eig.orbitals, grid, t["displace"], t["kick"])
    initial = [ComplexField(grid, p / np.sqrt(np.sum(np.abs(p) ** 2) * grid.spacing)) for p in psi0]
    table = s.time_table()
    mode = t["mode"]
    w = state.w if mode == "fixed-field" else None
    traj = propagate_tdks(initial, w, table, mode=mode, spec=spec if mode != "fixed-field" else None,
                          units=units, record_every=t["record_every"])
    r = grid.r
    rows = []
    for k, time in enumerate(traj.times):
        n = traj.density(k).values
        total = float(np.sum(n) * grid.spacing)
        rows.append((float(time), total, float(np.sum(r * n) * grid.spacing / total)))
    w_out.table("observables", ["t", "integral_n", "mean_r"], rows)
    w_out.field("density_initial", traj.density(0))
    w_out.field("density_final", traj.density(len(traj.times) - 1))
    norms = traj.norms()
    w_out.results({"max_norm_drift": float(np.max(np.abs(norms - 1))), "converged": state.converged})
    return state.converged


def _run_weak_value(s, w_out, grid, units, manifest):
    v = s.potential(grid).evaluate(grid, units)
    sel = Selection(seed_state(s["selection"]["pre"], grid, v, units), seed_state(s["selection"]["post"], grid, v, units))
    table = s.time_table()
    t = s["time"]["t"]
    t = table.nodes[table.n_steps // 2] if t is None else table.nodes[table.node_of(t)]
    wv = weak_density(sel, v, table, t, s.n_particles, units, s["selection"]["overlap_floor"])
    polar = weak_value_decomposition(wv)
    w_out.field("weak_density", wv.field)
    w_out.field("weak_modulus", polar.modulus)
    w_out.field("weak_argument", polar.argument)
    integral = complex(np.sum(wv.values) * grid.spacing)
    w_out.results({
        "t": float(t), "tau": table.tau,
        "overlap": [wv.overlap.real, wv.overlap.imag],
        "integral": [integral.real, integral.imag],
    })
    return True


def _run_wick(s, w_out, grid, units, manifest):
    v = s.potential(grid).evaluate(grid, units)
    contour = Contour.from_step(s["contour"]["beta"], s["contour"]["ds"], even=False)
    report = wick_rotation_check(v, contour.beta, contour.n_steps, units)
    w_out.results({
        "discrepancy": report.discrepancy,
        "relative_discrepancy": report.relative_discrepancy,
        "n_steps": report.n_steps,
        "ds": report.ds,
    })
    return True


RUNNERS: dict[str, Callable] = {
    "scft": _run_scft,
    "ground-state": _run_ground_state,
    "finite-T": _run_finite_T,
    "tdks": _run_tdks,
    "weak-value": _run_weak_value,
    "wick-check": _run_wick,
}


def run_scenario(s: Scenario, output_dir: Path | str | None = None) -> RunManifest:
    """Execute the pipeline for ``s.kind`` and write fields, logs, and ``manifest.json``.

    Stage failures do not raise: they are recorded in the manifest together
    with any files already written, and the exit code is set to 4.
    """
    out = Path(output_dir) if output_dir is not None else s.base_dir / s.get("output", "directory")
    out.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(serialize_scenario(s), out, _now())
    writer = _Writer(out, s.get("output", "formats"))
    grid, units = s.grid, s.units
    try:
        ok = RUNNERS[s.kind](s, writer, grid, units, manifest)
        manifest.stages.append({"name": s.kind, "status": "ok" if ok else "not-converged", "message": ""})
        manifest.converged &= ok
        manifest.exit_code = EXIT_OK if manifest.converged else EXIT_NOT_CONVERGED
    except (OrthogonalPostSelectionError, ArithmeticError, ValueError, OSError) as exc:
        log.error("stage %s failed: %s", s.kind, exc)
        manifest.stages.append({"name": s.kind, "status": "failed", "error": type(exc).__name__, "message": str(exc)})
        manifest.converged = False
        manifest.exit_code = EXIT_RUNTIME
    manifest.files = [
        {"path": p.name, "sha256": sha256_file(p), "bytes": p.stat().st_size} for p in writer.paths
    ]
    manifest.finished = _now()
    write_json_atomic(out / "manifest.json", manifest.as_dict())
    return manifest
