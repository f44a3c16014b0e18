"""Config files, diagnostics series, binary snapshots and plot scripts.

Config files are INI text with sections ``scenario``, ``grid``, ``kernel``,
``model``, ``initial``, ``solver`` and ``output``. Only ``[scenario] name``
is required; every other key defaults to the named preset.

Snapshot layout (little endian)::

    5s   magic  b"NLCH1"
    B    format version (1)
    B    dim
    I    cells per axis n
    d    L, t, gamma, eps, p_H
    f8[n**dim] row-major cell values
"""
from __future__ import annotations

import configparser
import csv
import json
import math
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ValidationError
from .experiments import InitialCondition, ScenarioSpec, get_scenario
from .functionals import DiagnosticsRecord
from .grid import Profile
from .model import ModelParams, Source, Variant
from .stepper import Scheme, SolverConfig

MAGIC = b"NLCH1"
VERSION = 1
_HEADER = struct.Struct("<5sBBIddddd")

# ---------------------------------------------------------------- config

_KEYS = {
    "scenario": ("name", "note"),
    "grid": ("dim", "n", "length"),
    "kernel": ("eps", "profile"),
    "model": ("gamma", "p_h", "source", "variant", "kappa"),
    "initial": ("kind", "value", "centers", "widths", "amplitudes", "center",
                "radius", "amplitude", "file"),
    "solver": ("scheme", "cfl", "dt_max", "t_end", "negativity_tol",
               "linear_solver_tol", "sample_every"),
    "output": ("dir", "snapshot_times", "emit_plots"),
}


@dataclass(frozen=True)
class RunConfig:
    scenario: ScenarioSpec
    solver: SolverConfig
    output_dir: Path = Path("runs/out")
    snapshot_times: tuple[float, ...] = ()
    emit_plots: bool = True

    def __post_init__(self):
        object.__setattr__(self, "output_dir", Path(self.output_dir))
        times = tuple(float(t) for t in self.snapshot_times)
        object.__setattr__(self, "snapshot_times", times)
        for t in times:
            if not 0.0 <= t <= self.solver.t_end:
                raise ValidationError(f"snapshot time {t} outside [0, t_end={self.solver.t_end}]")


def default_config(name: str, output_dir: str | Path = "runs/out") -> RunConfig:
    spec = get_scenario(name)
    return RunConfig(spec, spec.solver(), Path(output_dir))


def _key_line(text: str, section: str, key: str) -> int:
    current = None
    for i, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if s.startswith("[") and s.endswith("]"):
            current = s[1:-1].strip().lower()
        elif current == section and "=" in s:
            if s.split("=", 1)[0].strip().lower() == key:
                return i
    return 0


def _floats(text: str) -> tuple[float, ...]:
    text = text.strip()
    if not text:
        return ()
    return tuple(float(v) for v in text.split(","))


def _points(text: str) -> tuple:
    """``0.3, 0.7`` -> scalars; ``0.3 0.5; 0.7 0.5`` -> 2-d points."""
    text = text.strip()
    if not text:
        return ()
    if ";" in text or " " in text.replace(", ", ","):
        return tuple(tuple(float(v) for v in p.split()) for p in text.split(";"))
    return _floats(text)


def _fmt_points(pts) -> str:
    if pts and not np.isscalar(pts[0]):
        return "; ".join(" ".join(repr(float(v)) for v in p) for p in pts)
    return ", ".join(repr(float(v)) for v in pts)


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValidationError(f"not a boolean: {text!r}")


def parse_config_text(text: str, source: str = "<string>") -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ValidationError(f"{source}: {exc}") from None
    for sec in cp.sections():
        if sec not in _KEYS:
            raise ValidationError(f"{source}: unknown section [{sec}]")
        for key in cp[sec]:
            if key not in _KEYS[sec]:
                line = _key_line(text, sec, key)
                raise ValidationError(f"{source}:{line}: unknown key {key!r} in [{sec}]")
    if not cp.has_option("scenario", "name"):
        raise ValidationError(f"{source}: [scenario] name is required")
    get = lambda s, k: cp.get(s, k) if cp.has_option(s, k) else None

    try:
        spec = get_scenario(cp.get("scenario", "name").strip())
        g = {k: get("grid", k) for k in _KEYS["grid"]}
        ker = {k: get("kernel", k) for k in _KEYS["kernel"]}
        m = {k: get("model", k) for k in _KEYS["model"]}
        ic = {k: get("initial", k) for k in _KEYS["initial"]}
        so = {k: get("solver", k) for k in _KEYS["solver"]}
        out = {k: get("output", k) for k in _KEYS["output"]}

        eps = float(ker["eps"]) if ker["eps"] is not None else spec.eps
        params = spec.params
        pkw = {}
        for k, conv in (("gamma", float), ("p_h", float), ("source", Source),
                        ("variant", Variant), ("kappa", float)):
            if m[k] is not None:
                pkw[k] = conv(m[k].strip())
        params = replace(params, eps=eps, **pkw)

        init = spec.initial
        if ic["kind"] is not None and ic["kind"].strip() != init.kind:
            init = InitialCondition(kind=ic["kind"].strip())
        ikw = {}
        for k in ("value", "radius", "amplitude"):
            if ic[k] is not None:
                ikw[k] = float(ic[k])
        for k in ("centers",):
            if ic[k] is not None:
                ikw[k] = _points(ic[k])
        for k in ("widths", "amplitudes", "center"):
            if ic[k] is not None:
                ikw[k] = _floats(ic[k])
        if ic["file"] is not None:
            ikw["file"] = ic["file"].strip()
        init = replace(init, **ikw)

        base_solver = spec.solver()
        skw = {}
        if so["scheme"] is not None:
            skw["scheme"] = Scheme(so["scheme"].strip())
        for k in ("cfl", "dt_max", "t_end", "negativity_tol", "linear_solver_tol", "sample_every"):
            if so[k] is not None:
                skw[k] = float(so[k])
        solver = replace(base_solver, **skw)

        spec = replace(
            spec,
            note=get("scenario", "note") if get("scenario", "note") is not None else spec.note,
            dim=int(g["dim"]) if g["dim"] is not None else spec.dim,
            n=int(g["n"]) if g["n"] is not None else spec.n,
            length=float(g["length"]) if g["length"] is not None else spec.length,
            eps=eps,
            profile=Profile(ker["profile"].strip()) if ker["profile"] is not None else spec.profile,
            params=params, initial=init,
            t_end=solver.t_end, sample_every=solver.sample_every,
        )
        spec.kernel()  # validates grid and kernel bounds
        cfg = RunConfig(
            spec, solver,
            Path(out["dir"].strip()) if out["dir"] is not None else Path("runs") / spec.name,
            _floats(out["snapshot_times"]) if out["snapshot_times"] is not None else (),
            _bool(out["emit_plots"]) if out["emit_plots"] is not None else True,
        )
    except ValidationError as exc:
        raise ValidationError(f"{source}: {exc}") from None
    except ValueError as exc:
        raise ValidationError(f"{source}: {exc}") from None
    return cfg


def parse_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from None
    return parse_config_text(text, str(path))


def serialize_config(cfg: RunConfig) -> str:
    """Fully resolved INI text; ``parse_config_text`` inverts it exactly."""
    s, p, ic, so = cfg.scenario, cfg.scenario.params, cfg.scenario.initial, cfg.solver
    r = lambda v: repr(float(v))
    sections = {
        "scenario": {"name": s.name, "note": s.note},
        "grid": {"dim": str(s.dim), "n": str(s.n), "length": r(s.length)},
        "kernel": {"eps": r(s.eps), "profile": s.profile.value},
        "model": {"gamma": r(p.gamma), "p_h": r(p.p_h), "source": p.source.value,
                  "variant": p.variant.value, "kappa": r(p.kappa)},
        "initial": {"kind": ic.kind, "value": r(ic.value), "centers": _fmt_points(ic.centers),
                    "widths": _fmt_points(ic.widths), "amplitudes": _fmt_points(ic.amplitudes),
                    "center": _fmt_points(ic.center), "radius": r(ic.radius),
                    "amplitude": r(ic.amplitude), "file": ic.file},
        "solver": {"scheme": so.scheme.value, "cfl": r(so.cfl), "dt_max": r(so.dt_max),
                   "t_end": r(so.t_end), "negativity_tol": r(so.negativity_tol),
                   "linear_solver_tol": r(so.linear_solver_tol),
                   "sample_every": r(so.sample_every)},
        "output": {"dir": str(cfg.output_dir),
                   "snapshot_times": ", ".join(r(t) for t in cfg.snapshot_times),
                   "emit_plots": "true" if cfg.emit_plots else "false"},
    }
    lines = []
    for sec, kv in sections.items():
        lines.append(f"[{sec}]")
        lines.extend(f"{k} = {v}" for k, v in kv.items())
        lines.append("")
    return "\n".join(lines)


def write_config_echo(cfg: RunConfig, out_dir) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "config.ini"
    path.write_text(serialize_config(cfg))
    return path


# ---------------------------------------------------------------- series

SCHEMA = {
    "t": "sample time",
    "mass": "h^d sum u",
    "mean": "mass / |Omega|",
    "energy": "E(u), interaction plus pressure part",
    "entropy": "Phi(u) relative to p_H^(1/gamma)",
    "entropy_relative": "int u log(u / mean)",
    "min_u": "minimum cell value",
    "max_u": "maximum cell value",
    "ckp_gap": "4|Omega| mean Phi(u|mean) - ||u - mean||_1^2",
    "degiorgi_excess": "max(0, max u - p_H^(1/gamma) - 2 gamma^(-1/3))",
    "graph_residual": "||u^gamma (1 - u)||_1",
    "complementarity_residual": "||p R||_1 for the strong-form pressure operator R",
    "pairing": "|<(u^n - u^(n-1))/dt, p(u^n)>| at the last step before the sample",
    "dissipation_flux": "int u |grad mu|^2 with upwind face mobility",
    "dissipation_entropy_nonlocal": "nonlocal gradient term of the entropy identity",
    "dissipation_entropy_porous": "porous-medium term of the entropy identity",
    "dissipation_entropy_source": "source term of the entropy identity (>= 0)",
    "tumor_zone": "measure of {p > 1e-3 p_H}",
}


def _f(v: float) -> str:
    return format(float(v), ".17g")


def write_series(records: Sequence[DiagnosticsRecord], path) -> Path:
    """CSV, one row per record, plus a ``<name>.schema.json`` sidecar."""
    if not records:
        raise ValidationError("write_series needs at least one record")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    cols = DiagnosticsRecord.columns()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for rec in records:
            d = rec.as_dict()
            w.writerow([_f(d[c]) for c in cols])
    schema = {"format": "csv", "float_format": ".17g",
              "columns": [{"name": c, "description": SCHEMA[c]} for c in cols]}
    path.with_suffix(".schema.json").write_text(json.dumps(schema, indent=2) + "\n")
    return path


def read_series(path) -> list[DiagnosticsRecord]:
    path = Path(path)
    cols = DiagnosticsRecord.columns()
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != cols:
        raise ValidationError(f"{path}: header does not match the series schema")
    return [DiagnosticsRecord(**{c: float(v) for c, v in zip(cols, row)}) for row in rows[1:]]


def write_summary(rows: Sequence[dict], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    cols = list(rows[0])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for row in rows:
            w.writerow([_f(row[c]) if isinstance(row[c], float) else row[c] for c in cols])
    return path


# -------------------------------------------------------------- snapshots

@dataclass
class Snapshot:
    dim: int
    n: int
    length: float
    t: float
    gamma: float
    eps: float
    p_h: float
    values: np.ndarray

    @property
    def h(self) -> float:
        return self.length / self.n


def write_snapshot(path, u, *, length: float, t: float, gamma: float, eps: float,
                   p_h: float) -> Path:
    u = np.asarray(u, dtype=np.float64)
    if u.ndim not in (1, 2) or (u.ndim == 2 and u.shape[0] != u.shape[1]):
        raise ValidationError(f"snapshot field must be (n,) or (n, n), got {u.shape}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    head = _HEADER.pack(MAGIC, VERSION, u.ndim, u.shape[0], length, t, gamma, eps, p_h)
    with open(path, "wb") as fh:
        fh.write(head)
        fh.write(np.ascontiguousarray(u, dtype="<f8").tobytes())
    return path


def read_snapshot(path) -> Snapshot:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise ValidationError(f"cannot read snapshot {path}: {exc}") from None
    if len(data) < _HEADER.size:
        raise ValidationError(f"{path}: length mismatch, file shorter than the header")
    magic, version, dim, n, length, t, gamma, eps, p_h = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ValidationError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise ValidationError(f"{path}: unsupported snapshot version {version} "
                              f"(this reader handles {VERSION})")
    if dim not in (1, 2):
        raise ValidationError(f"{path}: bad dimension {dim}")
    count = n ** dim
    payload = data[_HEADER.size:]
    if len(payload) != 8 * count:
        raise ValidationError(f"{path}: length mismatch, payload has {len(payload)} bytes, "
                              f"expected {8 * count}")
    values = np.frombuffer(payload, dtype="<f8").astype(np.float64).reshape((n,) * dim)
    return Snapshot(dim, n, length, t, gamma, eps, p_h, values)


def snapshot_name(t: float) -> str:
    return f"snapshot_t{t:.6f}.bin"


# ----------------------------------------------------------- plot scripts

_PLOT_SERIES = '''\
"""Diagnostics plots for {csv}. Run with: python {name}"""
import csv
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

with open("{csv}") as fh:
    rows = list(csv.DictReader(fh))
t = [float(r["t"]) for r in rows]
fig, axes = plt.subplots(2, 2, figsize=(9, 6))
for ax, key in zip(axes.flat, ["mean", "energy", "entropy", "max_u"]):
    ax.plot(t, [float(r[key]) for r in rows])
    ax.set_xlabel("t")
    ax.set_title(key)
fig.tight_layout()
fig.savefig("{stem}.png", dpi=120)
'''

_PLOT_SNAPSHOTS = '''\
"""Density snapshots. Run with: python {name}"""
import struct
import numpy as np
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

FILES = {files!r}
HEAD = struct.Struct("<5sBBIddddd")

def load(path):
    data = open(path, "rb").read()
    magic, version, dim, n, L, t, gamma, eps, p_h = HEAD.unpack_from(data)
    u = np.frombuffer(data[HEAD.size:], dtype="<f8").reshape((n,) * dim)
    return u, L, t, gamma, p_h

fig, axes = plt.subplots(1, len(FILES), figsize=(3.2 * len(FILES), 3), squeeze=False)
for ax, path in zip(axes[0], FILES):
    u, L, t, gamma, p_h = load(path)
    if u.ndim == 1:
        x = (np.arange(u.size) + 0.5) * L / u.size
        ax.plot(x, u, label="u")
        ax.plot(x, u ** gamma, label="p")
        ax.axhline(p_h ** (1 / gamma), ls=":", c="k")
        ax.set_ylim(0, 1.1)
        ax.legend()
    else:
        ax.imshow(u, origin="lower", extent=(0, L, 0, L))
    ax.set_title(f"t = {{t:g}}")
fig.tight_layout()
fig.savefig("snapshots.png", dpi=120)
'''


def emit_plot_scripts(out_dir, series_csv: str = "series.csv",
                      snapshots: Iterable[str] = ()) -> list[Path]:
    """Write standalone matplotlib scripts next to the data they read."""
    out_dir = Path(out_dir)
    out = []
    stem = Path(series_csv).stem
    p = out_dir / f"plot_{stem}.py"
    p.write_text(_PLOT_SERIES.format(csv=series_csv, stem=stem, name=p.name))
    out.append(p)
    snaps = list(snapshots)
    if snaps:
        p = out_dir / "plot_snapshots.py"
        p.write_text(_PLOT_SNAPSHOTS.format(files=snaps, name=p.name))
        out.append(p)
    return out
