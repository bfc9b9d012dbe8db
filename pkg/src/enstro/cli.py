"""Experiment runner: flat-text configs, diagnostics CSV, binary snapshots.

Verbs:

* ``enstro run <config>``: time-step a configured flow, write one CSV row per
  step and optional restart snapshots.
* ``enstro resume <snapshot> <config>``: continue a run from a snapshot.
* ``enstro info <snapshot>``: print a snapshot header.

Exit codes: 0 ok, 1 configuration error, 2 runtime abort.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import struct
import sys
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .biot_savart import velocity_from_vorticity
from .conformal import ConformalMap, disk_map, joukowski_map
from .diagnostics import compute_record, residual_linear, residual_nonlinear
from .errors import CflViolationError, ConfigurationError, SnapshotFormatError
from .grid import RadialGrid, SpectralField, build_grid, grid_from_nodes
from .navier_stokes import dealias_nphi, step_nse
from .stokes import (
    FlowState,
    SolverConfig,
    gaussian_ring,
    noise_field,
    project_orthogonality,
    step_stokes,
)

__all__ = ["RunConfig", "parse_config", "run", "snapshot_write", "snapshot_read", "main"]

_MAGIC = b"ENSF"
_VERSION = 1
_MAP_KINDS = {"disk": 0, "joukowski": 1}
_MAP_NAMES = {v: k for k, v in _MAP_KINDS.items()}
_SCHEMES = {"cn": 0, "be": 1}
_SCHEME_NAMES = {v: k for k, v in _SCHEMES.items()}
_HEADER = struct.Struct("<4sIBBBBIIddddddd")


@dataclass
class RunConfig:
    """Flat run description; every field maps to one ``key = value`` line."""

    mode: str = "stokes"
    map: str = "disk"
    map_c: float = 0.0
    nu: float = 1.0
    v_inf: float = 0.0
    r0: float = 1.0
    rmax: float = 32.0
    n: int = 512
    kmax: int = 8
    nphi: int = 0  # 0 = choose from kmax
    dt: float = 1e-3
    steps: int = 100
    scheme: str = "cn"
    stretch: str = "geometric"
    ic: str = "gaussian_ring"
    ic_amplitude: float = 1.0
    ic_center: float = 2.0
    ic_width: float = 8.0
    ic_mode: int = 2
    seed: int = 1234
    out_csv: str = "diagnostics.csv"
    snapshot_every: int = 0
    snapshot_dir: str = "snapshots"
    advection: bool = True
    cfl: str = "warn"
    threads: int = 0  # 0 = ENSTRO_THREADS or 1

    def validate(self):
        if self.mode not in ("stokes", "nse"):
            raise ConfigurationError(f"mode must be stokes or nse, got {self.mode!r}")
        if self.map not in _MAP_KINDS:
            raise ConfigurationError(f"unknown map {self.map!r}")
        if self.nu <= 0 or self.dt <= 0:
            raise ConfigurationError("nu and dt must be positive")
        if self.r0 <= 0 or self.rmax <= self.r0:
            raise ConfigurationError("need 0 < r0 < rmax")
        if self.rmax / self.r0 < 4.0:
            raise ConfigurationError("rmax must be at least 4 r0")
        if self.n < 16:
            raise ConfigurationError("n must be at least 16")
        if self.kmax < 4:
            raise ConfigurationError("kmax must be at least 4 (moment columns M0..M4)")
        if self.steps < 1:
            raise ConfigurationError("steps must be positive")
        if self.scheme not in _SCHEMES:
            raise ConfigurationError(f"scheme must be cn or be, got {self.scheme!r}")
        if self.stretch not in ("uniform", "geometric"):
            raise ConfigurationError(f"unknown stretch {self.stretch!r}")
        if self.ic not in ("gaussian_ring", "noise", "zero"):
            raise ConfigurationError(f"unknown initial condition {self.ic!r}")
        if self.cfl not in ("warn", "abort", "ignore"):
            raise ConfigurationError("cfl must be warn, abort or ignore")
        if self.mode == "nse":
            nphi = self.nphi or dealias_nphi(self.kmax)
            if nphi < 3 * self.kmax:
                raise ConfigurationError("nphi must be at least 3 kmax in nse mode")
        if self.map == "joukowski" and not 0.0 <= self.map_c < self.r0:
            raise ConfigurationError("map_c must satisfy 0 <= map_c < r0")
        if self.v_inf * self.r0 / self.nu > 50.0:
            warnings.warn(
                "large v_inf r0 / nu: this regime needs far more resolution "
                "than the defaults provide", RuntimeWarning, stacklevel=2)


_PRESETS = {
    # Fast-stream single-body configuration; accepted but resolution-hungry.
    "appendix_a": {"nu": "1.0", "v_inf": "150.0", "mode": "nse"},
}

_BOOL_WORDS = {"on": True, "true": True, "1": True, "yes": True,
               "off": False, "false": False, "0": False, "no": False}


def parse_config(path: str | Path) -> RunConfig:
    """Parse a flat ``key = value`` file; unknown keys are errors."""
    fields = {f.name: f for f in dataclasses.fields(RunConfig)}
    raw: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise ConfigurationError(f"{path}:{lineno}: expected key = value")
        key, value = (part.strip() for part in text.split("=", 1))
        if key == "preset":
            if value and value not in _PRESETS:
                raise ConfigurationError(f"{path}:{lineno}: unknown preset {value!r}")
            if value:
                for pk, pv in _PRESETS[value].items():
                    raw.setdefault(pk, pv)
            continue
        if key not in fields:
            raise ConfigurationError(f"{path}:{lineno}: unknown key {key!r}")
        raw[key] = value

    config = RunConfig()
    for key, value in raw.items():
        kind = fields[key].type
        try:
            if kind == "bool":
                parsed = _BOOL_WORDS[value.lower()]
            elif kind == "int":
                parsed = int(value)
            elif kind == "float":
                parsed = float(value)
            else:
                parsed = value
        except (KeyError, ValueError) as exc:
            raise ConfigurationError(f"{path}: bad value for {key!r}: {value!r}") from exc
        setattr(config, key, parsed)
    config.validate()
    return config


def _make_map(config: RunConfig) -> ConformalMap:
    if config.map == "disk":
        return disk_map(config.r0)
    return joukowski_map(config.r0, config.map_c)


def _solver_config(config: RunConfig) -> SolverConfig:
    threads = config.threads
    if threads <= 0:
        threads = int(os.environ.get("ENSTRO_THREADS", "1") or "1")
    return SolverConfig(
        nu=config.nu, v_inf=config.v_inf, dt=config.dt, scheme=config.scheme,
        map=_make_map(config), disable_advection=not config.advection,
        cfl_action=config.cfl, threads=max(1, threads),
    )


def build_initial_state(config: RunConfig) -> FlowState:
    """Grid, initial vorticity, and moment projection for a fresh run."""
    grid = build_grid(config.r0, config.rmax, config.n, config.stretch)
    if config.ic == "gaussian_ring":
        w = gaussian_ring(grid, config.kmax, config.ic_amplitude, config.ic_center,
                          config.ic_width, config.ic_mode)
    elif config.ic == "noise":
        w = noise_field(grid, config.kmax, config.ic_amplitude, config.seed)
    else:
        w = SpectralField.zeros(grid, config.kmax)
    solver = _solver_config(config)
    w = project_orthogonality(w, config.v_inf, solver.map)
    return FlowState(t=0.0, w=w, config=solver)


def _format(x: float) -> str:
    return f"{x:.17g}"


def _write_csv(path: Path, records, nu: float):
    res_lin = np.zeros(len(records))
    res_nl = np.zeros(len(records))
    if len(records) >= 3:
        grad, _ = residual_linear(records, nu)
        nl_grad, _ = residual_nonlinear(records, nu)
        res_lin[1:-1] = grad
        res_nl[1:-1] = nl_grad
    morders = records[0].moments.size
    header = (["t", "E", "P", "S", "D", "A", "residual_linear", "residual_nonlinear"]
              + [f"re_M{k}" for k in range(morders)]
              + [f"im_M{k}" for k in range(morders)])
    lines = [",".join(header)]
    for i, rec in enumerate(records):
        row = [rec.t, rec.enstrophy, rec.palinstrophy, rec.boundary_h12,
               rec.dissipation, rec.advective_boundary, res_lin[i], res_nl[i]]
        row += list(rec.moments.real) + list(rec.moments.imag)
        lines.append(",".join(_format(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def snapshot_write(state: FlowState, path: str | Path, mode: str = "stokes"):
    """Write a self-describing little-endian restart file."""
    config = state.config
    map = state.map
    header = _HEADER.pack(
        _MAGIC, _VERSION, _MAP_KINDS[map.kind], _SCHEMES[config.scheme],
        0 if mode == "stokes" else 1, 0,
        state.w.grid.n, state.w.kmax,
        state.w.grid.r0, state.w.grid.rmax, map.c,
        config.nu, config.v_inf, config.dt, state.t,
    )
    payload = (state.w.grid.nodes.astype("<f8").tobytes()
               + np.ascontiguousarray(state.w.profiles).astype("<c16").tobytes())
    Path(path).write_bytes(header + payload)


def snapshot_read(path: str | Path) -> tuple[FlowState, str]:
    """Read a restart file back into a flow state; returns (state, mode)."""
    blob = Path(path).read_bytes()
    if len(blob) < _HEADER.size:
        raise SnapshotFormatError("snapshot truncated before header end")
    (magic, version, map_kind, scheme_id, mode_id, _reserved, n, kmax,
     r0, rmax, map_c, nu, v_inf, dt, t) = _HEADER.unpack_from(blob)
    if magic != _MAGIC:
        raise SnapshotFormatError("not a snapshot file (bad magic)")
    if version != _VERSION:
        raise SnapshotFormatError(f"unsupported snapshot version {version}")
    expected = _HEADER.size + 8 * n + 16 * n * (kmax + 1)
    if len(blob) != expected:
        raise SnapshotFormatError(
            f"snapshot size {len(blob)} does not match header ({expected} expected)")
    nodes = np.frombuffer(blob, dtype="<f8", count=n, offset=_HEADER.size).copy()
    profiles = np.frombuffer(blob, dtype="<c16", count=n * (kmax + 1),
                             offset=_HEADER.size + 8 * n).reshape(kmax + 1, n).copy()
    grid = grid_from_nodes(nodes)
    kind = _MAP_NAMES.get(map_kind)
    if kind is None:
        raise SnapshotFormatError(f"unknown map kind {map_kind}")
    map = disk_map(r0) if kind == "disk" else joukowski_map(r0, map_c)
    solver = SolverConfig(nu=nu, v_inf=v_inf, dt=dt,
                          scheme=_SCHEME_NAMES[scheme_id], map=map)
    state = FlowState(t=t, w=SpectralField(grid, profiles), config=solver)
    return state, ("stokes" if mode_id == 0 else "nse")


def _loop(state: FlowState, config: RunConfig) -> int:
    nonlinear = config.mode == "nse"
    stepfn = step_nse if nonlinear else step_stokes
    records = [compute_record(state, nonlinear)]
    snapdir = Path(config.snapshot_dir)
    if config.snapshot_every > 0:
        snapdir.mkdir(parents=True, exist_ok=True)
    for step in range(1, config.steps + 1):
        state = stepfn(state, config.dt)
        records.append(compute_record(state, nonlinear))
        if config.snapshot_every > 0 and step % config.snapshot_every == 0:
            snapshot_write(state, snapdir / f"snap_{step:08d}.ensf", config.mode)
    _write_csv(Path(config.out_csv), records, config.nu)
    return 0


def run(config: RunConfig) -> int:
    """Execute a fresh run; returns the process exit code."""
    config.validate()
    state = build_initial_state(config)
    return _loop(state, config)


def resume(snapshot_path: str | Path, config: RunConfig) -> int:
    """Continue a run from a snapshot under a (matching) configuration."""
    config.validate()
    state, _mode = snapshot_read(snapshot_path)
    grid = state.w.grid
    solver = _solver_config(config)
    if grid.n != config.n or state.w.kmax != config.kmax:
        raise SnapshotFormatError(
            f"snapshot resolution (n={grid.n}, kmax={state.w.kmax}) does not match "
            f"the run configuration (n={config.n}, kmax={config.kmax})")
    if abs(grid.r0 - config.r0) > 1e-12 or abs(grid.rmax - config.rmax) > 1e-12:
        raise SnapshotFormatError("snapshot radii do not match the run configuration")
    if solver.map.token != state.map.token:
        raise SnapshotFormatError("snapshot map does not match the run configuration")
    state = dataclasses.replace(state, config=solver)
    return _loop(state, config)


def info(snapshot_path: str | Path) -> int:
    state, mode = snapshot_read(snapshot_path)
    grid = state.w.grid
    map = state.map
    print(f"snapshot: {snapshot_path}")
    print(f"  mode={mode} scheme={state.config.scheme} t={state.t:.6g}")
    print(f"  grid: n={grid.n} r0={grid.r0:.6g} rmax={grid.rmax:.6g}")
    print(f"  modes: kmax={state.w.kmax}")
    print(f"  map: {map.kind} c={map.c:.6g}")
    print(f"  nu={state.config.nu:.6g} v_inf={state.config.v_inf:.6g} "
          f"dt={state.config.dt:.6g}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="enstro",
                                     description="vorticity flow experiment runner")
    sub = parser.add_subparsers(dest="verb", required=True)
    p_run = sub.add_parser("run", help="run a configured simulation")
    p_run.add_argument("config")
    p_resume = sub.add_parser("resume", help="continue from a snapshot")
    p_resume.add_argument("snapshot")
    p_resume.add_argument("config")
    p_info = sub.add_parser("info", help="describe a snapshot")
    p_info.add_argument("snapshot")
    args = parser.parse_args(argv)
    try:
        if args.verb == "run":
            return run(parse_config(args.config))
        if args.verb == "resume":
            return resume(args.snapshot, parse_config(args.config))
        return info(args.snapshot)
    except (ConfigurationError, SnapshotFormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (CflViolationError, RuntimeError, np.linalg.LinAlgError) as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
