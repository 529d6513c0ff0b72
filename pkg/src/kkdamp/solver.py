"""Finite-volume solver for the damped system on a uniform 1-D grid.

Hyperbolic update: Rusanov (local wave-speed dissipation, the default) or
global Lax-Friedrichs fluxes. Damping update: exact exponential decay per
channel. The two are composed per step by Strang splitting
D(dt/2) H(dt) D(dt/2) or Lie splitting D(dt) then H(dt). Because both
numerical fluxes are monotone under the CFL constraint and the damping
factors multiply u and v by equal or channel-wise constant factors, the
positive invariant region {phi(r) <= C0, C1 <= u/v <= C2} with C1 = 0 is
preserved discretely.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import (
    CFLViolation,
    ConfigError,
    NonFinite,
    OutOfRange,
    ValidationError,
)
from .model import Damping, PhiModel
from .quadrature import bump

SCHEMES = ("rusanov", "lax_friedrichs")
SPLITTINGS = ("strang", "lie")
BOUNDARIES = ("periodic", "outflow")

WAVESPEED_FLOOR = 1e-14


@dataclass(frozen=True)
class Grid1D:
    x_lo: float
    x_hi: float
    n_cells: int
    boundary: str = "periodic"

    def __post_init__(self):
        if not self.x_hi > self.x_lo:
            raise ValidationError("grid", f"need x_hi > x_lo, got [{self.x_lo}, {self.x_hi}]")
        if self.n_cells < 8:
            raise ValidationError("grid", f"need n_cells >= 8, got {self.n_cells}")
        if self.boundary not in BOUNDARIES:
            raise ValidationError("grid", f"boundary must be one of {BOUNDARIES}")

    @property
    def dx(self) -> float:
        return (self.x_hi - self.x_lo) / self.n_cells

    @cached_property
    def centers(self) -> np.ndarray:
        return self.x_lo + (np.arange(self.n_cells) + 0.5) * self.dx


@dataclass
class StateField:
    """Cell-averaged (u, v) on a grid at time t. Entries must be finite."""

    grid: Grid1D
    u: np.ndarray
    v: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        n = self.grid.n_cells
        if self.u.shape != (n,) or self.v.shape != (n,):
            raise ValidationError("state", f"u, v must have shape ({n},)")
        if not (np.all(np.isfinite(self.u)) and np.all(np.isfinite(self.v))):
            raise NonFinite(f"non-finite state entries at t = {self.t:g}")

    @property
    def r(self) -> np.ndarray:
        return np.hypot(self.u, self.v)

    def copy(self) -> "StateField":
        return StateField(self.grid, self.u.copy(), self.v.copy(), self.t)

    @classmethod
    def from_profiles(
        cls, grid: Grid1D, u0: Callable, v0: Callable, t: float = 0.0
    ) -> "StateField":
        x = grid.centers
        u = np.broadcast_to(np.asarray(u0(x), dtype=float), x.shape).copy()
        v = np.broadcast_to(np.asarray(v0(x), dtype=float), x.shape).copy()
        return cls(grid, u, v, t)


@dataclass(frozen=True, kw_only=True)
class SolverConfig:
    t_end: float
    output_times: Sequence[float] | None = None
    scheme: str = "rusanov"
    splitting: str = "strang"
    cfl: float = 0.45

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.splitting not in SPLITTINGS:
            raise ConfigError(
                f"splitting must be one of {SPLITTINGS}, got {self.splitting!r}"
            )
        if not 0.0 < self.cfl <= 1.0:
            raise ConfigError(f"cfl must lie in (0, 1], got {self.cfl}")
        if self.t_end < 0:
            raise ConfigError(f"t_end must be nonnegative, got {self.t_end}")
        if self.output_times is not None:
            ts = np.asarray(list(self.output_times), dtype=float)
            if ts.size == 0 or np.any(np.diff(ts) <= 0) or np.any(ts < 0):
                raise ConfigError("output_times must be strictly increasing and >= 0")
            if ts[-1] > self.t_end * (1 + 1e-12) + 1e-15:
                raise ConfigError("output_times may not exceed t_end")

    def resolved_outputs(self) -> np.ndarray:
        if self.output_times is None:
            return np.array([self.t_end])
        return np.asarray(list(self.output_times), dtype=float)


@dataclass
class Trajectory:
    """Snapshots produced by a simulation, in time order."""

    fields: list
    n_steps: int = 0
    avg_dt: float = 0.0

    @property
    def times(self) -> np.ndarray:
        return np.array([f.t for f in self.fields])

    @property
    def grid(self) -> Grid1D:
        return self.fields[0].grid

    def __len__(self):
        return len(self.fields)

    def __getitem__(self, k):
        return self.fields[k]

    def __iter__(self):
        return iter(self.fields)


def _pad(arr: np.ndarray, boundary: str) -> np.ndarray:
    if boundary == "periodic":
        return np.concatenate([arr[-1:], arr, arr[:1]])
    return np.concatenate([arr[:1], arr, arr[-1:]])  # outflow: copy edge cells


def max_wavespeed(f: StateField, phi: PhiModel) -> float:
    """max over cells of max(|lambda_1|, |lambda_2|), floored at 1e-14 so
    time steps stay finite on identically zero data."""
    r = f.r
    if float(np.max(r)) > phi.r_max * (1.0 + 1e-12):
        raise OutOfRange(
            f"state radius {float(np.max(r)):g} exceeds r_max={phi.r_max:g}"
        )
    p = np.asarray(phi.phi(r), dtype=float)
    lam2 = p + np.asarray(phi.r_dphi(r), dtype=float)
    speed = float(np.max(np.maximum(np.abs(p), np.abs(lam2))))
    return max(speed, WAVESPEED_FLOOR)


def hyperbolic_substep(
    f: StateField, phi: PhiModel, dt: float, scheme: str = "rusanov"
) -> StateField:
    """One conservative flux update of size dt (no damping). Advances t.

    Rusanov face dissipation uses the local two-sided wave speed; the
    Lax-Friedrichs variant uses the global dx/dt. dt must satisfy the CFL
    constraint for the current data or CFLViolation is raised."""
    if scheme not in SCHEMES:
        raise ConfigError(f"scheme must be one of {SCHEMES}, got {scheme!r}")
    if dt < 0:
        raise ConfigError(f"dt must be nonnegative, got {dt}")
    if dt == 0.0:
        return f.copy()
    dx = f.grid.dx
    speed = max_wavespeed(f, phi)
    if dt * speed > dx * (1.0 + 1e-9):
        raise CFLViolation(
            f"dt={dt:g} exceeds stable step {dx / speed:g} (speed {speed:g})"
        )

    ue = _pad(f.u, f.grid.boundary)
    ve = _pad(f.v, f.grid.boundary)
    re = np.hypot(ue, ve)
    pe = np.asarray(phi.phi(re), dtype=float)
    lam2e = pe + np.asarray(phi.r_dphi(re), dtype=float)
    fu = ue * pe
    fv = ve * pe

    if scheme == "rusanov":
        cell_speed = np.maximum(np.abs(pe), np.abs(lam2e))
        alpha = np.maximum(cell_speed[:-1], cell_speed[1:])
    else:
        alpha = np.full(ue.size - 1, dx / dt)

    flux_u = 0.5 * (fu[:-1] + fu[1:]) - 0.5 * alpha * (ue[1:] - ue[:-1])
    flux_v = 0.5 * (fv[:-1] + fv[1:]) - 0.5 * alpha * (ve[1:] - ve[:-1])
    lam = dt / dx
    un = f.u - lam * (flux_u[1:] - flux_u[:-1])
    vn = f.v - lam * (flux_v[1:] - flux_v[:-1])
    return StateField(f.grid, un, vn, f.t + dt)


def damping_substep(f: StateField, d: Damping, dt: float) -> StateField:
    """Exact integration of u_t = -a u, v_t = -b v over dt. Leaves t
    unchanged; the hyperbolic substep owns the clock."""
    if dt < 0:
        raise ConfigError(f"dt must be nonnegative, got {dt}")
    return StateField(
        f.grid,
        f.u * np.exp(-d.a * dt),
        f.v * np.exp(-d.b * dt),
        f.t,
    )


def step_once(
    f: StateField,
    phi: PhiModel,
    d: Damping,
    dt: float,
    scheme: str = "rusanov",
    splitting: str = "strang",
) -> StateField:
    """One split step of size dt."""
    if splitting == "strang":
        g = damping_substep(f, d, 0.5 * dt)
        g = hyperbolic_substep(g, phi, dt, scheme)
        return damping_substep(g, d, 0.5 * dt)
    if splitting == "lie":
        g = damping_substep(f, d, dt)
        return hyperbolic_substep(g, phi, dt, scheme)
    raise ConfigError(f"splitting must be one of {SPLITTINGS}, got {splitting!r}")


def simulate(
    init: StateField,
    phi: PhiModel,
    d: Damping,
    cfg: SolverConfig,
    step_hook: Callable | None = None,
) -> Trajectory:
    """March from init.t to cfg.t_end, recording snapshots at the
    requested output times (hit exactly by truncating the final step of
    each segment). dt is recomputed from the current data every step.

    The theory behind the continuous problem assumes r phi'(r) != 0;
    running with a model that fails that check (for example a constant
    phi) is allowed, since the scheme itself does not need it, but the
    condition's status is available as phi.c1_report."""
    if not phi.c1_report.satisfied:
        warnings.warn(
            f"{phi.label} fails the structure condition (r phi' vanishes); "
            "continuing, but well-posedness results do not apply",
            stacklevel=2,
        )
    targets = cfg.resolved_outputs()
    if targets[0] < init.t - 1e-12:
        raise ConfigError("output time precedes the initial time")
    f = init.copy()
    out: list[StateField] = []
    n_steps = 0
    for target in targets:
        while f.t < target * (1.0 - 1e-15) - 1e-15:
            speed = max_wavespeed(f, phi)
            dt = min(cfg.cfl * f.grid.dx / speed, target - f.t)
            f = step_once(f, phi, d, dt, cfg.scheme, cfg.splitting)
            n_steps += 1
            if step_hook is not None:
                step_hook(f)
        snap = f.copy()
        snap.t = target  # clamp away last-step rounding
        out.append(snap)
    elapsed = targets[-1] - init.t
    return Trajectory(
        fields=out,
        n_steps=n_steps,
        avg_dt=elapsed / n_steps if n_steps else 0.0,
    )


def mollify_profile(values: np.ndarray, eps: float, grid: Grid1D) -> np.ndarray:
    """Discrete mollification of cell values with the compact bump kernel
    of radius eps: weights w_k proportional to bump(k dx / eps), summed to
    one. Warns when eps < dx (kernel degenerates to the identity)."""
    if eps <= 0:
        raise ConfigError(f"mollifier radius must be positive, got {eps}")
    values = np.asarray(values, dtype=float)
    dx = grid.dx
    if eps < dx:
        warnings.warn(
            f"mollifier radius {eps:g} under-resolved on dx={dx:g}; "
            "kernel collapses to the identity",
            stacklevel=2,
        )
    half = int(np.ceil(eps / dx))
    offsets = np.arange(-half, half + 1)
    w = bump(offsets * dx / eps)
    w = w / np.sum(w)
    if grid.boundary == "periodic":
        out = np.zeros_like(values)
        for k, wk in zip(offsets, w):
            out += wk * np.roll(values, k)
        return out
    padded = np.concatenate(
        [np.full(half, values[0]), values, np.full(half, values[-1])]
    )
    return np.convolve(padded, w, mode="valid")


def mollify_initial_data(
    u0: Callable, v0: Callable, eps: float, grid: Grid1D, t: float = 0.0
) -> StateField:
    """Sample the profiles at cell centers, then smooth each channel with
    the bump kernel of radius eps."""
    raw = StateField.from_profiles(grid, u0, v0, t)
    return StateField(
        grid,
        mollify_profile(raw.u, eps, grid),
        mollify_profile(raw.v, eps, grid),
        t,
    )


def _fmt(x: float) -> str:
    return format(float(x), ".17e")


def snapshot_path(out_dir, run_name: str, t: float) -> Path:
    return Path(out_dir) / f"{run_name}_t{format(float(t), 'g')}.tsv"


def write_snapshot(
    f: StateField, phi: PhiModel, run_name: str, out_dir
) -> Path:
    """Tab-separated snapshot with columns x, u, v, r, W, Z. Header lines
    start with '#'; floats are written in full-precision scientific
    notation so files round-trip exactly."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = snapshot_path(out_dir, run_name, f.t)
    r = f.r
    w = np.asarray(phi.phi(r), dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = f.u / f.v
    x = f.grid.centers
    with open(path, "w") as fh:
        fh.write(f"# run={run_name} t={_fmt(f.t)} n_cells={f.grid.n_cells}\n")
        fh.write(f"# phi={phi.label} boundary={f.grid.boundary}\n")
        fh.write("# x\tu\tv\tr\tW\tZ\n")
        for i in range(f.grid.n_cells):
            fh.write(
                "\t".join(
                    (_fmt(x[i]), _fmt(f.u[i]), _fmt(f.v[i]), _fmt(r[i]), _fmt(w[i]), _fmt(z[i]))
                )
                + "\n"
            )
    return path


def read_snapshot(path) -> dict:
    """Inverse of write_snapshot: returns the columns as arrays plus the
    header key=value fields."""
    meta: dict[str, str] = {}
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for token in line[1:].split():
                    if "=" in token:
                        k, _, val = token.partition("=")
                        meta[k] = val
                continue
            rows.append([float(tok) for tok in line.split("\t")])
    data = np.asarray(rows, dtype=float)
    if data.ndim != 2 or data.shape[1] != 6:
        raise ConfigError(f"{path}: expected six tab-separated columns")
    return {
        "meta": meta,
        "x": data[:, 0],
        "u": data[:, 1],
        "v": data[:, 2],
        "r": data[:, 3],
        "W": data[:, 4],
        "Z": data[:, 5],
    }
