"""Right-hand sides, Lyapunov functions, and trajectory integration for the
two consensus dynamics.

Variant "saddle_point" is the undirected-style flow

    dx = -Lx - Lz - g,   dz = Lx,

with g a least-norm stacked subgradient; variant "alpha_directed" replaces
the first Laplacian term with -alpha*Lx and requires a smooth objective.
Smooth objectives are integrated with classical fixed-step RK4, nonsmooth
ones with forward Euler (the RHS is then only a selection of a set-valued
map, so higher order buys nothing at kinks).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from .graph import LaplacianBundle
from .objectives import NetworkObjective, ObjectiveError

SADDLE_POINT = "saddle_point"
ALPHA_DIRECTED = "alpha_directed"

BETA_COMPANION_TOL = 1e-10


class DynamicsError(ValueError):
    pass


class DivergenceError(RuntimeError):
    """State left the finite range; ``t_bad`` is the first bad time."""

    def __init__(self, t_bad: float):
        super().__init__(f"non-finite state at t = {t_bad}")
        self.t_bad = t_bad


@dataclass(frozen=True)
class SimState:
    t: float
    x: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        z = np.asarray(self.z, dtype=float)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "z", z)
        if x.shape != z.shape:
            raise DynamicsError(f"x shape {x.shape} != z shape {z.shape}")


@dataclass(frozen=True)
class DynamicsSpec:
    variant: str
    bundle: LaplacianBundle
    objective: NetworkObjective
    alpha: Optional[float] = None
    beta: Optional[float] = None

    def __post_init__(self):
        if self.variant not in (SADDLE_POINT, ALPHA_DIRECTED):
            raise DynamicsError(f"unknown variant {self.variant!r}")
        if self.objective.n != self.bundle.n:
            raise DynamicsError(
                f"objective has {self.objective.n} parts for a "
                f"{self.bundle.n}-agent graph")
        if self.objective.dimension != self.bundle.dimension_d:
            raise DynamicsError(
                f"objective dimension {self.objective.dimension} != bundle "
                f"dimension {self.bundle.dimension_d}")
        if self.variant == ALPHA_DIRECTED:
            if self.alpha is None or self.alpha <= 0:
                raise DynamicsError(
                    "alpha_directed needs alpha > 0, got "
                    f"{self.alpha}")
            if not self.objective.smooth:
                raise DynamicsError(
                    "alpha_directed requires a smooth objective")
            if self.beta is not None:
                residual = self.beta**2 - self.alpha * self.beta + 2.0
                if abs(residual) > BETA_COMPANION_TOL:
                    raise DynamicsError(
                        f"beta = {self.beta} is not a companion of "
                        f"alpha = {self.alpha}: beta^2 - alpha*beta + 2 = "
                        f"{residual}")

    @property
    def state_size(self) -> int:
        return self.bundle.n * self.bundle.dimension_d


@dataclass(frozen=True)
class TrajectorySample:
    state: SimState
    lyapunov: float
    consensus_residual: float  # ||L x||
    rhs_norm: float            # ||(dx, dz)||


@dataclass(frozen=True)
class Trajectory:
    samples: tuple
    metadata: dict = field(default_factory=dict)

    @property
    def final(self) -> TrajectorySample:
        return self.samples[-1]

    def times(self) -> np.ndarray:
        return np.array([s.state.t for s in self.samples])


def rhs(spec: DynamicsSpec, s: SimState) -> Tuple[np.ndarray, np.ndarray]:
    L = spec.bundle.lifted
    Lx = L @ s.x
    g = spec.objective.subgradient(s.x)
    if spec.variant == SADDLE_POINT:
        dx = -Lx - L @ s.z - g
    else:
        dx = -spec.alpha * Lx - L @ s.z - g
    return dx, Lx


def saddle_function_F(spec: DynamicsSpec, x: np.ndarray,
                      z: np.ndarray) -> float:
    """F(x, z) = f~(x) + x^T L z + (1/2) x^T L x (weight-balanced graphs)."""
    L = spec.bundle.lifted
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    return float(spec.objective.evaluate(x) + x @ (L @ z)
                 + 0.5 * x @ (L @ x))


def lyapunov_value(spec: DynamicsSpec, s: SimState,
                   equilibrium: Tuple[np.ndarray, np.ndarray]) -> float:
    """Squared-distance Lyapunov function relative to an equilibrium.

    For the directed variant the second term is measured in the sheared
    coordinate y = beta*x + z, which is what makes the decrease argument
    work; spec.beta must then be set.
    """
    x_star, z_star = (np.asarray(equilibrium[0], dtype=float),
                      np.asarray(equilibrium[1], dtype=float))
    dx = s.x - x_star
    if spec.variant == SADDLE_POINT:
        dz = s.z - z_star
    else:
        if spec.beta is None:
            raise DynamicsError("directed Lyapunov value needs spec.beta")
        dz = (spec.beta * s.x + s.z) - (spec.beta * x_star + z_star)
    return float(0.5 * dx @ dx + 0.5 * dz @ dz)


def dt_max(spec: DynamicsSpec) -> float:
    """Stability heuristic for the fixed-step integrators."""
    L_norm = float(np.linalg.norm(spec.bundle.laplacian, 2))
    alpha = spec.alpha if spec.variant == ALPHA_DIRECTED else 1.0
    K = spec.objective.gradient_lipschitz_K or 0.0
    denom = alpha * L_norm + K + L_norm
    return math.inf if denom == 0.0 else 0.5 / denom


def integrate(spec: DynamicsSpec, s0: SimState, dt: float, t_final: float,
              record_every: int = 1,
              equilibrium: Optional[Tuple[np.ndarray, np.ndarray]] = None
              ) -> Trajectory:
    """Fixed-step integration: RK4 for smooth objectives, Euler otherwise.

    Samples (state, V, ||Lx||, ||rhs||) are recorded at t=0, every
    ``record_every`` steps, and at the final step.  V is NaN when no
    equilibrium is supplied.
    """
    if dt <= 0:
        raise DynamicsError(f"dt must be positive, got {dt}")
    limit = dt_max(spec)
    if dt > limit:
        raise DynamicsError(
            f"dt = {dt} exceeds the stability heuristic dt_max = {limit}")
    if record_every < 1:
        raise DynamicsError("record_every must be a positive integer")
    n_steps = int(round(t_final / dt))
    if n_steps < 1:
        raise DynamicsError("t_final must cover at least one step")

    smooth = spec.objective.smooth
    m = spec.state_size

    # Hot loop: inline the RHS on raw arrays (rhs() itself builds SimStates).
    L = spec.bundle.lifted
    gain = spec.alpha if spec.variant == ALPHA_DIRECTED else 1.0
    subgrad = spec.objective.subgradient

    def f(y):
        x = y[:m]
        Lx = L @ x
        dx = -gain * Lx - L @ y[m:] - subgrad(x)
        return np.concatenate([dx, Lx])

    y = np.concatenate([np.asarray(s0.x, dtype=float),
                        np.asarray(s0.z, dtype=float)])

    samples = []

    def record(k, y):
        t = k * dt
        state = SimState(t, y[:m].copy(), y[m:].copy())
        dx, dz = rhs(spec, state)
        v = (lyapunov_value(spec, state, equilibrium)
             if equilibrium is not None else math.nan)
        samples.append(TrajectorySample(
            state=state,
            lyapunov=v,
            consensus_residual=float(np.linalg.norm(spec.bundle.lifted
                                                   @ state.x)),
            rhs_norm=float(math.hypot(np.linalg.norm(dx),
                                      np.linalg.norm(dz))),
        ))

    record(0, y)
    for k in range(1, n_steps + 1):
        try:
            if smooth:
                k1 = f(y)
                k2 = f(y + dt / 2 * k1)
                k3 = f(y + dt / 2 * k2)
                k4 = f(y + dt * k3)
                y = y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            else:
                y = y + dt * f(y)
        except ObjectiveError as exc:
            # A non-finite subgradient mid-step is a blow-up, not bad input.
            raise DivergenceError(k * dt) from exc
        if not np.all(np.isfinite(y)):
            raise DivergenceError(k * dt)
        if k % record_every == 0 or k == n_steps:
            record(k, y)

    metadata = {
        "integrator": "rk4" if smooth else "euler",
        "dt": dt,
        "t_final": n_steps * dt,
        "record_every": record_every,
        "variant": spec.variant,
        "alpha": spec.alpha,
        "beta": spec.beta,
    }
    return Trajectory(samples=tuple(samples), metadata=metadata)


def trajectory_to_csv(traj: Trajectory) -> str:
    """CSV export: t, x_0..x_{nd-1}, z_0..z_{nd-1}, V, Lx_norm, rhs_norm.

    Numbers use 17 significant digits so repeated runs are byte-identical.
    """
    if not traj.samples:
        return ""
    m = traj.samples[0].state.x.size
    header = (["t"] + [f"x_{i}" for i in range(m)]
              + [f"z_{i}" for i in range(m)] + ["V", "Lx_norm", "rhs_norm"])
    lines = [",".join(header)]
    for s in traj.samples:
        row = ([s.state.t] + list(s.state.x) + list(s.state.z)
               + [s.lyapunov, s.consensus_residual, s.rhs_norm])
        lines.append(",".join(f"{v:.17g}" for v in row))
    return "\n".join(lines) + "\n"


def trajectory_to_plot_csv(traj: Trajectory) -> str:
    """Long-format plot data: series, t, value for x-, z-components and V."""
    if not traj.samples:
        return ""
    m = traj.samples[0].state.x.size
    lines = ["series,t,value"]
    for i in range(m):
        for s in traj.samples:
            lines.append(f"x_{i},{s.state.t:.17g},{s.state.x[i]:.17g}")
    for i in range(m):
        for s in traj.samples:
            lines.append(f"z_{i},{s.state.t:.17g},{s.state.z[i]:.17g}")
    for s in traj.samples:
        lines.append(f"V,{s.state.t:.17g},{s.lyapunov:.17g}")
    return "\n".join(lines) + "\n"
