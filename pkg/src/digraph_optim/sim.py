"""Experiment orchestration: run a dynamics, detect convergence, certify the
answer against a centralized oracle, and run the built-in studies (the
5-node counterexample digraph and the five-objective benchmark run).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from . import dynamics as dyn
from .analysis import MIN_ALPHA, companion_beta, select_parameters
from .graph import (LaplacianBundle, WeightedDigraph, build_laplacian,
                    is_strongly_connected, is_weight_balanced)
from .objectives import NetworkObjective, ObjectiveError, builtin_objective

AGREE_TOL = 1e-6
RATE_TOL = 1e-5
SUSTAIN_FRACTION = 0.05   # convergence must hold over this slice of horizon
NONCONV_FRACTION = 0.25   # non-convergence judged over the trailing slice
NONCONV_TOL = 1e-6

# Adjacency of the 5-node strongly connected, weight-balanced digraph whose
# Laplacian violates the sqrt(3)|Im| <= Re criterion.
COUNTEREXAMPLE_ADJACENCY = np.array([
    [0.0,    0.5326, 0.1654, 0.0004, 0.0002],
    [0.0595, 0.0,    0.6676, 0.0681, 0.1230],
    [0.0213, 0.0004, 0.0,    0.5809, 0.3181],
    [0.0248, 0.2458, 0.0,    0.0,    0.5587],
    [0.5930, 0.1394, 0.0877, 0.1799, 0.0],
])

BENCHMARK_BOX = (-3.0, 3.0)


class SimError(ValueError):
    pass


def counterexample_graph() -> WeightedDigraph:
    return WeightedDigraph(COUNTEREXAMPLE_ADJACENCY)


def benchmark_objective_configs() -> list:
    """The five scalar objectives of the benchmark run:
    e^x, (x-3)^2, (x+3)^2, x^4, and the constant 4."""
    return [
        {"expr": "exp(x)"},
        {"builtin": "quadratic", "k": 1.0, "center": 3.0},
        {"builtin": "quadratic", "k": 1.0, "center": -3.0},
        {"expr": "x^4"},
        {"builtin": "constant", "c": 4.0},
    ]


def zero_objective(n: int, d: int = 1) -> NetworkObjective:
    if d != 1:
        raise SimError("zero_objective currently builds d=1 parts")
    return NetworkObjective(tuple(builtin_objective("constant", c=0.0)
                                  for _ in range(n)))


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float = 1e-3
    t_final: float = 40.0
    record_every: int = 10


@dataclass(frozen=True)
class SaddleCertificate:
    agreement_residual: float    # ||L x||
    stationarity_residual: float  # ||L z + g(x)|| for the least-norm selection
    optimality_residual: float   # ||sum_i g_i|| at the agreement value
    tol: float
    ok: bool


@dataclass(frozen=True)
class ExperimentResult:
    trajectory: dyn.Trajectory
    converged: bool
    t_detect: Optional[float]
    agreement_value: np.ndarray
    oracle_value: Optional[np.ndarray]
    oracle_gap: Optional[float]
    certificate: Optional[SaddleCertificate]
    spec: dyn.DynamicsSpec = field(repr=False)

    def summary(self) -> dict:
        return {
            "converged": bool(self.converged),
            "t_detect": self.t_detect,
            "agreement_value": [float(v) for v in self.agreement_value],
            "final_V": None if math.isnan(self.trajectory.final.lyapunov)
            else float(self.trajectory.final.lyapunov),
            "final_consensus_residual":
                float(self.trajectory.final.consensus_residual),
            "final_rhs_norm": float(self.trajectory.final.rhs_norm),
            "oracle_value": None if self.oracle_value is None
            else [float(v) for v in self.oracle_value],
            "oracle_gap": None if self.oracle_gap is None
            else float(self.oracle_gap),
        }


_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def _golden_section(fn, lo: float, hi: float, tol: float) -> float:
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = fn(c), fn(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = fn(d)
    return 0.5 * (a + b)


def centralized_oracle(objective: NetworkObjective,
                       box: Sequence[float],
                       tol: float = 1e-8,
                       seed: int = 0,
                       restarts: int = 8,
                       iters: int = 4000) -> np.ndarray:
    """Minimize sum_i f^i by direct search, never touching graph structure.

    d = 1 uses golden-section over the box; d > 1 uses multi-start
    subgradient descent with diminishing steps.
    """
    if box is None:
        raise SimError("centralized oracle needs a search box")
    d = objective.dimension
    lo, hi = float(box[0]), float(box[1])
    if not lo < hi:
        raise SimError(f"bad oracle box [{lo}, {hi}]")
    if d == 1:
        x = _golden_section(lambda v: objective.centralized(np.array([v])),
                            lo, hi, tol)
        return np.array([x])

    rng = np.random.default_rng(seed)
    best_x, best_f = None, math.inf
    scale = hi - lo
    for _ in range(restarts):
        x = rng.uniform(lo, hi, size=d)
        cur_x, cur_f = x.copy(), objective.centralized(x)
        for k in range(1, iters + 1):
            g = objective.centralized_subgradient(x)
            gn = np.linalg.norm(g)
            if gn == 0:
                break
            x = np.clip(x - (0.1 * scale / (gn * math.sqrt(k))) * g, lo, hi)
            fx = objective.centralized(x)
            if fx < cur_f:
                cur_x, cur_f = x.copy(), fx
        if cur_f < best_f:
            best_x, best_f = cur_x, cur_f
    return best_x


def solve_equilibrium(bundle: LaplacianBundle, objective: NetworkObjective,
                      z0: np.ndarray,
                      box: Sequence[float] = BENCHMARK_BOX,
                      oracle_tol: float = 1e-10,
                      seed: int = 0) -> Tuple[np.ndarray, np.ndarray]:
    """Equilibrium (x*, z*) with x* in agreement at the centralized minimizer
    and z* solving L z* = -g(x*) inside the conservation class of z0."""
    n, d = bundle.n, bundle.dimension_d
    x_bar = centralized_oracle(objective, box, tol=oracle_tol, seed=seed)
    x_star = np.tile(x_bar, n)
    g = objective.subgradient(x_star)
    z_ls, *_ = np.linalg.lstsq(bundle.lifted, -g, rcond=None)
    # Shift along ker L = span(1 (x) I_d) to match the conserved z-mean.
    z0 = np.asarray(z0, dtype=float)
    mean_shift = (z0.reshape(n, d).mean(axis=0)
                  - z_ls.reshape(n, d).mean(axis=0))
    z_star = z_ls + np.tile(mean_shift, n)
    return x_star, z_star


def certify_saddle_point(bundle: LaplacianBundle,
                         objective: NetworkObjective,
                         x: np.ndarray, z: np.ndarray,
                         tol: float = 1e-6) -> SaddleCertificate:
    """Stationarity checks for a candidate saddle point."""
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    n, d = bundle.n, bundle.dimension_d
    agreement = float(np.linalg.norm(bundle.lifted @ x))
    stationarity = float(np.linalg.norm(bundle.lifted @ z
                                        + objective.subgradient(x)))
    x_bar = x.reshape(n, d).mean(axis=0)
    optimality = float(np.linalg.norm(
        objective.centralized_subgradient(x_bar)))
    ok = max(agreement, stationarity, optimality) <= tol
    return SaddleCertificate(agreement_residual=agreement,
                             stationarity_residual=stationarity,
                             optimality_residual=optimality,
                             tol=tol, ok=ok)


def _detect_convergence(traj: dyn.Trajectory, t_final: float
                        ) -> Tuple[bool, Optional[float]]:
    """Earliest time from which ||Lx|| <= AGREE_TOL and ||rhs|| <= RATE_TOL
    hold continuously for at least SUSTAIN_FRACTION of the horizon and
    through the end of the run."""
    window = SUSTAIN_FRACTION * t_final
    good_from = None
    for s in traj.samples:
        ok = (s.consensus_residual <= AGREE_TOL and s.rhs_norm <= RATE_TOL)
        if ok and good_from is None:
            good_from = s.state.t
        elif not ok:
            good_from = None
    if good_from is not None and traj.final.state.t - good_from >= window:
        return True, good_from
    return False, None


def is_non_convergent(traj: dyn.Trajectory, t_final: float,
                      tol: float = NONCONV_TOL) -> bool:
    """Distance to the agreement set stays above tol over the trailing
    quarter of the horizon (the counterexample signature)."""
    n = traj.samples[0].state.x.size
    cutoff = (1.0 - NONCONV_FRACTION) * t_final
    dists = []
    for s in traj.samples:
        if s.state.t >= cutoff:
            x = s.state.x
            dists.append(float(np.linalg.norm(x - x.mean())) if n else 0.0)
    return bool(dists) and min(dists) > tol


def run_experiment(g: WeightedDigraph,
                   objective: NetworkObjective,
                   variant: str,
                   x0: np.ndarray,
                   z0: np.ndarray,
                   alpha=None,
                   safety: float = 0.9,
                   integrator: IntegratorConfig = IntegratorConfig(),
                   box: Sequence[float] = BENCHMARK_BOX,
                   certificate_tol: float = 1e-4,
                   seed: int = 0) -> ExperimentResult:
    """Integrate the requested dynamics and certify the outcome.

    ``alpha`` may be a number or "auto" (select via the design function;
    requires a Lipschitz constant on the objective).  Hypothesis violations
    for the directed variant are reported before any integration.
    """
    d = objective.dimension
    bundle = build_laplacian(g, d)
    beta = None
    if variant == dyn.ALPHA_DIRECTED:
        balance = is_weight_balanced(g)
        if not balance.balanced:
            raise SimError(
                "directed dynamics requires a weight-balanced digraph "
                f"(max imbalance {balance.max_imbalance:g})")
        if not is_strongly_connected(g):
            raise SimError(
                "directed dynamics requires a strongly connected digraph")
        if alpha == "auto":
            K = objective.gradient_lipschitz_K
            if K is None:
                raise SimError(
                    "alpha='auto' needs a Lipschitz constant; give K hints "
                    "or domain boxes on the objectives")
            if K == 0.0:
                # Zero curvature: any alpha >= 2 sqrt(2) stabilizes.
                alpha = MIN_ALPHA
            else:
                alpha = select_parameters(bundle, K, safety=safety).alpha
        if alpha is None:
            raise SimError("directed dynamics needs alpha (or 'auto')")
        alpha = float(alpha)
        if alpha >= MIN_ALPHA:
            beta = companion_beta(alpha)
    elif variant != dyn.SADDLE_POINT:
        raise SimError(f"unknown dynamics variant {variant!r}")

    spec = dyn.DynamicsSpec(variant=variant, bundle=bundle,
                            objective=objective, alpha=alpha, beta=beta)

    equilibrium = None
    oracle_value = None
    try:
        equilibrium = solve_equilibrium(bundle, objective, z0, box=box,
                                        seed=seed)
        oracle_value = equilibrium[0][:d].copy()
    except (SimError, ObjectiveError):
        pass

    s0 = dyn.SimState(0.0, np.asarray(x0, dtype=float),
                      np.asarray(z0, dtype=float))
    traj = dyn.integrate(spec, s0, integrator.dt, integrator.t_final,
                         record_every=integrator.record_every,
                         equilibrium=equilibrium)

    converged, t_detect = _detect_convergence(traj, integrator.t_final)
    final = traj.final.state
    agreement_value = final.x.reshape(bundle.n, d).mean(axis=0)

    oracle_gap = None
    if oracle_value is not None:
        oracle_gap = (objective.centralized(agreement_value)
                      - objective.centralized(oracle_value))

    certificate = certify_saddle_point(bundle, objective, final.x, final.z,
                                       tol=certificate_tol)

    return ExperimentResult(
        trajectory=traj,
        converged=converged,
        t_detect=t_detect,
        agreement_value=agreement_value,
        oracle_value=oracle_value,
        oracle_gap=oracle_gap,
        certificate=certificate,
        spec=spec,
    )


@dataclass(frozen=True)
class CounterexampleReport:
    lifted_spectrum: np.ndarray
    max_real_part: float
    pairing_ok: bool
    pairing_error: float
    saddle_point_converged: bool
    saddle_point_non_convergent: bool
    alpha: float
    alpha_directed_converged: bool

    def summary(self) -> dict:
        return {
            "max_real_part": float(self.max_real_part),
            "pairing_ok": bool(self.pairing_ok),
            "pairing_error": float(self.pairing_error),
            "saddle_point_converged": bool(self.saddle_point_converged),
            "saddle_point_non_convergent":
                bool(self.saddle_point_non_convergent),
            "alpha": float(self.alpha),
            "alpha_directed_converged": bool(self.alpha_directed_converged),
        }


def counterexample_suite(g: WeightedDigraph,
                         alpha: float = 3.0,
                         x0: Optional[np.ndarray] = None,
                         z0: Optional[np.ndarray] = None,
                         integrator: IntegratorConfig = IntegratorConfig(
                             dt=1e-3, t_final=100.0, record_every=100),
                         ) -> CounterexampleReport:
    """Zero-objective study: explicit linear spectrum of the saddle-point
    flow, its Kronecker pairing with the Laplacian spectrum, and convergence
    verdicts for both dynamics."""
    bundle = build_laplacian(g, 1)
    n = bundle.n
    if x0 is None:
        x0 = np.arange(1, n + 1, dtype=float)
    if z0 is None:
        z0 = np.ones(n)
    objective = zero_objective(n)

    big = np.kron(np.array([[-1.0, -1.0], [1.0, 0.0]]), bundle.lifted)
    spectrum = np.linalg.eigvals(big)
    rot = np.array([-0.5 + (math.sqrt(3) / 2) * 1j,
                    -0.5 - (math.sqrt(3) / 2) * 1j])
    predicted = (bundle.eigvals[:, None] * rot[None, :]).ravel()
    # Greedy matching of each computed eigenvalue to the closest prediction.
    err = max(float(np.min(np.abs(predicted - mu))) for mu in spectrum)
    scale = max(float(np.linalg.norm(bundle.laplacian, 2)), 1.0)
    pairing_ok = err <= 1e-8 * scale

    sp = run_experiment(g, objective, dyn.SADDLE_POINT, x0=x0, z0=z0,
                        integrator=integrator)
    ad = run_experiment(g, objective, dyn.ALPHA_DIRECTED, x0=x0, z0=z0,
                        alpha=alpha, integrator=integrator)

    return CounterexampleReport(
        lifted_spectrum=spectrum,
        max_real_part=float(spectrum.real.max()),
        pairing_ok=pairing_ok,
        pairing_error=err,
        saddle_point_converged=sp.converged,
        saddle_point_non_convergent=is_non_convergent(
            sp.trajectory, integrator.t_final),
        alpha=alpha,
        alpha_directed_converged=ad.converged,
    )
