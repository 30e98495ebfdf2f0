"""Spectral convergence criteria and design-parameter selection.

Two decisions live here: whether the plain saddle-point dynamics can work
on a given digraph (the sqrt(3)|Im| <= Re test over the nonzero Laplacian
spectrum), and how to pick the gain alpha for the directed dynamics via
the scalar design function h and its smallest positive root.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .graph import LaplacianBundle, is_weight_balanced, nonzero_eigenvalues

SQRT3 = math.sqrt(3.0)
MIN_ALPHA = 2.0 * math.sqrt(2.0)

ROOT_TOL = 1e-10
MAX_BISECT_ITERS = 200


class AnalysisError(ValueError):
    """Inputs that make the requested analysis ill-posed."""


@dataclass(frozen=True)
class CriterionVerdict:
    """Outcome of the necessary spectral condition for the undirected-style
    dynamics on a digraph: Re(lambda) - sqrt(3)|Im(lambda)| >= 0 must hold
    for every nonzero Laplacian eigenvalue."""

    passes: bool
    worst_margin: float
    witness: Optional[complex]


@dataclass(frozen=True)
class ParameterSelection:
    lipschitz_K: float
    lambda_star_sym: float
    beta_star: float
    beta: float
    alpha: float
    h_at_beta: float


def check_necessary_condition(bundle: LaplacianBundle,
                              tol: float = 1e-9) -> CriterionVerdict:
    """Evaluate Re(lambda) - sqrt(3)|Im(lambda)| over the nonzero spectrum."""
    ev = nonzero_eigenvalues(bundle)
    if ev.size == 0:
        return CriterionVerdict(passes=True, worst_margin=0.0, witness=None)
    margins = ev.real - SQRT3 * np.abs(ev.imag)
    idx = int(np.argmin(margins))
    worst = float(margins[idx])
    passes = worst >= -tol
    return CriterionVerdict(
        passes=passes,
        worst_margin=worst,
        witness=None if passes else complex(ev[idx]),
    )


def h_function(r: float, lambda_star_sym: float, K: float) -> float:
    """Scalar design function whose smallest positive root bounds beta.

    h(r) = (1/2) * Lambda* * (-X + sqrt(X^2 - 4)) + K r^2 / (1 + r^2)
    with X = (r^4 + 3 r^2 + 2) / r.  X >= 2 sqrt(2) > 2 for r > 0, so the
    square root is real; a failed guard flags a numerical pathology.
    """
    if r <= 0:
        raise AnalysisError(f"h is defined for r > 0, got {r}")
    X = (r**4 + 3.0 * r**2 + 2.0) / r
    disc = X * X - 4.0
    if disc < 0:
        raise AnalysisError(f"h domain error: X^2 - 4 = {disc} < 0 at r={r}")
    return 0.5 * lambda_star_sym * (-X + math.sqrt(disc)) \
        + K * r**2 / (1.0 + r**2)


def _bisect_root(fn, lo: float, hi: float) -> float:
    """Bisection on a sign change fn(lo) < 0 < fn(hi)."""
    f_lo = fn(lo)
    for _ in range(MAX_BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        f_mid = fn(mid)
        if abs(f_mid) <= ROOT_TOL:
            return mid
        if (f_mid < 0) == (f_lo < 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def select_parameters(bundle: LaplacianBundle, K: float,
                      safety: float = 0.9) -> ParameterSelection:
    """Pick beta strictly inside (0, beta*) and the induced alpha.

    beta* is the smallest positive root of h, found by bracketing (doubling
    upward from the guaranteed-negative small-r side) plus bisection; then
    beta = safety * beta* and alpha = (beta^2 + 2) / beta.
    """
    if K <= 0:
        raise AnalysisError(f"Lipschitz constant K must be positive, got {K}")
    if not 0 < safety < 1:
        raise AnalysisError(f"safety factor must be in (0, 1), got {safety}")
    balance = is_weight_balanced(bundle.graph)
    if not balance.balanced:
        raise AnalysisError(
            "parameter selection assumes a weight-balanced digraph "
            f"(max imbalance {balance.max_imbalance:g})")
    lam = bundle.lambda_star_sym
    if lam <= 0:
        raise AnalysisError(
            "lambda_star_sym <= 0: graph is not weight-balanced and strongly "
            "connected, no root of h is bracketed")

    lo = min(1e-6, 1e-6 * lam / K)
    if h_function(lo, lam, K) >= 0:
        raise AnalysisError("h not negative near 0; cannot bracket the root")
    hi = max(1.0, 2.0 * lo)
    doublings = 0
    while h_function(hi, lam, K) <= 0:
        hi *= 2.0
        doublings += 1
        if doublings > 200:
            raise AnalysisError("failed to bracket a positive root of h")
    # Keep the bracket tight around the *smallest* root: walk lo upward on a
    # fine grid while h stays negative.
    grid = np.linspace(lo, hi, 512)
    for r in grid[1:]:
        if h_function(float(r), lam, K) >= 0:
            hi = float(r)
            break
        lo = float(r)

    beta_star = _bisect_root(lambda r: h_function(r, lam, K), lo, hi)
    beta = safety * beta_star
    alpha = (beta**2 + 2.0) / beta
    h_at_beta = h_function(beta, lam, K)
    if h_at_beta >= 0:
        raise AnalysisError(
            f"h(beta) = {h_at_beta} >= 0 after selection; selection invalid")
    return ParameterSelection(
        lipschitz_K=K,
        lambda_star_sym=lam,
        beta_star=beta_star,
        beta=beta,
        alpha=alpha,
        h_at_beta=h_at_beta,
    )


def companion_beta(alpha: float) -> float:
    """Smaller root of beta^2 - alpha*beta + 2 = 0, used by the Lyapunov
    monitor of the directed dynamics.  Requires alpha >= 2 sqrt(2)."""
    disc = alpha * alpha - 8.0
    if disc < 0:
        raise AnalysisError(
            f"alpha = {alpha} < 2*sqrt(2); no real companion beta exists")
    return 0.5 * (alpha - math.sqrt(disc))
