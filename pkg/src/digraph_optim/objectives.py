"""Convex per-agent objectives and the stacked network objective.

An ObjectiveFunction bundles evaluation, a concrete subgradient selection
(least-norm at kinks), and Lipschitz metadata for its gradient.  Scalar
objectives come either from the expression DSL or from a handful of
builtins; multi-dimensional objectives are composed programmatically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import expressions as ex


class ObjectiveError(ValueError):
    pass


@dataclass(frozen=True)
class ObjectiveFunction:
    """A convex function with a chosen subgradient selection.

    ``gradient_lipschitz_K`` may be an effective constant valid only on the
    box it was estimated over (e.g. x^4 has no global one).
    """

    dimension: int
    eval_fn: Callable[[np.ndarray], float]
    subgradient_fn: Callable[[np.ndarray], np.ndarray]
    gradient_lipschitz_K: Optional[float]
    smooth: bool
    label: str = ""

    def __call__(self, x) -> float:
        return float(self.eval_fn(np.atleast_1d(np.asarray(x, dtype=float))))

    def subgradient(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        g = np.atleast_1d(np.asarray(self.subgradient_fn(x), dtype=float))
        if not np.all(np.isfinite(g)):
            raise ObjectiveError(f"non-finite subgradient at x={x}")
        return g


@dataclass(frozen=True)
class NetworkObjective:
    """Stacked objective f~(x) = sum_i f^i(x^i) over n agents of dimension d."""

    parts: tuple
    dimension: int = field(init=False)

    def __post_init__(self):
        if not self.parts:
            raise ObjectiveError("need at least one per-agent objective")
        dims = {p.dimension for p in self.parts}
        if len(dims) != 1:
            raise ObjectiveError(f"mixed agent dimensions {dims}")
        object.__setattr__(self, "parts", tuple(self.parts))
        object.__setattr__(self, "dimension", dims.pop())

    @property
    def n(self) -> int:
        return len(self.parts)

    @property
    def smooth(self) -> bool:
        return all(p.smooth for p in self.parts)

    @property
    def gradient_lipschitz_K(self) -> Optional[float]:
        ks = [p.gradient_lipschitz_K for p in self.parts]
        if any(k is None for k in ks):
            return None
        return max(ks)

    def _blocks(self, xs: np.ndarray):
        xs = np.asarray(xs, dtype=float)
        if xs.size != self.n * self.dimension:
            raise ObjectiveError(
                f"stacked state has size {xs.size}, expected "
                f"{self.n * self.dimension}")
        return xs.reshape(self.n, self.dimension)

    def evaluate(self, xs: np.ndarray) -> float:
        blocks = self._blocks(xs)
        return float(sum(p(b) for p, b in zip(self.parts, blocks)))

    def subgradient(self, xs: np.ndarray) -> np.ndarray:
        blocks = self._blocks(xs)
        # Calls the raw per-part functions; a single finiteness check at the
        # end keeps this cheap inside integrator loops.
        out = np.concatenate([
            np.atleast_1d(np.asarray(p.subgradient_fn(b), dtype=float))
            for p, b in zip(self.parts, blocks)])
        if not np.all(np.isfinite(out)):
            raise ObjectiveError(f"non-finite stacked subgradient at {xs}")
        return out

    def centralized(self, x: np.ndarray) -> float:
        """f(x) = sum_i f^i(x) at a single shared point."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return float(sum(p(x) for p in self.parts))

    def centralized_subgradient(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return np.sum([p.subgradient(x) for p in self.parts], axis=0)


def make_objective(e: ex.Expression, K_hint: Optional[float] = None,
                   domain_box: Optional[Sequence[float]] = None,
                   label: str = "") -> ObjectiveFunction:
    """Turn a scalar expression into an objective with derivative access.

    Without a K hint, the Lipschitz constant of the gradient is estimated as
    the max of |f''| over a grid on ``domain_box`` (endpoints included); for
    nonsmooth or box-less expressions it is left unset.
    """
    deriv = ex.differentiate(e)
    smooth = ex.is_smooth(e)

    K = K_hint
    if K is None and smooth and domain_box is not None:
        lo, hi = float(domain_box[0]), float(domain_box[1])
        if not lo < hi:
            raise ObjectiveError(f"bad domain box [{lo}, {hi}]")
        second = ex.differentiate(deriv)
        grid = np.linspace(lo, hi, 4097)
        K = float(max(abs(ex.evaluate(second, float(t))) for t in grid))

    def eval_fn(x: np.ndarray) -> float:
        return ex.evaluate(e, float(x[0]))

    def subgradient_fn(x: np.ndarray) -> np.ndarray:
        return np.array([ex.evaluate(deriv, float(x[0]))])

    return ObjectiveFunction(
        dimension=1,
        eval_fn=eval_fn,
        subgradient_fn=subgradient_fn,
        gradient_lipschitz_K=K,
        smooth=smooth,
        label=label or "expr",
    )


def builtin_objective(name: str, *, k: float = 1.0, center: float = 0.0,
                      exponent: int = 2, a: float = 1.0, c: float = 0.0,
                      domain_box: Optional[Sequence[float]] = None
                      ) -> ObjectiveFunction:
    """Builtins: quadratic k(x-c)^2, abs |x-c|, power x^(2m), constant c,
    exp e^(ax).  Lipschitz constants are analytic (on the box where one is
    needed)."""
    if name == "quadratic":
        if k < 0:
            raise ObjectiveError("quadratic needs k >= 0 for convexity")
        return ObjectiveFunction(
            1,
            lambda x: k * (x[0] - center) ** 2,
            lambda x: np.array([2.0 * k * (x[0] - center)]),
            gradient_lipschitz_K=2.0 * k,
            smooth=True,
            label=f"quadratic(k={k}, center={center})",
        )
    if name == "abs":
        def sub_abs(x, center=center):
            v = x[0] - center
            return np.array([float(np.sign(v))])
        return ObjectiveFunction(
            1,
            lambda x: abs(x[0] - center),
            sub_abs,
            gradient_lipschitz_K=None,
            smooth=False,
            label=f"abs(center={center})",
        )
    if name == "power":
        if exponent < 2 or exponent % 2 != 0:
            raise ObjectiveError(
                f"power builtin needs an even exponent >= 2, got {exponent}")
        K = None
        if domain_box is not None:
            edge = max(abs(float(domain_box[0])), abs(float(domain_box[1])))
            K = exponent * (exponent - 1) * edge ** (exponent - 2)
        return ObjectiveFunction(
            1,
            lambda x: x[0] ** exponent,
            lambda x: np.array([float(exponent) * x[0] ** (exponent - 1)]),
            gradient_lipschitz_K=K,
            smooth=True,
            label=f"power({exponent})",
        )
    if name == "constant":
        return ObjectiveFunction(
            1,
            lambda x: c,
            lambda x: np.zeros(1),
            gradient_lipschitz_K=0.0,
            smooth=True,
            label=f"constant({c})",
        )
    if name == "exp":
        K = None
        if domain_box is not None:
            hi = max(a * float(domain_box[0]), a * float(domain_box[1]))
            K = a * a * math.exp(hi)
        return ObjectiveFunction(
            1,
            lambda x: math.exp(a * x[0]),
            lambda x: np.array([a * math.exp(a * x[0])]),
            gradient_lipschitz_K=K,
            smooth=True,
            label=f"exp(a={a})",
        )
    raise ObjectiveError(f"unknown builtin objective {name!r}")


def objective_from_config(entry: dict,
                          domain_box: Optional[Sequence[float]] = None
                          ) -> ObjectiveFunction:
    """Config entries: {"expr": "exp(x)"} or {"builtin": "quadratic", ...}."""
    if "expr" in entry:
        e = ex.parse_expression(entry["expr"])
        return make_objective(e, K_hint=entry.get("k_hint"),
                              domain_box=entry.get("box", domain_box),
                              label=entry["expr"])
    if "builtin" in entry:
        kwargs = {key: entry[key]
                  for key in ("k", "center", "exponent", "a", "c")
                  if key in entry}
        return builtin_objective(entry["builtin"],
                                 domain_box=entry.get("box", domain_box),
                                 **kwargs)
    raise ObjectiveError(f"objective entry {entry!r} has neither 'expr' "
                         "nor 'builtin'")


@dataclass(frozen=True)
class SampledCheckReport:
    ok: bool
    worst_violation: float
    samples: int
    witness: Optional[tuple] = None


def check_convexity(f: ObjectiveFunction, samples: int,
                    box: Sequence[float], seed: int = 0,
                    slack: float = 1e-9) -> SampledCheckReport:
    """Sampled first-order convexity check:
    f(x') - f(x) >= g(x)^T (x' - x) up to ``slack``."""
    rng = np.random.default_rng(seed)
    lo, hi = float(box[0]), float(box[1])
    worst = 0.0
    witness = None
    for _ in range(samples):
        x = rng.uniform(lo, hi, size=f.dimension)
        xp = rng.uniform(lo, hi, size=f.dimension)
        g = f.subgradient(x)
        violation = float(g @ (xp - x) - (f(xp) - f(x)))
        if violation > worst:
            worst = violation
            witness = (x.copy(), xp.copy())
    return SampledCheckReport(ok=worst <= slack, worst_violation=worst,
                             samples=samples, witness=witness)


def check_cocoercivity(f: ObjectiveFunction, samples: int,
                       box: Sequence[float], seed: int = 0,
                       slack: float = 1e-9) -> SampledCheckReport:
    """Sampled cocoercivity check for smooth f with constant K:
    (x - x')^T (g - g') >= (1/K) ||g - g'||^2 up to ``slack``."""
    if not f.smooth or not f.gradient_lipschitz_K:
        raise ObjectiveError("cocoercivity check needs a smooth objective "
                             "with a known positive K")
    K = f.gradient_lipschitz_K
    rng = np.random.default_rng(seed)
    lo, hi = float(box[0]), float(box[1])
    worst = 0.0
    witness = None
    for _ in range(samples):
        x = rng.uniform(lo, hi, size=f.dimension)
        xp = rng.uniform(lo, hi, size=f.dimension)
        g, gp = f.subgradient(x), f.subgradient(xp)
        violation = float((g - gp) @ (g - gp) / K - (x - xp) @ (g - gp))
        if violation > worst:
            worst = violation
            witness = (x.copy(), xp.copy())
    return SampledCheckReport(ok=worst <= slack, worst_violation=worst,
                             samples=samples, witness=witness)
