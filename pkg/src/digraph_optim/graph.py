"""Weighted digraphs, their Laplacians, and the spectral quantities the
rest of the library consumes.

Conventions: adjacency entry ``weights[i, j]`` is the weight of the edge
from vertex i to vertex j, i.e. row i holds the out-weights of agent i,
and the Laplacian is ``L = D_out - A``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

# Relative threshold for classifying an eigenvalue as "nonzero".
EIG_ZERO_TOL = 1e-9

DEFAULT_BALANCE_TOL = 1e-6


class GraphError(ValueError):
    """Invalid graph data or a failed spectral computation."""


@dataclass(frozen=True)
class WeightedDigraph:
    """An n-agent network given by a nonnegative weight matrix with zero diagonal."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise GraphError(f"weights must be square, got shape {w.shape}")
        if w.shape[0] < 1:
            raise GraphError("graph needs at least one vertex")
        if not np.all(np.isfinite(w)):
            raise GraphError("weights must be finite")
        if np.any(w < 0):
            raise GraphError("weights must be nonnegative")
        if np.any(np.diag(w) != 0):
            raise GraphError("diagonal weights (self-loops) are not allowed")
        w = w.copy()
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    @classmethod
    def from_dict(cls, data: dict) -> "WeightedDigraph":
        """Build from the JSON wire format.

        Accepts either ``{"n": int, "adjacency": [[...]]}`` (row-major n x n)
        or ``{"n": int, "edges": [[i, j, w], ...]}`` with 0-based indices.
        """
        if "n" not in data:
            raise GraphError("graph dict needs an 'n' field")
        n = int(data["n"])
        if "adjacency" in data:
            adj = np.asarray(data["adjacency"], dtype=float)
            if adj.shape != (n, n):
                raise GraphError(
                    f"adjacency shape {adj.shape} does not match n={n}")
            return cls(adj)
        if "edges" in data:
            adj = np.zeros((n, n))
            for entry in data["edges"]:
                if len(entry) != 3:
                    raise GraphError(f"edge entry {entry!r} is not [i, j, w]")
                i, j, w = int(entry[0]), int(entry[1]), float(entry[2])
                if not (0 <= i < n and 0 <= j < n):
                    raise GraphError(f"edge ({i}, {j}) out of range for n={n}")
                adj[i, j] = w
            return cls(adj)
        raise GraphError("graph dict needs 'adjacency' or 'edges'")


@dataclass(frozen=True)
class BalanceReport:
    balanced: bool
    max_imbalance: float


@dataclass(frozen=True)
class LaplacianBundle:
    """Laplacian of a digraph together with its Kronecker lift and spectra.

    ``lambda_star_sym`` is the nonzero eigenvalue of L + L^T with smallest
    absolute value (the connectivity-like quantity entering the design
    function for the directed dynamics).
    """

    laplacian: np.ndarray
    out_degree: np.ndarray
    dimension_d: int
    lifted: np.ndarray
    eigvals: np.ndarray
    sym_eigvals: np.ndarray
    lambda_star_sym: float
    graph: WeightedDigraph = field(repr=False)

    @property
    def n(self) -> int:
        return self.laplacian.shape[0]


def build_laplacian(g: WeightedDigraph, d: int = 1) -> LaplacianBundle:
    """Compute L = D_out - A, its lift L (x) I_d, and both spectra."""
    if d < 1:
        raise GraphError(f"state dimension d must be positive, got {d}")
    A = g.weights
    out_degree = A.sum(axis=1)
    L = np.diag(out_degree) - A
    lifted = np.kron(L, np.eye(d))
    try:
        eigvals = np.linalg.eigvals(L)
        sym_eigvals = np.linalg.eigvalsh(L + L.T)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - rare
        raise GraphError(f"eigensolver failed to converge: {exc}") from exc
    scale = max(np.linalg.norm(L + L.T, 2), 1.0)
    nonzero = sym_eigvals[np.abs(sym_eigvals) > EIG_ZERO_TOL * scale]
    lambda_star = float(np.min(np.abs(nonzero))) if nonzero.size else 0.0
    for arr in (L, out_degree, lifted, eigvals, sym_eigvals):
        arr.setflags(write=False)
    return LaplacianBundle(
        laplacian=L,
        out_degree=out_degree,
        dimension_d=d,
        lifted=lifted,
        eigvals=eigvals,
        sym_eigvals=sym_eigvals,
        lambda_star_sym=lambda_star,
        graph=g,
    )


def nonzero_eigenvalues(bundle: LaplacianBundle) -> np.ndarray:
    """Eigenvalues of L with |lambda| above the relative zero threshold."""
    scale = max(np.linalg.norm(bundle.laplacian, 2), 1.0)
    ev = bundle.eigvals
    return ev[np.abs(ev) > EIG_ZERO_TOL * scale]


def is_weight_balanced(g: WeightedDigraph,
                       tol: float = DEFAULT_BALANCE_TOL) -> BalanceReport:
    """Check out-degree == in-degree per vertex, reporting the worst gap."""
    out_deg = g.weights.sum(axis=1)
    in_deg = g.weights.sum(axis=0)
    imbalance = float(np.max(np.abs(out_deg - in_deg)))
    return BalanceReport(balanced=imbalance <= tol, max_imbalance=imbalance)


def is_strongly_connected(g: WeightedDigraph) -> bool:
    """True iff every ordered vertex pair is joined by a positive-weight path."""
    if g.n == 1:
        return True
    adj = sp.csr_matrix((g.weights > 0).astype(int))
    n_comp, _ = connected_components(adj, directed=True, connection="strong")
    return n_comp == 1
