import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from digraph_optim.analysis import (MIN_ALPHA, AnalysisError,
                                    check_necessary_condition,
                                    companion_beta, h_function,
                                    select_parameters)
from digraph_optim.graph import WeightedDigraph, build_laplacian


class TestNecessaryCondition:
    def test_undirected_passes_with_fiedler_margin(self, two_node_graph):
        verdict = check_necessary_condition(build_laplacian(two_node_graph))
        assert verdict.passes
        # Real spectrum: margin is the smallest nonzero eigenvalue.
        assert verdict.worst_margin == pytest.approx(2.0)
        assert verdict.witness is None

    def test_counterexample_fails_with_paper_margin(
            self, counterexample_bundle):
        verdict = check_necessary_condition(counterexample_bundle, tol=1e-3)
        assert not verdict.passes
        # sqrt(3)|Im| - Re = 0.0171 at the witness pair, to print precision.
        assert -verdict.worst_margin == pytest.approx(0.0171, abs=1e-3)
        assert verdict.witness == pytest.approx(0.8833 + 0.5197j, abs=1e-3)

    def test_directed_3_cycle_is_boundary_case(self, directed_3_cycle):
        verdict = check_necessary_condition(build_laplacian(directed_3_cycle),
                                            tol=1e-9)
        # Re = 1.5 and sqrt(3)|Im| = 1.5 exactly.
        assert abs(verdict.worst_margin) < 1e-12
        assert verdict.passes

    @settings(max_examples=20, deadline=None)
    @given(scale=st.floats(0.01, 100.0))
    def test_verdict_invariant_under_weight_scaling(self, scale):
        from digraph_optim.sim import counterexample_graph
        g = counterexample_graph()
        base = check_necessary_condition(build_laplacian(g))
        scaled_bundle = build_laplacian(
            WeightedDigraph(g.weights * scale))
        scaled = check_necessary_condition(scaled_bundle)
        assert base.passes == scaled.passes


class TestHFunction:
    def test_small_r_linear_asymptotics(self):
        # h(r) = -(1/2) Lambda* r + O(r^2)
        r = 1e-4
        assert h_function(r, 1.0, 1.0) < 0
        assert h_function(r, 1.0, 1.0) == pytest.approx(-0.5 * r, rel=1e-2)

    def test_large_r_limit_is_K(self):
        assert h_function(1e3, 1.0, 1.0) == pytest.approx(1.0, abs=1e-3)

    def test_rejects_nonpositive_r(self):
        with pytest.raises(AnalysisError):
            h_function(0.0, 1.0, 1.0)

    def test_continuous_on_grid(self):
        rs = np.logspace(-6, 3, 400)
        vals = [h_function(float(r), 2.0, 3.0) for r in rs]
        assert all(np.isfinite(vals))


def synthetic_bundle(lambda_star: float):
    """2-node undirected graph scaled so lambda_star_sym matches."""
    w = lambda_star / 4.0
    return build_laplacian(WeightedDigraph(np.array([[0.0, w], [w, 0.0]])))


class TestSelectParameters:
    def test_bisection_root_and_postconditions(self):
        bundle = synthetic_bundle(1.0)
        sel = select_parameters(bundle, K=1.0, safety=0.5)
        assert abs(h_function(sel.beta_star, 1.0, 1.0)) <= 1e-10
        assert sel.beta == pytest.approx(0.5 * sel.beta_star)
        assert sel.h_at_beta < 0
        assert sel.alpha >= MIN_ALPHA
        assert sel.alpha == pytest.approx((sel.beta**2 + 2) / sel.beta)

    def test_tiny_K_gives_large_beta_star(self):
        bundle = synthetic_bundle(1.0)
        sel = select_parameters(bundle, K=1e-9)
        assert sel.beta_star > 100.0
        assert sel.alpha >= MIN_ALPHA

    def test_rejects_nonpositive_K(self):
        bundle = synthetic_bundle(1.0)
        with pytest.raises(AnalysisError):
            select_parameters(bundle, K=0.0)

    def test_rejects_bad_safety(self):
        bundle = synthetic_bundle(1.0)
        with pytest.raises(AnalysisError):
            select_parameters(bundle, K=1.0, safety=1.5)

    def test_rejects_unbalanced_graph(self):
        g = WeightedDigraph(np.array([[0.0, 1.0], [0.0, 0.0]]))
        bundle = build_laplacian(g)
        with pytest.raises(AnalysisError):
            select_parameters(bundle, K=1.0)

    def test_alpha_3_admissible_on_counterexample_for_small_K(
            self, counterexample_bundle):
        # alpha = 3 corresponds to beta = 1; it is admissible whenever
        # beta* > 1, which holds for a small enough effective K.
        K = 0.4
        sel = select_parameters(counterexample_bundle, K=K)
        assert sel.beta_star > 1.0
        assert h_function(1.0, counterexample_bundle.lambda_star_sym, K) < 0
        safety = 1.0 / sel.beta_star
        sel3 = select_parameters(counterexample_bundle, K=K, safety=safety)
        assert sel3.alpha == pytest.approx(3.0, rel=1e-6)


@settings(max_examples=50, deadline=None)
@given(beta=st.floats(1e-3, 1e3))
def test_alpha_lower_bound_over_beta_grid(beta):
    alpha = (beta**2 + 2.0) / beta
    assert alpha >= MIN_ALPHA - 1e-12


@settings(max_examples=50, deadline=None)
@given(alpha=st.floats(2.0 * math.sqrt(2.0) + 1e-9, 50.0))
def test_companion_beta_solves_quadratic(alpha):
    beta = companion_beta(alpha)
    assert beta > 0
    assert beta**2 - alpha * beta + 2.0 == pytest.approx(0.0, abs=1e-9)


def test_companion_beta_rejects_small_alpha():
    with pytest.raises(AnalysisError):
        companion_beta(2.0)
