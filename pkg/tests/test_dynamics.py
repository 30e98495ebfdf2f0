import math

import numpy as np
import pytest

from conftest import random_weight_balanced_digraph
from digraph_optim import dynamics as dyn
from digraph_optim.expressions import parse_expression
from digraph_optim.graph import WeightedDigraph, build_laplacian
from digraph_optim.objectives import (NetworkObjective, builtin_objective,
                                      make_objective)


def quadratic_pair():
    """Two quadratics centered at +-3 on a 2-node undirected graph."""
    g = WeightedDigraph(np.array([[0.0, 1.0], [1.0, 0.0]]))
    net = NetworkObjective((
        builtin_objective("quadratic", k=1.0, center=3.0),
        builtin_objective("quadratic", k=1.0, center=-3.0),
    ))
    return g, build_laplacian(g), net


def single_node_quadratic(k=1.0, center=0.0):
    g = WeightedDigraph(np.zeros((1, 1)))
    net = NetworkObjective((builtin_objective("quadratic", k=k,
                                              center=center),))
    return g, build_laplacian(g), net


class TestDynamicsSpec:
    def test_unknown_variant(self):
        _, bundle, net = quadratic_pair()
        with pytest.raises(dyn.DynamicsError):
            dyn.DynamicsSpec("gradient_flow", bundle, net)

    def test_size_mismatch(self):
        _, bundle, _ = quadratic_pair()
        net1 = NetworkObjective((builtin_objective("quadratic"),))
        with pytest.raises(dyn.DynamicsError):
            dyn.DynamicsSpec(dyn.SADDLE_POINT, bundle, net1)

    def test_directed_needs_alpha(self):
        _, bundle, net = quadratic_pair()
        with pytest.raises(dyn.DynamicsError):
            dyn.DynamicsSpec(dyn.ALPHA_DIRECTED, bundle, net)

    def test_directed_rejects_nonsmooth(self):
        g = WeightedDigraph(np.array([[0.0, 1.0], [1.0, 0.0]]))
        bundle = build_laplacian(g)
        net = NetworkObjective((builtin_objective("abs"),
                                builtin_objective("abs")))
        with pytest.raises(dyn.DynamicsError):
            dyn.DynamicsSpec(dyn.ALPHA_DIRECTED, bundle, net, alpha=3.0)

    def test_beta_must_be_companion_of_alpha(self):
        _, bundle, net = quadratic_pair()
        # alpha = 3 pairs with the roots of b^2 - 3b + 2: beta in {1, 2}.
        dyn.DynamicsSpec(dyn.ALPHA_DIRECTED, bundle, net, alpha=3.0, beta=1.0)
        dyn.DynamicsSpec(dyn.ALPHA_DIRECTED, bundle, net, alpha=3.0, beta=2.0)
        with pytest.raises(dyn.DynamicsError):
            dyn.DynamicsSpec(dyn.ALPHA_DIRECTED, bundle, net, alpha=3.0,
                             beta=0.5)


class TestRhs:
    def test_saddle_point_closed_form(self):
        _, bundle, net = quadratic_pair()
        spec = dyn.DynamicsSpec(dyn.SADDLE_POINT, bundle, net)
        s = dyn.SimState(0.0, np.array([1.0, -1.0]), np.zeros(2))
        dx, dz = dyn.rhs(spec, s)
        # Lx = (2, -2), Lz = 0, g = (2(x1-3), 2(x2+3)) = (-4, 4)
        np.testing.assert_allclose(dz, [2.0, -2.0])
        np.testing.assert_allclose(dx, [2.0, -2.0])

    def test_alpha_scales_only_the_x_feedback(self):
        _, bundle, net = quadratic_pair()
        s = dyn.SimState(0.0, np.array([1.0, -1.0]), np.array([0.0, 0.0]))
        spec1 = dyn.DynamicsSpec(dyn.ALPHA_DIRECTED, bundle, net, alpha=1.0)
        spec5 = dyn.DynamicsSpec(dyn.ALPHA_DIRECTED, bundle, net, alpha=5.0)
        dx1, dz1 = dyn.rhs(spec1, s)
        dx5, dz5 = dyn.rhs(spec5, s)
        Lx = bundle.lifted @ s.x
        np.testing.assert_allclose(dx5 - dx1, -4.0 * Lx)
        np.testing.assert_allclose(dz1, dz5)

    def test_agreement_with_zero_gradient_is_stationary(self):
        _, bundle, net = quadratic_pair()
        spec = dyn.DynamicsSpec(dyn.SADDLE_POINT, bundle, net)
        # x* = (0, 0), z* = (3, -3) solves L z* = -g(x*) = (6, -6)
        s = dyn.SimState(0.0, np.zeros(2), np.array([3.0, -3.0]))
        dx, dz = dyn.rhs(spec, s)
        np.testing.assert_allclose(dx, 0.0, atol=1e-14)
        np.testing.assert_allclose(dz, 0.0, atol=1e-14)


class TestSaddleFunction:
    def test_saddle_inequalities_at_equilibrium(self):
        _, bundle, net = quadratic_pair()
        spec = dyn.DynamicsSpec(dyn.SADDLE_POINT, bundle, net)
        x_star = np.zeros(2)
        z_star = np.array([3.0, -3.0])
        F_star = dyn.saddle_function_F(spec, x_star, z_star)
        rng = np.random.default_rng(0)
        for _ in range(50):
            x = rng.normal(size=2)
            z = rng.normal(size=2)
            # flat in z along any direction (agreement x, balanced graph)
            assert dyn.saddle_function_F(spec, x_star, z) == pytest.approx(
                F_star, abs=1e-12)
            # convex in x with minimum at x_star
            assert dyn.saddle_function_F(spec, x, z_star) >= F_star - 1e-12


class TestLyapunov:
    def test_saddle_point_distance_form(self):
        _, bundle, net = quadratic_pair()
        spec = dyn.DynamicsSpec(dyn.SADDLE_POINT, bundle, net)
        eq = (np.zeros(2), np.array([3.0, -3.0]))
        s = dyn.SimState(0.0, np.array([1.0, 0.0]), np.array([3.0, -2.0]))
        # (1/2)(1) + (1/2)(1) = 1
        assert dyn.lyapunov_value(spec, s, eq) == pytest.approx(1.0)

    def test_directed_uses_sheared_coordinate(self):
        _, bundle, net = quadratic_pair()
        spec = dyn.DynamicsSpec(dyn.ALPHA_DIRECTED, bundle, net, alpha=3.0,
                                beta=1.0)
        eq = (np.zeros(2), np.zeros(2))
        s = dyn.SimState(0.0, np.array([1.0, 0.0]), np.array([-1.0, 0.0]))
        # y = beta*x + z = 0, so only the x-term contributes.
        assert dyn.lyapunov_value(spec, s, eq) == pytest.approx(0.5)

    def test_directed_requires_beta(self):
        _, bundle, net = quadratic_pair()
        spec = dyn.DynamicsSpec(dyn.ALPHA_DIRECTED, bundle, net, alpha=3.0)
        s = dyn.SimState(0.0, np.zeros(2), np.zeros(2))
        with pytest.raises(dyn.DynamicsError):
            dyn.lyapunov_value(spec, s, (np.zeros(2), np.zeros(2)))


class TestDtMax:
    def test_formula(self):
        _, bundle, net = quadratic_pair()
        spec = dyn.DynamicsSpec(dyn.ALPHA_DIRECTED, bundle, net, alpha=3.0)
        L2 = np.linalg.norm(bundle.laplacian, 2)
        assert dyn.dt_max(spec) == pytest.approx(0.5 / (3 * L2 + 2.0 + L2))

    def test_integrate_rejects_oversized_step(self):
        _, bundle, net = quadratic_pair()
        spec = dyn.DynamicsSpec(dyn.SADDLE_POINT, bundle, net)
        s0 = dyn.SimState(0.0, np.ones(2), np.zeros(2))
        with pytest.raises(dyn.DynamicsError):
            dyn.integrate(spec, s0, dt=10 * dyn.dt_max(spec), t_final=1.0)


class TestIntegrate:
    def test_rk4_matches_exact_exponential(self):
        # Isolated node, dx = -2k(x - c): x(t) = c + (x0 - c) e^{-2kt}.
        _, bundle, net = single_node_quadratic(k=1.0, center=2.0)
        spec = dyn.DynamicsSpec(dyn.SADDLE_POINT, bundle, net)
        s0 = dyn.SimState(0.0, np.array([5.0]), np.array([0.0]))
        traj = dyn.integrate(spec, s0, dt=0.01, t_final=2.0)
        exact = 2.0 + 3.0 * math.exp(-4.0)
        assert traj.final.state.x[0] == pytest.approx(exact, abs=1e-9)
        assert traj.metadata["integrator"] == "rk4"

    def test_euler_first_order_accuracy(self):
        g = WeightedDigraph(np.zeros((1, 1)))
        bundle = build_laplacian(g)
        net = NetworkObjective((builtin_objective("abs", center=0.0),))
        spec = dyn.DynamicsSpec(dyn.SADDLE_POINT, bundle, net)
        # dx = -sign(x): reaches 0 at t = x0 and sticks there.
        s0 = dyn.SimState(0.0, np.array([1.0]), np.array([0.0]))
        traj = dyn.integrate(spec, s0, dt=1e-3, t_final=2.0)
        assert abs(traj.final.state.x[0]) <= 1e-3 + 1e-12
        assert traj.metadata["integrator"] == "euler"

    def test_abs_flow_fixed_at_kink(self):
        g = WeightedDigraph(np.zeros((1, 1)))
        bundle = build_laplacian(g)
        net = NetworkObjective((builtin_objective("abs", center=0.0),))
        spec = dyn.DynamicsSpec(dyn.SADDLE_POINT, bundle, net)
        s0 = dyn.SimState(0.0, np.array([0.0]), np.array([0.0]))
        traj = dyn.integrate(spec, s0, dt=1e-2, t_final=1.0)
        for s in traj.samples:
            assert s.state.x[0] == 0.0

    def test_z_sum_is_conserved(self):
        rng = np.random.default_rng(7)
        g = random_weight_balanced_digraph(5, rng)
        bundle = build_laplacian(g)
        net = NetworkObjective(tuple(
            builtin_objective("quadratic", k=1.0, center=float(c))
            for c in rng.normal(size=5)))
        spec = dyn.DynamicsSpec(dyn.ALPHA_DIRECTED, bundle, net, alpha=3.0)
        z0 = rng.normal(size=5)
        s0 = dyn.SimState(0.0, rng.normal(size=5), z0)
        traj = dyn.integrate(spec, s0, dt=1e-3, t_final=2.0, record_every=100)
        for s in traj.samples:
            assert s.state.z.sum() == pytest.approx(z0.sum(), abs=1e-10)

    def test_recording_schedule(self):
        _, bundle, net = single_node_quadratic()
        spec = dyn.DynamicsSpec(dyn.SADDLE_POINT, bundle, net)
        s0 = dyn.SimState(0.0, np.array([1.0]), np.array([0.0]))
        traj = dyn.integrate(spec, s0, dt=0.1, t_final=1.0, record_every=3)
        # steps 0,3,6,9 plus the final step 10
        np.testing.assert_allclose(traj.times(), [0.0, 0.3, 0.6, 0.9, 1.0])

    def test_lyapunov_column_recorded(self):
        _, bundle, net = quadratic_pair()
        spec = dyn.DynamicsSpec(dyn.SADDLE_POINT, bundle, net)
        eq = (np.zeros(2), np.array([3.0, -3.0]))
        s0 = dyn.SimState(0.0, np.array([1.0, 2.0]), np.zeros(2))
        traj = dyn.integrate(spec, s0, dt=1e-2, t_final=5.0, record_every=10,
                             equilibrium=eq)
        vs = [s.lyapunov for s in traj.samples]
        assert all(np.isfinite(vs))
        # smooth RK4 run: V decreases along recorded samples
        assert all(b <= a + 1e-10 for a, b in zip(vs, vs[1:]))
        assert vs[-1] < 0.01 * vs[0]

    def test_lyapunov_nan_without_equilibrium(self):
        _, bundle, net = single_node_quadratic()
        spec = dyn.DynamicsSpec(dyn.SADDLE_POINT, bundle, net)
        s0 = dyn.SimState(0.0, np.array([1.0]), np.array([0.0]))
        traj = dyn.integrate(spec, s0, dt=0.1, t_final=0.5)
        assert all(math.isnan(s.lyapunov) for s in traj.samples)

    def test_divergence_raises_with_time(self):
        # Understated curvature hint lets a stiff quadratic pass the dt
        # check, then blow up under RK4.
        g = WeightedDigraph(np.zeros((1, 1)))
        bundle = build_laplacian(g)
        net = NetworkObjective((make_objective(
            parse_expression("1000*x^2"), K_hint=0.1),))
        spec = dyn.DynamicsSpec(dyn.SADDLE_POINT, bundle, net)
        s0 = dyn.SimState(0.0, np.array([1.0]), np.array([0.0]))
        with pytest.raises(dyn.DivergenceError) as err:
            dyn.integrate(spec, s0, dt=1.0, t_final=100.0)
        assert 0.0 < err.value.t_bad <= 100.0

    def test_rejects_bad_arguments(self):
        _, bundle, net = single_node_quadratic()
        spec = dyn.DynamicsSpec(dyn.SADDLE_POINT, bundle, net)
        s0 = dyn.SimState(0.0, np.array([1.0]), np.array([0.0]))
        with pytest.raises(dyn.DynamicsError):
            dyn.integrate(spec, s0, dt=-0.1, t_final=1.0)
        with pytest.raises(dyn.DynamicsError):
            dyn.integrate(spec, s0, dt=0.1, t_final=0.0)
        with pytest.raises(dyn.DynamicsError):
            dyn.integrate(spec, s0, dt=0.1, t_final=1.0, record_every=0)


class TestCsvExport:
    def make_traj(self):
        _, bundle, net = quadratic_pair()
        spec = dyn.DynamicsSpec(dyn.SADDLE_POINT, bundle, net)
        s0 = dyn.SimState(0.0, np.array([1.0, 2.0]), np.zeros(2))
        return dyn.integrate(spec, s0, dt=1e-2, t_final=0.1, record_every=2)

    def test_header_and_row_count(self):
        text = dyn.trajectory_to_csv(self.make_traj())
        lines = text.strip().split("\n")
        assert lines[0] == "t,x_0,x_1,z_0,z_1,V,Lx_norm,rhs_norm"
        assert len(lines) == 1 + 6  # steps 0,2,4,6,8,10

    def test_byte_identical_reruns(self):
        assert (dyn.trajectory_to_csv(self.make_traj())
                == dyn.trajectory_to_csv(self.make_traj()))

    def test_round_trip_precision(self):
        traj = self.make_traj()
        text = dyn.trajectory_to_csv(traj)
        rows = np.genfromtxt(text.splitlines(), delimiter=",",
                             skip_header=1)
        np.testing.assert_array_equal(rows[-1, 1:3], traj.final.state.x)

    def test_plot_csv_series(self):
        text = dyn.trajectory_to_plot_csv(self.make_traj())
        lines = text.strip().split("\n")
        assert lines[0] == "series,t,value"
        series = {line.split(",")[0] for line in lines[1:]}
        assert series == {"x_0", "x_1", "z_0", "z_1", "V"}
