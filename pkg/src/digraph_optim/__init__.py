"""Simulator for continuous-time distributed convex optimization over
strongly connected, weight-balanced digraphs."""

from .analysis import (CriterionVerdict, ParameterSelection, companion_beta,
                       check_necessary_condition, h_function,
                       select_parameters)
from .dynamics import (DynamicsSpec, SimState, Trajectory, integrate,
                       lyapunov_value, rhs, saddle_function_F)
from .graph import (LaplacianBundle, WeightedDigraph, build_laplacian,
                    is_strongly_connected, is_weight_balanced)
from .objectives import (NetworkObjective, ObjectiveFunction,
                         builtin_objective, make_objective,
                         objective_from_config)
from .sim import (ExperimentResult, IntegratorConfig, centralized_oracle,
                  certify_saddle_point, counterexample_graph,
                  counterexample_suite, run_experiment)

__version__ = "0.1.0"
