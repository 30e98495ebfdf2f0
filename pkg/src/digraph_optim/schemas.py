"""Pydantic request/response models shared by the HTTP service and the CLI.

These mirror the JSON wire formats: graphs as adjacency or edge lists,
objective entries as expression strings or builtins, and the experiment
config {graph, objectives, dynamics, initial, integrator, output}.
"""

from __future__ import annotations

from typing import List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field

from .graph import WeightedDigraph
from .objectives import NetworkObjective, objective_from_config


class GraphModel(BaseModel):
    n: int
    adjacency: Optional[List[List[float]]] = None
    edges: Optional[List[List[float]]] = None

    def to_digraph(self) -> WeightedDigraph:
        return WeightedDigraph.from_dict(self.model_dump(exclude_none=True))


class ObjectiveEntry(BaseModel):
    expr: Optional[str] = None
    builtin: Optional[str] = None
    k: Optional[float] = None
    center: Optional[float] = None
    exponent: Optional[int] = None
    a: Optional[float] = None
    c: Optional[float] = None
    k_hint: Optional[float] = None
    box: Optional[Tuple[float, float]] = None

    def to_dict(self) -> dict:
        return self.model_dump(exclude_none=True)


def build_network_objective(entries: List[ObjectiveEntry],
                            box: Optional[Tuple[float, float]]
                            ) -> NetworkObjective:
    parts = tuple(objective_from_config(e.to_dict(), domain_box=box)
                  for e in entries)
    return NetworkObjective(parts)


class DynamicsModel(BaseModel):
    variant: Literal["saddle_point", "alpha_directed"] = "saddle_point"
    alpha: Optional[Union[float, Literal["auto"]]] = None
    safety: float = 0.9


class InitialModel(BaseModel):
    x0: List[float]
    z0: List[float]

    def arrays(self) -> Tuple[np.ndarray, np.ndarray]:
        return np.asarray(self.x0, dtype=float), np.asarray(self.z0,
                                                            dtype=float)


class IntegratorModel(BaseModel):
    method: Optional[Literal["rk4", "euler"]] = None  # informational
    dt: float = 1e-3
    t_final: float = 40.0
    record_every: int = 10


class OutputModel(BaseModel):
    csv_path: Optional[str] = None
    summary_path: Optional[str] = None


class ExperimentConfigModel(BaseModel):
    graph: GraphModel
    objectives: List[ObjectiveEntry] = Field(default_factory=list)
    dynamics: DynamicsModel = Field(default_factory=DynamicsModel)
    initial: Optional[InitialModel] = None
    integrator: IntegratorModel = Field(default_factory=IntegratorModel)
    output: Optional[OutputModel] = None
    box: Tuple[float, float] = (-3.0, 3.0)
    seed: int = 0


class CriterionModel(BaseModel):
    passes: bool
    margin: float
    witness: Optional[Tuple[float, float]] = None


class CheckGraphRequest(BaseModel):
    graph: GraphModel
    balance_tol: float = 1e-6


class CheckGraphResponse(BaseModel):
    n: int
    strongly_connected: bool
    weight_balanced: bool
    max_imbalance: float
    eigvals: List[Tuple[float, float]]
    sym_eigvals: List[float]
    lambda_star_sym: float
    criterion: CriterionModel


class AnalyzeResponse(BaseModel):
    eigvals: List[Tuple[float, float]]
    criterion: CriterionModel
    lambda_star_sym: float


class SelectParamsRequest(BaseModel):
    graph: GraphModel
    objectives: List[ObjectiveEntry] = Field(default_factory=list)
    K: Optional[float] = None
    safety: float = 0.9
    box: Tuple[float, float] = (-3.0, 3.0)


class SelectParamsResponse(BaseModel):
    beta_star: float
    beta: float
    alpha: float
    h_at_beta: float
    lipschitz_K: float
    lambda_star_sym: float
    k_provenance: str


class SimulateResponse(BaseModel):
    summary: dict
    trajectory_csv: str
    plot_csv: str
    diverged: bool = False
    t_bad: Optional[float] = None


class ReproduceRequest(BaseModel):
    dt: Optional[float] = None
    t_final: Optional[float] = None
    record_every: Optional[int] = None


class ReproduceResponse(BaseModel):
    name: str
    report: dict
    simulation: Optional[SimulateResponse] = None
