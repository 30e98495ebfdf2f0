"""FastAPI service exposing graph analysis, parameter selection, and
simulation over HTTP.  The CLI is a thin client of this app; it can also be
served standalone with uvicorn."""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from . import dynamics as dyn
from . import sim
from .analysis import (AnalysisError, check_necessary_condition,
                       select_parameters)
from .dynamics import DivergenceError, DynamicsError
from .graph import (GraphError, build_laplacian, is_strongly_connected,
                    is_weight_balanced)
from .objectives import ObjectiveError
from .schemas import (AnalyzeResponse, CheckGraphRequest, CheckGraphResponse,
                      CriterionModel, ExperimentConfigModel, ReproduceRequest,
                      ReproduceResponse, SelectParamsRequest,
                      SelectParamsResponse, SimulateResponse,
                      build_network_objective)

app = FastAPI(
    title="digraph-optim",
    description="Continuous-time distributed convex optimization over "
                "weight-balanced digraphs: spectral criteria, design "
                "parameter selection, and trajectory simulation.",
)

_INPUT_ERRORS = (GraphError, AnalysisError, ObjectiveError, DynamicsError,
                 sim.SimError)


def _criterion_model(verdict) -> CriterionModel:
    witness = None
    if verdict.witness is not None:
        witness = (verdict.witness.real, verdict.witness.imag)
    return CriterionModel(passes=verdict.passes,
                          margin=verdict.worst_margin,
                          witness=witness)


@app.get("/health")
def health() -> dict:
    return {"status": "ok"}


@app.post("/graph/check", response_model=CheckGraphResponse)
def check_graph(req: CheckGraphRequest) -> CheckGraphResponse:
    try:
        g = req.graph.to_digraph()
        bundle = build_laplacian(g)
        balance = is_weight_balanced(g, tol=req.balance_tol)
        verdict = check_necessary_condition(bundle)
        connected = is_strongly_connected(g)
    except _INPUT_ERRORS as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    return CheckGraphResponse(
        n=g.n,
        strongly_connected=connected,
        weight_balanced=balance.balanced,
        max_imbalance=balance.max_imbalance,
        eigvals=[(v.real, v.imag) for v in bundle.eigvals],
        sym_eigvals=[float(v) for v in bundle.sym_eigvals],
        lambda_star_sym=bundle.lambda_star_sym,
        criterion=_criterion_model(verdict),
    )


@app.post("/analyze", response_model=AnalyzeResponse)
def analyze(req: CheckGraphRequest) -> AnalyzeResponse:
    try:
        bundle = build_laplacian(req.graph.to_digraph())
        verdict = check_necessary_condition(bundle)
    except _INPUT_ERRORS as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    return AnalyzeResponse(
        eigvals=[(v.real, v.imag) for v in bundle.eigvals],
        criterion=_criterion_model(verdict),
        lambda_star_sym=bundle.lambda_star_sym,
    )


@app.post("/select-params", response_model=SelectParamsResponse)
def select_params(req: SelectParamsRequest) -> SelectParamsResponse:
    try:
        bundle = build_laplacian(req.graph.to_digraph())
        if req.K is not None:
            if req.K <= 0:
                raise AnalysisError(
                    "K must be positive; for zero objectives any "
                    "alpha >= 2*sqrt(2) stabilizes the consensus dynamics")
            K = req.K
            provenance = "hint"
        else:
            if not req.objectives:
                raise AnalysisError("need either K or objectives to "
                                    "estimate it from")
            objective = build_network_objective(req.objectives, req.box)
            K = objective.gradient_lipschitz_K
            if K is None:
                raise AnalysisError(
                    "objectives carry no Lipschitz constant; give k_hint "
                    "values or a domain box")
            if K <= 0:
                raise AnalysisError(
                    "estimated K is zero; for zero objectives any "
                    "alpha >= 2*sqrt(2) stabilizes the consensus dynamics")
            provenance = f"estimated on box {list(req.box)}"
        selection = select_parameters(bundle, K, safety=req.safety)
    except _INPUT_ERRORS as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    return SelectParamsResponse(
        beta_star=selection.beta_star,
        beta=selection.beta,
        alpha=selection.alpha,
        h_at_beta=selection.h_at_beta,
        lipschitz_K=selection.lipschitz_K,
        lambda_star_sym=selection.lambda_star_sym,
        k_provenance=provenance,
    )


def _simulate(config: ExperimentConfigModel) -> SimulateResponse:
    g = config.graph.to_digraph()
    if config.objectives:
        objective = build_network_objective(config.objectives, config.box)
    else:
        objective = sim.zero_objective(g.n)
    if config.initial is None:
        raise sim.SimError("simulate needs an 'initial' section with x0, z0")
    x0, z0 = config.initial.arrays()
    integrator = sim.IntegratorConfig(
        dt=config.integrator.dt,
        t_final=config.integrator.t_final,
        record_every=config.integrator.record_every,
    )
    try:
        result = sim.run_experiment(
            g, objective, config.dynamics.variant,
            x0=x0, z0=z0,
            alpha=config.dynamics.alpha,
            safety=config.dynamics.safety,
            integrator=integrator,
            box=config.box,
            seed=config.seed,
        )
    except DivergenceError as exc:
        return SimulateResponse(
            summary={"converged": False, "diverged": True,
                     "t_bad": exc.t_bad},
            trajectory_csv="", plot_csv="",
            diverged=True, t_bad=exc.t_bad,
        )
    summary = result.summary()
    summary["certificate"] = {
        "agreement_residual": result.certificate.agreement_residual,
        "stationarity_residual": result.certificate.stationarity_residual,
        "optimality_residual": result.certificate.optimality_residual,
        "ok": result.certificate.ok,
    }
    summary["non_convergent"] = sim.is_non_convergent(
        result.trajectory, integrator.t_final)
    return SimulateResponse(
        summary=summary,
        trajectory_csv=dyn.trajectory_to_csv(result.trajectory),
        plot_csv=dyn.trajectory_to_plot_csv(result.trajectory),
    )


@app.post("/simulate", response_model=SimulateResponse)
def simulate(config: ExperimentConfigModel) -> SimulateResponse:
    try:
        return _simulate(config)
    except _INPUT_ERRORS as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc


def _benchmark_config(req: ReproduceRequest) -> ExperimentConfigModel:
    n = 5
    return ExperimentConfigModel.model_validate({
        "graph": {"n": n,
                  "adjacency": sim.COUNTEREXAMPLE_ADJACENCY.tolist()},
        "objectives": sim.benchmark_objective_configs(),
        "dynamics": {"variant": "alpha_directed", "alpha": 3.0},
        "initial": {"x0": [1.0, 2.0, 0.3, 1.0, 1.0], "z0": [1.0] * n},
        "integrator": {"dt": req.dt or 1e-3,
                       "t_final": req.t_final or 40.0,
                       "record_every": req.record_every or 10},
        "box": [-3.0, 3.0],
    })


@app.post("/reproduce/{name}", response_model=ReproduceResponse)
def reproduce(name: str, req: ReproduceRequest = None) -> ReproduceResponse:
    req = req or ReproduceRequest()
    try:
        if name == "example-5-2":
            g = sim.counterexample_graph()
            integrator = sim.IntegratorConfig(
                dt=req.dt or 1e-3,
                t_final=req.t_final or 100.0,
                record_every=req.record_every or 100,
            )
            report = sim.counterexample_suite(g, integrator=integrator)
            bundle = build_laplacian(g)
            verdict = check_necessary_condition(bundle)
            out = report.summary()
            out["criterion"] = _criterion_model(verdict).model_dump()
            out["eigvals"] = [(v.real, v.imag) for v in bundle.eigvals]
            return ReproduceResponse(name=name, report=out)
        if name == "figure-1":
            config = _benchmark_config(req)
            response = _simulate(config)
            return ReproduceResponse(name=name,
                                     report=response.summary,
                                     simulation=response)
        raise sim.SimError(
            f"unknown reproduction {name!r}; available: "
            "'example-5-2', 'figure-1'")
    except _INPUT_ERRORS as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
