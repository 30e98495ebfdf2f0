"""Command-line client for the digraph-optim service.

All computation happens behind the HTTP API: by default the commands talk
to the FastAPI app in-process, and --server redirects them at a running
instance.  Outputs (trajectory CSV, plot CSV, summary JSON) are written
under --out, overridable by the DIGRAPH_OPTIM_OUT environment variable.

Exit codes: 0 success, 2 malformed input, 3 runtime divergence.  Analysis
verdicts (criterion fails, run did not converge) are data, not errors.
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path
from typing import Optional

import click
import httpx

EXIT_INPUT_ERROR = 2
EXIT_DIVERGENCE = 3


def make_client(server: Optional[str]):
    if server:
        return httpx.Client(base_url=server, timeout=600.0)
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DeprecationWarning)
        from starlette.testclient import TestClient
    from .service import app
    return TestClient(app)


def load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        click.echo(f"error: cannot read config {path}: {exc}", err=True)
        sys.exit(EXIT_INPUT_ERROR)


def post(client, url: str, payload: dict) -> dict:
    resp = client.post(url, json=payload)
    if resp.status_code >= 400:
        try:
            detail = resp.json().get("detail", resp.text)
        except ValueError:
            detail = resp.text
        click.echo(f"error: {detail}", err=True)
        sys.exit(EXIT_INPUT_ERROR)
    return resp.json()


def resolve_out(out: str) -> Path:
    out = os.environ.get("DIGRAPH_OPTIM_OUT", out)
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def write_outputs(data: dict, out_dir: Path, config: dict,
                  prefix: str = "") -> None:
    output_cfg = (config or {}).get("output") or {}
    csv_path = output_cfg.get("csv_path") or str(
        out_dir / f"{prefix}trajectory.csv")
    summary_path = output_cfg.get("summary_path") or str(
        out_dir / f"{prefix}summary.json")
    plot_path = str(out_dir / f"{prefix}plot.csv")
    if data.get("trajectory_csv"):
        Path(csv_path).write_text(data["trajectory_csv"])
    if data.get("plot_csv"):
        Path(plot_path).write_text(data["plot_csv"])
    Path(summary_path).write_text(
        json.dumps(data["summary"], indent=2, sort_keys=True) + "\n")


def apply_overrides(config: dict, dt: Optional[float],
                    t_final: Optional[float], seed: Optional[int]) -> dict:
    if dt is not None or t_final is not None:
        integ = dict(config.get("integrator") or {})
        if dt is not None:
            integ["dt"] = dt
        if t_final is not None:
            integ["t_final"] = t_final
        config["integrator"] = integ
    if seed is not None:
        config["seed"] = seed
    return config


@click.group()
@click.option("--server", default=None, metavar="URL",
              help="Base URL of a running service; default is in-process.")
@click.pass_context
def main(ctx, server):
    """Distributed optimization over weight-balanced digraphs."""
    ctx.obj = {"server": server}


@main.command("check-graph")
@click.option("--config", "config_path", required=True, type=str)
@click.pass_context
def check_graph(ctx, config_path):
    """Connectivity, weight balance, spectra, and the convergence criterion."""
    config = load_config(config_path)
    graph = config.get("graph", config)
    with make_client(ctx.obj["server"]) as client:
        data = post(client, "/graph/check", {"graph": graph})
    click.echo(json.dumps(data, indent=2, sort_keys=True))


@main.command("analyze")
@click.option("--config", "config_path", required=True, type=str)
@click.pass_context
def analyze(ctx, config_path):
    """Laplacian spectrum and the sqrt(3)|Im| <= Re criterion verdict."""
    config = load_config(config_path)
    graph = config.get("graph", config)
    with make_client(ctx.obj["server"]) as client:
        data = post(client, "/analyze", {"graph": graph})
    click.echo(json.dumps(data, indent=2, sort_keys=True))


@main.command("select-params")
@click.option("--config", "config_path", required=True, type=str)
@click.pass_context
def select_params(ctx, config_path):
    """Pick beta in (0, beta*) and alpha = (beta^2 + 2) / beta."""
    config = load_config(config_path)
    payload = {"graph": config.get("graph", config)}
    for key in ("objectives", "K", "safety", "box"):
        if key in config:
            payload[key] = config[key]
    with make_client(ctx.obj["server"]) as client:
        data = post(client, "/select-params", payload)
    click.echo(json.dumps(data, indent=2, sort_keys=True))


@main.command("simulate")
@click.option("--config", "config_path", required=True, type=str)
@click.option("--out", default=".", type=str, show_default=True)
@click.option("--dt", default=None, type=float)
@click.option("--t-final", default=None, type=float)
@click.option("--seed", default=None, type=int)
@click.pass_context
def simulate(ctx, config_path, out, dt, t_final, seed):
    """Run the configured dynamics; write trajectory CSV, plot CSV, summary."""
    config = apply_overrides(load_config(config_path), dt, t_final, seed)
    out_dir = resolve_out(out)
    with make_client(ctx.obj["server"]) as client:
        data = post(client, "/simulate", config)
    write_outputs(data, out_dir, config)
    click.echo(json.dumps(data["summary"], indent=2, sort_keys=True))
    if data.get("diverged"):
        click.echo(f"error: state diverged at t = {data.get('t_bad')}",
                   err=True)
        sys.exit(EXIT_DIVERGENCE)


@main.command("reproduce")
@click.argument("name", type=click.Choice(["example-5-2", "figure-1"]))
@click.option("--out", default=".", type=str, show_default=True)
@click.option("--dt", default=None, type=float)
@click.option("--t-final", default=None, type=float)
@click.pass_context
def reproduce(ctx, name, out, dt, t_final):
    """Re-run a named built-in study."""
    payload = {}
    if dt is not None:
        payload["dt"] = dt
    if t_final is not None:
        payload["t_final"] = t_final
    out_dir = resolve_out(out)
    with make_client(ctx.obj["server"]) as client:
        data = post(client, f"/reproduce/{name}", payload)
    if data.get("simulation"):
        simdata = data["simulation"]
        write_outputs(simdata, out_dir, {}, prefix=f"{name}-")
        if simdata.get("diverged"):
            click.echo("error: state diverged", err=True)
            sys.exit(EXIT_DIVERGENCE)
    click.echo(json.dumps(data["report"], indent=2, sort_keys=True))


@main.command("serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
def serve(host, port):
    """Run the HTTP service with uvicorn."""
    import uvicorn

    uvicorn.run("digraph_optim.service:app", host=host, port=port)


if __name__ == "__main__":
    main()
