import logging
from typing import List, Optional

import typer

from components.chain_engine import build_chain_graph
from components.cli_report import RunConfig, run_analysis
from components.systems_catalog import SystemSpec, expected_facts, make_system
from config import LOG_LEVEL
from database.config_parser import ConfigParser
from database.report_store import emit_outputs
from exceptions import AppException, app_exception_handler

logger = logging.getLogger(__name__)

app = typer.Typer(
    name="topodyn",
    help="Chain, shadowing, barycenter and accessibility checks for catalogued dynamical systems.",
    add_completion=False,
    no_args_is_help=True,
)


@app.callback()
def main(log_level: str = typer.Option(LOG_LEVEL, "--log-level", help="Python logging level")):
    logging.basicConfig(level=log_level.upper(), format="%(asctime)s %(levelname)s %(name)s: %(message)s")


# ========= HELPERS =========

def _run(config_path: str, output_dir: Optional[str], dump: bool = False, only_tasks: Optional[List[str]] = None) -> int:
    try:
        cfg = ConfigParser.read_config(config_path)
        if only_tasks is not None:
            cfg.tasks = list(only_tasks)
        report = run_analysis(cfg)
        graph = None
        if dump and cfg.system.kind not in ("example3_sft", "full_shift", "golden_mean_sft"):
            graph = build_chain_graph(make_system(cfg.system).grid(cfg.mesh), cfg.chain_delta)
        paths = emit_outputs(report, cfg, dump=dump, output_dir=output_dir, graph=graph)
    except AppException as e:
        return app_exception_handler(e)

    for rec in report.verdicts:
        typer.echo(f"{rec.task:<12} {rec.property:<24} {rec.verdict}")
    for entry in report.regression:
        if not entry.matched:
            typer.echo(f"MISMATCH {entry.property}: expected {entry.expected}, observed {entry.observed}", err=True)
    typer.echo(f"report written to {paths[0]}")
    return report.exit_code


def _exit(code: int) -> None:
    if code:
        raise typer.Exit(code=code)


# ========= COMMANDS =========

@app.command()
def analyze(
    config: str = typer.Argument(..., help="INI run configuration"),
    output_dir: Optional[str] = typer.Option(None, "--output-dir", "-o", help="Directory for report.json"),
):
    """Run the configured tasks and write report.json."""
    _exit(_run(config, output_dir))


@app.command()
def regress(
    config: str = typer.Argument(..., help="INI run configuration"),
    output_dir: Optional[str] = typer.Option(None, "--output-dir", "-o"),
):
    """Run only facts-regression against the catalog profile. Exits 2 on any mismatch."""
    _exit(_run(config, output_dir, only_tasks=["facts-regression"]))


@app.command()
def dump(
    config: str = typer.Argument(..., help="INI run configuration"),
    output_dir: Optional[str] = typer.Option(None, "--output-dir", "-o"),
):
    """Like analyze, also writing chain, orbit and edge-list CSV files."""
    _exit(_run(config, output_dir, dump=True))


@app.command()
def facts(kind: str = typer.Argument(..., help="catalog kind, e.g. cat_map")):
    """Print the expected property profile of a catalog kind."""
    try:
        sheet = expected_facts(SystemSpec(kind=kind, **_default_params(kind)))
    except AppException as e:
        _exit(app_exception_handler(e))
        return
    for prop, entry in sorted(sheet.entries.items()):
        typer.echo(f"{prop:<24} {str(entry.value):<6} {entry.provenance:<9} {entry.anchor}")


@app.command()
def template(kind: str = typer.Argument(..., help="catalog kind")):
    """Print a starter configuration for a catalog kind."""
    try:
        cfg = RunConfig(system=SystemSpec(kind=kind, **_default_params(kind)).check(),
                        tasks=["analyze", "facts-regression"])
    except AppException as e:
        _exit(app_exception_handler(e))
        return
    typer.echo(ConfigParser.serialize_config(cfg), nl=False)


def _default_params(kind: str) -> dict:
    return {
        "full_shift": {"s": 2},
        "toral": {"matrix": [[2, 1], [1, 1]]},
        "rotation": {"alpha": "618034/1000003"},
        "morse_smale_circle": {"k": 2},
        "cantor_identity": {"depth": 6},
    }.get(kind, {})


if __name__ == "__main__":
    app()
