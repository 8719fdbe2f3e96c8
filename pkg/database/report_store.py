import logging
import os
from typing import Any, Dict, List, Optional

import numpy as np
import orjson
import pandas as pd
from pydantic import ValidationError

from components.chain_engine import ChainGraph
from components.cli_report import PropertyReport, RunConfig
from config import OUTPUT_DIR
from exceptions import IoError

logger = logging.getLogger(__name__)

JSON_OPTIONS = orjson.OPT_INDENT_2 | orjson.OPT_SORT_KEYS | orjson.OPT_SERIALIZE_NUMPY


def read_text(path: str) -> str:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return f.read()
    except OSError as e:
        raise IoError(f"cannot read {path}: {e.strerror}")


def resolve_output_dir(cfg: RunConfig, override: Optional[str] = None) -> str:
    """CLI flag, then the config file, then TOPODYN_OUTPUT_DIR."""
    return override or cfg.output_dir or OUTPUT_DIR


def report_to_dict(report: PropertyReport) -> Dict[str, Any]:
    return report.model_dump()


def write_json(path: str, payload: Any) -> str:
    try:
        with open(path, "wb") as f:
            f.write(orjson.dumps(payload, option=JSON_OPTIONS))
    except (OSError, TypeError) as e:
        raise IoError(f"cannot write {path}: {e}")
    return path


def load_report(path: str) -> PropertyReport:
    try:
        return PropertyReport.model_validate(orjson.loads(read_text(path)))
    except (orjson.JSONDecodeError, ValidationError) as e:
        raise IoError(f"{path} is not a report: {e}")


def _write_frame(frame: pd.DataFrame, path: str) -> str:
    try:
        frame.to_csv(path, index=False)
    except OSError as e:
        raise IoError(f"cannot write {path}: {e.strerror}")
    return path


def chain_frame(nodes: List[Any], step_errors: List[float]) -> pd.DataFrame:
    """
    One row per chain point: step, coordinates x0.. (or `point` for symbolic
    chains), and the error of the step leaving it (empty on the last row).
    """
    errors = list(step_errors) + [np.nan]
    if nodes and isinstance(nodes[0], str):
        frame = pd.DataFrame({"point": nodes})
    else:
        coords = np.atleast_2d(np.asarray(nodes, dtype=float))
        frame = pd.DataFrame(coords, columns=[f"x{i}" for i in range(coords.shape[1])])
    frame.insert(0, "step", np.arange(len(frame)))
    frame["step_error"] = errors[:len(frame)]
    return frame


def orbit_frame(points: List[List[float]], step_errors: Optional[List[float]] = None) -> pd.DataFrame:
    coords = np.atleast_2d(np.asarray(points, dtype=float))
    frame = pd.DataFrame(coords, columns=[f"x{i}" for i in range(coords.shape[1])])
    frame.insert(0, "n", np.arange(len(frame)))
    errors = np.full(len(frame), np.nan)
    if step_errors is not None:
        given = np.asarray(step_errors, dtype=float).ravel()[:len(frame)]
        errors[:len(given)] = given
    frame["step_error"] = errors
    return frame


def write_edge_list(graph: ChainGraph, path: str) -> str:
    """One `i j` line per delta-edge."""
    coo = graph.adjacency.tocoo()
    frame = pd.DataFrame({"source": coo.row, "target": coo.col}).sort_values(["source", "target"])
    try:
        frame.to_csv(path, sep=" ", header=False, index=False)
    except OSError as e:
        raise IoError(f"cannot write {path}: {e.strerror}")
    return path


def read_orbit_csv(path: str) -> np.ndarray:
    """Coordinates of a stored orbit or pseudo-orbit: the x0, x1, ... columns in file order."""
    try:
        frame = pd.read_csv(path)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise IoError(f"cannot read orbit file {path}: {e}")
    columns = [c for c in frame.columns if c.startswith("x") and c[1:].isdigit()]
    if not columns:
        raise IoError(f"{path} has no coordinate columns x0, x1, ...")
    return frame[sorted(columns, key=lambda c: int(c[1:]))].to_numpy(dtype=float)


def emit_outputs(report: PropertyReport, cfg: RunConfig, dump: bool = False,
                 output_dir: Optional[str] = None, graph: Optional[ChainGraph] = None) -> List[str]:
    """
    Writes report.json and, with dump, the CSV side files: chains, shadowing
    orbits, witness orbits and the chain-graph edge list.
    """
    out = resolve_output_dir(cfg, output_dir)
    try:
        os.makedirs(out, exist_ok=True)
    except OSError as e:
        raise IoError(f"cannot create {out}: {e.strerror}")

    written = [write_json(os.path.join(out, "report.json"), report_to_dict(report))]
    if dump:
        for i, rec in enumerate(report.verdicts):
            payload = rec.payload
            stem = os.path.join(out, f"{i:02d}_{rec.task}")
            if "chain" in payload:
                written.append(_write_frame(chain_frame(payload["chain"], payload["step_errors"]), f"{stem}_chain.csv"))
            for key in ("pseudo_orbit", "orbit"):
                if key in payload:
                    frame = orbit_frame(payload[key], payload.get(f"{key}_step_errors"))
                    written.append(_write_frame(frame, f"{stem}_{key}.csv"))
        if graph is not None:
            written.append(write_edge_list(graph, os.path.join(out, "chain_graph_edges.txt")))
    logger.info("[Store] wrote %d file(s) to %s", len(written), out)
    return written
