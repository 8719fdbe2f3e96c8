"""
Run configuration, property reports and the task dispatcher behind the CLI.
"""
import logging
from datetime import datetime, timezone
from typing import Any, Callable, Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field

from components import hyperbolic_shadowing as hs
from components import property_suite as ps
from components import symbolic_dynamics as sd
from components.chain_engine import (
    build_chain_graph,
    chain_analysis,
    chain_recurrent_nodes,
    lemma_chain,
    make_chain,
)
from components.systems_catalog import SystemSpec, expected_facts, make_system
from config import (
    DEFAULT_CAP,
    DEFAULT_EPSILON,
    DEFAULT_HORIZON,
    DEFAULT_MESH,
    DEFAULT_SEED,
    REPORT_SCHEMA_VERSION,
)
from exceptions import AppException, ChainNotFound, InvalidSpec, NotShadowingCapable, ParamOutOfRange

logger = logging.getLogger(__name__)

TASKS = ("analyze", "chain", "shadow", "barycenter", "glue", "facts-regression")
HOLDING = ("holds", "holds_up_to_horizon", "holds_at_resolution")
Verdict = Literal["holds", "fails", "holds_up_to_horizon", "holds_at_resolution"]

REGRESSION_MISMATCH_EXIT = 2

CONVENTIONS = {
    "chain_step": "d(T(x_i), x_(i+1)) < delta, strict, for chains and pseudo-orbits alike",
    "average_window": "window averages over n consecutive steps, n >= min_window",
    "barycenter_N": "per pair (p, q), never aggregated",
}


# ========= MODELS =========

class ChainTask(BaseModel):
    source: str
    target: str
    delta: Optional[float] = None


class ShadowTask(BaseModel):
    orbit_file: Optional[str] = None
    count: int = 10
    length: int = 500
    delta: float = 1e-4


class BarycenterTask(BaseModel):
    p: str
    q: str
    epsilon: Optional[float] = None
    n1: int = 10
    n2: int = 10


class GlueTask(BaseModel):
    segments: List[Tuple[str, int]]
    epsilon: Optional[float] = None


class RunConfig(BaseModel):
    system: SystemSpec
    tasks: List[str] = Field(default_factory=list)
    seed: int = DEFAULT_SEED
    mesh: float = DEFAULT_MESH
    delta: Optional[float] = None
    epsilon: float = DEFAULT_EPSILON
    horizon: int = DEFAULT_HORIZON
    cap: int = DEFAULT_CAP
    output_dir: Optional[str] = None
    chain: Optional[ChainTask] = None
    shadow: Optional[ShadowTask] = None
    barycenter: Optional[BarycenterTask] = None
    glue: Optional[GlueTask] = None

    @property
    def chain_delta(self) -> float:
        return self.delta if self.delta is not None else 2.0 * self.mesh


class PropertyRecord(BaseModel):
    task: str
    property: str
    verdict: Verdict
    parameters: Dict[str, Any] = Field(default_factory=dict)
    anchor: str = ""
    payload: Dict[str, Any] = Field(default_factory=dict)

    @property
    def holds(self) -> bool:
        return self.verdict in HOLDING


class RegressionEntry(BaseModel):
    property: str
    expected: bool
    observed: Optional[bool]
    matched: bool
    anchor: str


class PropertyReport(BaseModel):
    schema_version: str = REPORT_SCHEMA_VERSION
    generated_at: str
    conventions: Dict[str, str] = Field(default_factory=lambda: dict(CONVENTIONS))
    system: str
    spec: SystemSpec
    seed: int
    verdicts: List[PropertyRecord] = Field(default_factory=list)
    regression: List[RegressionEntry] = Field(default_factory=list)

    @property
    def exit_code(self) -> int:
        return REGRESSION_MISMATCH_EXIT if any(not e.matched for e in self.regression) else 0


def validate_config(cfg: RunConfig) -> RunConfig:
    """Precondition checks shared by the parser and run_analysis."""
    cfg.system.check()
    for task in cfg.tasks:
        if task not in TASKS:
            raise ParamOutOfRange("tasks", task, f"one of {', '.join(TASKS)}")
    if not cfg.mesh > 0:
        raise ParamOutOfRange("mesh", cfg.mesh, "> 0")
    if not cfg.chain_delta > 0:
        raise ParamOutOfRange("delta", cfg.delta, "> 0")
    if not cfg.epsilon > 0:
        raise ParamOutOfRange("epsilon", cfg.epsilon, "> 0")
    if cfg.horizon < 1:
        raise ParamOutOfRange("horizon", cfg.horizon, ">= 1")
    if cfg.cap < 1:
        raise ParamOutOfRange("cap", cfg.cap, ">= 1")
    for task in ("chain", "barycenter", "glue"):
        if task in cfg.tasks and getattr(cfg, task) is None:
            raise InvalidSpec(f"task '{task}' needs a [{task}] section")
    if cfg.shadow is not None and (cfg.shadow.delta <= 0 or cfg.shadow.length < 1 or cfg.shadow.count < 1):
        raise ParamOutOfRange("shadow", cfg.shadow.model_dump(), "positive delta, length and count")
    if cfg.glue is not None and not cfg.glue.segments:
        raise InvalidSpec("glue task needs at least one segment")
    return cfg


# ========= HELPERS =========

def _params(cfg: RunConfig, **extra) -> Dict[str, Any]:
    params = {"mesh": cfg.mesh, "delta": cfg.chain_delta, "epsilon": cfg.epsilon, "horizon": cfg.horizon}
    params.update(extra)
    return params


def _record(task: str, prop: str, verdict: str, params: Dict[str, Any], anchor: str = "", **payload) -> PropertyRecord:
    return PropertyRecord(task=task, property=prop, verdict=verdict, parameters=params, anchor=anchor, payload=payload)


def _point_text(sys: ps.DynSystem, x: Any) -> str:
    return sys.format_point(x)


def _rows(points: Any) -> List[List[float]]:
    return np.asarray(points, dtype=float).tolist()


def _anchor_of(cfg: RunConfig, prop: str) -> str:
    entry = expected_facts(cfg.system).entries.get(prop)
    return entry.anchor if entry else ""


def _orbit_payload(sys: ps.DynSystem, orbit: np.ndarray, key: str = "orbit") -> Dict[str, Any]:
    """Rows of a stored orbit plus d(T x_j, x_(j+1)) for every step."""
    orbit = np.atleast_2d(np.asarray(orbit, dtype=float))
    steps = sys.coords_distance(sys.evaluate_coords(orbit[:-1]), orbit[1:]) if len(orbit) > 1 else np.zeros(0)
    return {key: _rows(orbit), f"{key}_step_errors": np.atleast_1d(steps).tolist()}


# ========= ANALYZE =========

def _analyze_sft(sys, cfg: RunConfig, rng: np.random.Generator) -> List[PropertyRecord]:
    task = "analyze"
    structure = sd.sft_structure(sys.sft)
    n_mix = sd.mixing_time(sys.sft)
    records = [
        _record(task, "shadowing", "holds", _params(cfg), _anchor_of(cfg, "shadowing")),
        _record(task, "transitive", "holds" if structure["transitive"] else "fails", _params(cfg),
                _anchor_of(cfg, "transitive"), period=structure["period"]),
        _record(task, "mixing", "holds" if structure["mixing"] else "fails", _params(cfg),
                _anchor_of(cfg, "mixing"), period=structure["period"], mixing_time=n_mix),
        _record(task, "chain_transitive", "holds" if structure["irreducible"] else "fails", _params(cfg),
                _anchor_of(cfg, "chain_transitive")),
        _record(task, "expansive", "holds", _params(cfg), _anchor_of(cfg, "expansive"), constant=0.5),
    ]

    failure = sd.first_su_failure(sys.sft, 4)
    su_params = _params(cfg, max_period=4)
    if failure is None:
        records.append(_record(task, "su_intersecting_on_Per", "holds_up_to_horizon", su_params,
                               _anchor_of(cfg, "su_intersecting_on_Per")))
        if structure["mixing"]:
            records.append(_record(task, "su_intersecting_on_X", "holds_up_to_horizon", su_params,
                                   _anchor_of(cfg, "su_intersecting_on_X")))
    else:
        a, b = failure
        counterexample = {"a": sd.format_point(a), "b": sd.format_point(b),
                          "search_bound": list(sd.su_search_bound(sys.sft, a, b))}
        records.append(_record(task, "su_intersecting_on_Per", "fails", su_params,
                               _anchor_of(cfg, "su_intersecting_on_Per"), counterexample=counterexample))
        records.append(_record(task, "su_intersecting_on_X", "fails", su_params,
                               _anchor_of(cfg, "su_intersecting_on_X"), counterexample=counterexample))

    eps = 1.0 / 8.0
    periodic = sys.periodic_points(4)
    worst_m, failed = 0, None
    for p in periodic:
        for q in periodic:
            w = ps.check_barycenter(sys, p, q, eps, n_cap=cfg.cap)
            if w is None or not ps.verify_barycenter_witness(sys, w):
                failed = (p, q)
                break
            worst_m = max(worst_m, w.m)
        if failed:
            break
    bary_params = _params(cfg, epsilon=eps, max_period=4, cap=cfg.cap)
    if failed is None:
        records.append(_record(task, "barycenter_on_Per", "holds_up_to_horizon", bary_params,
                               _anchor_of(cfg, "barycenter_on_Per"), pairs=len(periodic) ** 2, max_m=worst_m))
    else:
        records.append(_record(task, "barycenter_on_Per", "fails", bary_params, _anchor_of(cfg, "barycenter_on_Per"),
                               counterexample={"p": sd.format_point(failed[0]), "q": sd.format_point(failed[1])}))
    return records


def _analyze_toral(sys, cfg: RunConfig, rng: np.random.Generator) -> List[PropertyRecord]:
    task = "analyze"
    t = sys.toral
    records = [_record(task, "shadowing", "holds", _params(cfg), _anchor_of(cfg, "shadowing"),
                       shadowing_constant=hs.shadowing_constant(t), lambda_s=t.lambda_s,
                       lambda_u_inv=t.lambda_u_inv, splitting=t.mode, condition=t.condition)]

    graph = build_chain_graph(sys.grid(cfg.mesh), cfg.chain_delta)
    chains = chain_analysis(graph)
    records.append(_record(task, "chain_transitive", "holds_at_resolution" if chains["chain_transitive"] else "fails",
                           _params(cfg, nodes=graph.base.size), _anchor_of(cfg, "chain_transitive"), **chains))

    trans = ps.empirical_transitivity(sys, max(cfg.mesh, 0.05), cfg.horizon)
    t_params = _params(cfg, mesh=trans.mesh, cells=trans.cells)
    records.append(_record(task, "transitive", "holds_at_resolution" if trans.transitive_at_mesh else "fails",
                           t_params, _anchor_of(cfg, "transitive"),
                           one_sided=trans.one_sided_transitive_at_mesh))
    records.append(_record(task, "mixing", "holds_at_resolution" if trans.mixing_at_mesh else "fails",
                           t_params, _anchor_of(cfg, "mixing"), mixing_from=trans.mixing_from))

    c = hs.expansivity_constant(t)
    pairs = rng.random((20, 2, t.dim))
    separated = all(hs.separation_time(t, a, b, c) is not None for a, b in pairs)
    records.append(_record(task, "expansive", "holds" if separated else "fails", _params(cfg, pairs=20),
                           _anchor_of(cfg, "expansive"), constant=c))

    if t.dim == 2:
        ok = True
        for a, b in rng.random((20, 2, 2)):
            z = hs.su_intersect_toral(t, a, b)
            ok = ok and hs.verify_su_witness(t, a, b, z)
        records.append(_record(task, "su_intersecting_on_X", "holds" if ok else "fails", _params(cfg, pairs=20),
                               _anchor_of(cfg, "su_intersecting_on_X")))

    periodic = sys.periodic_points(6)
    picks = rng.choice(len(periodic), size=(3, 2)) if periodic else []
    verified = True
    worst_m = 0
    for i, j in picks:
        w = ps.barycenter_from_gluing(sys, periodic[i], periodic[j], cfg.epsilon, 1)
        verified = verified and ps.verify_barycenter_witness(sys, w)
        worst_m = max(worst_m, w.m)
    records.append(_record(task, "barycenter_on_Per", "holds" if verified else "fails", _params(cfg, pairs=len(picks)),
                           _anchor_of(cfg, "barycenter_on_Per"), max_m=worst_m))
    return records


def _drifting_orbit(sys, rng: np.random.Generator, delta: float, length: int) -> List[np.ndarray]:
    x = np.array([rng.random()])
    seq = [x]
    for _ in range(length):
        seq.append(hs.into_unit_box(sys.evaluate(seq[-1]) + 0.5 * delta))
    return seq


def _analyze_sampled(sys, cfg: RunConfig, rng: np.random.Generator) -> List[PropertyRecord]:
    """Ladder, rotations, Morse-Smale circle maps and the Cantor identity."""
    task = "analyze"
    records = []
    trans = ps.empirical_transitivity(sys, cfg.mesh, cfg.horizon)
    t_params = _params(cfg, cells=trans.cells)
    records.append(_record(task, "transitive", "holds_at_resolution" if trans.transitive_at_mesh else "fails",
                           t_params, _anchor_of(cfg, "transitive"), one_sided=trans.one_sided_transitive_at_mesh))
    records.append(_record(task, "mixing", "holds_at_resolution" if trans.mixing_at_mesh else "fails",
                           t_params, _anchor_of(cfg, "mixing"), mixing_from=trans.mixing_from))

    graph = build_chain_graph(sys.grid(cfg.mesh), cfg.chain_delta)
    chains = chain_analysis(graph)
    recurrent = chain_recurrent_nodes(graph)
    records.append(_record(task, "chain_transitive", "holds_at_resolution" if chains["chain_transitive"] else "fails",
                           _params(cfg, nodes=graph.base.size), _anchor_of(cfg, "chain_transitive"),
                           chain_recurrent=len(recurrent), **chains))

    if sys.family in ("ladder", "cantor_identity"):
        grid_sh = ps.check_grid_shadowing(sys)
        records.append(_record(task, "shadowing", "holds_at_resolution" if grid_sh.holds else "fails",
                               _params(cfg, delta=grid_sh.delta), _anchor_of(cfg, "shadowing"),
                               min_separation=grid_sh.min_separation))
    if sys.family == "rotation":
        delta = 1e-3
        # total drift 4 epsilon: every true orbit ends up at least 2 epsilon away somewhere
        seq = _drifting_orbit(sys, rng, delta, int(np.ceil(8.0 * cfg.epsilon / delta)))
        search = ps.exhaustive_shadow_search(sys, seq, cfg.epsilon, 1e-4)
        verdict = "holds_up_to_horizon" if search.found else "fails"
        records.append(_record(task, "shadowing", verdict, _params(cfg, delta=delta, search_mesh=1e-4),
                               _anchor_of(cfg, "shadowing"), best_deviation=search.best_deviation,
                               certified_none=search.certified_none, candidates=search.candidates))
        exp = ps.check_expansive(sys, c=cfg.epsilon, horizon=50, mesh=cfg.mesh)
        records.append(_record(task, "expansive", "holds_at_resolution" if exp.expansive else "fails",
                               _params(cfg, c=exp.c), _anchor_of(cfg, "expansive")))
    if sys.family == "cantor_identity":
        exp = ps.check_expansive(sys)
        records.append(_record(task, "expansive", "holds_at_resolution" if exp.expansive else "fails",
                               _params(cfg, c=exp.c), _anchor_of(cfg, "expansive")))
        distal = ps.is_distal_at_resolution(sys)
        records.append(_record(task, "distal", "holds_at_resolution" if distal else "fails", _params(cfg),
                               _anchor_of(cfg, "distal")))
        pts = sys.points()
        idx = rng.choice(len(pts), size=(100, 2))
        idx = idx[idx[:, 0] != idx[:, 1]]
        meets = any(sys.stable_related(pts[i], pts[j]) and sys.unstable_related(pts[j], pts[i]) for i, j in idx)
        records.append(_record(task, "su_intersecting_on_X", "holds_at_resolution" if meets else "fails",
                               _params(cfg, pairs=len(idx)), _anchor_of(cfg, "su_intersecting_on_X")))

    periodic = sys.periodic_points(1)
    if sys.family in ("ladder", "morse_smale") and len(periodic) > 1:
        failed = None
        for p in periodic:
            for q in periodic:
                w = ps.check_barycenter(sys, p, q, 0.2 if sys.family == "ladder" else 0.1,
                                        n_cap=min(cfg.cap, 2 * cfg.horizon), mesh=cfg.mesh)
                if w is None:
                    failed = (p, q)
                    break
            if failed:
                break
        bary_params = _params(cfg, cap=min(cfg.cap, 2 * cfg.horizon))
        if failed is None:
            records.append(_record(task, "barycenter_on_Per", "holds_up_to_horizon", bary_params,
                                   _anchor_of(cfg, "barycenter_on_Per")))
        else:
            records.append(_record(task, "barycenter_on_Per", "fails", bary_params, _anchor_of(cfg, "barycenter_on_Per"),
                                   counterexample={"p": sys.format_point(failed[0]), "q": sys.format_point(failed[1]),
                                                   "candidates": len(sys.candidates(cfg.mesh))}))
    return records


def analyze(sys: ps.DynSystem, cfg: RunConfig, rng: np.random.Generator) -> List[PropertyRecord]:
    if sys.family == "sft":
        return _analyze_sft(sys, cfg, rng)
    if sys.family == "toral":
        return _analyze_toral(sys, cfg, rng)
    return _analyze_sampled(sys, cfg, rng)


# ========= TASKS =========

def _sft_chain(sys, a: sd.EpPoint, b: sd.EpPoint, delta: float):
    """a, then the orbit of a point agreeing with T(a) in the past and reaching b, then b."""
    w = ps.check_barycenter(sys, sys.evaluate(a), b, delta, 1, 1, n_cap=10_000)
    if w is None:
        raise ChainNotFound(f"no bridge from {sd.format_point(a)} to {sd.format_point(b)}")
    nodes = [a] + [sys.iterate(w.x0, j) for j in range(w.m)] + [b]
    return make_chain(sys, nodes, delta)


class CoordMap:
    """A system seen on coordinate rows, for chains through grid representatives."""

    def __init__(self, sys: ps.DynSystem):
        self.sys = sys

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        return self.sys.evaluate_coords(np.atleast_2d(np.asarray(x, dtype=float)))[0]

    def distance(self, x: np.ndarray, y: np.ndarray) -> float:
        return float(self.sys.coords_distance(np.atleast_1d(x), np.atleast_1d(y)))


def run_chain(sys: ps.DynSystem, cfg: RunConfig, rng: np.random.Generator) -> List[PropertyRecord]:
    spec = cfg.chain
    delta = spec.delta if spec.delta is not None else cfg.chain_delta
    a, b = sys.parse_point(spec.source), sys.parse_point(spec.target)
    if sys.family == "sft":
        chain = _sft_chain(sys, a, b, delta)
        nodes = [sd.format_point(x) for x in chain.nodes]
    else:
        graph = build_chain_graph(sys.grid(cfg.mesh), delta)
        chain = lemma_chain(graph, CoordMap(sys), sys.coords(a), sys.coords(b))
        nodes = _rows(np.vstack(chain.nodes))
    return [_record("chain", "chain", "holds", _params(cfg, delta=delta), "",
                    source=spec.source, target=spec.target, length=chain.length,
                    chain=nodes, step_errors=list(chain.step_errors))]


def run_shadow(sys: ps.DynSystem, cfg: RunConfig, rng: np.random.Generator) -> List[PropertyRecord]:
    if sys.family != "toral":
        raise NotShadowingCapable(sys.name)
    from database.report_store import read_orbit_csv

    spec = cfg.shadow or ShadowTask()
    t = sys.toral
    if spec.orbit_file:
        orbits = [hs.build_pseudo_orbit(t, read_orbit_csv(spec.orbit_file))]
    else:
        orbits = [hs.random_pseudo_orbit(t, spec.length, spec.delta, rng) for _ in range(spec.count)]
    results = [hs.shadow(t, po) for po in orbits]
    within = all(r.max_error <= r.bound for r in results)
    worst = max(r.max_error / r.bound if r.bound > 0 else 0.0 for r in results)
    first, first_po = results[0], orbits[0]
    return [_record("shadow", "shadowing", "holds" if within else "fails",
                    _params(cfg, delta=first_po.delta, count=len(orbits), length=first_po.length),
                    _anchor_of(cfg, "shadowing"), constant=hs.shadowing_constant(t), worst_ratio=worst,
                    z0=_rows(first.z0), shadow_errors=np.asarray(first.errors, dtype=float).tolist(),
                    **_orbit_payload(sys, first_po.points, "pseudo_orbit"), **_orbit_payload(sys, first.orbit))]


def run_barycenter(sys: ps.DynSystem, cfg: RunConfig, rng: np.random.Generator) -> List[PropertyRecord]:
    spec = cfg.barycenter
    eps = spec.epsilon if spec.epsilon is not None else cfg.epsilon
    p, q = sys.parse_point(spec.p), sys.parse_point(spec.q)
    w = ps.check_barycenter(sys, p, q, eps, spec.n1, spec.n2, n_cap=cfg.cap, mesh=cfg.mesh)
    params = _params(cfg, epsilon=eps, n1=spec.n1, n2=spec.n2, cap=cfg.cap)
    if w is None:
        return [_record("barycenter", "barycenter", "fails", params, "",
                        p=spec.p, q=spec.q, certificate=f"no witness with m <= {cfg.cap} among "
                                                       f"{len(sys.candidates(cfg.mesh))} candidates")]
    verified = ps.verify_barycenter_witness(sys, w)
    verdict = ("holds" if w.constructive else "holds_up_to_horizon") if verified else "fails"
    payload = dict(p=spec.p, q=spec.q, x0=sys.format_point(w.x0), m=w.m, N=w.N, method=w.method, verified=verified)
    if w.orbit is not None:
        payload.update(_orbit_payload(sys, w.orbit))
    return [_record("barycenter", "barycenter", verdict, params, "", **payload)]


def run_glue(sys: ps.DynSystem, cfg: RunConfig, rng: np.random.Generator) -> List[PropertyRecord]:
    spec = cfg.glue
    eps = spec.epsilon if spec.epsilon is not None else cfg.epsilon
    segments = [(sys.parse_point(text), n) for text, n in spec.segments]
    gw = ps.gluing_orbit(sys, segments, eps)
    verified = ps.verify_gluing_witness(sys, gw)
    payload = dict(x=sys.format_point(gw.x), gaps=list(gw.gaps), N=gw.N, verified=verified)
    if gw.orbit is not None:
        payload.update(_orbit_payload(sys, gw.orbit))
    return [_record("glue", "gluing_orbit", "holds" if verified else "fails", _params(cfg, epsilon=eps), "", **payload)]


def compare_facts(cfg: RunConfig, records: List[PropertyRecord]) -> List[RegressionEntry]:
    observed: Dict[str, bool] = {}
    for rec in records:
        if rec.task == "analyze":
            observed[rec.property] = rec.holds
    entries = []
    for prop, fact in sorted(expected_facts(cfg.system).entries.items()):
        got = observed.get(prop)
        entries.append(RegressionEntry(property=prop, expected=fact.value, observed=got,
                                       matched=got is not None and got == fact.value, anchor=fact.anchor))
        if got != fact.value:
            logger.warning("[Regression] %s: expected %s, observed %s", prop, fact.value, got)
    return entries


HANDLERS: Dict[str, Callable[[ps.DynSystem, RunConfig, np.random.Generator], List[PropertyRecord]]] = {
    "analyze": analyze,
    "chain": run_chain,
    "shadow": run_shadow,
    "barycenter": run_barycenter,
    "glue": run_glue,
}


def run_analysis(cfg: RunConfig, now: Optional[datetime] = None) -> PropertyReport:
    """
    Execute the configured tasks in order with one seeded generator.
    Domain errors are re-raised with the originating task prefixed.
    """
    validate_config(cfg)
    system = make_system(cfg.system)
    rng = np.random.default_rng(cfg.seed)
    stamp = (now or datetime.now(timezone.utc)).isoformat()
    report = PropertyReport(generated_at=stamp, system=cfg.system.label, spec=cfg.system, seed=cfg.seed)

    for task in cfg.tasks:
        logger.info("[Report] running %s on %s", task, system.name)
        try:
            if task == "facts-regression":
                if not any(r.task == "analyze" for r in report.verdicts):
                    report.verdicts.extend(analyze(system, cfg, rng))
                report.regression = compare_facts(cfg, report.verdicts)
                continue
            report.verdicts.extend(HANDLERS[task](system, cfg, rng))
        except AppException as e:
            e.detail = f"[{task}] {e.detail}"
            e.args = (e.detail,)
            raise
    return report
