"""Batch studies: impedance sweeps and single-outage screening.

Each study row is produced by :func:`run_instance`, which is a plain
top-level function so it can be shipped to worker processes.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

from . import acpf
from . import matpower_io as mio
from .errors import DisconnectsNetwork, IndexOutOfRange
from .network import build_network
from .restoration import build_restoration, decode_plan
from .solver import SlpConfig, solve

FAILED_LABEL = "infeasible (restoration failed)"


@dataclass
class StudyRow:
    label: str
    kind: str
    index: float
    status: str
    converged: bool
    iterations: int = 0
    pivots: int = 0
    as_iterations: int = 0
    as_tweaks: int = 0
    seconds: float = 0.0
    P_shed: float = 0.0
    Q_shed: float = 0.0
    gen_curtailed: float = 0.0
    buses_shed: list = field(default_factory=list)
    buses_curtailed: list = field(default_factory=list)
    free_dimension: int | None = None
    objective: float = 0.0
    note: str = ""
    # the full SolveReport, only kept when a study is run with keep_reports=True
    report: object = field(default=None, repr=False, compare=False)

    @property
    def n_buses(self):
        return len(self.buses_shed)

    def to_dict(self):
        d = asdict(self)
        d.pop("report")
        return d


def solve_case(case, contingency, vmin, vmax, cfg=None):
    """Apply ``contingency``, solve restoration; returns (problem, report, plan)."""
    net = build_network(mio.apply_contingency(case, contingency))
    prob = build_restoration(net, vmin, vmax)
    rep = solve(prob, cfg)
    plan = decode_plan(prob, rep.x, diagnostics={
        "status": rep.status,
        "iterations": rep.iterations,
        "pivots": rep.pivots,
        "as_iterations": rep.as_iterations,
        "as_tweaks": rep.as_tweaks,
        "wall_time": rep.wall_time,
    })
    return prob, rep, plan


def _row(label, kind, index, rep, plan, seconds):
    return StudyRow(
        label=label,
        kind=kind,
        index=index,
        status=rep.status,
        converged=rep.converged,
        iterations=rep.iterations,
        pivots=rep.pivots,
        as_iterations=rep.as_iterations,
        as_tweaks=rep.as_tweaks,
        seconds=seconds,
        P_shed=plan.total_P_shed,
        Q_shed=plan.total_Q_shed,
        gen_curtailed=plan.gen_curtailed,
        buses_shed=list(plan.buses_shed),
        buses_curtailed=list(plan.buses_curtailed),
        free_dimension=rep.free_dimension,
        objective=plan.objective,
        note="" if rep.converged else FAILED_LABEL,
    )


def run_instance(args):
    """Solve one ``(case, contingency, vmin, vmax, cfg, screen, keep)`` task.

    Returns ``None`` for instances filtered out by screening; ``keep``
    attaches the :class:`SolveReport` to the row.
    """
    case, contingency, vmin, vmax, cfg, screen, keep = args
    try:
        damaged = mio.apply_contingency(case, contingency)
    except (DisconnectsNetwork, IndexOutOfRange):
        return None
    net = build_network(damaged)
    if screen and acpf.is_solvable(net):
        return None
    t0 = time.perf_counter()
    prob = build_restoration(net, vmin, vmax)
    rep = solve(prob, cfg)
    plan = decode_plan(prob, rep.x)
    if contingency.kind == "impedance_scale":
        index = contingency.beta
    elif contingency.kind == "remove_line":
        index = contingency.line_index
    elif contingency.kind == "remove_generator":
        index = contingency.gen_index
    else:
        index = 0
    label = contingency.label()
    if contingency.kind == "remove_generator":
        label = generator_label(case, contingency.gen_index)
    row = _row(label, contingency.kind, index, rep, plan, time.perf_counter() - t0)
    if keep:
        row.report = rep
    return row


def generator_label(case, k):
    """``gen <row> (bus <id>, position <p>)`` with 1-based row and position."""
    bus_id = int(case.gen[k - 1, mio.GEN_BUS])
    pos = case.bus_index()[bus_id] + 1
    return f"gen {k} (bus {bus_id}, position {pos})"


def _map(jobs, tasks):
    if jobs <= 1 or len(tasks) <= 1:
        return [run_instance(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(run_instance, tasks))


def beta_sweep(case, betas, vmin, vmax, cfg=None, jobs=1, keep_reports=False):
    if not betas:
        raise ValueError("the beta list is empty")
    cfg = cfg or SlpConfig()
    tasks = [(case, mio.Contingency.scale(b), vmin, vmax, cfg, False, keep_reports) for b in betas]
    return _map(jobs, tasks)


def line_outages(case, vmin, vmax, cfg=None, jobs=1, lines=None, keep_reports=False):
    """Rows for single-line outages that keep the grid connected but defeat Newton."""
    cfg = cfg or SlpConfig()
    lines = range(1, case.n_branch + 1) if lines is None else lines
    tasks = [(case, mio.Contingency.line(k), vmin, vmax, cfg, True, keep_reports)
             for k in lines if case.branch[k - 1, mio.BR_STATUS] > 0]
    return [r for r in _map(jobs, tasks) if r is not None]


def generator_outages(case, vmin, vmax, cfg=None, jobs=1, gens=None, keep_reports=False):
    """Rows for single-generator outages that defeat Newton."""
    cfg = cfg or SlpConfig()
    gens = range(1, case.n_gen + 1) if gens is None else gens
    tasks = [(case, mio.Contingency.generator(k), vmin, vmax, cfg, True, keep_reports)
             for k in gens if case.gen[k - 1, mio.GEN_STATUS] > 0]
    return [r for r in _map(jobs, tasks) if r is not None]
