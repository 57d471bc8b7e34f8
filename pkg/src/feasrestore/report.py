"""Text, CSV and JSON rendering of results, plus matplotlib figures."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from .study import FAILED_LABEL

ROW_FIELDS = ["label", "status", "iterations", "pivots", "as_iterations", "as_tweaks",
              "seconds", "P_shed", "Q_shed", "gen_curtailed", "n_buses", "free_dimension"]


def _iters(row):
    slp = f"{row.iterations}({row.pivots})"
    as_ = f"{row.as_iterations}({row.as_tweaks})" if row.as_iterations else "-"
    return slp, as_


def plan_text(plan, report, title=""):
    lines = []
    if title:
        lines.append(title)
    lines.append(f"status: {report.status}   iterations: {report.summary()}   "
                 f"time: {report.wall_time:.2f}s")
    if not plan.rows and not plan.buses_curtailed:
        lines.append("no load shedding required")
    if plan.rows:
        lines.append(f"{'bus':>6} {'P dem':>9} {'Q dem':>9} {'P inj':>9} {'Q inj':>9} {'% shed':>7}  V=Vmin")
        for r in plan.rows:
            lines.append(f"{r.bus:>6} {r.demanded_P:9.2f} {r.demanded_Q:9.2f} {r.injected_P:9.2f} "
                         f"{r.injected_Q:9.2f} {r.shed_percent:7.1f}  {'yes' if r.at_vmin else ''}")
        lines.append(f"total shed: {plan.total_P_shed:.2f} MW, {plan.total_Q_shed:.2f} MVAr "
                     f"over {plan.n_buses_shed} buses")
    if plan.buses_curtailed:
        lines.append(f"generation curtailed: {plan.gen_curtailed:.2f} MW at buses "
                     + ", ".join(map(str, plan.buses_curtailed)))
    if plan.buses_at_vmin:
        lines.append("buses at V = Vmin: " + ", ".join(map(str, plan.buses_at_vmin)))
    return "\n".join(lines) + "\n"


def rows_text(rows, header="case"):
    out = [f"{header:<34} {'SLP':>9} {'AS':>7} {'time':>6} {'P (MW)':>9} {'Q (MVAr)':>9} "
           f"{'gen cut':>8} {'#':>3} {'free':>4}"]
    for r in rows:
        if not r.converged:
            out.append(f"{r.label:<34} {FAILED_LABEL}")
            continue
        slp, as_ = _iters(r)
        free = "" if r.free_dimension is None else str(r.free_dimension)
        out.append(f"{r.label:<34} {slp:>9} {as_:>7} {r.seconds:6.2f} {r.P_shed:9.2f} "
                   f"{r.Q_shed:9.2f} {r.gen_curtailed:8.2f} {r.n_buses:>3} {free:>4}")
    if len(out) == 1:
        out.append("(no instances)")
    return "\n".join(out) + "\n"


def rows_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(ROW_FIELDS + ["buses_shed", "note"])
    for r in rows:
        vals = [getattr(r, f) for f in ROW_FIELDS]
        vals = [repr(v) if isinstance(v, float) else v for v in vals]
        w.writerow(vals + [" ".join(map(str, r.buses_shed)), r.note])
    return buf.getvalue()


def rows_from_csv(text):
    """Parse :func:`rows_csv` output back into plain dicts (for round-trip checks)."""
    out = []
    for rec in csv.DictReader(io.StringIO(text)):
        out.append({
            "label": rec["label"],
            "status": rec["status"],
            "iterations": int(rec["iterations"]),
            "pivots": int(rec["pivots"]),
            "as_iterations": int(rec["as_iterations"]),
            "as_tweaks": int(rec["as_tweaks"]),
            "seconds": float(rec["seconds"]),
            "P_shed": float(rec["P_shed"]),
            "Q_shed": float(rec["Q_shed"]),
            "gen_curtailed": float(rec["gen_curtailed"]),
            "n_buses": int(rec["n_buses"]),
            "free_dimension": None if rec["free_dimension"] == "" else int(rec["free_dimension"]),
            "buses_shed": [int(b) for b in rec["buses_shed"].split()],
            "note": rec["note"],
        })
    return out


def rows_json(rows):
    return json.dumps([r.to_dict() for r in rows], indent=2)


def plot_convergence(report, path):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    k = [r.k for r in report.trace]
    fig, ax = plt.subplots(2, 1, figsize=(6, 5), sharex=True)
    phi = np.array([r.phi for r in report.trace])
    ax[0].semilogy(k, np.maximum(phi - min(report.phi, phi.min()) + 1e-16, 1e-16), "o-")
    ax[0].set_ylabel("penalty gap")
    ax[1].semilogy(k, [r.delta for r in report.trace], "s-")
    rej = [r.k for r in report.trace if not r.accepted]
    if rej:
        ax[1].semilogy(rej, [report.trace[i].delta for i in rej], "rx", label="rejected")
        ax[1].legend()
    ax[1].set_ylabel("trust radius")
    ax[1].set_xlabel("iteration")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_shed(plan, path):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 3.5))
    if plan.rows:
        labels = [str(r.bus) for r in plan.rows]
        ax.bar(labels, [r.shed_percent for r in plan.rows])
    ax.set_xlabel("bus")
    ax.set_ylabel("load shed (%)")
    ax.set_ylim(0, 105)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_rows(rows, path, xlabel="instance"):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 3.5))
    ok = [r for r in rows if r.converged]
    labels = [r.label for r in ok]
    ax.bar(labels, [r.P_shed for r in ok], label="load shed (MW)")
    ax.bar(labels, [r.gen_curtailed for r in ok], bottom=[r.P_shed for r in ok],
           label="generation curtailed (MW)")
    ax.set_xlabel(xlabel)
    ax.set_ylabel("MW")
    ax.tick_params(axis="x", rotation=60)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def write_figures(directory, report=None, plan=None, rows=None, stem="result"):
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    written = []
    if report is not None:
        written.append(plot_convergence(report, d / f"{stem}_convergence.png"))
    if plan is not None:
        written.append(plot_shed(plan, d / f"{stem}_shed.png"))
    if rows is not None:
        written.append(plot_rows(rows, d / f"{stem}_summary.png"))
    return written
