"""Minimum load-shedding feasibility restoration for AC power networks.

The public entry points are :func:`read_case`, :func:`build_network`,
:func:`build_restoration`, :func:`solve` and :func:`decode_plan`; the
``feasrestore`` command wraps them for single solves and batch studies.
"""

from .errors import FeasRestoreError
from .matpower_io import Contingency, RawCase, apply_contingency, parse_case, read_case, serialize_case
from .network import PowerNetwork, build_network
from .problem import GnoProblem, linear_problem
from .restoration import RestorationPlan, build_restoration, decode_plan
from .solver import SlpConfig, SolveReport, convergence_rate_probe, kkt_certificate, solve

__all__ = [
    "Contingency",
    "FeasRestoreError",
    "GnoProblem",
    "PowerNetwork",
    "RawCase",
    "RestorationPlan",
    "SlpConfig",
    "SolveReport",
    "apply_contingency",
    "build_network",
    "build_restoration",
    "convergence_rate_probe",
    "decode_plan",
    "kkt_certificate",
    "linear_problem",
    "parse_case",
    "read_case",
    "serialize_case",
    "solve",
]
