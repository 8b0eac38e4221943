"""Optimal power flow and techno-economic assessment of AC/DC hybrid microgrids."""

from .compare import ErrorTable, compare_measurements, probe_unique_quantities
from .formats import (
    MeasurementSet,
    data_path,
    load_economics,
    load_measurements,
    load_network,
    network_document,
)
from .grid_model import (
    NetworkError,
    NetworkModel,
    PerUnitSystem,
    branch_admittance,
    denormalize,
    parse_network,
    per_unit_normalize,
    validate,
)
from .kpi import EconomicModel, KpiReport, discounted_annuity, kpi_report, payback
from .nlp import NlpProblem, SolverConfig, SolverResult, differentiate, kkt_residual, solve
from .opf import OpfProblem, OpfSolution, assemble, extract_solution, solve_opf
from .report import render_report
from .scenario import (
    EconomicScenario,
    OpfScenario,
    apply_economic_scenario,
    apply_opf_scenario,
    economic_report,
    flexibility_income,
)

__version__ = "0.1.0"
