"""Text, JSON and CSV renderings of solutions, KPI reports and error tables.

kW/kV values carry 5 decimals and currency 2.
"""

from __future__ import annotations

import csv
import io
import json
from typing import Any, Mapping

from .compare import ErrorTable
from .formats import solution_document
from .kpi import KpiReport
from .opf import OBJECTIVE_UNITS, OpfSolution

FORMATS = ("text", "json", "csv")

SOLUTION_COLUMNS = ("bus", "p_kw", "q_kvar", "v_kv", "delta_rad")
KPI_COLUMNS = ("kpi1", "kpi2", "kpi3", "kpi4", "kpi5", "kpi6", "kpi7", "kpi8")
KPI_LABELS = {
    "kpi1": "annual energy (kWh)",
    "kpi2": "CO2 emissions (kgCO2)",
    "kpi3": "self-consumption (%)",
    "kpi4": "storage flexibility (kW)",
    "kpi5": "lifetime income",
    "kpi6": "lifetime cost",
    "kpi7": "payback (years)",
    "kpi8": "LCOE (per kWh)",
}
ERROR_COLUMNS = ("bus", "quantity", "simulated", "measured", "error", "kind", "compared")


def _f5(v: float) -> str:
    # avoid "-0.00000"
    return f"{(round(v, 5) + 0.0):.5f}"


def _f2(v: float) -> str:
    return f"{(round(v, 2) + 0.0):.2f}"


_KPI_FMT = {"kpi1": _f2, "kpi2": _f2, "kpi3": _f2, "kpi4": _f5, "kpi5": _f2, "kpi6": _f2,
            "kpi8": _f5}


def _kpi_cell(name: str, value) -> str:
    if name == "kpi7":
        return "Never" if value is None else str(value)
    if value is None:
        return "n/a"
    return _KPI_FMT[name](value)


def _aligned(rows: list[list[str]], label_first: bool = False) -> str:
    """Right-aligned columns; the first one left-aligned when it holds labels."""
    if not rows:
        return ""
    widths = [max(len(r[j]) for r in rows) for j in range(len(rows[0]))]

    def cell(j, c, w):
        return c.ljust(w) if label_first and j == 0 else c.rjust(w)

    lines = ["  ".join(cell(j, c, w) for j, (c, w) in enumerate(zip(r, widths))).rstrip()
             for r in rows]
    return "\n".join(lines) + "\n"


def _csv(rows: list[list[Any]]) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


# -- per result type -----------------------------------------------------------


def _solution_rows(sol: OpfSolution) -> list[list[str]]:
    return [[str(b.id), _f5(b.p_kw), _f5(0.0 if b.q_kvar is None else b.q_kvar),
             _f5(b.v_kv), _f5(b.delta_rad)] for b in sol.buses]


def _render_solution(sol: OpfSolution, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(solution_document(sol), indent=2) + "\n"
    header = ["Bus", "P (kW)", "Q (kVAr)", "V (kV)", "delta (rad)"]
    if fmt == "csv":
        return _csv([list(SOLUTION_COLUMNS)] + _solution_rows(sol))
    table = _aligned([header] + _solution_rows(sol))
    if not sol.buses:
        return table
    unit = OBJECTIVE_UNITS.get(sol.objective, "")
    value = f"{sol.objective_value:.6g}" if sol.objective == "h2" else _f5(sol.objective_value)
    footer = [
        f"objective {sol.objective.upper()} = {value} {unit}",
        f"status {sol.status}, feasible {'yes' if sol.feasible else 'no'}",
        f"total generation {_f5(sol.total_generation_kw)} kW, "
        f"losses {_f5(sol.total_losses_kw)} kW",
    ]
    if sol.residuals:
        footer.append("residuals " + ", ".join(f"{k} {v:.1e}" for k, v in sol.residuals.items()))
    return table + "\n" + "\n".join(footer) + "\n"


def _render_kpis(reports: Mapping[str, KpiReport], fmt: str) -> str:
    if fmt == "json":
        return json.dumps({name: {**r.as_dict(), "currency": r.currency}
                           for name, r in reports.items()}, indent=2) + "\n"
    rows = [[name] + [_kpi_cell(k, getattr(r, k)) for k in KPI_COLUMNS]
            for name, r in reports.items()]
    if fmt == "csv":
        return _csv([["scenario", *KPI_COLUMNS]] + rows)
    if len(reports) == 1:
        (name, r), = reports.items()
        body = [[KPI_LABELS[k], _kpi_cell(k, getattr(r, k))] for k in KPI_COLUMNS]
        return f"{name} ({r.currency})\n" + _aligned(body, label_first=True)
    return _aligned([["scenario", *KPI_COLUMNS]] + rows, label_first=True)


def _render_errors(tables: Mapping[str, ErrorTable], fmt: str) -> str:
    def row(t: ErrorTable, r):
        kind = "rel%" if r.relative else "abs"
        return [t.label, str(r.bus), r.quantity, _f5(r.simulated), _f5(r.measured),
                _f2(r.error) if r.relative else _f5(r.error), kind,
                "yes" if r.compared else "no"]

    if fmt == "json":
        return json.dumps({
            label: {"threshold_pct": t.threshold_pct, "passed": t.passed,
                    "max_voltage_error_pct": t.max_error("V"),
                    "max_power_error_pct": t.max_error("P"),
                    "rows": [dict(zip(ERROR_COLUMNS, row(t, r)[1:])) for r in t.rows]}
            for label, t in tables.items()}, indent=2) + "\n"
    rows = [row(t, r) for t in tables.values() for r in t.rows]
    if fmt == "csv":
        return _csv([["scenario", *ERROR_COLUMNS]] + rows)
    out = _aligned([["scenario", *ERROR_COLUMNS]] + rows, label_first=True)
    for label, t in tables.items():
        out += (f"{label}: max V error {_f2(t.max_error('V'))}%, max P error "
                f"{_f2(t.max_error('P'))}%, {'pass' if t.passed else 'FAIL'} "
                f"at {_f2(t.threshold_pct)}%\n")
    return out


def render_report(result, fmt: str = "text") -> str:
    """Render an :class:`OpfSolution`, a :class:`KpiReport`, a mapping of
    scenario name to KPI report, or a mapping of label to :class:`ErrorTable`."""
    if fmt not in FORMATS:
        raise ValueError(f"unknown report format {fmt!r}; expected one of {FORMATS}")
    if isinstance(result, OpfSolution):
        return _render_solution(result, fmt)
    if isinstance(result, KpiReport):
        return _render_kpis({"result": result}, fmt)
    if isinstance(result, ErrorTable):
        return _render_errors({result.label: result}, fmt)
    if isinstance(result, Mapping) and result:
        first = next(iter(result.values()))
        if isinstance(first, KpiReport):
            return _render_kpis(result, fmt)
        if isinstance(first, ErrorTable):
            return _render_errors(result, fmt)
    raise TypeError(f"cannot render {type(result).__name__}")
