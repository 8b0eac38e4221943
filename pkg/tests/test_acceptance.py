"""Acceptance criteria on the bundled CEDER demonstrator.

Each test prints one ``criterion N ... PASS|FAIL`` line; the lines are also
collected in the terminal summary.  Two criteria cannot be met by any feasible
operating point of the model and are marked as expected failures (strict, so
an unexpected pass is reported): the assertions are run unchanged at the
stated tolerances.
"""

from __future__ import annotations

import json
import subprocess
import sys
import time

import pytest
from conftest import ACCEPTANCE_LINES
from test_properties import random_box_points, worst_fd_error

from hybridgrid import formats
from hybridgrid.cli import run_cli
from hybridgrid.grid_model import denormalize, per_unit_normalize
from hybridgrid.kpi import annual_energy, discounted_annuity, lifetime_cost, yearly_income
from hybridgrid.opf import OBJECTIVES, assemble, solve_opf
from hybridgrid.scenario import (
    ECONOMIC_KINDS,
    OpfScenario,
    apply_economic_scenario,
    economic_report,
)


class Checks:
    """Collects named sub-checks and reports one verdict line."""

    def __init__(self, number: int, title: str):
        self.number, self.title = number, title
        self.items: list[tuple[str, bool]] = []

    def near(self, name: str, value: float, target: float, *, abs_tol=None, rel_tol=None,
             unit: str = "") -> None:
        tol = abs_tol if abs_tol is not None else rel_tol * abs(target)
        band = f"±{abs_tol:g}" if abs_tol is not None else f"±{rel_tol * 100:g}%"
        self.items.append((f"{name} {value:.6g}{unit} vs {target:g}{unit} {band}",
                           abs(value - target) <= tol))

    def at_most(self, name: str, value: float, bound: float, unit: str = "") -> None:
        self.items.append((f"{name} {value:.4g}{unit} <= {bound:g}{unit}", value <= bound))

    def true(self, name: str, ok: bool) -> None:
        self.items.append((name, bool(ok)))

    def verdict(self) -> None:
        failed = [name for name, ok in self.items if not ok]
        status = "FAIL" if failed else "PASS"
        line = f"criterion {self.number} {self.title}: {status} ({len(self.items)} checks)"
        if failed:
            line += " - " + "; ".join(failed)
        print(line)
        ACCEPTANCE_LINES.append(line)
        assert not failed, line


def test_criterion_1_h1(solutions):
    sol = solutions["h1"]
    c = Checks(1, "OPF-H1 golden")
    c.true(f"solution converged and feasible ({sol.status})", sol.feasible)
    c.near("total generation", sol.total_generation_kw, 23.81739, rel_tol=1e-3, unit=" kW")
    for bus, p in ((5, -12.5), (6, -5.0), (7, -4.0)):
        c.near(f"bus {bus} P", sol.bus(bus).p_kw, p, abs_tol=1e-9, unit=" kW")
    for bus, v in ((4, 0.800), (5, 0.860), (7, 0.230), (6, 0.79937)):
        c.near(f"bus {bus} |V|", sol.bus(bus).v_kv, v, abs_tol=1e-4, unit=" kV")
    c.verdict()


def test_criterion_2_h3(solutions):
    sol = solutions["h3"]
    c = Checks(2, "OPF-H3 golden")
    c.true("solution converged and feasible", sol.feasible)
    c.near("PV generation", sol.generators_kw[0], 20.0, abs_tol=1e-3, unit=" kW")
    c.near("wind generation", sol.generators_kw[1], 3.81736, rel_tol=5e-3, unit=" kW")
    c.near("H3 objective", sol.objective_value, 0.09054, rel_tol=5e-3, unit=" EUR/h")
    c.verdict()


def test_criterion_3_h4(solutions):
    sol = solutions["h4"]
    c = Checks(3, "OPF-H4 golden")
    c.true("solution converged and feasible", sol.feasible)
    c.near("P3", sol.bus(3).p_kw, 22.14, abs_tol=1e-9, unit=" kW")
    c.near("P8", sol.bus(8).p_kw, 4.20, abs_tol=1e-9, unit=" kW")
    c.near("grid consumption", -sol.external_kw[0], 2.494, rel_tol=1e-2, unit=" kW")
    c.verdict()


@pytest.mark.xfail(strict=True, reason="H2 floor of about 2.44e-6 pu^2 is set by the "
                   "voltage drop to the 5 kW load on bus 6; see the decisions ledger")
def test_criterion_4_h2(solutions):
    sol = solutions["h2"]
    c = Checks(4, "OPF-H2 golden")
    c.true("solution converged and feasible", sol.feasible)
    c.at_most("H2 objective", sol.objective_value, 1e-6, unit=" pu^2")
    for bus, v in ((0, 15.0), (1, 0.4), (2, 0.4), (3, 0.630), (8, 0.630)):
        c.near(f"bus {bus} |V|", sol.bus(bus).v_kv, v, rel_tol=1e-3, unit=" kV")
    c.verdict()


@pytest.mark.xfail(strict=True, reason="H2 pins bus 3 at 0.630 kV, 3.11% from the "
                   "0.611 kV measurement; see the decisions ledger")
def test_criterion_5_measurements(capsys):
    code = run_cli(["compare", "--format", "json"])
    tables = json.loads(capsys.readouterr().out)
    c = Checks(5, "measurement validation")
    c.true(f"compare ran (exit {code})", code in (0, 1))
    c.true("all four scenarios compared", sorted(tables) == ["H1", "H2", "H3", "H4"])
    for label, t in sorted(tables.items()):
        c.at_most(f"{label} max V error", t["max_voltage_error_pct"], 3.0, unit="%")
        c.at_most(f"{label} max P error", t["max_power_error_pct"], 1.0, unit="%")
    c.verdict()


def test_criterion_6_technical_kpis(ceder, ceder_econ):
    econ, flex = ceder_econ
    r = economic_report(econ, ceder, flex.scenario("baseline"))
    c = Checks(6, "KPI technical suite")
    c.near("kpi1", r.kpi1, 80425, abs_tol=1, unit=" kWh")
    c.near("kpi2", r.kpi2, 2346, abs_tol=1, unit=" kgCO2")
    c.near("kpi3", r.kpi3, 102.01, abs_tol=0.01, unit="%")
    c.true(f"kpi4 {r.kpi4} kW == 25 kW", r.kpi4 == 25.0)
    c.verdict()


def test_criterion_7_economic_kpis(ceder, ceder_econ):
    econ, flex = ceder_econ
    reports = {k: economic_report(econ, ceder, flex.scenario(k)) for k in ECONOMIC_KINDS}
    base, nb = reports["baseline"], reports["no-battery"]
    fi = apply_economic_scenario(econ, ceder, flex.scenario("battery-flex"))[0].fi
    annuity = discounted_annuity(econ.rate, econ.ul)
    c = Checks(7, "KPI economic suite")
    c.near("kpi5 baseline", base.kpi5, 256824.77, rel_tol=1e-4, unit=" EUR")
    c.near("kpi6 baseline - no-battery", base.kpi6 - nb.kpi6, 56348.79, abs_tol=1,
           unit=" EUR")
    c.true(f"kpi7 baseline {base.payback_label} == Never", base.kpi7 is None)
    c.true(f"kpi7 vb-flex {reports['vb-flex'].payback_label} == 17", reports["vb-flex"].kpi7 == 17)
    c.true(f"FI {fi} == 2045.55 EUR", fi == 2045.55)
    for kind, r in reports.items():
        econ_k, net_k = apply_economic_scenario(econ, ceder, flex.scenario(kind))
        c.near(f"kpi8*annuity*energy ({kind})", r.kpi8 * annuity * annual_energy(net_k, econ_k),
               r.kpi6, rel_tol=1e-12, unit=" EUR")
    c.true("kpi6 baseline == kpi6 battery-flex", base.kpi6 == reports["battery-flex"].kpi6)
    c.verdict()


def test_criterion_8_properties(ceder, ceder_pu, ceder_econ, solutions):
    c = Checks(8, "property suite")
    worst = max(worst_fd_error(p, random_box_points(p, 100, seed=j))
                for j, p in enumerate(assemble(ceder_pu, k, scenario=OpfScenario(k))
                                      for k in OBJECTIVES))
    c.at_most("dual vs central-difference relative gap (100 points x 4 objectives)",
              worst, 1e-6)
    s_base = ceder_pu.pu.s_base
    for kind, sol in solutions.items():
        series = sum(b.loss_kw for b in sol.branches)
        conv = sum(cv.loss_kw for cv in sol.converters)
        gap = abs(sol.total_losses_kw - series - conv) / s_base
        c.at_most(f"{kind} conservation gap", gap, 1e-6, unit=" pu")
        c.true(f"{kind} losses {sol.total_losses_kw:.5f} kW >= 0", sol.total_losses_kw >= 0)
        dc = [b for b in sol.buses if b.kind == "DC"]
        c.true(f"{kind} DC buses carry no f and no Q",
               all(b.q_kvar is None and b.delta_rad == 0.0 for b in dc))
    layout = assemble(ceder_pu, "h1", scenario=OpfScenario()).layout
    c.true("no f variable on DC buses",
           not {b.id for b in ceder.buses if b.kind == "DC"} & set(layout.f))
    c.true("per-unit round trip", denormalize(per_unit_normalize(ceder, 123.4)) == ceder)
    econ, flex = ceder_econ
    for kind in ECONOMIC_KINDS:
        e, n = apply_economic_scenario(econ, ceder, flex.scenario(kind))
        short = discounted_annuity(e.rate, e.ul) * yearly_income(n, e) < lifetime_cost(n, e)
        r = economic_report(econ, ceder, flex.scenario(kind))
        c.true(f"payback {kind}: Never iff income short", (r.kpi7 is None) == short)
    again = solve_opf(ceder_pu, OpfScenario("h1"))
    c.true("repeated H1 solve is bit-identical",
           again.state.tobytes() == solutions["h1"].state.tobytes())
    c.verdict()


def test_criterion_9_performance(ceder_pu):
    c = Checks(9, "performance")
    for kind in OBJECTIVES:
        t0 = time.perf_counter()
        sol = solve_opf(ceder_pu, OpfScenario(kind))
        c.at_most(f"{kind} solve", time.perf_counter() - t0, 1.0, unit=" s")
        c.true(f"{kind} feasible", sol.feasible)
    t0 = time.perf_counter()
    codes = [subprocess.run([sys.executable, "-m", "hybridgrid", *argv], capture_output=True,
                            timeout=60).returncode
             for argv in (["solve", "--objective", "all"], ["kpi", "--scenario", "all"])]
    c.at_most("CLI: 4 OPF scenarios + 4 KPI scenarios", time.perf_counter() - t0, 10.0,
              unit=" s")
    c.true(f"CLI exit codes {codes}", codes == [0, 0])
    c.true("input fixtures present", formats.data_path(formats.CEDER_NETWORK).is_file())
    c.verdict()


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
