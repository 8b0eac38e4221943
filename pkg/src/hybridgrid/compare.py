"""Simulated versus measured bus quantities.

Only quantities that the optimum actually determines are meaningful to
compare.  When an objective leaves a direction flat (for instance the split of
generation between two equally efficient converters, or the voltage level of a
converter-isolated bus) the solver returns one point of a continuum, and a
mismatch against a measurement says nothing about the model.
:func:`probe_unique_quantities` detects such quantities by re-solving with
small random linear perturbations of the objective.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .formats import MeasurementSet
from .grid_model import NetworkModel, per_unit_normalize
from .opf import OpfSolution, assemble, solve_opf
from .scenario import OpfScenario

POWER = "P"
VOLTAGE = "V"
DEFAULT_THRESHOLD_PCT = 3.0


@dataclass(frozen=True)
class ErrorRow:
    bus: int
    quantity: str  # "P" (kW) or "V" (kV)
    simulated: float
    measured: float
    error: float  # % when relative, else absolute in the quantity's unit
    relative: bool
    compared: bool = True  # False when the simulated value is not determined


@dataclass(frozen=True)
class ErrorTable:
    label: str
    rows: tuple[ErrorRow, ...]
    threshold_pct: float = DEFAULT_THRESHOLD_PCT

    def max_error(self, quantity: str | None = None) -> float:
        """Largest relative error (%) over compared rows of ``quantity``."""
        errs = [r.error for r in self.rows if r.compared and r.relative
                and (quantity is None or r.quantity == quantity)]
        return max(errs, default=0.0)

    def max_absolute(self, quantity: str | None = None) -> float:
        """Largest flagged absolute error, for rows whose measurement is zero."""
        errs = [r.error for r in self.rows if r.compared and not r.relative
                and (quantity is None or r.quantity == quantity)]
        return max(errs, default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_error() <= self.threshold_pct

    def row(self, bus: int, quantity: str) -> ErrorRow:
        return next(r for r in self.rows if r.bus == bus and r.quantity == quantity)


def _error(sim: float, meas: float) -> tuple[float, bool]:
    if meas == 0.0:
        return abs(sim - meas), False
    return abs(sim - meas) / abs(meas) * 100.0, True


def compare_measurements(solution: OpfSolution, measurements: MeasurementSet,
                         threshold_pct: float = DEFAULT_THRESHOLD_PCT,
                         determined: Iterable[tuple[int, str]] | None = None) -> ErrorTable:
    """Per-bus P and |V| errors of ``solution`` against ``measurements``.

    ``determined`` restricts the comparison to the given ``(bus, quantity)``
    pairs; the other rows are still listed, with ``compared=False``.  Rows
    come out sorted by bus and quantity whatever the input order.
    """
    sim = {b.id: b for b in solution.buses}
    missing = [b for b in measurements.bus_ids if b not in sim]
    if missing:
        raise KeyError(f"measured buses {missing} are absent from the solution")
    keep = None if determined is None else set(determined)
    rows = []
    for bus in measurements.bus_ids:
        for quantity, table, value in ((POWER, measurements.p_kw, sim[bus].p_kw),
                                       (VOLTAGE, measurements.v_kv, sim[bus].v_kv)):
            if bus not in table:
                continue
            err, rel = _error(value, table[bus])
            rows.append(ErrorRow(bus, quantity, value, table[bus], err, rel,
                                 keep is None or (bus, quantity) in keep))
    rows.sort(key=lambda r: (r.bus, r.quantity))
    return ErrorTable(measurements.label, tuple(rows), threshold_pct)


@dataclass
class UniquenessProbe:
    """Outcome of :func:`probe_unique_quantities`."""

    base: OpfSolution
    determined: set[tuple[int, str]] = field(default_factory=set)
    spread: dict[tuple[int, str], float] = field(default_factory=dict)


def probe_unique_quantities(network: NetworkModel, scenario: OpfScenario, probes: int = 2,
                            weight: float = 1e-3, rel_tol: float = 1e-3, seed: int = 0,
                            config=None) -> UniquenessProbe:
    """Which bus P/|V| values does the optimum of ``scenario`` pin down?

    Each probe adds a random linear term of size ``weight`` (per-unit
    objective scale, above the solver's own flow regularization) on the
    voltage and generator variables, and re-solves; each random term is
    also tried with the opposite sign.  A quantity is called
    determined when every probe reproduces it to ``rel_tol``, relative to
    the larger of its magnitude and a reference (1 kW, or the bus nominal
    voltage).  The perturbation is deterministic in ``seed``.
    """
    net = network if network.pu is not None else per_unit_normalize(network)
    base = solve_opf(net, scenario, config=config)
    layout = assemble(net, scenario.objective, scenario=scenario).layout
    # converter flows are left alone: a negative weight would reward circulation
    internal = list(layout.f_fwd.values()) + list(layout.f_rev.values())
    rng = np.random.default_rng(seed)
    runs = []
    for _ in range(probes):
        tie = weight * rng.uniform(-1.0, 1.0, layout.n)
        tie[internal] = 0.0
        # +r and -r: a flat direction cannot be orthogonal-by-sign to both
        for sign in (1.0, -1.0):
            runs.append(solve_opf(net, scenario, config=config, tie_break=sign * tie))
    out = UniquenessProbe(base)
    for b in base.buses:
        refs = {POWER: (b.p_kw, 1.0), VOLTAGE: (b.v_kv, net.buses[b.id].v_nominal)}
        for quantity, (value, ref) in refs.items():
            others = [r.bus(b.id).p_kw if quantity == POWER else r.bus(b.id).v_kv
                      for r in runs]
            spread = max((abs(v - value) for v in others), default=0.0)
            scale = max(abs(value), ref)
            out.spread[(b.id, quantity)] = spread / scale
            feasible = base.feasible and all(r.feasible for r in runs)
            if feasible and spread <= rel_tol * scale:
                out.determined.add((b.id, quantity))
    return out
