"""Techno-economic key performance indicators of a microgrid.

Technical: yearly energy, CO2 emissions, self-consumption share, storage
flexibility.  Economic: discounted lifetime income and cost, payback year and
levelized cost of energy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .grid_model import NetworkModel

OC_ENERGY = "energy"
OC_LITERAL = "literal"


@dataclass(frozen=True)
class EquipmentItem:
    name: str
    investment_cost: float
    residual_value: float
    tags: tuple[str, ...] = ()


@dataclass(frozen=True)
class EconomicModel:
    """Microgrid-level economic data.

    ``oc_mode`` selects how generator operating costs (currency/kWh) enter the
    lifetime cost: ``"energy"`` charges them on each generator's yearly energy
    inside the discounted sum; ``"literal"`` adds the bare per-kWh figures to
    the up-front cost.
    """

    ic: float
    rv: float
    omc: float
    r: float  # discount rate, %
    ul: int  # years
    ep: float  # currency/kWh
    fi: float = 0.0  # currency/year
    hours_per_year: float = 8760.0
    oc_mode: str = OC_ENERGY
    currency: str = "EUR"
    equipment: tuple[EquipmentItem, ...] = field(default=(), compare=False)

    def __post_init__(self):
        if self.ul < 1:
            raise ValueError(f"useful life must be at least one year, got {self.ul}")
        if self.r < 0:
            raise ValueError("discount rate must be non-negative")
        if self.hours_per_year <= 0:
            raise ValueError("hours_per_year must be positive")
        if self.oc_mode not in (OC_ENERGY, OC_LITERAL):
            raise ValueError(f"unknown oc_mode {self.oc_mode!r}")

    @property
    def rate(self) -> float:
        return self.r / 100.0


@dataclass(frozen=True)
class KpiReport:
    kpi1: float  # kWh/yr
    kpi2: float  # kgCO2/yr
    kpi3: float | None  # %, None when there is no load
    kpi4: float  # kW
    kpi5: float  # currency
    kpi6: float  # currency
    kpi7: int | None  # years, None = never
    kpi8: float | None  # currency/kWh, None without energy
    currency: str = "EUR"

    UNITS = {"kpi1": "kWh", "kpi2": "kgCO2", "kpi3": "%", "kpi4": "kW", "kpi5": "currency",
             "kpi6": "currency", "kpi7": "years", "kpi8": "currency/kWh"}

    @property
    def payback_label(self) -> str:
        return "Never" if self.kpi7 is None else str(self.kpi7)

    def as_dict(self) -> dict:
        return {f"kpi{j}": getattr(self, f"kpi{j}") for j in range(1, 9)}


def discounted_annuity(r: float, n: int) -> float:
    """Sum of ``(1 + r) ** -k`` for k = 1..n; ``r`` is a fraction."""
    if n < 0:
        raise ValueError("number of periods must be non-negative")
    if r == 0:
        return float(n)
    # expm1/log1p keep tiny rates from cancelling to zero
    return -math.expm1(-n * math.log1p(r)) / r


def annual_energy(network: NetworkModel, econ: EconomicModel) -> float:
    return sum(g.p_nom * g.econ.cf / 100.0 for g in network.generators) * econ.hours_per_year


def technical_kpis(network: NetworkModel, econ: EconomicModel):
    """(kpi1, kpi2, kpi3, kpi4)."""
    h = econ.hours_per_year
    kpi1 = sum(g.p_nom * g.econ.cf / 100.0 * h for g in network.generators)
    kpi2 = sum(g.p_nom * g.econ.cf / 100.0 * h * g.econ.ghg for g in network.generators)
    load = sum(ld.p_load for ld in network.loads)
    mean_gen = sum(g.p_nom * g.econ.cf / 100.0 for g in network.generators)
    kpi3 = mean_gen / load * 100.0 if load > 0 else None
    kpi4 = sum(st.p_stor for st in network.storages)
    return kpi1, kpi2, kpi3, kpi4


def yearly_income(network: NetworkModel, econ: EconomicModel) -> float:
    return annual_energy(network, econ) * econ.ep + econ.fi


def lifetime_cost(network: NetworkModel, econ: EconomicModel) -> float:
    gens = network.generators
    r = econ.rate
    annuity = discounted_annuity(r, econ.ul)
    upfront = econ.ic + sum(g.econ.ic for g in gens)
    yearly = econ.omc + sum(g.econ.mc for g in gens)
    if econ.oc_mode == OC_LITERAL:
        upfront += sum(g.econ.oc for g in gens)
    else:
        yearly += sum(g.econ.oc * g.p_nom * g.econ.cf / 100.0 * econ.hours_per_year
                      for g in gens)
    salvage = (econ.rv - sum(g.econ.rv for g in gens)) / (1.0 + r) ** econ.ul
    return upfront + annuity * yearly - salvage


def economic_kpis(network: NetworkModel, econ: EconomicModel):
    """(kpi5, kpi6, kpi8)."""
    annuity = discounted_annuity(econ.rate, econ.ul)
    kpi5 = annuity * yearly_income(network, econ)
    kpi6 = lifetime_cost(network, econ)
    energy = annual_energy(network, econ)
    kpi8 = kpi6 / (annuity * energy) if energy > 0 else None
    return kpi5, kpi6, kpi8


def payback(network: NetworkModel, econ: EconomicModel) -> int | None:
    """First year whose cumulative discounted income covers the lifetime cost."""
    cost = lifetime_cost(network, econ)
    income = yearly_income(network, econ)
    for year in range(1, econ.ul + 1):
        if discounted_annuity(econ.rate, year) * income >= cost:
            return year
    return None


def kpi_report(network: NetworkModel, econ: EconomicModel) -> KpiReport:
    kpi1, kpi2, kpi3, kpi4 = technical_kpis(network, econ)
    kpi5, kpi6, kpi8 = economic_kpis(network, econ)
    return KpiReport(kpi1, kpi2, kpi3, kpi4, kpi5, kpi6, payback(network, econ), kpi8,
                     econ.currency)
