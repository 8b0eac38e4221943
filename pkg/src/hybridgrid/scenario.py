"""Operating scenarios for the power flow and the techno-economic study."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping

from .grid_model import GRID_MODES, LoadRecord, NetworkModel, StorageRecord
from .kpi import EconomicModel, EquipmentItem, KpiReport, kpi_report

ECONOMIC_KINDS = ("baseline", "no-battery", "battery-flex", "vb-flex")


@dataclass(frozen=True)
class OpfScenario:
    """Objective plus the operating assumptions of one power-flow run.

    ``storage_fractions`` and ``grid_modes`` override the scenario-wide
    ``storage_fraction`` / ``grid_mode`` for individual storage and external
    grid ids.
    """

    objective: str = "h1"
    storage_fraction: float = 0.5
    grid_mode: str = "consume"
    storage_fractions: Mapping[int, float] = field(default_factory=dict)
    grid_modes: Mapping[int, str] = field(default_factory=dict)

    def __post_init__(self):
        from .opf import check_objective

        object.__setattr__(self, "objective", check_objective(self.objective))
        for frac in (self.storage_fraction, *self.storage_fractions.values()):
            if not 0.0 <= frac <= 1.0:
                raise ValueError(f"storage fraction must lie in [0, 1], got {frac}")
        for mode in (self.grid_mode, *self.grid_modes.values()):
            if mode not in GRID_MODES:
                raise ValueError(f"unknown grid mode {mode!r}")


@dataclass(frozen=True)
class EconomicScenario:
    kind: str = "baseline"
    price_per_mwh: float = 224.17
    hours_per_day: float = 1.0
    days_per_year: float = 365.0

    def __post_init__(self):
        if self.kind not in ECONOMIC_KINDS:
            raise ValueError(f"unknown economic scenario {self.kind!r}; "
                             f"expected one of {ECONOMIC_KINDS}")


def with_grid_mode(network: NetworkModel, mode: str, only_either: bool = False) -> NetworkModel:
    """Set the mode of every external grid (or only of those still on ``either``)."""
    if mode not in GRID_MODES:
        raise ValueError(f"unknown grid mode {mode!r}")
    grids = tuple(g if only_either and g.mode != "either" else replace(g, mode=mode)
                  for g in network.external_grids)
    return replace(network, external_grids=grids)


def apply_opf_scenario(network: NetworkModel, scenario: OpfScenario) -> NetworkModel:
    """Storages become fixed loads of ``fraction * p_stor``; grid bounds follow the mode."""
    unknown = set(scenario.storage_fractions) - {st.id for st in network.storages}
    if unknown:
        raise ValueError(f"scenario references unknown storage ids {sorted(unknown)}")
    unknown = set(scenario.grid_modes) - {g.id for g in network.external_grids}
    if unknown:
        raise ValueError(f"scenario references unknown external grid ids {sorted(unknown)}")
    next_id = max((ld.id for ld in network.loads), default=-1) + 1
    loads = list(network.loads)
    for st in network.storages:
        frac = scenario.storage_fractions.get(st.id, scenario.storage_fraction)
        if frac > 0:
            loads.append(LoadRecord(next_id, st.bus, frac * st.p_stor))
            next_id += 1
    grids = tuple(replace(g, mode=scenario.grid_modes.get(g.id, scenario.grid_mode))
                  for g in network.external_grids)
    return replace(network, loads=tuple(loads), storages=(), external_grids=grids)


def flexibility_income(price_per_mwh: float, power_kw: float, hours_per_day: float,
                       days_per_year: float) -> float:
    """Yearly balancing-market income for ``power_kw`` offered a few hours a day."""
    for name, v in (("price", price_per_mwh), ("power", power_kw),
                    ("hours_per_day", hours_per_day), ("days_per_year", days_per_year)):
        if v < 0:
            raise ValueError(f"{name} must be non-negative")
    return price_per_mwh * power_kw * hours_per_day * days_per_year / 1000.0


def _battery_items(items: tuple[EquipmentItem, ...]) -> list[EquipmentItem]:
    return [it for it in items if "battery" in it.tags]


def apply_economic_scenario(base: EconomicModel, network: NetworkModel,
                            scenario: EconomicScenario) -> tuple[EconomicModel, NetworkModel]:
    """Return the economic model and network seen by ``scenario``.

    Battery removal subtracts the investment and residual value of every
    equipment item tagged ``battery``.  In the virtual-battery case the
    physical battery is gone but its flexible power stays available.
    """
    if scenario.kind not in ECONOMIC_KINDS:
        raise ValueError(f"unknown economic scenario {scenario.kind!r}")
    econ, net = base, network
    if scenario.kind in ("no-battery", "vb-flex"):
        removed = _battery_items(base.equipment)
        econ = replace(econ,
                       ic=econ.ic - sum(it.investment_cost for it in removed),
                       rv=econ.rv - sum(it.residual_value for it in removed),
                       equipment=tuple(it for it in base.equipment if it not in removed))
    if scenario.kind == "no-battery":
        net = replace(network, storages=())
    elif scenario.kind == "vb-flex":
        net = replace(network, storages=tuple(StorageRecord(st.id, st.bus, st.p_stor)
                                              for st in network.storages))
    if scenario.kind in ("battery-flex", "vb-flex"):
        power = sum(st.p_stor for st in net.storages)
        income = flexibility_income(scenario.price_per_mwh, power, scenario.hours_per_day,
                                    scenario.days_per_year)
        # market income is settled in whole cents
        econ = replace(econ, fi=round(income, 2))
    return econ, net


def economic_report(base: EconomicModel, network: NetworkModel,
                    scenario: EconomicScenario) -> KpiReport:
    """KPIs of ``network`` under ``scenario``."""
    econ, net = apply_economic_scenario(base, network, scenario)
    return kpi_report(net, econ)
