"""Versioned JSON documents: networks, economics, scenarios, measurements, solutions.

Every document carries ``"format_version": 1``.  Field names follow the
symbols used throughout the package (``v_ccl_pct``, ``p_gen_nom_kw``, ...),
with the physical unit as suffix.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

from .grid_model import NetworkModel, parse_network
from .kpi import EconomicModel, EquipmentItem
from .opf import (OBJECTIVE_UNITS, BranchResult, BusResult, ConverterResult,
                  OpfSolution)
from .scenario import ECONOMIC_KINDS, EconomicScenario, OpfScenario

FORMAT_VERSION = 1
DATA_ENV = "HYBRIDGRID_DATA"

CEDER_NETWORK = "ceder.json"
CEDER_ECONOMICS = "ceder-econ.json"
CEDER_MEASUREMENTS = "ceder-measurements.json"
CEDER_SCENARIOS = "ceder-scenarios.json"


class FormatError(ValueError):
    """A document that cannot be read or does not have the expected shape."""


# -- files ---------------------------------------------------------------------


def data_path(name: str) -> Path:
    """Locate a fixture: ``$HYBRIDGRID_DATA/name`` if present, else the bundled copy."""
    env = os.environ.get(DATA_ENV)
    if env:
        candidate = Path(env) / name
        if candidate.is_file():
            return candidate
    bundled = resources.files("hybridgrid") / "data" / name
    return Path(str(bundled))


def read_document(path: str | os.PathLike) -> dict:
    p = Path(path)
    if not p.is_file():
        raise FormatError(f"{p}: no such file")
    try:
        doc = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{p}: not valid JSON ({exc.msg}, line {exc.lineno})") from exc
    return check_version(doc, str(p))


def check_version(doc: Any, where: str = "document") -> dict:
    if not isinstance(doc, dict):
        raise FormatError(f"{where}: top level must be an object")
    version = doc.get("format_version")
    if version is None:
        raise FormatError(f"{where}: missing format_version")
    if version != FORMAT_VERSION:
        raise FormatError(f"{where}: unsupported format_version {version!r}")
    return doc


def write_document(doc: Mapping[str, Any], path: str | os.PathLike) -> None:
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


# -- network -------------------------------------------------------------------


def load_network(path: str | os.PathLike) -> NetworkModel:
    return parse_network(read_document(path))


def network_document(model: NetworkModel) -> dict:
    """Inverse of :func:`~hybridgrid.grid_model.parse_network` (physical units)."""
    doc: dict[str, Any] = {"format_version": FORMAT_VERSION, "name": model.name,
                           "omega_rad_s": model.omega}
    doc["buses"] = [{"id": b.id, "v_nominal_kv": b.v_nominal, "kind": b.kind,
                     "v_max_pu": b.v_max_pu, "v_min_pu": b.v_min_pu} for b in model.buses]
    lines = []
    for ln in model.lines:
        rec = {"id": ln.id, "from_bus": ln.i, "to_bus": ln.k, "length_km": ln.length,
               "r_ohm_per_km": ln.r_per_km}
        if ln.kind == "AC":
            rec["x_ohm_per_km"] = ln.x_per_km
            rec["c_nf_per_km"] = ln.c_per_km
        rec["i_max_ka"] = ln.i_max
        rec["kind"] = ln.kind
        lines.append(rec)
    doc["lines"] = lines
    doc["transformers"] = [{"id": t.id, "from_bus": t.i, "to_bus": t.k, "s_n_kva": t.s_n,
                            "v_ccl_pct": t.v_ccl_pct, "v_rccl_pct": t.v_rccl_pct,
                            "v_ln_kv": t.v_ln} for t in model.transformers]
    doc["converters"] = [{"id": c.id, "from_bus": c.i, "to_bus": c.k, "s_n_kva": c.s_n,
                          "efficiency": c.efficiency, "control": c.control}
                         for c in model.converters]
    doc["generators"] = [{"id": g.id, "bus": g.bus, "p_gen_nom_kw": g.p_nom,
                          "p_gen_min_kw": g.p_min, "q_gen_nom_kvar": g.q_nom,
                          "q_gen_min_kvar": g.q_min,
                          "economics": {"ic": g.econ.ic, "rv": g.econ.rv,
                                        "mc_per_year": g.econ.mc,
                                        "oc_per_kwh": g.econ.oc, "cf_pct": g.econ.cf,
                                        "ghg_kg_per_kwh": g.econ.ghg}}
                         for g in model.generators]
    doc["loads"] = [{"id": d.id, "bus": d.bus, "p_load_kw": d.p_load, "q_load_kvar": d.q_load}
                    for d in model.loads]
    doc["storages"] = [{"id": s.id, "bus": s.bus, "p_stor_kw": s.p_stor}
                       for s in model.storages]
    doc["external_grids"] = [{"id": x.id, "bus": x.bus, "mode": x.mode}
                             for x in model.external_grids]
    return doc


def dump_network(model: NetworkModel, path: str | os.PathLike) -> None:
    write_document(network_document(model), path)


# -- economics -----------------------------------------------------------------


@dataclass(frozen=True)
class FlexibilityParameters:
    price_per_mwh: float = 224.17
    hours_per_day: float = 1.0
    days_per_year: float = 365.0

    def scenario(self, kind: str) -> EconomicScenario:
        return EconomicScenario(kind, self.price_per_mwh, self.hours_per_day,
                                self.days_per_year)


def _field(rec: Mapping[str, Any], key: str, where: str, default: Any = ...) -> Any:
    if key in rec and rec[key] is not None:
        value = rec[key]
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise FormatError(f"{where}: field '{key}' must be a number")
        return value
    if default is ...:
        raise FormatError(f"{where}: missing field '{key}'")
    return default


def parse_economics(doc: Mapping[str, Any]) -> tuple[EconomicModel, FlexibilityParameters]:
    doc = check_version(doc, "economics document")
    e = doc.get("economics")
    if not isinstance(e, Mapping):
        raise FormatError("economics document: missing 'economics' object")
    equipment = []
    for n, item in enumerate(doc.get("equipment", [])):
        where = f"equipment[{n}]"
        if not isinstance(item, Mapping) or "name" not in item:
            raise FormatError(f"{where}: each item needs a name")
        equipment.append(EquipmentItem(str(item["name"]),
                                       float(_field(item, "investment_cost", where)),
                                       float(_field(item, "residual_value", where, 0.0)),
                                       tuple(str(t) for t in item.get("tags", ()))))
    try:
        econ = EconomicModel(
            ic=float(_field(e, "ic", "economics")),
            rv=float(_field(e, "rv", "economics", 0.0)),
            omc=float(_field(e, "omc_per_year", "economics", 0.0)),
            r=float(_field(e, "discount_rate_pct", "economics")),
            ul=int(_field(e, "useful_life_years", "economics")),
            ep=float(_field(e, "electricity_price_per_kwh", "economics")),
            fi=float(_field(e, "flexibility_income_per_year", "economics", 0.0)),
            hours_per_year=float(_field(e, "hours_per_year", "economics", 8760.0)),
            oc_mode=str(e.get("oc_mode", "energy")),
            currency=str(doc.get("currency", "EUR")),
            equipment=tuple(equipment),
        )
    except ValueError as exc:
        if isinstance(exc, FormatError):
            raise
        raise FormatError(f"economics: {exc}") from exc
    f = doc.get("flexibility") or {}
    flex = FlexibilityParameters(float(_field(f, "price_per_mwh", "flexibility", 224.17)),
                                 float(_field(f, "hours_per_day", "flexibility", 1.0)),
                                 float(_field(f, "days_per_year", "flexibility", 365.0)))
    return econ, flex


def economics_document(econ: EconomicModel,
                       flex: FlexibilityParameters | None = None) -> dict:
    flex = flex or FlexibilityParameters()
    return {
        "format_version": FORMAT_VERSION,
        "currency": econ.currency,
        "economics": {"ic": econ.ic, "rv": econ.rv, "omc_per_year": econ.omc,
                      "discount_rate_pct": econ.r, "useful_life_years": econ.ul,
                      "electricity_price_per_kwh": econ.ep,
                      "flexibility_income_per_year": econ.fi,
                      "hours_per_year": econ.hours_per_year, "oc_mode": econ.oc_mode},
        "equipment": [{"name": it.name, "investment_cost": it.investment_cost,
                       "residual_value": it.residual_value, "tags": list(it.tags)}
                      for it in econ.equipment],
        "flexibility": {"price_per_mwh": flex.price_per_mwh,
                        "hours_per_day": flex.hours_per_day,
                        "days_per_year": flex.days_per_year},
    }


def load_economics(path: str | os.PathLike) -> tuple[EconomicModel, FlexibilityParameters]:
    return parse_economics(read_document(path))


# -- scenarios -----------------------------------------------------------------


def _opf_scenario(rec: Mapping[str, Any], where: str) -> OpfScenario:
    try:
        return OpfScenario(
            objective=str(rec.get("objective", "h1")),
            storage_fraction=float(_field(rec, "storage_fraction", where, 0.5)),
            grid_mode=str(rec.get("grid_mode", "consume")),
            storage_fractions={int(k): float(v)
                               for k, v in (rec.get("storage_fractions") or {}).items()},
            grid_modes={int(k): str(v) for k, v in (rec.get("grid_modes") or {}).items()},
        )
    except ValueError as exc:
        if isinstance(exc, FormatError):
            raise
        raise FormatError(f"{where}: {exc}") from exc


def parse_scenarios(doc: Mapping[str, Any]) -> tuple[dict[str, OpfScenario], list[str]]:
    """Named OPF scenarios and the list of economic scenario kinds."""
    doc = check_version(doc, "scenario document")
    opf: dict[str, OpfScenario] = {}
    for n, rec in enumerate(doc.get("opf_scenarios", [])):
        where = f"opf_scenarios[{n}]"
        name = str(rec.get("name", rec.get("objective", f"S{n}"))).upper()
        opf[name] = _opf_scenario(rec, where)
    kinds = []
    for n, rec in enumerate(doc.get("economic_scenarios", [])):
        kind = str(rec.get("kind", ""))
        if kind not in ECONOMIC_KINDS:
            raise FormatError(f"economic_scenarios[{n}]: unknown kind {kind!r}")
        kinds.append(kind)
    return opf, kinds


def scenarios_document(opf: Mapping[str, OpfScenario], kinds=()) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "opf_scenarios": [{"name": name, "objective": sc.objective,
                           "storage_fraction": sc.storage_fraction, "grid_mode": sc.grid_mode,
                           "storage_fractions": {str(k): v
                                                 for k, v in sc.storage_fractions.items()},
                           "grid_modes": {str(k): v for k, v in sc.grid_modes.items()}}
                          for name, sc in opf.items()],
        "economic_scenarios": [{"kind": k} for k in kinds],
    }


# -- measurements --------------------------------------------------------------

_POWER_UNITS = {"p_w": 1e-3, "p_kw": 1.0, "p_mw": 1e3}
_VOLTAGE_UNITS = {"v_v": 1e-3, "v_kv": 1.0}


@dataclass(frozen=True)
class MeasurementSet:
    """Measured bus active power (kW) and voltage magnitude (kV) for one run."""

    label: str
    p_kw: Mapping[int, float] = field(default_factory=dict)
    v_kv: Mapping[int, float] = field(default_factory=dict)
    scenario: OpfScenario | None = None

    @property
    def bus_ids(self) -> list[int]:
        return sorted(set(self.p_kw) | set(self.v_kv))


def _scaled(rec: Mapping[str, Any], units: Mapping[str, float], where: str) -> float | None:
    present = [k for k in units if rec.get(k) is not None]
    if len(present) > 1:
        raise FormatError(f"{where}: give only one of {sorted(present)}")
    if not present:
        return None
    return float(_field(rec, present[0], where)) * units[present[0]]


def parse_measurements(doc: Mapping[str, Any]) -> dict[str, MeasurementSet]:
    """Measurement sets by upper-case label.

    Power may be given as ``p_w``, ``p_kw`` or ``p_mw`` and voltage as ``v_v`` or
    ``v_kv``; values are normalized to kW and kV.
    """
    doc = check_version(doc, "measurement document")
    out: dict[str, MeasurementSet] = {}
    for n, rec in enumerate(doc.get("scenarios", [])):
        where = f"scenarios[{n}]"
        label = str(rec.get("label", f"S{n}")).upper()
        p, v = {}, {}
        for m, row in enumerate(rec.get("buses", [])):
            loc = f"{where}.buses[{m}]"
            bus = row.get("bus")
            if isinstance(bus, bool) or not isinstance(bus, int):
                raise FormatError(f"{loc}: bus id must be an integer")
            pv = _scaled(row, _POWER_UNITS, loc)
            vv = _scaled(row, _VOLTAGE_UNITS, loc)
            if pv is not None:
                p[bus] = pv
            if vv is not None:
                v[bus] = vv
        scenario = _opf_scenario(rec, where) if "objective" in rec else None
        out[label] = MeasurementSet(label, p, v, scenario)
    return out


def measurements_document(sets: Mapping[str, MeasurementSet]) -> dict:
    scenarios = []
    for label, ms in sets.items():
        rec: dict[str, Any] = {"label": label}
        if ms.scenario is not None:
            rec.update(objective=ms.scenario.objective,
                       storage_fraction=ms.scenario.storage_fraction,
                       grid_mode=ms.scenario.grid_mode)
        rows = []
        for bus in ms.bus_ids:
            row: dict[str, Any] = {"bus": bus}
            if bus in ms.p_kw:
                row["p_kw"] = ms.p_kw[bus]
            if bus in ms.v_kv:
                row["v_kv"] = ms.v_kv[bus]
            rows.append(row)
        rec["buses"] = rows
        scenarios.append(rec)
    return {"format_version": FORMAT_VERSION, "scenarios": scenarios}


def load_measurements(path: str | os.PathLike) -> dict[str, MeasurementSet]:
    return parse_measurements(read_document(path))


# -- solutions -----------------------------------------------------------------


def solution_document(sol: OpfSolution) -> dict:
    """Self-describing solution: objective kind, status and residual norms included."""
    return {
        "format_version": FORMAT_VERSION,
        "objective": sol.objective,
        "objective_value": sol.objective_value,
        "objective_unit": OBJECTIVE_UNITS.get(sol.objective, ""),
        "status": sol.status,
        "feasible": sol.feasible,
        "grid_mode": sol.grid_mode,
        "residuals": dict(sol.residuals),
        "wall_time_s": sol.wall_time,
        "total_generation_kw": sol.total_generation_kw,
        "total_losses_kw": sol.total_losses_kw,
        "generators_kw": {str(k): v for k, v in sol.generators_kw.items()},
        "external_grids_kw": {str(k): v for k, v in sol.external_kw.items()},
        "buses": [{"bus": b.id, "kind": b.kind, "p_kw": b.p_kw, "q_kvar": b.q_kvar,
                   "v_kv": b.v_kv, "delta_rad": b.delta_rad} for b in sol.buses],
        "converters": [{"id": c.id, "from_bus": c.i, "to_bus": c.k,
                        "forward_kw": c.forward_kw, "reverse_kw": c.reverse_kw,
                        "p_in_kw": c.p_in_kw, "p_out_kw": c.p_out_kw, "loss_kw": c.loss_kw}
                       for c in sol.converters],
        "branches": [{"kind": br.kind, "id": br.id, "from_bus": br.i, "to_bus": br.k,
                      "p_from_kw": br.p_ik_kw, "p_to_kw": br.p_ki_kw,
                      "loss_kw": br.loss_kw, "current_ka": br.current_ka}
                     for br in sol.branches],
    }


def parse_solution(doc: Mapping[str, Any]) -> OpfSolution:
    doc = check_version(doc, "solution document")
    try:
        return OpfSolution(
            objective=str(doc["objective"]),
            objective_value=float(doc["objective_value"]),
            status=str(doc["status"]),
            feasible=bool(doc["feasible"]),
            buses=[BusResult(int(b["bus"]), str(b["kind"]), float(b["p_kw"]),
                             None if b["q_kvar"] is None else float(b["q_kvar"]),
                             float(b["v_kv"]), float(b["delta_rad"])) for b in doc["buses"]],
            converters=[ConverterResult(int(c["id"]), int(c["from_bus"]), int(c["to_bus"]),
                                        float(c["forward_kw"]), float(c["reverse_kw"]),
                                        float(c["p_in_kw"]), float(c["p_out_kw"]),
                                        float(c["loss_kw"])) for c in doc.get("converters", [])],
            branches=[BranchResult(str(b["kind"]), int(b["id"]), int(b["from_bus"]),
                                   int(b["to_bus"]), float(b["p_from_kw"]), float(b["p_to_kw"]),
                                   float(b["loss_kw"]), float(b["current_ka"]))
                      for b in doc.get("branches", [])],
            generators_kw={int(k): float(v) for k, v in doc.get("generators_kw", {}).items()},
            external_kw={int(k): float(v) for k, v in doc.get("external_grids_kw", {}).items()},
            total_generation_kw=float(doc.get("total_generation_kw", 0.0)),
            total_losses_kw=float(doc.get("total_losses_kw", 0.0)),
            residuals={str(k): float(v) for k, v in doc.get("residuals", {}).items()},
            wall_time=float(doc.get("wall_time_s", 0.0)),
            grid_mode=str(doc.get("grid_mode", "")),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"solution document: {exc!r}") from exc


def load_solution(path: str | os.PathLike) -> OpfSolution:
    return parse_solution(read_document(path))
