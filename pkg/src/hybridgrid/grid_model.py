"""Hybrid AC/DC network description, validation and per-unit normalization.

Physical records keep the units of the input document (kV, km, ohm/km,
nF/km, kA, kVA, kW, kVAr).  Per-unit quantities are derived on demand from a
:class:`PerUnitSystem` attached to the model, so the physical values are never
overwritten and a normalized model can always be turned back into the exact
original.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field, replace
from typing import Any, Iterable, Mapping

AC = "AC"
DC = "DC"
GRID_FORMING = "grid-forming"
GRID_FOLLOWING = "grid-following"
GRID_MODES = ("consume", "supply", "either")

DEFAULT_OMEGA = 100.0 * math.pi


class NetworkError(ValueError):
    """Raised for a malformed or inconsistent network document.

    ``locus`` names the offending record, e.g. ``"lines[1]"``.
    """

    def __init__(self, message: str, locus: str | None = None):
        self.locus = locus
        super().__init__(f"{locus}: {message}" if locus else message)


@dataclass(frozen=True)
class BusRecord:
    id: int
    v_nominal: float  # kV
    kind: str  # AC | DC
    v_max_pu: float = 1.05
    v_min_pu: float = 0.95


@dataclass(frozen=True)
class LineRecord:
    id: int
    i: int
    k: int
    length: float  # km
    r_per_km: float  # ohm/km
    x_per_km: float | None  # ohm/km, None on DC lines
    c_per_km: float | None  # nF/km, None on DC lines
    i_max: float  # kA
    kind: str

    @property
    def r(self) -> float:
        return self.r_per_km * self.length

    @property
    def x(self) -> float:
        return (self.x_per_km or 0.0) * self.length

    @property
    def capacitance(self) -> float:
        """Total line capacitance in farads."""
        return (self.c_per_km or 0.0) * self.length * 1e-9


@dataclass(frozen=True)
class TransformerRecord:
    id: int
    i: int
    k: int
    s_n: float  # kVA
    v_ccl_pct: float
    v_rccl_pct: float
    v_ln: float  # kV

    @property
    def z_abs(self) -> float:
        """Short-circuit impedance magnitude in ohm."""
        return self.v_ccl_pct * self.v_ln**2 / (100.0 * self.s_n) * 1e3

    @property
    def r(self) -> float:
        return self.v_rccl_pct * self.v_ln**2 / (100.0 * self.s_n) * 1e3

    @property
    def x(self) -> float:
        return math.sqrt(max(self.z_abs**2 - self.r**2, 0.0))


@dataclass(frozen=True)
class ConverterRecord:
    id: int
    i: int  # input bus
    k: int  # output bus
    s_n: float  # kVA
    efficiency: float
    control: str

    @property
    def grid_forming(self) -> bool:
        return self.control == GRID_FORMING


@dataclass(frozen=True)
class GeneratorEconomics:
    ic: float = 0.0  # currency
    rv: float = 0.0  # currency
    mc: float = 0.0  # currency/year
    oc: float = 0.0  # currency/kWh
    cf: float = 0.0  # %
    ghg: float = 0.0  # kgCO2/kWh


@dataclass(frozen=True)
class GeneratorRecord:
    id: int
    bus: int
    p_nom: float  # kW
    p_min: float
    q_nom: float  # kVAr
    q_min: float
    econ: GeneratorEconomics = field(default_factory=GeneratorEconomics)


@dataclass(frozen=True)
class LoadRecord:
    id: int
    bus: int
    p_load: float  # kW, demanded magnitude
    q_load: float = 0.0


@dataclass(frozen=True)
class StorageRecord:
    id: int
    bus: int
    p_stor: float  # kW


@dataclass(frozen=True)
class ExternalGridRecord:
    id: int
    bus: int
    mode: str = "either"


@dataclass(frozen=True)
class PerUnitSystem:
    s_base: float  # kVA
    v_base: tuple[float, ...]  # kV, indexed by bus id
    omega: float

    @property
    def z_base(self) -> tuple[float, ...]:
        """Base impedance per bus in ohm."""
        return tuple(v * v / self.s_base * 1e3 for v in self.v_base)

    def i_base(self, bus: int) -> float:
        """Base current of ``bus`` in kA."""
        return self.s_base / self.v_base[bus] * 1e-3

    def power(self, kw: float) -> float:
        return kw / self.s_base

    def voltage(self, bus: int, kv: float) -> float:
        return kv / self.v_base[bus]


@dataclass(frozen=True)
class BranchAdmittance:
    c: float  # conductance, pu
    s: float  # susceptance, pu (negative for inductive branches)
    b_shunt: float  # total shunt susceptance, pu


@dataclass(frozen=True)
class NetworkModel:
    buses: tuple[BusRecord, ...]
    lines: tuple[LineRecord, ...] = ()
    transformers: tuple[TransformerRecord, ...] = ()
    converters: tuple[ConverterRecord, ...] = ()
    generators: tuple[GeneratorRecord, ...] = ()
    loads: tuple[LoadRecord, ...] = ()
    storages: tuple[StorageRecord, ...] = ()
    external_grids: tuple[ExternalGridRecord, ...] = ()
    omega: float = DEFAULT_OMEGA
    name: str = ""
    pu: PerUnitSystem | None = None

    @property
    def n_bus(self) -> int:
        return len(self.buses)

    @property
    def is_normalized(self) -> bool:
        return self.pu is not None

    def bus(self, bus_id: int) -> BusRecord:
        return self.buses[bus_id]

    def is_ac(self, bus_id: int) -> bool:
        return self.buses[bus_id].kind == AC

    @property
    def branches(self) -> tuple[LineRecord | TransformerRecord, ...]:
        return self.lines + self.transformers

    def adjacency(self, include_converters: bool = True) -> dict[int, frozenset[int]]:
        """Adjacent bus sets, symmetric by construction."""
        adj: dict[int, set[int]] = {b.id: set() for b in self.buses}
        edges: list[tuple[int, int]] = [(br.i, br.k) for br in self.branches]
        if include_converters:
            edges += [(cv.i, cv.k) for cv in self.converters]
        for i, k in edges:
            if i == k:
                continue
            adj[i].add(k)
            adj[k].add(i)
        return {i: frozenset(v) for i, v in adj.items()}

    def islands(self, include_converters: bool = True) -> list[list[int]]:
        """Connected components as sorted bus-id lists."""
        adj = self.adjacency(include_converters)
        seen: set[int] = set()
        out = []
        for start in sorted(adj):
            if start in seen:
                continue
            stack, comp = [start], []
            seen.add(start)
            while stack:
                b = stack.pop()
                comp.append(b)
                for nb in adj[b]:
                    if nb not in seen:
                        seen.add(nb)
                        stack.append(nb)
            out.append(sorted(comp))
        return out

    def installed_capacity(self) -> float:
        return sum(g.p_nom for g in self.generators)


# -- parsing ---------------------------------------------------------------


def _num(rec: Mapping[str, Any], key: str, locus: str, default: Any = ..., positive=False,
         nonneg=False) -> float:
    if key not in rec or rec[key] is None:
        if default is ...:
            raise NetworkError(f"missing field '{key}'", locus)
        return default
    value = rec[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise NetworkError(f"field '{key}' must be a number, got {value!r}", locus)
    value = float(value)
    if not math.isfinite(value):
        raise NetworkError(f"field '{key}' is not finite", locus)
    if positive and value <= 0:
        raise NetworkError(f"non-positive '{key}' ({value})", locus)
    if nonneg and value < 0:
        raise NetworkError(f"negative '{key}' ({value})", locus)
    return value


def _kind(value: Any, locus: str) -> str:
    kind = str(value).upper()
    if kind not in (AC, DC):
        raise NetworkError(f"kind must be AC or DC, got {value!r}", locus)
    return kind


def _ids(items: list[Mapping[str, Any]], section: str) -> list[int]:
    ids = []
    for n, rec in enumerate(items):
        ids.append(int(rec.get("id", n)))
    if len(set(ids)) != len(ids):
        dup = sorted({i for i in ids if ids.count(i) > 1})
        raise NetworkError(f"duplicate ids {dup}", section)
    return ids


def parse_network(document: Mapping[str, Any]) -> NetworkModel:
    """Build a :class:`NetworkModel` from a decoded network document."""
    if not isinstance(document, Mapping):
        raise NetworkError("network document must be a mapping")

    raw_buses = list(document.get("buses", []))
    bus_ids = _ids(raw_buses, "buses")
    if sorted(bus_ids) != list(range(len(bus_ids))):
        raise NetworkError("bus ids must be unique and contiguous from 0", "buses")
    buses: list[BusRecord | None] = [None] * len(bus_ids)
    for n, (bid, rec) in enumerate(zip(bus_ids, raw_buses)):
        loc = f"buses[{n}]"
        v_max = _num(rec, "v_max_pu", loc, 1.05, positive=True)
        v_min = _num(rec, "v_min_pu", loc, 0.95, positive=True)
        if not v_min < 1.0 < v_max:
            raise NetworkError(f"voltage band must bracket 1.0 pu ({v_min}, {v_max})", loc)
        buses[bid] = BusRecord(bid, _num(rec, "v_nominal_kv", loc, positive=True),
                               _kind(rec.get("kind"), loc), v_max, v_min)
    n_bus = len(buses)

    def bus_ref(rec, key, loc):
        if key not in rec:
            raise NetworkError(f"missing field '{key}'", loc)
        b = rec[key]
        if isinstance(b, bool) or not isinstance(b, int) or not 0 <= b < n_bus:
            raise NetworkError(f"unknown bus id {b!r}", loc)
        return b

    def endpoints(rec, loc):
        i, k = bus_ref(rec, "from_bus", loc), bus_ref(rec, "to_bus", loc)
        if i == k:
            raise NetworkError("endpoints must be distinct", loc)
        return i, k

    lines = []
    raw = list(document.get("lines", []))
    for n, (lid, rec) in enumerate(zip(_ids(raw, "lines"), raw)):
        loc = f"lines[{n}]"
        i, k = endpoints(rec, loc)
        kind = _kind(rec.get("kind"), loc)
        if buses[i].kind != kind or buses[k].kind != kind:
            raise NetworkError(f"{kind} line joins buses of kind "
                               f"{buses[i].kind}/{buses[k].kind}", loc)
        x = c = None
        if kind == DC:
            if rec.get("x_ohm_per_km") is not None:
                raise NetworkError("reactive parameter on DC line", loc)
            if rec.get("c_nf_per_km") is not None:
                raise NetworkError("capacitive parameter on DC line", loc)
        else:
            x = _num(rec, "x_ohm_per_km", loc, 0.0, nonneg=True)
            c = _num(rec, "c_nf_per_km", loc, 0.0, nonneg=True)
        lines.append(LineRecord(lid, i, k, _num(rec, "length_km", loc, positive=True),
                                _num(rec, "r_ohm_per_km", loc, positive=True), x, c,
                                _num(rec, "i_max_ka", loc, positive=True), kind))

    transformers = []
    raw = list(document.get("transformers", []))
    for n, (tid, rec) in enumerate(zip(_ids(raw, "transformers"), raw)):
        loc = f"transformers[{n}]"
        i, k = endpoints(rec, loc)
        vcc = _num(rec, "v_ccl_pct", loc, positive=True)
        vr = _num(rec, "v_rccl_pct", loc, positive=True)
        if vr > vcc:
            raise NetworkError("resistive short-circuit voltage exceeds total "
                               f"({vr} > {vcc})", loc)
        if buses[i].kind != AC or buses[k].kind != AC:
            raise NetworkError("transformer endpoints must be AC buses", loc)
        v_ln = _num(rec, "v_ln_kv", loc, buses[i].v_nominal, positive=True)
        transformers.append(TransformerRecord(tid, i, k, _num(rec, "s_n_kva", loc, positive=True),
                                              vcc, vr, v_ln))

    converters = []
    raw = list(document.get("converters", []))
    for n, (cid, rec) in enumerate(zip(_ids(raw, "converters"), raw)):
        loc = f"converters[{n}]"
        i, k = bus_ref(rec, "from_bus", loc), bus_ref(rec, "to_bus", loc)
        eta = _num(rec, "efficiency", loc, positive=True)
        if eta > 1.0:
            raise NetworkError(f"efficiency must lie in (0, 1], got {eta}", loc)
        control = str(rec.get("control", GRID_FOLLOWING)).lower()
        if control not in (GRID_FORMING, GRID_FOLLOWING):
            raise NetworkError(f"unknown control mode {control!r}", loc)
        converters.append(ConverterRecord(cid, i, k, _num(rec, "s_n_kva", loc, positive=True),
                                          eta, control))

    generators = []
    raw = list(document.get("generators", []))
    for n, (gid, rec) in enumerate(zip(_ids(raw, "generators"), raw)):
        loc = f"generators[{n}]"
        p_nom = _num(rec, "p_gen_nom_kw", loc)
        p_min = _num(rec, "p_gen_min_kw", loc, 0.0)
        q_nom = _num(rec, "q_gen_nom_kvar", loc, 0.0)
        q_min = _num(rec, "q_gen_min_kvar", loc, 0.0)
        if p_min > p_nom or q_min > q_nom:
            raise NetworkError("minimum power exceeds nominal power", loc)
        e = rec.get("economics") or {}
        econ = GeneratorEconomics(
            ic=_num(e, "ic", loc, 0.0, nonneg=True),
            rv=_num(e, "rv", loc, 0.0, nonneg=True),
            mc=_num(e, "mc_per_year", loc, 0.0, nonneg=True),
            oc=_num(e, "oc_per_kwh", loc, 0.0, nonneg=True),
            cf=_num(e, "cf_pct", loc, 0.0, nonneg=True),
            ghg=_num(e, "ghg_kg_per_kwh", loc, 0.0, nonneg=True),
        )
        if econ.cf > 100.0:
            raise NetworkError(f"capacity factor above 100% ({econ.cf})", loc)
        generators.append(GeneratorRecord(gid, bus_ref(rec, "bus", loc), p_nom, p_min,
                                          q_nom, q_min, econ))

    loads = []
    raw = list(document.get("loads", []))
    for n, (did, rec) in enumerate(zip(_ids(raw, "loads"), raw)):
        loc = f"loads[{n}]"
        b = bus_ref(rec, "bus", loc)
        q = _num(rec, "q_load_kvar", loc, 0.0)
        if q != 0.0 and buses[b].kind == DC:
            raise NetworkError("reactive demand on DC bus", loc)
        loads.append(LoadRecord(did, b, _num(rec, "p_load_kw", loc, nonneg=True), q))

    storages = []
    raw = list(document.get("storages", []))
    for n, (sid, rec) in enumerate(zip(_ids(raw, "storages"), raw)):
        loc = f"storages[{n}]"
        storages.append(StorageRecord(sid, bus_ref(rec, "bus", loc),
                                      _num(rec, "p_stor_kw", loc, nonneg=True)))

    grids = []
    raw = list(document.get("external_grids", []))
    for n, (xid, rec) in enumerate(zip(_ids(raw, "external_grids"), raw)):
        loc = f"external_grids[{n}]"
        mode = str(rec.get("mode", "either"))
        if mode not in GRID_MODES:
            raise NetworkError(f"unknown external grid mode {mode!r}", loc)
        grids.append(ExternalGridRecord(xid, bus_ref(rec, "bus", loc), mode))

    omega = _num(document, "omega_rad_s", "network", DEFAULT_OMEGA, positive=True)
    return NetworkModel(tuple(buses), tuple(lines), tuple(transformers), tuple(converters),
                        tuple(generators), tuple(loads), tuple(storages), tuple(grids),
                        omega, str(document.get("name", "")))


# -- per unit ----------------------------------------------------------------


def branch_reference_bus(record: LineRecord | TransformerRecord, v_base: Iterable[float]) -> int:
    """Bus whose voltage base the branch impedance is referred to.

    Lines use their first endpoint.  Transformers use the winding whose
    nominal voltage equals ``v_ln``, falling back to the first endpoint.
    """
    if isinstance(record, TransformerRecord):
        v_base = tuple(v_base)
        for b in (record.i, record.k):
            if math.isclose(v_base[b], record.v_ln, rel_tol=1e-9):
                return b
    return record.i


def branch_admittance(record: LineRecord | TransformerRecord,
                      pu: PerUnitSystem) -> BranchAdmittance:
    if isinstance(record, TransformerRecord):
        if record.v_rccl_pct > record.v_ccl_pct:
            raise NetworkError("transformer reactance would be imaginary",
                               f"transformers[{record.id}]")
        r, x, b = record.r, record.x, 0.0
    else:
        r = record.r
        if record.kind == DC:
            x, b = 0.0, 0.0
        else:
            x, b = record.x, pu.omega * record.capacitance
    z2 = r * r + x * x
    if z2 == 0.0:
        raise NetworkError("zero branch impedance", f"branch {record.id}")
    z_base = pu.z_base[branch_reference_bus(record, pu.v_base)]
    return BranchAdmittance(c=r / z2 * z_base, s=-x / z2 * z_base, b_shunt=b * z_base)


def per_unit_normalize(model: NetworkModel, s_base: float = 100.0) -> NetworkModel:
    """Attach a per-unit system; every bus voltage base is its nominal voltage."""
    if not s_base > 0:
        raise ValueError(f"s_base must be positive, got {s_base}")
    pu = PerUnitSystem(float(s_base), tuple(b.v_nominal for b in model.buses), model.omega)
    return replace(model, pu=pu)


def denormalize(model: NetworkModel) -> NetworkModel:
    return replace(model, pu=None)


# -- diagnostics --------------------------------------------------------------


def validate(model: NetworkModel) -> list[str]:
    """Return a list of human-readable problems; empty when the model is solvable."""
    diags = []
    for cv in model.converters:
        if cv.i == cv.k:
            diags.append(f"converter {cv.id}: both endpoints on bus {cv.i}")
    for ln in model.lines:
        vi, vk = model.buses[ln.i].v_nominal, model.buses[ln.k].v_nominal
        if not math.isclose(vi, vk, rel_tol=1e-9):
            diags.append(f"line {ln.id}: endpoint nominal voltages differ ({vi} / {vk} kV)")
    for tr in model.transformers:
        if not any(math.isclose(model.buses[b].v_nominal, tr.v_ln, rel_tol=1e-9)
                   for b in (tr.i, tr.k)):
            diags.append(f"transformer {tr.id}: v_ln {tr.v_ln} kV matches neither winding")
    for section, items in (("generator", model.generators), ("load", model.loads),
                           ("storage", model.storages), ("external grid", model.external_grids)):
        for it in items:
            if not 0 <= it.bus < model.n_bus:
                diags.append(f"{section} {it.id}: unknown bus {it.bus}")

    islands = model.islands(include_converters=True)
    if len(islands) > 1:
        diags.append(f"network is not connected ({len(islands)} islands)")
    references = {g.bus for g in model.external_grids}
    references |= {cv.k for cv in model.converters if cv.grid_forming and cv.i != cv.k}
    devices = {it.bus for it in model.generators + model.loads + model.storages}
    for comp in islands:
        # a lone bus with nothing attached has nothing to balance
        if len(comp) == 1 and comp[0] not in devices and not model.converters:
            continue
        if not references.intersection(comp):
            diags.append(f"island without voltage reference: buses {comp}")
    return diags


def ac_angle_references(model: NetworkModel) -> dict[int, int]:
    """Map each AC bus to the angle-reference bus of its AC branch island.

    The reference is the external-grid bus when the island has one, else the
    lowest bus id.
    """
    adj: dict[int, set[int]] = defaultdict(set)
    for br in model.branches:
        if model.is_ac(br.i) and model.is_ac(br.k):
            adj[br.i].add(br.k)
            adj[br.k].add(br.i)
    grid_buses = {g.bus for g in model.external_grids}
    ref: dict[int, int] = {}
    for b in model.buses:
        if b.kind != AC or b.id in ref:
            continue
        comp, stack = {b.id}, [b.id]
        while stack:
            for nb in adj[stack.pop()]:
                if nb not in comp:
                    comp.add(nb)
                    stack.append(nb)
        anchors = sorted(comp & grid_buses) or sorted(comp)
        for member in comp:
            ref[member] = anchors[0]
    return ref
