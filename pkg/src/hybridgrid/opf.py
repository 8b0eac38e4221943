"""Polynomial AC/DC optimal power flow.

Decision vector layout (see :class:`StateLayout`): rectangular voltage parts
``e_i`` for every bus and ``f_i`` for AC buses, generator active power (plus
reactive power on AC buses), external-grid exchange, and two nonnegative
directed flows per converter.  A converter ``(i, k)`` draws ``F_fwd`` at bus
``i`` and delivers ``eta * F_fwd`` at ``k``; ``F_rev`` runs the other way.
All residuals are per-unit on the bus voltage bases, so converters and
transformers are ratio-one couplings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import nlp
from .grid_model import (
    AC,
    DC,
    BranchAdmittance,
    LineRecord,
    NetworkModel,
    TransformerRecord,
    ac_angle_references,
    branch_admittance,
    branch_reference_bus,
    per_unit_normalize,
)

OBJECTIVES = ("h1", "h2", "h3", "h4")
OBJECTIVE_UNITS = {"h1": "kW", "h2": "pu^2", "h3": "currency/h", "h4": "kW"}

# Tie-break weights on the solver objective (not part of the reported value):
# discourage circulating converter flow and reactive exchange with the grid.
FLOW_WEIGHT = 1e-4
GRID_Q_WEIGHT = 10.0
# External grid box bound, as a multiple of installed generation.
GRID_CAPACITY_FACTOR = 10.0
# box bounds sit this far outside the physical limits, which are inequalities
BOX_MARGIN = 1.5


def check_objective(kind: str) -> str:
    k = str(kind).lower()
    if k not in OBJECTIVES:
        raise ValueError(f"unknown objective {kind!r}; expected one of {OBJECTIVES}")
    return k


@dataclass(frozen=True)
class StateLayout:
    """Index map of the packed decision vector."""

    e: dict[int, int]
    f: dict[int, int]
    p_gen: dict[int, int]
    q_gen: dict[int, int]
    p_ext: dict[int, int]
    q_ext: dict[int, int]
    f_fwd: dict[int, int]
    f_rev: dict[int, int]
    n: int

    @classmethod
    def build(cls, net: NetworkModel) -> "StateLayout":
        idx = 0
        e, f = {}, {}
        for b in net.buses:
            e[b.id] = idx
            idx += 1
            if b.kind == AC:
                f[b.id] = idx
                idx += 1
        p_gen, q_gen = {}, {}
        for g in net.generators:
            p_gen[g.id] = idx
            idx += 1
            if net.is_ac(g.bus):
                q_gen[g.id] = idx
                idx += 1
        p_ext, q_ext = {}, {}
        for x in net.external_grids:
            p_ext[x.id] = idx
            idx += 1
            if net.is_ac(x.bus):
                q_ext[x.id] = idx
                idx += 1
        f_fwd, f_rev = {}, {}
        for cv in net.converters:
            f_fwd[cv.id], f_rev[cv.id] = idx, idx + 1
            idx += 2
        return cls(e, f, p_gen, q_gen, p_ext, q_ext, f_fwd, f_rev, idx)

    def names(self) -> list[str]:
        out = [""] * self.n
        for label, table in (("e", self.e), ("f", self.f), ("p_gen", self.p_gen),
                             ("q_gen", self.q_gen), ("p_ext", self.p_ext), ("q_ext", self.q_ext),
                             ("f_fwd", self.f_fwd), ("f_rev", self.f_rev)):
            for key, j in table.items():
                out[j] = f"{label}[{key}]"
        return out


@dataclass(frozen=True)
class _Branch:
    kind: str  # "line" | "transformer"
    id: int
    i: int
    k: int
    dc: bool
    adm: BranchAdmittance
    limit: float  # pu: current for lines, apparent power for transformers


@dataclass(frozen=True)
class OpfProblem:
    network: NetworkModel
    objective: str
    layout: StateLayout
    lower: np.ndarray
    upper: np.ndarray
    x0: np.ndarray
    branches: tuple[_Branch, ...]
    eq_labels: tuple[str, ...]
    ineq_labels: tuple[str, ...]
    counts: dict = field(default_factory=dict)
    tie_break: np.ndarray | None = None

    # -- per-bus data -------------------------------------------------------

    @property
    def s_base(self) -> float:
        return self.network.pu.s_base

    def _bus_demand(self):
        p = [0.0] * self.network.n_bus
        q = [0.0] * self.network.n_bus
        for ld in self.network.loads:
            p[ld.bus] += self.network.pu.power(ld.p_load)
            q[ld.bus] += self.network.pu.power(ld.q_load)
        return p, q

    # -- evaluation ---------------------------------------------------------

    def _voltages(self, x):
        lay = self.layout
        e = [x[lay.e[b.id]] for b in self.network.buses]
        f = [x[lay.f[b.id]] if b.id in lay.f else 0.0 for b in self.network.buses]
        v2 = [e[i] * e[i] + f[i] * f[i] if i in lay.f else e[i] * e[i]
              for i in range(len(e))]
        return e, f, v2

    def _branch_terms(self, br: _Branch, e, f, v2):
        """(P_ik, Q_ik, P_ki, Q_ki) leaving each end; Q is None on DC."""
        c, s, b = br.adm.c, br.adm.s, br.adm.b_shunt
        i, k = br.i, br.k
        if br.dc:
            return c * e[i] * (e[i] - e[k]), None, c * e[k] * (e[k] - e[i]), None
        cross = e[i] * e[k] + f[i] * f[k]
        a_ik = v2[i] - cross
        a_ki = v2[k] - cross
        b_ik = e[i] * f[k] - e[k] * f[i]
        p_ik = c * a_ik + s * b_ik
        p_ki = c * a_ki - s * b_ik
        q_ik = c * b_ik - s * a_ik
        q_ki = -c * b_ik - s * a_ki
        if b:
            q_ik = q_ik - 0.5 * b * v2[i]
            q_ki = q_ki - 0.5 * b * v2[k]
        return p_ik, q_ik, p_ki, q_ki

    def _series_current_sq(self, br: _Branch, e, f):
        c, s = br.adm.c, br.adm.s
        de = e[br.i] - e[br.k]
        df = f[br.i] - f[br.k]
        re = c * de - s * df
        im = c * df + s * de
        return re * re + im * im

    def _balances(self, x):
        net, lay = self.network, self.layout
        e, f, v2 = self._voltages(x)
        n_bus = net.n_bus
        p_out: list = [0.0] * n_bus
        q_out: list = [0.0] * n_bus
        for br in self.branches:
            p_ik, q_ik, p_ki, q_ki = self._branch_terms(br, e, f, v2)
            p_out[br.i] = p_out[br.i] + p_ik
            p_out[br.k] = p_out[br.k] + p_ki
            if q_ik is not None:
                q_out[br.i] = q_out[br.i] + q_ik
                q_out[br.k] = q_out[br.k] + q_ki
        for cv in net.converters:
            fwd, rev = x[lay.f_fwd[cv.id]], x[lay.f_rev[cv.id]]
            p_out[cv.i] = p_out[cv.i] + (fwd - cv.efficiency * rev)
            p_out[cv.k] = p_out[cv.k] + (rev - cv.efficiency * fwd)
        p_dem, q_dem = self._bus_demand()
        p_inj: list = [-d for d in p_dem]
        q_inj: list = [-d for d in q_dem]
        for g in net.generators:
            p_inj[g.bus] = p_inj[g.bus] + x[lay.p_gen[g.id]]
            if g.id in lay.q_gen:
                q_inj[g.bus] = q_inj[g.bus] + x[lay.q_gen[g.id]]
        for xg in net.external_grids:
            p_inj[xg.bus] = p_inj[xg.bus] + x[lay.p_ext[xg.id]]
            if xg.id in lay.q_ext:
                q_inj[xg.bus] = q_inj[xg.bus] + x[lay.q_ext[xg.id]]
        return e, f, v2, p_out, q_out, p_inj, q_inj

    def residual_active(self, bus: int, x) -> float:
        """Active power mismatch at ``bus`` (outflow minus injection), pu."""
        *_, p_out, _, p_inj, _ = self._balances(x)
        return p_out[bus] - p_inj[bus]

    def residual_reactive(self, bus: int, x) -> float | None:
        """Reactive mismatch at an AC bus, pu; ``None`` for DC buses."""
        if not self.network.is_ac(bus):
            return None
        *_, q_out, _, q_inj = self._balances(x)
        return q_out[bus] - q_inj[bus]

    def converter_coupling_residual(self, converter_id: int, x) -> float:
        """Input minus output/eta along the dominant flow direction, pu.

        Zero by construction; reported for diagnostics.
        """
        cv = next(c for c in self.network.converters if c.id == converter_id)
        fwd, rev = x[self.layout.f_fwd[cv.id]], x[self.layout.f_rev[cv.id]]
        if fwd >= rev:
            p_in, p_out = fwd, cv.efficiency * fwd
        else:
            p_in, p_out = rev, cv.efficiency * rev
        return p_in - p_out / cv.efficiency

    def equalities(self, x) -> list:
        net = self.network
        e, f, v2, p_out, q_out, p_inj, q_inj = self._balances(x)
        eq = [p_out[b] - p_inj[b] for b in range(net.n_bus)]
        eq += [q_out[b.id] - q_inj[b.id] for b in net.buses if b.kind == AC]
        eq += [v2[cv.k] - 1.0 for cv in net.converters if cv.grid_forming]
        return eq

    def _inequalities(self, x, scaled: bool) -> list:
        net, lay = self.network, self.layout
        e, f, v2 = self._voltages(x)
        out = []
        for b in net.buses:
            out.append(v2[b.id] - b.v_max_pu**2)
            out.append(b.v_min_pu**2 - v2[b.id])
        for br in self.branches:
            if br.kind != "line":
                continue
            lim2 = br.limit**2
            val = self._series_current_sq(br, e, f) - lim2
            out.append(val / lim2 if scaled else val)
        for br in self.branches:
            if br.kind != "transformer":
                continue
            lim2 = br.limit**2
            isq = self._series_current_sq(br, e, f)
            for bus in (br.i, br.k):
                val = isq * v2[bus] - lim2
                out.append(val / lim2 if scaled else val)
        for cv in net.converters:
            s_n = net.pu.power(cv.s_n)
            val = x[lay.f_fwd[cv.id]] + x[lay.f_rev[cv.id]] - s_n
            out.append(val / s_n if scaled else val)
        return out

    def inequality_set(self, x) -> list:
        """Raw inequality values, all required <= 0 (pu, squared where printed)."""
        return self._inequalities(x, scaled=False)

    def _objective_pu(self, kind, x):
        net, lay = self.network, self.layout
        if kind == "h2":
            _, _, v2 = self._voltages(x)
            total = 0.0
            for v in v2:
                d = v - 1.0
                total = total + d * d
            return total
        total = 0.0
        for g in net.generators:
            w = g.econ.oc * self.s_base if kind == "h3" else 1.0
            total = total + w * x[lay.p_gen[g.id]]
        return -total if kind == "h4" else total

    def objective_value(self, x, kind: str | None = None) -> float:
        """H1/H4 in kW, H2 in pu^2, H3 in currency per hour."""
        kind = check_objective(kind or self.objective)
        val = self._objective_pu(kind, x)
        return val * self.s_base if kind in ("h1", "h4") else val

    def evaluate(self, x):
        lay = self.layout
        obj = self._objective_pu(self.objective, x)
        for j in lay.f_fwd.values():
            obj = obj + FLOW_WEIGHT * x[j]
        for j in lay.f_rev.values():
            obj = obj + FLOW_WEIGHT * x[j]
        for j in lay.q_ext.values():
            obj = obj + GRID_Q_WEIGHT * x[j] * x[j]
        if self.tie_break is not None:
            for j, w in enumerate(self.tie_break):
                if w:
                    obj = obj + float(w) * x[j]
        return obj, self.equalities(x), self._inequalities(x, scaled=True)

    def to_nlp(self) -> nlp.NlpProblem:
        return nlp.NlpProblem(self.layout.n, self.evaluate, self.lower, self.upper, self.x0,
                              len(self.eq_labels), len(self.ineq_labels),
                              self.eq_labels, self.ineq_labels)

    def pack(self, e=None, f=None, p_gen=None, q_gen=None, p_ext=None, q_ext=None,
             f_fwd=None, f_rev=None, base=None) -> np.ndarray:
        """Build a state vector (pu) from per-element mappings; unspecified
        entries are taken from ``base`` (default: the initial point)."""
        x = np.array(self.x0 if base is None else base, dtype=float)
        lay = self.layout
        for values, table in ((e, lay.e), (f, lay.f), (p_gen, lay.p_gen), (q_gen, lay.q_gen),
                              (p_ext, lay.p_ext), (q_ext, lay.q_ext), (f_fwd, lay.f_fwd),
                              (f_rev, lay.f_rev)):
            for key, val in (values or {}).items():
                x[table[key]] = val
        return x


def _external_bounds(mode: str, s_big: float) -> tuple[float, float]:
    if mode == "consume":
        return -s_big, 0.0
    if mode == "supply":
        return 0.0, s_big
    return -s_big, s_big


def assemble(network: NetworkModel, objective: str, scenario=None, tie_break=None) -> OpfProblem:
    """Build the OPF for a normalized network.

    With ``scenario`` given, storages and external grids are first transformed
    by :func:`~hybridgrid.scenario.apply_opf_scenario`; otherwise the network
    is taken as already scenario-applied.
    """
    kind = check_objective(objective)
    if network.pu is None:
        raise ValueError("network must be per-unit normalized before assembly")
    net = network
    if scenario is not None:
        from .scenario import apply_opf_scenario

        net = apply_opf_scenario(net, scenario)
    pu = net.pu
    lay = StateLayout.build(net)
    n = lay.n
    lower = np.full(n, -np.inf)
    upper = np.full(n, np.inf)
    x0 = np.zeros(n)

    refs = ac_angle_references(net)
    for b in net.buses:
        j = lay.e[b.id]
        x0[j] = 1.0
        # the band itself is an inequality; boxes only keep iterates sane
        vbox = BOX_MARGIN * b.v_max_pu
        if b.kind == DC or refs.get(b.id) == b.id:
            lower[j], upper[j] = 0.0, vbox
        else:
            lower[j], upper[j] = -vbox, vbox
        if b.id in lay.f:
            j = lay.f[b.id]
            if refs[b.id] == b.id:
                lower[j] = upper[j] = 0.0
            else:
                lower[j], upper[j] = -vbox, vbox

    for g in net.generators:
        j = lay.p_gen[g.id]
        lower[j], upper[j] = pu.power(g.p_min), pu.power(g.p_nom)
        x0[j] = 0.5 * (lower[j] + upper[j])
        if g.id in lay.q_gen:
            j = lay.q_gen[g.id]
            lower[j], upper[j] = pu.power(g.q_min), pu.power(g.q_nom)
            x0[j] = 0.5 * (lower[j] + upper[j])

    s_big = GRID_CAPACITY_FACTOR * pu.power(max(net.installed_capacity(), pu.s_base))
    for xg in net.external_grids:
        j = lay.p_ext[xg.id]
        lower[j], upper[j] = _external_bounds(xg.mode, s_big)
        if xg.id in lay.q_ext:
            j = lay.q_ext[xg.id]
            lower[j], upper[j] = -s_big, s_big

    for cv in net.converters:
        for j in (lay.f_fwd[cv.id], lay.f_rev[cv.id]):
            lower[j], upper[j] = 0.0, BOX_MARGIN * pu.power(cv.s_n)

    branches = []
    for rec in net.lines + net.transformers:
        adm = branch_admittance(rec, pu)
        ref = branch_reference_bus(rec, pu.v_base)
        if isinstance(rec, LineRecord):
            branches.append(_Branch("line", rec.id, rec.i, rec.k, rec.kind == DC, adm,
                                    rec.i_max / pu.i_base(ref)))
        else:
            branches.append(_Branch("transformer", rec.id, rec.i, rec.k, False, adm,
                                    pu.power(rec.s_n)))

    eq_labels = [f"active[{b.id}]" for b in net.buses]
    eq_labels += [f"reactive[{b.id}]" for b in net.buses if b.kind == AC]
    forming = [cv for cv in net.converters if cv.grid_forming]
    eq_labels += [f"grid_forming[{cv.id}]" for cv in forming]
    ineq_labels = []
    for b in net.buses:
        ineq_labels += [f"v_max[{b.id}]", f"v_min[{b.id}]"]
    ineq_labels += [f"line_current[{br.id}]" for br in branches if br.kind == "line"]
    for br in branches:
        if br.kind == "transformer":
            ineq_labels += [f"trafo_from[{br.id}]", f"trafo_to[{br.id}]"]
    ineq_labels += [f"converter_rating[{cv.id}]" for cv in net.converters]

    counts = {
        "active_balance": net.n_bus,
        "reactive_balance": sum(b.kind == AC for b in net.buses),
        "converter_couplings": len(net.converters),
        "grid_forming": len(forming),
        "inequalities": len(ineq_labels),
        "variables": n,
    }
    tb = None if tie_break is None else np.asarray(tie_break, dtype=float)
    return OpfProblem(net, kind, lay, lower, upper, np.clip(x0, lower, upper), tuple(branches),
                      tuple(eq_labels), tuple(ineq_labels), counts, tb)


# -- results -------------------------------------------------------------------


@dataclass(frozen=True)
class BusResult:
    id: int
    kind: str
    p_kw: float
    q_kvar: float | None
    v_kv: float
    delta_rad: float


@dataclass(frozen=True)
class ConverterResult:
    id: int
    i: int
    k: int
    forward_kw: float
    reverse_kw: float
    p_in_kw: float  # net power drawn at bus i
    p_out_kw: float  # net power delivered at bus k
    loss_kw: float


@dataclass(frozen=True)
class BranchResult:
    kind: str
    id: int
    i: int
    k: int
    p_ik_kw: float
    p_ki_kw: float
    loss_kw: float
    current_ka: float


@dataclass
class OpfSolution:
    objective: str
    objective_value: float
    status: str
    feasible: bool
    buses: list[BusResult] = field(default_factory=list)
    converters: list[ConverterResult] = field(default_factory=list)
    branches: list[BranchResult] = field(default_factory=list)
    generators_kw: dict[int, float] = field(default_factory=dict)
    external_kw: dict[int, float] = field(default_factory=dict)
    total_generation_kw: float = 0.0
    total_losses_kw: float = 0.0
    residuals: dict[str, float] = field(default_factory=dict)
    wall_time: float = 0.0
    grid_mode: str = ""
    state: np.ndarray | None = None

    def bus(self, bus_id: int) -> BusResult:
        return next(b for b in self.buses if b.id == bus_id)


def extract_solution(problem: OpfProblem, result: nlp.SolverResult | np.ndarray,
                     tol: float = 1e-6) -> OpfSolution:
    """Denormalize a solved state into engineering quantities.

    A state whose equality residual or inequality violation exceeds ``tol``
    is returned with ``feasible=False``.
    """
    if isinstance(result, nlp.SolverResult):
        x, status = result.x, result.status
        residuals = {"equality": result.eq_norm, "inequality": result.ineq_violation,
                     "stationarity": result.stationarity}
        wall = result.wall_time
    else:
        x, status, wall = np.asarray(result, dtype=float), "evaluated", 0.0
        residuals = {}
    net, lay, pu = problem.network, problem.layout, problem.network.pu
    sb = pu.s_base
    eq = np.asarray(problem.equalities(list(map(float, x))), dtype=float)
    ineq = np.asarray(problem.inequality_set(list(map(float, x))), dtype=float)
    residuals.setdefault("equality", float(np.max(np.abs(eq), initial=0.0)))
    residuals.setdefault("inequality", float(np.max(ineq, initial=0.0)))
    feasible = residuals["equality"] <= tol and residuals["inequality"] <= tol

    e, f, v2, p_out, q_out, p_inj, q_inj = problem._balances(list(map(float, x)))
    buses = []
    for b in net.buses:
        mag = math.sqrt(v2[b.id])
        buses.append(BusResult(
            b.id, b.kind, p_inj[b.id] * sb,
            q_inj[b.id] * sb if b.kind == AC else None,
            mag * pu.v_base[b.id],
            math.atan2(f[b.id], e[b.id]) if b.kind == AC else 0.0))

    converters = []
    for cv in net.converters:
        fwd, rev = x[lay.f_fwd[cv.id]] * sb, x[lay.f_rev[cv.id]] * sb
        eta = cv.efficiency
        converters.append(ConverterResult(cv.id, cv.i, cv.k, fwd, rev, fwd - eta * rev,
                                          eta * fwd - rev, (1 - eta) * (fwd + rev)))

    branches = []
    for br in problem.branches:
        p_ik, _, p_ki, _ = problem._branch_terms(br, e, f, v2)
        ref = br.i if br.kind == "line" else branch_reference_bus(
            next(t for t in net.transformers if t.id == br.id), pu.v_base)
        current = math.sqrt(problem._series_current_sq(br, e, f)) * pu.i_base(ref)
        branches.append(BranchResult(br.kind, br.id, br.i, br.k, p_ik * sb, p_ki * sb,
                                     (p_ik + p_ki) * sb, current))

    gens = {g.id: float(x[lay.p_gen[g.id]] * sb) for g in net.generators}
    ext = {xg.id: float(x[lay.p_ext[xg.id]] * sb) for xg in net.external_grids}
    return OpfSolution(
        objective=problem.objective,
        objective_value=problem.objective_value(list(map(float, x))),
        status=status, feasible=feasible and status in ("converged", "evaluated"),
        buses=buses, converters=converters, branches=branches,
        generators_kw=gens, external_kw=ext,
        total_generation_kw=sum(gens.values()),
        total_losses_kw=sum(b.p_kw for b in buses),
        residuals=residuals, wall_time=wall,
        grid_mode=",".join(sorted({xg.mode for xg in net.external_grids})),
        state=np.array(x, dtype=float))


def solve_opf(network: NetworkModel, scenario=None, config: nlp.SolverConfig | None = None,
              s_base: float = 100.0, tie_break=None, x0=None) -> OpfSolution:
    """Apply an OPF scenario, assemble, solve and extract.

    ``grid_mode='either'`` solves the consume-only and supply-only variants
    and keeps the one with the lower objective.
    """
    from .scenario import OpfScenario, apply_opf_scenario, with_grid_mode

    scenario = scenario or OpfScenario()
    net = network if network.pu is not None else per_unit_normalize(network, s_base)
    net = apply_opf_scenario(net, scenario)
    either = any(g.mode == "either" for g in net.external_grids)
    best = None
    for mode in (("consume", "supply") if either else (None,)):
        candidate = net if mode is None else with_grid_mode(net, mode, only_either=True)
        problem = assemble(candidate, scenario.objective, tie_break=tie_break)
        result = nlp.solve(problem.to_nlp(), config, x0=x0)
        sol = extract_solution(problem, result)
        if best is None or (sol.feasible, -sol.objective_value) > (best.feasible,
                                                                   -best.objective_value):
            best = sol
    return best
