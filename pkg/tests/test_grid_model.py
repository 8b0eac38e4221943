import copy
import math
from dataclasses import astuple

import pytest

from hybridgrid import formats
from hybridgrid.grid_model import (
    DC,
    NetworkError,
    PerUnitSystem,
    TransformerRecord,
    branch_admittance,
    denormalize,
    parse_network,
    per_unit_normalize,
    validate,
)


def doc_of(model):
    return formats.network_document(model)


def two_bus(kind="AC", **line):
    rec = {"id": 0, "from_bus": 0, "to_bus": 1, "length_km": 1.0, "r_ohm_per_km": 0.1,
           "i_max_ka": 1.0, "kind": kind, **line}
    return {"buses": [{"id": 0, "v_nominal_kv": 0.4, "kind": kind},
                      {"id": 1, "v_nominal_kv": 0.4, "kind": kind}],
            "lines": [rec]}


# -- parsing -------------------------------------------------------------------


def test_ceder_element_counts(ceder):
    assert ceder.n_bus == 9
    assert len(ceder.lines) == 2
    assert len(ceder.transformers) == 1
    assert len(ceder.converters) == 5
    assert len(ceder.generators) == 4
    assert len(ceder.loads) == 2
    assert len(ceder.storages) == 1
    assert ceder.omega == pytest.approx(100 * math.pi)


def test_single_ac_bus_is_a_valid_model():
    net = parse_network({"buses": [{"id": 0, "v_nominal_kv": 0.4, "kind": "AC"}]})
    assert net.n_bus == 1 and net.lines == ()
    assert validate(net) == []


def test_reactive_parameter_on_dc_line_is_rejected():
    with pytest.raises(NetworkError, match="reactive parameter on DC line") as info:
        parse_network(two_bus("DC", x_ohm_per_km=0.2))
    assert info.value.locus == "lines[0]"


@pytest.mark.parametrize("mutate, message", [
    (lambda d: d["lines"][0].update(to_bus=7), "unknown bus id"),
    (lambda d: d["buses"].append({"id": 1, "v_nominal_kv": 0.4, "kind": "AC"}), "duplicate"),
    (lambda d: d["lines"][0].update(r_ohm_per_km=-0.1), "positive"),
    (lambda d: d["lines"][0].update(length_km=0.0), "positive"),
    (lambda d: d["buses"][0].update(v_nominal_kv=0), "positive"),
    (lambda d: d["buses"][0].update(kind="XY"), "kind"),
])
def test_parse_errors_carry_a_locus(mutate, message):
    doc = two_bus()
    mutate(doc)
    with pytest.raises(NetworkError, match=message):
        parse_network(doc)


def test_dc_line_against_ac_bus_is_rejected():
    doc = two_bus()
    doc["lines"][0]["kind"] = "DC"
    with pytest.raises(NetworkError, match="DC line joins"):
        parse_network(doc)


def test_converter_efficiency_above_one_is_rejected(ceder):
    doc = doc_of(ceder)
    doc["converters"][0]["efficiency"] = 1.2
    with pytest.raises(NetworkError, match="efficiency"):
        parse_network(doc)


# -- admittances ---------------------------------------------------------------


def test_line_zero_admittance(ceder_pu, ceder):
    line = ceder.lines[0]
    assert line.r == pytest.approx(0.075) and line.x == pytest.approx(0.0525)
    y = branch_admittance(line, ceder_pu.pu)
    assert y.c / 1.6 == pytest.approx(8.9486, abs=1e-4)
    assert y.s / 1.6 == pytest.approx(-6.2640, abs=1e-4)
    assert y.c == pytest.approx(14.3177, abs=1e-4)
    assert y.s == pytest.approx(-10.0224, abs=1e-4)


def test_transformer_impedance(ceder):
    tr = ceder.transformers[0]
    assert tr.z_abs == pytest.approx(0.0096)
    assert tr.r == pytest.approx(0.0064)
    assert tr.x == pytest.approx(0.0071554, abs=1e-7)


def test_transformer_has_no_shunt(ceder_pu):
    y = branch_admittance(ceder_pu.transformers[0], ceder_pu.pu)
    assert y.b_shunt == 0.0 and y.c > 0 and y.s < 0


def test_dc_line_is_purely_resistive(ceder_pu):
    y = branch_admittance(ceder_pu.lines[1], ceder_pu.pu)
    assert ceder_pu.lines[1].kind == DC
    assert y.s == 0.0 and y.b_shunt == 0.0 and y.c > 0


def test_admittance_is_inverse_impedance(ceder_pu):
    for rec in ceder_pu.branches:
        y = branch_admittance(rec, ceder_pu.pu)
        r, x = rec.r, rec.x
        zb = ceder_pu.pu.z_base[rec.i]
        assert y.c == pytest.approx(r / (r * r + x * x) * zb)
        assert y.s == pytest.approx(-x / (r * r + x * x) * zb)


def test_imaginary_transformer_reactance_is_an_error():
    tr = TransformerRecord(0, 0, 1, 100.0, 1.0, 2.0, 0.4)
    pu = PerUnitSystem(100.0, (0.4, 15.0), 100 * math.pi)
    with pytest.raises(NetworkError, match="imaginary"):
        branch_admittance(tr, pu)


# -- per unit ------------------------------------------------------------------


def test_base_impedance(ceder_pu):
    assert ceder_pu.pu.z_base[1] == pytest.approx(1.6)
    assert ceder_pu.pu.power(5.0) == pytest.approx(0.05)
    for v, z in zip(ceder_pu.pu.v_base, ceder_pu.pu.z_base):
        assert z == pytest.approx(v * v / 100.0 * 1e3)


def test_base_follows_nominal_voltage(ceder_pu):
    assert ceder_pu.pu.v_base == tuple(b.v_nominal for b in ceder_pu.buses)


def test_round_trip_is_bit_identical(ceder):
    back = denormalize(per_unit_normalize(ceder, 37.5))
    assert back == ceder
    assert astuple(back) == astuple(ceder)


@pytest.mark.parametrize("s_base", [0.0, -10.0])
def test_non_positive_base_is_rejected(ceder, s_base):
    with pytest.raises(ValueError):
        per_unit_normalize(ceder, s_base)


# -- validation ----------------------------------------------------------------


def test_ceder_validates_clean(ceder):
    assert validate(ceder) == []


def test_dc_island_without_reference(ceder):
    doc = doc_of(ceder)
    doc["buses"] += [{"id": 9, "v_nominal_kv": 0.8, "kind": "DC"},
                     {"id": 10, "v_nominal_kv": 0.8, "kind": "DC"}]
    doc["lines"].append({"id": 2, "from_bus": 9, "to_bus": 10, "length_km": 0.1,
                         "r_ohm_per_km": 0.5, "i_max_ka": 1.0, "kind": "DC"})
    doc["loads"].append({"id": 2, "bus": 10, "p_load_kw": 1.0})
    diags = validate(parse_network(doc))
    assert any("island without voltage reference" in d for d in diags)


def test_converter_on_a_single_bus_is_diagnosed(ceder):
    doc = doc_of(ceder)
    doc["converters"][4]["from_bus"] = 4
    diags = validate(parse_network(doc))
    assert any("converter 4" in d for d in diags)


def test_adjacency_is_symmetric(ceder):
    adj = ceder.adjacency()
    for i, nbs in adj.items():
        for k in nbs:
            assert i in adj[k]
    assert adj[4] == frozenset({3, 5, 6, 7, 8})


def test_model_is_immutable(ceder):
    with pytest.raises(AttributeError):
        ceder.buses[0].v_nominal = 1.0
    copy.deepcopy(ceder)  # plain data, safe to copy and share
