import json

import pytest

from hybridgrid import formats
from hybridgrid.formats import (
    FormatError,
    MeasurementSet,
    check_version,
    data_path,
    economics_document,
    measurements_document,
    network_document,
    parse_economics,
    parse_measurements,
    parse_scenarios,
    parse_solution,
    scenarios_document,
    solution_document,
)
from hybridgrid.grid_model import parse_network
from hybridgrid.scenario import OpfScenario


def test_network_round_trip(ceder):
    doc = network_document(ceder)
    assert doc["format_version"] == formats.FORMAT_VERSION
    assert parse_network(json.loads(json.dumps(doc))) == ceder


def test_network_file_round_trip(ceder, tmp_path):
    path = tmp_path / "net.json"
    formats.dump_network(ceder, path)
    assert formats.load_network(path) == ceder


def test_fixture_echoes_tables(ceder):
    doc = network_document(ceder)
    line0 = doc["lines"][0]
    assert (line0["r_ohm_per_km"], line0["x_ohm_per_km"], line0["length_km"]) == (0.5, 0.35, 0.15)
    tr = doc["transformers"][0]
    assert (tr["s_n_kva"], tr["v_ccl_pct"], tr["v_rccl_pct"], tr["v_ln_kv"]) == \
        (250.0, 1.5, 1.0, 0.4)
    assert [c["efficiency"] for c in doc["converters"]] == [0.99, 0.99, 0.86, 0.99, 0.99]
    assert [c["s_n_kva"] for c in doc["converters"]] == [20.0, 20.0, 30.0, 12.0, 5.0]
    pv = doc["generators"][0]
    assert (pv["p_gen_nom_kw"], pv["economics"]["cf_pct"], pv["economics"]["oc_per_kwh"]) == \
        (22.14, 33.5, 0.003)
    assert doc["storages"] == [{"id": 0, "bus": 5, "p_stor_kw": 25.0}]


def test_economics_fixture(ceder_econ):
    econ, flex = ceder_econ
    assert (econ.ic, econ.rv, econ.omc, econ.r, econ.ul, econ.ep) == \
        (195500.0, 28900.0, 1400.0, 1.0, 25, 0.145)
    battery = [it for it in econ.equipment if "battery" in it.tags]
    assert sum(it.investment_cost for it in battery) == 59000.0
    assert sum(it.residual_value for it in battery) == 3400.0
    assert (flex.price_per_mwh, flex.hours_per_day, flex.days_per_year) == (224.17, 1.0, 365.0)


def test_economics_round_trip(ceder_econ):
    econ, flex = ceder_econ
    back, back_flex = parse_economics(json.loads(json.dumps(economics_document(econ, flex))))
    assert back == econ and back.equipment == econ.equipment and back_flex == flex


def test_economics_missing_field():
    with pytest.raises(FormatError, match="missing field 'ic'"):
        parse_economics({"format_version": 1, "economics": {"discount_rate_pct": 1}})


def test_economics_non_numeric_field():
    doc = {"format_version": 1, "economics": {"ic": "a lot", "discount_rate_pct": 1,
                                               "useful_life_years": 25,
                                               "electricity_price_per_kwh": 0.1}}
    with pytest.raises(FormatError, match="must be a number"):
        parse_economics(doc)


def test_bundled_scenarios():
    doc = formats.read_document(data_path(formats.CEDER_SCENARIOS))
    opf, kinds = parse_scenarios(doc)
    assert list(opf) == ["H1", "H2", "H3", "H4"]
    assert all(sc.storage_fraction == 0.5 and sc.grid_mode == "consume" for sc in opf.values())
    assert kinds == ["baseline", "no-battery", "battery-flex", "vb-flex"]
    assert parse_scenarios(scenarios_document(opf, kinds)) == (opf, kinds)


def test_scenario_overrides_round_trip():
    opf = {"X": OpfScenario("h2", 0.25, "either", {0: 1.0}, {0: "supply"})}
    assert parse_scenarios(scenarios_document(opf))[0] == opf


def test_bad_scenario_is_a_format_error():
    with pytest.raises(FormatError, match="opf_scenarios\\[0\\]"):
        parse_scenarios({"format_version": 1, "opf_scenarios": [{"storage_fraction": 3}]})


def test_measurement_fixture():
    sets = formats.load_measurements(data_path(formats.CEDER_MEASUREMENTS))
    assert list(sets) == ["H1", "H2", "H3", "H4"]
    h1 = sets["H1"]
    assert h1.bus_ids == list(range(9))
    assert h1.v_kv[3] == 0.612 and h1.p_kw[8] == 4.1
    assert h1.scenario == OpfScenario("h1", 0.5, "consume")


def test_measurement_unit_prefixes():
    doc = {"format_version": 1, "scenarios": [{"label": "t", "buses": [
        {"bus": 0, "p_w": 1500.0, "v_v": 400.0},
        {"bus": 1, "p_mw": 0.002, "v_kv": 0.4}]}]}
    ms = parse_measurements(doc)["T"]
    assert ms.p_kw == {0: pytest.approx(1.5), 1: pytest.approx(2.0)}
    assert ms.v_kv == {0: pytest.approx(0.4), 1: 0.4}


def test_measurement_conflicting_units():
    doc = {"format_version": 1, "scenarios": [{"buses": [{"bus": 0, "p_w": 1, "p_kw": 1}]}]}
    with pytest.raises(FormatError, match="only one of"):
        parse_measurements(doc)


def test_measurement_round_trip():
    sets = {"H9": MeasurementSet("H9", {0: 1.0}, {0: 0.4, 2: 0.41}, OpfScenario("h3"))}
    assert parse_measurements(measurements_document(sets)) == sets


def test_solution_round_trip(solutions):
    sol = solutions["h1"]
    doc = json.loads(json.dumps(solution_document(sol)))
    assert doc["residuals"]["equality"] <= 1e-8 and doc["objective"] == "h1"
    back = parse_solution(doc)
    assert back.buses == sol.buses and back.converters == sol.converters
    assert back.branches == sol.branches and back.objective_value == sol.objective_value


def test_truncated_solution_is_a_format_error():
    with pytest.raises(FormatError):
        parse_solution({"format_version": 1, "objective": "h1"})


@pytest.mark.parametrize("doc, message", [
    ({"buses": []}, "missing format_version"),
    ({"format_version": 2}, "unsupported format_version"),
    ([1, 2], "must be an object"),
])
def test_version_check(doc, message):
    with pytest.raises(FormatError, match=message):
        check_version(doc)


def test_unreadable_documents(tmp_path):
    with pytest.raises(FormatError, match="no such file"):
        formats.read_document(tmp_path / "absent.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(FormatError, match="not valid JSON"):
        formats.read_document(bad)


def test_data_directory_override(tmp_path, monkeypatch, ceder):
    net = tmp_path / formats.CEDER_NETWORK
    formats.dump_network(ceder, net)
    monkeypatch.setenv(formats.DATA_ENV, str(tmp_path))
    assert data_path(formats.CEDER_NETWORK) == net
    # files missing from the override directory fall back to the bundled copy
    assert data_path(formats.CEDER_ECONOMICS).name == formats.CEDER_ECONOMICS
    assert data_path(formats.CEDER_ECONOMICS).parent != tmp_path
