import pytest

from hybridgrid.kpi import discounted_annuity
from hybridgrid.scenario import (
    ECONOMIC_KINDS,
    EconomicScenario,
    OpfScenario,
    apply_economic_scenario,
    apply_opf_scenario,
    economic_report,
    flexibility_income,
    with_grid_mode,
)


@pytest.fixture(scope="module")
def reports(ceder, ceder_econ):
    econ, flex = ceder_econ
    return {k: economic_report(econ, ceder, flex.scenario(k)) for k in ECONOMIC_KINDS}


# -- power flow scenarios ------------------------------------------------------


def test_storage_at_half_power(ceder):
    net = apply_opf_scenario(ceder, OpfScenario())
    assert net.storages == ()
    added = [ld for ld in net.loads if ld.bus == 5]
    assert len(added) == 1 and added[0].p_load == 12.5


def test_zero_fraction_drops_the_storage(ceder):
    net = apply_opf_scenario(ceder, OpfScenario(storage_fraction=0.0))
    assert net.storages == () and net.loads == ceder.loads


def test_grid_mode_is_applied(ceder):
    net = apply_opf_scenario(ceder, OpfScenario(grid_mode="consume"))
    assert [g.mode for g in net.external_grids] == ["consume"]


def test_per_element_overrides(ceder):
    net = apply_opf_scenario(ceder, OpfScenario(storage_fractions={0: 1.0},
                                                grid_modes={0: "supply"}))
    assert [ld.p_load for ld in net.loads if ld.bus == 5] == [25.0]
    assert net.external_grids[0].mode == "supply"


def test_unknown_grid_override(ceder):
    with pytest.raises(ValueError, match="unknown external grid"):
        apply_opf_scenario(ceder, OpfScenario(grid_modes={4: "supply"}))


@pytest.mark.parametrize("kw", [{"storage_fraction": 1.5}, {"storage_fraction": -0.1},
                                {"grid_mode": "export"}, {"objective": "h0"},
                                {"storage_fractions": {0: 2.0}}])
def test_opf_scenario_validation(kw):
    with pytest.raises(ValueError):
        OpfScenario(**kw)


def test_with_grid_mode_only_either(ceder):
    fixed = with_grid_mode(ceder, "consume")
    assert with_grid_mode(fixed, "supply", only_either=True) == fixed
    assert with_grid_mode(ceder, "supply", only_either=True).external_grids[0].mode == "supply"


# -- flexibility income --------------------------------------------------------


def test_flexibility_income():
    assert flexibility_income(224.17, 25, 1, 365) == pytest.approx(2045.55125)
    assert flexibility_income(224.17, 25, 0, 365) == 0.0
    assert flexibility_income(100, 1000, 1, 1) == pytest.approx(100.0)


def test_flexibility_income_rejects_negatives():
    with pytest.raises(ValueError):
        flexibility_income(-1.0, 25, 1, 365)


# -- economic scenarios --------------------------------------------------------


def test_no_battery_removes_battery_items(ceder, ceder_econ):
    econ, _ = ceder_econ
    after, net = apply_economic_scenario(econ, ceder, EconomicScenario("no-battery"))
    assert after.ic - econ.ic == -59000.0
    assert after.rv - econ.rv == -3400.0
    assert net.storages == ()


def test_baseline_is_identity(ceder, ceder_econ):
    econ, _ = ceder_econ
    after, net = apply_economic_scenario(econ, ceder, EconomicScenario("baseline"))
    assert after == econ and net == ceder


def test_flexibility_income_is_settled_in_cents(ceder, ceder_econ):
    econ, flex = ceder_econ
    after, _ = apply_economic_scenario(econ, ceder, flex.scenario("battery-flex"))
    assert after.fi == 2045.55


def test_virtual_battery(reports):
    assert reports["vb-flex"].kpi7 == 17
    assert reports["vb-flex"].kpi4 == 25.0


def test_technical_kpis_shared(reports):
    base = reports["baseline"]
    for r in reports.values():
        assert (r.kpi1, r.kpi2, r.kpi3) == (base.kpi1, base.kpi2, base.kpi3)


def test_storage_flexibility_only_lost_without_battery(reports):
    assert {k: r.kpi4 for k, r in reports.items()} == {
        "baseline": 25.0, "no-battery": 0.0, "battery-flex": 25.0, "vb-flex": 25.0}


def test_table_structure(reports):
    assert reports["battery-flex"].kpi5 == reports["vb-flex"].kpi5
    assert reports["baseline"].kpi6 == reports["battery-flex"].kpi6
    assert reports["battery-flex"].kpi5 - reports["baseline"].kpi5 == \
        pytest.approx(discounted_annuity(0.01, 25) * 2045.55)
    assert reports["baseline"].kpi6 - reports["no-battery"].kpi6 == \
        pytest.approx(59000 - 3400 / 1.01**25, abs=1e-6)


def test_unknown_economic_kind():
    with pytest.raises(ValueError, match="unknown economic scenario"):
        EconomicScenario("solar-only")
