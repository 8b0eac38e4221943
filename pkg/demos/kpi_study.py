# %% [markdown]
# # Is the battery worth it?
#
# Four economic scenarios compare the installation with and without its
# battery, and with the battery (or a virtual one) sold as flexibility.

# %%
from hybridgrid import data_path, load_economics, load_network, render_report
from hybridgrid.formats import CEDER_ECONOMICS, CEDER_NETWORK
from hybridgrid.scenario import ECONOMIC_KINDS, economic_report

net = load_network(data_path(CEDER_NETWORK))
econ, flex = load_economics(data_path(CEDER_ECONOMICS))
reports = {kind: economic_report(econ, net, flex.scenario(kind)) for kind in ECONOMIC_KINDS}
print(render_report(reports, "text"))

# %% [markdown]
# The technical indicators (energy, avoided CO2, self-sufficiency, peak) do
# not depend on who pays for what.  The money does: the baseline never pays
# back, while selling a virtual battery's flexibility brings payback inside
# the useful life.

# %%
for kind, r in reports.items():
    print(f"{kind:>12}: LCOE {r.kpi8:.4f} EUR/kWh, payback {r.payback_label}")

# %% [markdown]
# The literal reading of operating costs (per-kWh rates times rated power
# instead of yearly energy) is available for comparison.

# %%
from dataclasses import replace

literal = economic_report(replace(econ, oc_mode="literal"), net, flex.scenario("baseline"))
print(f"literal baseline: lifetime cost {literal.kpi6:.2f} EUR, "
      f"payback {literal.payback_label}")
