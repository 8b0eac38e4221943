# %% [markdown]
# # Four ways to run the CEDER microgrid
#
# The demonstrator has an AC side (15 kV feeder, 400 V transformer secondary),
# two DC islands joined through converters, a PV array, a wind turbine and a
# battery that is treated as a load charging at half its rating.  Each
# objective asks a different question of the same network.

# %%
from hybridgrid import data_path, load_network, per_unit_normalize, render_report, solve_opf
from hybridgrid.formats import CEDER_NETWORK
from hybridgrid.scenario import OpfScenario

net = per_unit_normalize(load_network(data_path(CEDER_NETWORK)))
print(f"{len(net.buses)} buses, {len(net.converters)} converters, "
      f"{len(net.generators)} generators")

# %% [markdown]
# ## H1: run on local generation, minimise losses
#
# With the grid only allowed to consume, the renewables must cover the loads
# plus every watt lost in lines, the transformer and the converters.

# %%
h1 = solve_opf(net, OpfScenario("h1"))
print(render_report(h1, "text"))
print(f"losses {h1.total_losses_kw:.3f} kW")

# %% [markdown]
# ## H2: keep every bus at nominal voltage
#
# The objective bottoms out a little above zero: the 5 kW load on bus 6 draws
# current across a DC line from a grid-forming converter, so that bus sags no
# matter what the generators do.

# %%
h2 = solve_opf(net, OpfScenario("h2"))
print(f"H2 = {h2.objective_value:.3e}, bus 6 at {h2.bus(6).v_kv:.5f} kV")

# %% [markdown]
# ## H3 and H4: cheapest dispatch, then the most renewable output

# %%
for kind in ("h3", "h4"):
    sol = solve_opf(net, OpfScenario(kind))
    gens = ", ".join(f"gen {g}: {p:.3f} kW" for g, p in sol.generators_kw.items())
    print(f"{kind.upper()}: objective {sol.objective_value:.5f}; {gens}; "
          f"grid {sol.external_kw[0]:+.3f} kW")

# %% [markdown]
# Under H4 both generators sit at their rating and the surplus, net of losses,
# flows back into the 15 kV feeder.  Letting the grid point either way changes
# H1 into a supply problem instead:

# %%
either = solve_opf(net, OpfScenario("h1", grid_mode="either"))
print(f"either mode: grid {either.grid_mode}, objective {either.objective_value:.3f}")
