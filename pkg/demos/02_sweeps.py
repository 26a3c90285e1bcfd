"""
Demand-size sweep over the four placement scenarios
===================================================

v: vehicles only, ve: vehicles and edge, c: cloud only, vec: everything.
Takes a minute or so.
"""

from vcopt.experiments import gap_report, results_text, run_sweep, standard_specs

spec = standard_specs()["traffic_mode"]
result = run_sweep(spec)
print(results_text(result))

# savings of the full architecture against the cloud, full and proportional traffic
for mode in ("ft", "pt"):
    row = [p.savings_pct for p in result.select(scenario="vec", mode=mode)]
    print(mode, " ".join("-" if s is None else f"{s:5.1f}" for s in row))

# how far the online allocator lands from the optimum for a single demand
gaps = run_sweep(standard_specs()["heuristic_gap"])
print(gap_report(gaps).to_text())
