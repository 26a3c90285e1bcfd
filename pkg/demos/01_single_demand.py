"""
Where does one demand go?
=========================

A vehicle in the car park needs some processing done. Depending on the
size of the job it is cheapest to keep it among the parked cars, hand it to
an edge node on the lamp posts, or send it to the data centre.
"""

from vcopt import Demand, Scenario, build_model, canonical_parking_lot, solve_exact

lot = canonical_parking_lot()
print(f"{len(lot.vehicles)} vehicles, {len(lot.edges)} edge nodes, {len(lot.links)} links")

# 2000 MIPS per Mb/s of data, the default density
for mbps in (2, 4, 10, 30):
    d = Demand.from_mbps("v01", mbps)
    r = solve_exact(build_model(lot, [d]))
    where = ", ".join(r.assignment.destinations("v01"))
    print(f"{mbps:>3} Mb/s  {r.objective:8.3f} W  on {where}")

# the same job when only the cloud is allowed
d = Demand.from_mbps("v01", 10)
cloud = solve_exact(build_model(lot, [d], Scenario.C))
best = solve_exact(build_model(lot, [d], Scenario.VEC))
print(f"cloud only {cloud.objective:.3f} W, best {best.objective:.3f} W")
print(f"saving {100 * (cloud.objective - best.objective) / cloud.objective:.1f}%")

# the power split of the best placement, node by node
for node, watts in best.breakdown.total.items():
    if watts > 0:
        print(f"  {node:<14} {watts:7.3f} W")
