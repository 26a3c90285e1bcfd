"""
Following the real-time allocator
=================================

The allocator ranks every admissible node by the power it would add, then
packs the demand into the best ones. The trace shows the ranking and each
packing step.
"""

from vcopt import Demand, canonical_parking_lot, run_heuristic

lot = canonical_parking_lot()

# an 8000 MIPS job at 4 Mb/s: one edge node fits it whole
h = run_heuristic(lot, [Demand.from_mbps("v01", 4, mips=8000)])
print("\n".join(h.trace[:12]))
print(f"total {h.tp:.3f} W")

# several vehicles asking at once; later demands see what earlier ones took
demands = [Demand.from_mbps(v, 3, id=i) for i, v in enumerate(lot.vehicles[:6])]
h = run_heuristic(lot, demands)
print(f"served {len(h.served)}, blocked {len(h.blocked)}, total {h.tp:.3f} W")
for out in h.served:
    print(f"  {out.demand.source}: {out.placements}")
