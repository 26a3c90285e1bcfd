"""
Bringing your own car park
==========================

Topologies are plain JSON. Save the built-in one, change it, and run the
same model against it.
"""

import json
import tempfile
from pathlib import Path

from vcopt import Demand, build_model, canonical_parking_lot, load_topology, save_topology, solve_exact

folder = Path(tempfile.mkdtemp())
path = folder / "lot.json"
save_topology(canonical_parking_lot(), path)

doc = json.loads(path.read_text())
print(sorted(doc))

# give every edge node twice the processing capacity
for node in doc["nodes"]:
    if node["kind"] == "edge":
        node.setdefault("params", {})["proc_capacity"] = 19200.0
path.write_text(json.dumps(doc))

lot = load_topology(path)
d = Demand.from_mbps("v01", 8)
r = solve_exact(build_model(lot, [d]))
print(r.assignment.destinations("v01"), f"{r.objective:.3f} W")

# the command line does the same:
#   vcopt solve --topology lot.json --demand 8mbps
