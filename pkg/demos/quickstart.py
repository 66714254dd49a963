"""Generate a small instance, solve it and print the berth plan."""
from mpbap.model import generate_instance
from mpbap.search import SolveOptions, plan_rows, solve

inst = generate_instance(6, 2, 2, "tight", seed=0)
res = solve(inst, SolveOptions(cut_policy="root", time_limit=60))
rep = res.report
print(f"{inst.descriptor}: status {rep.status}, cost {rep.z:.2f}, root LB {rep.root_lb:.2f}, "
      f"{rep.nodes} nodes, {rep.columns} columns, {rep.cuts} cuts")

print(f"\n{'ship':<5}{'port':<5}{'berth':<8}{'start':>6}{'end':>6}  speed")
for r in plan_rows(res):
    speed = r["speed_to_next_knots"]
    berth = f"{r['berth_type']}/{r['berth_index_within_type']}"
    print(f"{r['ship']:<5}{r['port']:<5}{berth:<8}{r['start']:>6}{r['end']:>6}  {speed if speed else '-'}")
