"""Two ships whose root relaxation splits across staggered berthing times.

Without cuts the tree has to branch.  One round of interval cuts closes the
root gap.
"""
from mpbap.oracle import enumerate_optimum, network_flow_lp_bound, staggered_pair_instance
from mpbap.search import SolveOptions, root_bound, solve

inst = staggered_pair_instance()
opt = enumerate_optimum(inst).cost
print(f"enumerated optimum      {opt:10.2f}")
print(f"arc-flow LP bound       {network_flow_lp_bound(inst):10.2f}")

for policy in ("none", "root"):
    lb, state = root_bound(inst, policy)
    res = solve(inst, SolveOptions(cut_policy=policy))
    print(f"cuts={policy:<5} root LB {lb:10.2f}  gap {100 * (opt - lb) / opt:5.2f}%  "
          f"nodes {res.report.nodes}  cuts {len(state.master.cuts)}")

_, state = root_bound(inst, "root")
for cut in state.master.cuts:
    print("  cut", cut.key, "rhs", cut.rhs)
