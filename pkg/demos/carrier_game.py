"""Three carriers share a port network.  Who should get which part of the savings?"""
from mpbap.game import CoreEmpty, analyse, epm, game_from_table, shapley
from mpbap.model import generate_instance
from mpbap.search import SolveOptions

inst = generate_instance(6, 1, 2, "loose", seed=3)
out = analyse(inst, options=SolveOptions(time_limit=60))
game = out.game
print("coalition costs")
for S in game.coalitions():
    print(f"  {''.join(sorted(S)):<4}{game.v(S):12.2f}")


def show(alloc):
    if isinstance(alloc, CoreEmpty):
        print("  core is empty")
        return
    for p in game.players:
        print(f"  {p}  cost {alloc.costs[p]:12.2f}  saves {100 * alloc.relative_savings[p]:6.2f}%")


print("\nshapley")
show(out.shapley)
print("equal profit")
show(out.epm)
print("\nterminal view")
for t in out.terminals:
    print(f"  {t.port}  standalone {t.standalone:10.2f}  grand {t.grand:10.2f}  {t.savings_pct:6.2f}%")

# lowering one pair's cost below its share empties the core
table = {"A": 386891, "B": 218635, "C": 296361, "AB": 590586, "AC": 550000, "BC": 502188, "ABC": 856210}
g = game_from_table(table)
print("\nwith v(AC) = 550000: shapley", {k: round(v) for k, v in shapley(g).costs.items()},
      "| EPM:", "core empty" if isinstance(epm(g), CoreEmpty) else "stable")
