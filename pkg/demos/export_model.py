"""
Exporting the optimization problem for an external solver
=========================================================

The sampled problem can be written as a mixed-integer model with bilinear
terms, with logical triggers encoded by a Big-M constant. The engine's own
trajectories are feasible points of that model, which we check here by
evaluating every constraint at the simulated policy.
"""

from lpconc import GbmParams, StrategyParams, run_strategy, sample_gbm_paths
from lpconc.minlp import ModelDocument, engine_assignment, export_minlp, required_big_m

W, FEE = 100_000.0, 2.2e-4
paths = sample_gbm_paths(GbmParams(0.02, 1350.0), 3, 5, seed=0)
costs = StrategyParams(alpha=2.0, gas_cost=109.8, trade_fee=0.0005)

print(f"required Big-M: {required_big_m(paths, FEE, (1.01, 4.0), costs, W):.4g}")
doc = export_minlp(paths, FEE, (1.01, 4.0), costs, W, seed=0)
text = doc.to_text()
print(f"{len(doc.variables)} continuous, {len(doc.binaries)} binary, {len(doc.constraints)} constraints")
print("\n".join(text.splitlines()[:14]))
assert ModelDocument.parse(text) == doc

###############################################################################
# The simulated policy for a few widths satisfies every row

for alpha in (1.02, 1.2, 3.0):
    params = costs.with_alpha(alpha)
    runs = [run_strategy(p, FEE, params, W) for p in paths]
    point = engine_assignment(runs, paths, params)
    worst = max((v for _, v in doc.evaluate(point)), default=0.0)
    print(f"alpha {alpha}: objective {doc.objective_value(point):.2f}, worst scaled violation {worst:.1e}")
