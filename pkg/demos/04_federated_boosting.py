# ---
# jupyter:
#   jupytext:
#     text_representation:
#       extension: .py
#       format_name: light
# ---

# ## Two parties, one model
#
# Party A holds the labels and one column.  Each Party B user holds another
# column and only ever sends ranks of desensitized values.  The split values
# come back from B at the end.

# +
import numpy as np

from opboost import synthetic
from opboost.boost import BoostParams, mse
from opboost.domain import MappedDomain, RawFeature, map_values
from opboost.fedproto import PartyB, account_traffic, run_loopback
from opboost.mechanisms import MechanismSpec, make_rng

rng = np.random.default_rng(0)
X, y = synthetic.regression(3000, rng, informative=2, noise_features=1)
tr, te = np.arange(2400), np.arange(2400, 3000)
dom = MappedDomain(1, 100, 10)
# -

# ## Training over the in-process transport

# +
results = {}
for name, spec in [("none", None), ("adj", MechanismSpec.adj_map(dom, 0.64)), ("grr", MechanismSpec.grr(dom, 0.64))]:
    parties = [PartyB(u, [RawFeature(X[tr, u + 1], 0, 1)], spec, make_rng(u), dom) for u in (0, 1)]
    run = run_loopback(parties, {"x0": X[tr, 0]}, y[tr], BoostParams(num_trees=40))
    test = np.column_stack([X[te, 0]] + [map_values(X[te, j], 0, 1, dom) for j in (1, 2)])
    results[name] = mse(run.forest.predict(test), y[te])
print(results)
# -

# ## What crossed the wire

acct = account_traffic(run.ledger, len(tr), 2, 1, 40, 3, dom.size)
print({k: acct[k] for k in ("phase1_bytes", "phase3_bytes", "phase1_fixed_width_ratio")})

print(run.forest.dumps()[:400])
