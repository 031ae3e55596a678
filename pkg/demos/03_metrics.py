# ---
# jupyter:
#   jupytext:
#     text_representation:
#       extension: .py
#       format_name: light
# ---

# ## How much order survives
#
# Weighted Kendall compares the plain and desensitized orders, with far
# apart swaps weighted more heavily.

# +
import numpy as np

from opboost.domain import MappedDomain
from opboost.mechanisms import MechanismSpec, desensitize, make_rng
from opboost.metrics import (
    SplitScenario,
    beta_split_probability,
    gamma_table,
    order_preserving_prob_exact,
    weighted_kendall,
)

dom = MappedDomain(1, 100, 10)
x = make_rng(1).integers(1, 101, 800)
for eps in (0.1, 0.4, 1.6):
    row = []
    for spec in (MechanismSpec.global_map(dom, eps), MechanismSpec.adj_map(dom, eps), MechanismSpec.grr(dom, eps)):
        row.append(weighted_kendall(x, desensitize(x, spec, make_rng(2))))
    print(eps, np.round(row, 3))
# -

# ## Closed-form lower bounds against the exact probability

spec = MechanismSpec.global_map(MappedDomain(1, 20, 20), 1.0)
print([round(order_preserving_prob_exact(spec, 5, 5 + t), 4) for t in (1, 5, 10)])

ts, rows = gamma_table()
for name, vals in rows:
    print(f"{name:<18}", " ".join(f"{v:7.4f}" for v in vals))

# ## Split points near the median are easier to break

spec = MechanismSpec.global_map(MappedDomain(1, 10, 10), 1.0)
values = np.arange(1, 11)
for split in (3, 5):
    print(split, round(beta_split_probability(SplitScenario(values, split, spec)), 4))
