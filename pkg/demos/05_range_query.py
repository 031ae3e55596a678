# ---
# jupyter:
#   jupytext:
#     text_representation:
#       extension: .py
#       format_name: light
# ---

# ## Range queries over desensitized data
#
# Queries are random intervals on [1, 1024].  The error is the mean squared
# difference between the true and desensitized fraction in each interval.

# +
from opboost.domain import MappedDomain
from opboost.mechanisms import MechanismSpec, desensitize, make_rng
from opboost.rangequery import generate_queries, range_query_mse
from opboost.synthetic import normal_values

dom = MappedDomain(1, 1024, 10)
values = normal_values(20000, dom, make_rng(0))
queries = generate_queries(dom, 2000, make_rng(1))
# -

for eps in (0.05, 0.2, 0.8):
    row = {}
    for name, spec in [
        ("global", MechanismSpec.global_map(dom, eps)),
        ("adj a=0.5", MechanismSpec.adj_map(dom, eps, 0.5)),
        ("adj a=2", MechanismSpec.adj_map(dom, eps, 2.0)),
        ("grr", MechanismSpec.grr(dom, eps)),
    ]:
        row[name] = range_query_mse(values, desensitize(values, spec, make_rng(2)), queries)
    print(eps, {k: f"{v:.2e}" for k, v in row.items()})
