# ---
# jupyter:
#   jupytext:
#     text_representation:
#       extension: .py
#       format_name: light
# ---

# ## Exact privacy audits
#
# Audits enumerate every input pair and every output, so the worst
# log-ratio printed here is exact rather than estimated.

# +
from opboost.audit import RECORD_HEADER, audit_bounded_dlap, audit_dldp, audit_partition_dldp
from opboost.domain import MappedDomain
from opboost.mechanisms import MechanismSpec

dom = MappedDomain(1, 20, 4)
print(RECORD_HEADER)
for t in (1, 3, 10):
    print(audit_dldp(MechanismSpec.global_map(dom, 1.0), t).to_record())
# -

# ## Partition guarantees for Adj-map
#
# Adj-map is audited against the budget split between partitions and inside
# one partition.  Against the plain per-unit bound it can fail at short
# distances, which the last line shows.

spec = MechanismSpec.adj_map(dom, 1.0, alpha=1.0)
for t in (1, 4, 9):
    print(audit_partition_dldp(spec, t).to_record())
print(audit_dldp(spec, 1).to_record())

# ## Truncated discrete Laplace noise

for window in ((-5, 5), (2, 12)):
    print(audit_bounded_dlap(1.0, window, 3).to_record())
