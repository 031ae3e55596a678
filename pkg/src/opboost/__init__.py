"""Order-preserving desensitization and rank-only gradient boosting.

The main entry points:

* :mod:`opboost.domain` maps raw features into a shared integer domain.
* :mod:`opboost.mechanisms` implements Global-map, Adj-map, Local-map and GRR.
* :mod:`opboost.audit` checks their privacy guarantees exactly.
* :mod:`opboost.metrics` measures how much order survives.
* :mod:`opboost.boost` trains boosted trees that only see ranks.
* :mod:`opboost.fedproto` runs the two-party training protocol.
* :mod:`opboost.rangequery` scores range-count queries.
"""

from .audit import AuditReport, audit_bounded_dlap, audit_dldp, audit_partition_dldp, exact_pmf
from .boost import BoostParams, Loss, OrdinalDataset, PartialForest, find_best_split, split_gain, train
from .domain import MappedDomain, RawFeature, map_value, map_values, ordinalize
from .errors import (
    ConfigError,
    DataError,
    DomainRangeError,
    OpBoostError,
    ProtocolError,
    SizeError,
    StateError,
    TrainingError,
    TransportError,
    UndefinedMetricError,
)
from .mechanisms import (
    BudgetSplit,
    Kind,
    MechanismSpec,
    Pmf,
    Sampler,
    bounded_dlap_pmf,
    bounded_dlap_sample,
    desensitize,
    make_rng,
    split_budget,
)
from .metrics import (
    SplitScenario,
    beta_monte_carlo,
    beta_split_probability,
    gamma_bound_adj,
    gamma_bound_global,
    gamma_bound_grr,
    order_preserving_prob_exact,
    weighted_kendall,
)
from .rangequery import QuerySet, generate_queries, range_query_mse

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
