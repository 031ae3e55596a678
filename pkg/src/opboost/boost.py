"""A small second-order gradient tree booster that only looks at feature order.

Training sees ordinal ranks, never values: every split is "rank <= ordinal".
After training the ordinals are swapped for concrete split values (for
federated features this is done by the party holding them), which turns the
partial forest into a model that predicts from values.
"""

from __future__ import annotations

import enum
import io
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional

import numpy as np

from .errors import DataError, StateError, TrainingError

P_CLAMP = 1e-6


class Loss(str, enum.Enum):
    SQUARED = "squared"
    LOGISTIC = "logistic"


@dataclass(frozen=True)
class BoostParams:
    num_trees: int = 80
    learning_rate: float = 0.1
    max_layers: int = 3
    reg_lambda: float = 1.0
    min_split_gain: float = 0.0
    loss: Loss = Loss.SQUARED

    def __post_init__(self):
        object.__setattr__(self, "loss", Loss(self.loss))
        if self.num_trees < 0 or self.max_layers < 0:
            raise DataError("num_trees and max_layers must be non-negative")
        if not self.learning_rate > 0 or self.reg_lambda < 0 or self.min_split_gain < 0:
            raise DataError("need learning_rate > 0, reg_lambda >= 0, min_split_gain >= 0")


@dataclass
class OrdinalDataset:
    """Rank columns (``n x r``) plus optional labels.

    ``feature_keys`` names each column; federated training uses them to know
    which party owns a column.
    """

    features: np.ndarray
    labels: Optional[np.ndarray] = None
    feature_keys: Optional[list[str]] = None

    def __post_init__(self):
        X = np.asarray(self.features, dtype=np.int64)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2:
            raise DataError("features must be a 2-d array of ranks")
        self.features = X
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=float)
            if self.labels.shape != (X.shape[0],):
                raise DataError("labels length must equal the number of samples")
        if self.feature_keys is None:
            self.feature_keys = [f"f{j}" for j in range(X.shape[1])]
        if len(self.feature_keys) != X.shape[1]:
            raise DataError("one feature key per column required")

    @property
    def n(self) -> int:
        return self.features.shape[0]


@dataclass
class Node:
    kind: str  # "split" or "leaf"
    feature: int = -1
    split_ordinal: Optional[int] = None
    split_value: Optional[float] = None
    leaf_weight: float = 0.0

    @property
    def resolved(self) -> bool:
        return self.kind == "leaf" or self.split_value is not None


@dataclass
class PartialForest:
    """Trees stored as ``{node_id: Node}`` in heap order (children 2i+1, 2i+2)."""

    trees: list[dict[int, Node]]
    base_score: float
    learning_rate: float
    loss: Loss
    feature_keys: list[str]

    def split_nodes(self) -> Iterable[tuple[int, int, Node]]:
        for tid, tree in enumerate(self.trees):
            for nid in sorted(tree):
                if tree[nid].kind == "split":
                    yield tid, nid, tree[nid]

    def unresolved(self) -> list[tuple[int, int]]:
        """Distinct ``(feature, split_ordinal)`` pairs still lacking a value, in tree order."""
        seen: dict[tuple[int, int], None] = {}
        for _, _, node in self.split_nodes():
            if node.split_value is None:
                seen.setdefault((node.feature, node.split_ordinal), None)
        return list(seen)

    @property
    def resolved(self) -> bool:
        return all(n.resolved for _, _, n in self.split_nodes())

    def resolve(self, values: Mapping[tuple[int, int], float], features: Optional[set] = None) -> None:
        """Fill ``split_value`` from a ``(feature, ordinal) -> value`` mapping."""
        for _, _, node in self.split_nodes():
            if node.split_value is not None or (features is not None and node.feature not in features):
                continue
            key = (node.feature, node.split_ordinal)
            if key not in values:
                raise DataError(f"no value for split {key}")
            node.split_value = float(values[key])

    def structure(self) -> list[list[tuple]]:
        """Value-free view used to compare forests."""
        return [
            [(nid, n.kind, n.feature, n.split_ordinal, n.leaf_weight) for nid, n in sorted(t.items())]
            for t in self.trees
        ]

    def max_depth(self) -> int:
        depth = 0
        for t in self.trees:
            for nid in t:
                depth = max(depth, int(math.floor(math.log2(nid + 1))))
        return depth

    def predict(self, X, raw: bool = False) -> np.ndarray:
        """Route value rows (``n x r``); ``value <= split_value`` goes left.

        Logistic models return probabilities unless ``raw`` is set.
        """
        if not self.resolved:
            raise StateError("forest has unresolved split nodes; finalize it first")
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        out = np.full(X.shape[0], self.base_score)
        for tree in self.trees:
            out += self.learning_rate * _route(tree, X, lambda n: n.split_value)
        if self.loss is Loss.LOGISTIC and not raw:
            return _sigmoid(out)
        return out

    # -- serialization ----------------------------------------------------

    def dumps(self) -> str:
        buf = io.StringIO()
        buf.write(f"# base_score={self.base_score!r}\n")
        buf.write(f"# learning_rate={self.learning_rate!r}\n")
        buf.write(f"# loss={self.loss.value}\n")
        buf.write(f"# features={'|'.join(self.feature_keys)}\n")
        buf.write(f"# trees={len(self.trees)}\n")
        buf.write("tree_id,node_id,kind,feature_id,split_ordinal,split_value,leaf_weight\n")
        for tid, tree in enumerate(self.trees):
            for nid in sorted(tree):
                n = tree[nid]
                if n.kind == "leaf":
                    buf.write(f"{tid},{nid},leaf,,,,{n.leaf_weight!r}\n")
                else:
                    sv = "" if n.split_value is None else repr(n.split_value)
                    buf.write(f"{tid},{nid},split,{n.feature},{n.split_ordinal},{sv},\n")
        return buf.getvalue()

    @classmethod
    def loads(cls, text: str) -> "PartialForest":
        meta, rows = {}, []
        for line in text.splitlines():
            if line.startswith("#"):
                k, _, v = line[1:].strip().partition("=")
                meta[k] = v
            elif line and not line.startswith("tree_id"):
                rows.append(line.split(","))
        try:
            keys = meta["features"].split("|") if meta.get("features") else []
            trees: list[dict[int, Node]] = [dict() for _ in range(int(meta["trees"]))]
            for tid, nid, kind, feat, ordn, sval, lw in rows:
                if kind == "leaf":
                    node = Node("leaf", leaf_weight=float(lw))
                else:
                    node = Node("split", int(feat), int(ordn), float(sval) if sval else None)
                trees[int(tid)][int(nid)] = node
            return cls(trees, float(meta["base_score"]), float(meta["learning_rate"]), Loss(meta["loss"]), keys)
        except (KeyError, ValueError) as exc:
            raise DataError(f"malformed model file: {exc}") from exc


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def _route(tree: dict[int, Node], X: np.ndarray, threshold) -> np.ndarray:
    out = np.empty(X.shape[0])
    stack = [(0, np.arange(X.shape[0]))]
    while stack:
        nid, idx = stack.pop()
        node = tree[nid]
        if node.kind == "leaf":
            out[idx] = node.leaf_weight
            continue
        go_left = X[idx, node.feature] <= threshold(node)
        stack.append((2 * nid + 1, idx[go_left]))
        stack.append((2 * nid + 2, idx[~go_left]))
    return out


def split_gain(GL: float, HL: float, GR: float, HR: float, params: BoostParams):
    """Second-order gain of splitting a node into (L, R); works on arrays."""
    lam = params.reg_lambda
    return 0.5 * (GL * GL / (HL + lam) + GR * GR / (HR + lam) - (GL + GR) ** 2 / (HL + HR + lam)) - params.min_split_gain


def _gradients(pred, y, loss: Loss):
    if loss is Loss.SQUARED:
        return pred - y, np.ones_like(y)
    p = np.clip(_sigmoid(pred), P_CLAMP, 1 - P_CLAMP)
    return p - y, p * (1 - p)


def base_score(y, loss: Loss) -> float:
    if loss is Loss.SQUARED:
        return float(np.mean(y))
    p = float(np.clip(np.mean(y), P_CLAMP, 1 - P_CLAMP))
    return math.log(p / (1 - p))


class _Splitter:
    """Exhaustive split search with per-feature sort orders computed once."""

    def __init__(self, X: np.ndarray):
        self.X = X
        self.orders = [np.argsort(X[:, j], kind="stable") for j in range(X.shape[1])]

    def best(self, idx, g, h, params: BoostParams):
        X = self.X
        member = np.zeros(X.shape[0], dtype=bool)
        member[idx] = True
        best = None
        for j, order in enumerate(self.orders):
            sub = order[member[order]]
            ranks = X[sub, j]
            gaps = np.flatnonzero(ranks[:-1] < ranks[1:])
            if gaps.size == 0:
                continue
            G = np.cumsum(g[sub])
            H = np.cumsum(h[sub])
            GL, HL = G[gaps], H[gaps]
            gain = split_gain(GL, HL, G[-1] - GL, H[-1] - HL, params)
            p = int(np.argmax(gain))
            if best is None or gain[p] > best[2]:
                best = (j, int(ranks[gaps[p]]), float(gain[p]))
        if best is None or not best[2] > 0:
            return None
        return best


def find_best_split(indices, dataset: OrdinalDataset, gradients, hessians, params: BoostParams):
    """Best ``(feature, split_ordinal, gain)`` for the samples in ``indices`` or ``None``.

    Ties go to the lowest feature index, then the lowest ordinal.
    """
    idx = np.asarray(indices)
    if idx.size < 2:
        return None
    return _Splitter(dataset.features).best(idx, np.asarray(gradients, float), np.asarray(hessians, float), params)


def _grow(splitter, idx, g, h, params, tree, nid, depth, leaf_out):
    found = splitter.best(idx, g, h, params) if depth < params.max_layers and idx.size >= 2 else None
    if found is None:
        w = -float(np.sum(g[idx])) / (float(np.sum(h[idx])) + params.reg_lambda)
        tree[nid] = Node("leaf", leaf_weight=w)
        leaf_out[idx] = w
        return
    j, ordinal, _ = found
    tree[nid] = Node("split", j, ordinal)
    left = splitter.X[idx, j] <= ordinal
    _grow(splitter, idx[left], g, h, params, tree, 2 * nid + 1, depth + 1, leaf_out)
    _grow(splitter, idx[~left], g, h, params, tree, 2 * nid + 2, depth + 1, leaf_out)


def train(dataset: OrdinalDataset, params: BoostParams = BoostParams(), history: Optional[list] = None) -> PartialForest:
    """Fit a boosted forest on rank columns.

    If ``history`` is a list, the training loss after each round is appended.
    """
    if dataset.labels is None:
        raise TrainingError("training needs labels")
    if dataset.n < 2:
        raise TrainingError("need at least two samples")
    y = dataset.labels
    if params.loss is Loss.LOGISTIC and not np.all((y == 0) | (y == 1)):
        raise TrainingError("logistic loss needs 0/1 labels")
    base = base_score(y, params.loss)
    pred = np.full(dataset.n, base)
    splitter = _Splitter(dataset.features)
    all_idx = np.arange(dataset.n)
    trees = []
    for _ in range(params.num_trees):
        g, h = _gradients(pred, y, params.loss)
        tree: dict[int, Node] = {}
        leaf_out = np.empty(dataset.n)
        _grow(splitter, all_idx, g, h, params, tree, 0, 0, leaf_out)
        pred = pred + params.learning_rate * leaf_out
        trees.append(tree)
        if history is not None:
            history.append(training_loss(pred, y, params.loss))
    return PartialForest(trees, base, params.learning_rate, params.loss, list(dataset.feature_keys))


def training_loss(pred, y, loss: Loss) -> float:
    if loss is Loss.SQUARED:
        return float(np.mean((pred - y) ** 2))
    p = np.clip(_sigmoid(pred), P_CLAMP, 1 - P_CLAMP)
    return float(-np.mean(y * np.log(p) + (1 - y) * np.log(1 - p)))


def predict(forest: PartialForest, sample) -> float:
    """Prediction for a single row of values."""
    return float(forest.predict(np.asarray(sample, dtype=float)[None, :])[0])


def resolve_from_values(forest: PartialForest, feature: int, values) -> None:
    """Resolve one column's splits using the value held at each ordinal."""
    v = np.asarray(values)
    order = np.argsort(v, kind="stable")
    by_rank = {r + 1: v[i] for r, i in enumerate(order)}
    needed = {(f, o): by_rank[o] for f, o in forest.unresolved() if f == feature}
    forest.resolve(needed, {feature})


def accuracy(y_true, prob, threshold: float = 0.5) -> float:
    """Fraction of correct 0/1 predictions."""
    y_true = np.asarray(y_true)
    return float(np.mean((np.asarray(prob) >= threshold).astype(int) == y_true))


def mse(a, b) -> float:
    a, b = np.asarray(a, float), np.asarray(b, float)
    if a.shape != b.shape or a.size == 0:
        raise DataError("mse needs equal-length non-empty inputs")
    return float(np.mean((a - b) ** 2))
