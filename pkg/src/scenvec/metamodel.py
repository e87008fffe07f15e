"""Extremely randomized regression trees from scenario inputs to evaluation metrics."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from scenvec.scenario_model import ScenarioKind, SceneRecord

# Active scenario inputs per kind, in input-table order.
INPUT_MANIFEST = {
    ScenarioKind.ACC: ("v_ego", "x_co", "v_co", "t_v_co", "a_co", "t_a_co"),
    ScenarioKind.LK: ("a0", "a1", "a2", "a3", "v_ego"),
    ScenarioKind.ACC_AND_LK: ("a0", "a1", "a2", "a3", "v_ego", "x_co", "v_co", "t_v_co", "a_co", "t_a_co"),
}
# Metrics reported per scenario, in the order of the comparison table.
OUTPUT_MANIFEST = {
    ScenarioKind.ACC: ("a_min", "d_min"),
    ScenarioKind.LK: ("p_lat_max",),
    ScenarioKind.ACC_AND_LK: ("a_min", "d_min", "p_lat_max"),
}


@dataclass
class TabularDataset:
    inputs: np.ndarray
    outputs: np.ndarray
    input_names: tuple[str, ...]
    output_names: tuple[str, ...]

    def __post_init__(self):
        self.inputs = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        self.outputs = np.asarray(self.outputs, dtype=float)
        if self.outputs.ndim == 1:
            self.outputs = self.outputs[:, None]
        if len(self.inputs) != len(self.outputs):
            raise ValueError("input and output row counts differ")
        if self.inputs.shape[1] != len(self.input_names) or self.outputs.shape[1] != len(self.output_names):
            raise ValueError("column manifest does not match the matrices")
        if np.isnan(self.inputs).any() or np.isnan(self.outputs).any():
            raise ValueError("dataset contains missing values")

    def __len__(self) -> int:
        return len(self.inputs)

    @classmethod
    def from_records(cls, records: Sequence[SceneRecord], kind: ScenarioKind) -> "TabularDataset":
        ins, outs = INPUT_MANIFEST[kind], OUTPUT_MANIFEST[kind]
        X = [[getattr(r.scenario, name) for name in ins] for r in records]
        Y = [[getattr(r.metrics, name) for name in outs] for r in records]
        return cls(np.array(X, dtype=float).reshape(-1, len(ins)), np.array(Y, dtype=float).reshape(-1, len(outs)),
                   ins, outs)


@dataclass(frozen=True)
class TreeParams:
    num_trees: int = 100
    min_samples_leaf: int = 2
    features_per_split: Optional[int] = None  # None: all features
    seed: int = 0


@dataclass
class Tree:
    """Flat array tree; ``feature[i] == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_samples: np.ndarray

    def apply(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(len(X), dtype=np.int64)
        active = self.feature[node] >= 0
        while active.any():
            n = node[active]
            go_left = X[active, self.feature[n]] <= self.threshold[n]
            node[active] = np.where(go_left, self.left[n], self.right[n])
            active = self.feature[node] >= 0
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]


@dataclass
class TreeEnsemble:
    """One forest per output metric; ``forests[j]`` predicts output column ``j``."""

    forests: list[list[Tree]]
    params: TreeParams
    input_names: tuple[str, ...] = ()
    output_names: tuple[str, ...] = ()

    @property
    def trees(self) -> list[Tree]:
        return [t for forest in self.forests for t in forest]


def _sse(sum_y: np.ndarray, sum_y2: np.ndarray, n: np.ndarray) -> np.ndarray:
    # summed over outputs: sum(y^2) - (sum y)^2 / n
    return np.sum(sum_y2 - sum_y**2 / n[..., None], axis=-1)


def _build_tree(X: np.ndarray, Y: np.ndarray, params: TreeParams, rng: np.random.Generator) -> Tree:
    min_leaf = params.min_samples_leaf
    n_features = X.shape[1]
    k = n_features if params.features_per_split is None else min(params.features_per_split, n_features)
    feature, threshold, left, right, value, counts = [], [], [], [], [], []

    def new_node(rows):
        feature.append(-1)
        threshold.append(np.nan)
        left.append(-1)
        right.append(-1)
        value.append(Y[rows].mean(axis=0))
        counts.append(len(rows))
        return len(feature) - 1

    root = new_node(np.arange(len(X)))
    stack = [(root, np.arange(len(X)))]
    while stack:
        node, rows = stack.pop()
        if len(rows) < 2 * min_leaf:
            continue
        y = Y[rows]
        if np.all(y == y[0]):
            continue
        xs = X[rows]
        lo, hi = xs.min(axis=0), xs.max(axis=0)
        candidates = np.flatnonzero(hi > lo)
        if len(candidates) == 0:
            continue
        if k < n_features:
            candidates = rng.permutation(candidates)[:k]
        u = rng.random(len(candidates))
        thr = lo[candidates] + u * (hi[candidates] - lo[candidates])
        thr = np.maximum(thr, np.nextafter(lo[candidates], np.inf))
        goes_left = xs[:, candidates] <= thr  # (n, c)
        n_left = goes_left.sum(axis=0)
        n_right = len(rows) - n_left
        ok = (n_left >= min_leaf) & (n_right >= min_leaf)
        if not ok.any():
            continue
        gl = goes_left.T.astype(float)  # (c, n)
        sl, sl2 = gl @ y, gl @ (y * y)
        st, st2 = y.sum(axis=0), (y * y).sum(axis=0)
        with np.errstate(divide="ignore", invalid="ignore"):
            cost = _sse(sl, sl2, n_left.astype(float)) + _sse(st - sl, st2 - sl2, n_right.astype(float))
        cost = np.where(ok, cost, np.inf)
        best = int(np.argmin(cost))
        mask = goes_left[:, best]
        feature[node] = int(candidates[best])
        threshold[node] = float(thr[best])
        left_rows, right_rows = rows[mask], rows[~mask]
        left[node] = new_node(left_rows)
        right[node] = new_node(right_rows)
        stack.append((right[node], right_rows))
        stack.append((left[node], left_rows))

    return Tree(
        feature=np.array(feature, dtype=np.int64),
        threshold=np.array(threshold),
        left=np.array(left, dtype=np.int64),
        right=np.array(right, dtype=np.int64),
        value=np.array(value),
        n_samples=np.array(counts, dtype=np.int64),
    )


def fit(dataset: TabularDataset, params: TreeParams = TreeParams()) -> TreeEnsemble:
    """Grow ``num_trees`` extremely randomized trees per output column on the full dataset.

    Each node draws one uniform threshold per considered feature and keeps the
    split with the lowest within-child squared error. Outputs get separate
    forests so that a large-variance metric does not dictate the splits of a
    small-variance one.
    """
    # a single row with min_samples_leaf=1 is accepted and becomes a one-leaf tree
    needed = 1 if params.min_samples_leaf == 1 else 2 * params.min_samples_leaf
    if len(dataset) < needed:
        raise ValueError(f"need at least {needed} rows, got {len(dataset)}")
    forests = []
    for j in range(dataset.outputs.shape[1]):
        seeds = np.random.SeedSequence([params.seed, 0xE7, j]).spawn(params.num_trees)
        y = dataset.outputs[:, j:j + 1]
        forests.append([_build_tree(dataset.inputs, y, params, np.random.Generator(np.random.Philox(s)))
                        for s in seeds])
    return TreeEnsemble(forests, params, dataset.input_names, dataset.output_names)


def predict(ensemble: TreeEnsemble, inputs) -> np.ndarray:
    """Average leaf values over trees. A 1-D row gives a 1-D metric vector."""
    X = np.asarray(inputs, dtype=float)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    expected = len(ensemble.input_names)
    if expected and X.shape[1] != expected:
        raise ValueError(f"expected {expected} features, got {X.shape[1]}")
    out = np.column_stack([np.mean([t.predict(X)[:, 0] for t in forest], axis=0) for forest in ensemble.forests])
    return out[0] if single else out
