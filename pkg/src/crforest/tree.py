"""Growing a single competing-risks tree on a bootstrap resample."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._random import hashed_uniforms, mix_seed, tree_rng
from .estimators import node_arrays, summarize_arrays
from .splitting import find_best_split
from .stepfunction import bundle_from_arrays


def bootstrap(n, rng):
    """Per-row multiplicities of ``n`` draws with replacement from ``0..n-1``."""
    if n < 1:
        raise ValueError("bootstrap needs at least one row")
    return np.bincount(rng.integers(0, n, size=n), minlength=n)


@dataclass
class Leaf:
    """Terminal-node curves sharing one jump-time vector."""

    times: np.ndarray
    survival: np.ndarray
    cif: np.ndarray
    chf: np.ndarray
    size: int

    def functions(self):
        return bundle_from_arrays(self.times, self.survival, self.cif, self.chf)

    def cif_integral(self, j, tau):
        t = self.times
        if t.size == 0:
            return 0.0
        ends = np.minimum(np.append(t[1:], tau), tau)
        return float(np.dot(self.cif[j - 1], np.clip(ends - t, 0.0, None)))


@dataclass
class Tree:
    """A fitted tree stored as flat node arrays.

    Node 0 is the root. For split nodes ``feature >= 0`` and ``left`` /
    ``right`` index the children; for terminal nodes ``feature == -1`` and
    ``leaf`` indexes ``leaves``. Categorical splits keep their left-level
    set in ``levels[node]``; numeric splits send ``x <= threshold`` left.
    """

    index: int
    seed: int
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    missing_left: np.ndarray
    leaf: np.ndarray
    levels: dict
    leaves: list
    in_bag: np.ndarray
    _integral_cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n_nodes(self):
        return self.feature.size

    @property
    def depth(self):
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(self.n_nodes):
            if self.feature[i] >= 0:
                depth[self.left[i]] = depth[i] + 1
                depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def apply(self, X, row_ids, seed):
        """Terminal-leaf index for each row of ``X``.

        Rows missing the split covariate go left with probability
        ``missing_left[node]``, using uniforms hashed from
        ``(seed, tree index, node, row id)``.
        """
        n = X.shape[0]
        node = np.zeros(n, dtype=np.int64)
        active = np.arange(n)
        while active.size:
            cur = node[active]
            feat = self.feature[cur]
            split = feat >= 0
            active, cur, feat = active[split], cur[split], feat[split]
            if active.size == 0:
                break
            x = X[active, feat]
            go_left = x <= self.threshold[cur]
            for nd, lv in self.levels.items():
                at = cur == nd
                if at.any():
                    go_left[at] = np.isin(x[at], lv)
            miss = np.isnan(x)
            if miss.any():
                m_idx = np.flatnonzero(miss)
                u = np.empty(m_idx.size)
                for nd in np.unique(cur[m_idx]):
                    sel = m_idx[cur[m_idx] == nd]
                    u[np.searchsorted(m_idx, sel)] = hashed_uniforms(
                        seed, self.index, nd, row_ids[active[sel]])
                go_left[m_idx] = u < self.missing_left[cur[m_idx]]
            node[active] = np.where(go_left, self.left[cur], self.right[cur])
        return self.leaf[node]

    def cif_integrals(self, j, tau):
        """Integral of each leaf's CIF for event ``j`` over ``[0, tau]``."""
        key = (j, float(tau))
        out = self._integral_cache.get(key)
        if out is None:
            out = np.array([lf.cif_integral(j, tau) for lf in self.leaves])
            self._integral_cache[key] = out
        return out


def grow_tree(dataset, params, tree_index):
    """Grow tree ``tree_index`` of a forest.

    The tree depends only on the dataset, the parameters and the tree's own
    seed (mixed from ``params.random_seed`` and ``tree_index``), never on
    which worker grows it or in which order.
    """
    seed = mix_seed(params.random_seed, tree_index)
    rng = tree_rng(params.random_seed, tree_index)
    n = dataset.n
    counts = bootstrap(n, rng)
    J = dataset.n_events
    resp = dataset.response
    spec = params.split_finder
    min_split = 2 * params.node_size

    feature, threshold, left, right, missing_left, leaf = [], [], [], [], [], []
    levels, leaves = {}, []

    def new_node():
        feature.append(-1)
        threshold.append(np.nan)
        left.append(-1)
        right.append(-1)
        missing_left.append(np.nan)
        leaf.append(-1)
        return len(feature) - 1

    def make_leaf(node, rows):
        w = counts[rows]
        s = summarize_arrays(resp.time[rows], resp.event[rows], J, w)
        times, surv, cif, chf = node_arrays(s)
        leaf[node] = len(leaves)
        leaves.append(Leaf(times, surv, cif, chf, int(w.sum())))

    stack = [(new_node(), np.flatnonzero(counts), 0)]
    while stack:
        node, rows, depth = stack.pop()
        size = counts[rows].sum()
        split = None
        if size >= min_split and depth < params.max_node_depth:
            split = find_best_split(rows, dataset, spec, params.mtry,
                                    params.number_of_splits, rng, counts[rows])
        if split is None:
            make_leaf(node, rows)
            continue
        go_left = rng.random(split.missing_rows.size) < 0.5
        left_rows = np.sort(np.concatenate([split.left_rows, split.missing_rows[go_left]]))
        right_rows = np.sort(np.concatenate([split.right_rows, split.missing_rows[~go_left]]))
        feature[node] = split.column
        if split.is_categorical:
            levels[node] = split.levels
        else:
            threshold[node] = split.threshold
        missing_left[node] = split.left_fraction
        li, ri = new_node(), new_node()
        left[node], right[node] = li, ri
        stack.append((ri, right_rows, depth + 1))
        stack.append((li, left_rows, depth + 1))

    return Tree(
        index=int(tree_index),
        seed=int(seed),
        feature=np.array(feature, dtype=np.int32),
        threshold=np.array(threshold, dtype=np.float64),
        left=np.array(left, dtype=np.int32),
        right=np.array(right, dtype=np.int32),
        missing_left=np.array(missing_left, dtype=np.float64),
        leaf=np.array(leaf, dtype=np.int32),
        levels=levels,
        leaves=leaves,
        in_bag=counts.astype(np.uint16),
    )
