"""Training a forest of competing-risks trees and predicting with it."""

from __future__ import annotations

import logging
import math
import multiprocessing
import os
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import persistence
from .data import Column, ConfigurationError, SchemaError
from .splitting import GRAY, LOGRANK, SplitFinderSpec
from .stepfunction import average_bundles
from .tree import grow_tree

logger = logging.getLogger(__name__)

DEFAULT_MAX_NODE_DEPTH = 100000


@dataclass(frozen=True)
class TrainingParameters:
    """Forest hyper-parameters.

    ``number_of_splits = 0`` tries every achievable split. Nodes holding
    fewer than ``2 * node_size`` (bootstrap-weighted) rows are not split.
    ``mtry=None`` resolves to ``ceil(sqrt(p))``; ``split_finder=None`` to a
    log-rank finder over every event; ``random_seed=None`` to a fresh seed
    that is recorded on the fitted forest.
    """

    ntree: int = 100
    mtry: int | None = None
    number_of_splits: int = 0
    node_size: int = 15
    max_node_depth: int = DEFAULT_MAX_NODE_DEPTH
    split_finder: SplitFinderSpec | None = None
    random_seed: int | None = None
    cores: int | None = None
    save_path: str | None = field(default=None, compare=False)

    def resolve(self, dataset):
        """Fill defaults against ``dataset`` and validate."""
        p = dataset.X.shape[1]
        J = dataset.n_events
        mtry = self.mtry if self.mtry is not None else max(1, math.ceil(math.sqrt(p)))
        spec = self.split_finder or SplitFinderSpec.for_events(LOGRANK, J)
        seed = self.random_seed
        if seed is None:
            seed = int(np.random.SeedSequence().entropy) & ((1 << 63) - 1)
        cores = self.cores if self.cores is not None else (os.cpu_count() or 1)
        out = replace(self, mtry=int(mtry), split_finder=spec, random_seed=int(seed),
                      cores=int(cores))
        out.validate(p, J)
        if spec.kind == GRAY and not dataset.response.has_censor_times:
            raise ConfigurationError(
                "the Gray split finder requires censor times for every subject")
        return out

    def validate(self, n_columns, n_events):
        if self.ntree < 1:
            raise ConfigurationError("ntree must be >= 1")
        if not 1 <= self.mtry <= n_columns:
            raise ConfigurationError(f"mtry must be in 1..{n_columns}")
        if self.number_of_splits < 0:
            raise ConfigurationError("number_of_splits must be >= 0")
        if self.node_size < 1:
            raise ConfigurationError("node_size must be >= 1")
        if self.max_node_depth < 1:
            raise ConfigurationError("max_node_depth must be >= 1")
        if self.cores < 1:
            raise ConfigurationError("cores must be >= 1")
        if max(self.split_finder.events) > n_events:
            raise ConfigurationError("split finder names events not present in the data")

    def model_dict(self):
        """Parameters that determine the fitted model (runtime knobs excluded)."""
        d = asdict(self)
        d.pop("cores")
        d.pop("save_path")
        d["split_finder"] = self.split_finder.to_dict()
        return d

    @classmethod
    def from_model_dict(cls, d):
        d = dict(d)
        sf = d.pop("split_finder")
        spec = SplitFinderSpec(sf["kind"], tuple(sf["events"]), tuple(sf["events_of_focus"]))
        return cls(split_finder=spec, **d)


@dataclass
class Forest:
    """Fitted trees plus everything needed to interpret new data."""

    trees: list
    parameters: TrainingParameters
    columns: tuple
    n_events: int
    data_hash: str
    n_train: int

    @property
    def ntree(self):
        return len(self.trees)

    def meta(self):
        return {
            "parameters": self.parameters.model_dict(),
            "columns": [c.to_dict() for c in self.columns],
            "n_events": self.n_events,
            "data_hash": self.data_hash,
            "n_train": self.n_train,
        }

    def save(self, directory):
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        persistence.write_meta(directory, self.meta())
        for tree in self.trees:
            persistence.write_tree(directory, tree)

    @classmethod
    def load(cls, directory):
        meta = persistence.read_meta(directory)
        params = TrainingParameters.from_model_dict(meta["parameters"])
        missing = [i for i in range(params.ntree)
                   if not persistence.tree_path(directory, i).exists()]
        if missing:
            raise persistence.FormatError(
                f"{directory}: {len(missing)} of {params.ntree} tree files are missing")
        trees = [persistence.read_tree(persistence.tree_path(directory, i))
                 for i in range(params.ntree)]
        columns = tuple(Column.from_dict(c) for c in meta["columns"])
        return cls(trees, params, columns, meta["n_events"], meta["data_hash"], meta["n_train"])

    def check_X(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.ndim != 2 or X.shape[1] != len(self.columns):
            raise SchemaError(f"expected {len(self.columns)} covariate columns, got shape {X.shape}")
        return X

    def apply(self, X, row_ids=None, seed=None):
        """Leaf index of every row in every tree, shape ``(n, ntree)``."""
        X = self.check_X(X)
        row_ids = np.arange(X.shape[0]) if row_ids is None else np.asarray(row_ids)
        seed = self.parameters.random_seed if seed is None else seed
        out = np.empty((X.shape[0], self.ntree), dtype=np.int32)
        for m, tree in enumerate(self.trees):
            out[:, m] = tree.apply(X, row_ids, seed)
        return out

    def predict(self, X, seed=None):
        return PredictionSet(self, self.apply(X, seed=seed))

    def predict_oob(self, dataset, seed=None):
        return predict_oob(self, dataset, seed)


class PredictionSet:
    """Per-row forest predictions, materialized lazily.

    Rows are stored as the leaf they reach in each tree; curves are built
    on access by averaging the selected leaves. For out-of-bag predictions
    ``mask[i, m]`` is False when row ``i`` was in tree ``m``'s bootstrap
    sample; rows with no out-of-bag tree yield ``None``.
    """

    def __init__(self, forest, leaf_ids, mask=None, oob=False):
        self.forest = forest
        self.leaf_ids = leaf_ids
        self.mask = mask
        self.oob = oob

    def __len__(self):
        return self.leaf_ids.shape[0]

    @property
    def n_trees(self):
        if self.mask is None:
            return np.full(len(self), self.forest.ntree)
        return self.mask.sum(axis=1)

    def _trees_for(self, i):
        if self.mask is None:
            return range(self.forest.ntree)
        return np.flatnonzero(self.mask[i])

    def __getitem__(self, i):
        trees = self._trees_for(i)
        if len(trees) == 0:
            return None
        leaves = [self.forest.trees[m].leaves[self.leaf_ids[i, m]] for m in trees]
        return average_bundles([lf.times for lf in leaves], [lf.survival for lf in leaves],
                               [lf.cif for lf in leaves], [lf.chf for lf in leaves])

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def survival_curves(self):
        return [None if f is None else f.survival for f in self]

    def cifs(self, j):
        return [None if f is None else f.cif(j) for f in self]

    def chfs(self, j):
        return [None if f is None else f.chf(j) for f in self]

    def mortality(self, j, tau):
        """Integral over ``[0, tau]`` of each row's CIF for event ``j``.

        Integration is linear, so this averages per-leaf integrals instead
        of building the averaged curve. Rows without trees get NaN.
        """
        if not tau > 0:
            raise ValueError("tau must be positive")
        vals = np.empty(self.leaf_ids.shape)
        for m, tree in enumerate(self.forest.trees):
            vals[:, m] = tree.cif_integrals(j, tau)[self.leaf_ids[:, m]]
        if self.mask is None:
            return vals.mean(axis=1)
        counts = self.mask.sum(axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(counts > 0, (vals * self.mask).sum(axis=1) / counts, np.nan)


def predict_row(forest, x, seed=None, row_id=0):
    """Averaged curve bundle for a single covariate vector."""
    leaf_ids = forest.apply(np.asarray(x, dtype=np.float64)[None, :], [row_id], seed)
    return PredictionSet(forest, leaf_ids)[0]


def predict_oob(forest, dataset, seed=None):
    """Out-of-bag predictions for the training data."""
    if dataset.n != forest.n_train:
        raise ValueError(f"out-of-bag prediction needs the {forest.n_train}-row training data, "
                         f"got {dataset.n} rows")
    leaf_ids = forest.apply(dataset.X, seed=seed)
    mask = np.stack([tree.in_bag == 0 for tree in forest.trees], axis=1)
    return PredictionSet(forest, leaf_ids, mask, oob=True)


# ---------------------------------------------------------------------------
# training

_worker_state = {}


def _init_worker(dataset, params):
    _worker_state["dataset"] = dataset
    _worker_state["params"] = params


def _grow_in_worker(index):
    return grow_tree(_worker_state["dataset"], _worker_state["params"], index)


def _prepare_save_path(directory, meta):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    if not os.access(directory, os.W_OK):
        raise PermissionError(f"save path {directory} is not writable")
    if (directory / persistence.META_NAME).exists():
        old = persistence.read_meta(directory)
        if old != meta:
            raise ConfigurationError(
                f"{directory} holds trees from a different model; use an empty directory")
    persistence.write_meta(directory, meta)


def train(dataset, params=None, progress=None):
    """Grow a forest on ``dataset``.

    Tree ``t`` is grown from a seed mixed from ``random_seed`` and ``t``,
    so the forest is identical for any number of worker processes. With
    ``save_path`` set, each tree is written as soon as it is finished and
    trees already on disk (from an interrupted run of the same model) are
    loaded instead of regrown.

    Parameters
    ----------
    progress : callable, optional
        Called with the index of each tree as it becomes available.
    """
    params = params or TrainingParameters()
    if (params.random_seed is None and params.save_path is not None
            and (Path(params.save_path) / persistence.META_NAME).exists()):
        saved = persistence.read_meta(params.save_path)["parameters"]["random_seed"]
        params = replace(params, random_seed=saved)
    params = params.resolve(dataset)
    forest = Forest([None] * params.ntree, params, dataset.columns, dataset.n_events,
                    dataset.content_hash(), dataset.n)
    todo = list(range(params.ntree))
    save = params.save_path
    if save is not None:
        _prepare_save_path(save, forest.meta())
        done = persistence.existing_tree_indices(save, params.ntree)
        for i in done:
            forest.trees[i] = persistence.read_tree(persistence.tree_path(save, i))
            if progress:
                progress(i)
        if done:
            logger.info("resuming: %d of %d trees already saved", len(done), params.ntree)
        todo = [i for i in todo if forest.trees[i] is None]

    def finish(tree):
        if save is not None:
            persistence.write_tree(save, tree)
        forest.trees[tree.index] = tree
        if progress:
            progress(tree.index)

    workers = min(params.cores, len(todo))
    if workers <= 1:
        for i in todo:
            finish(grow_tree(dataset, params, i))
    else:
        ctx = multiprocessing.get_context("fork") if hasattr(os, "fork") else None
        with ProcessPoolExecutor(workers, mp_context=ctx, initializer=_init_worker,
                                 initargs=(dataset, params)) as pool:
            futures = [pool.submit(_grow_in_worker, i) for i in todo]
            for fut in as_completed(futures):
                finish(fut.result())
    return forest
