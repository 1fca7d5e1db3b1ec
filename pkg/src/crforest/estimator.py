"""scikit-learn style wrapper around forest training and prediction."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .data import Dataset, check_event_codes
from .forest import DEFAULT_MAX_NODE_DEPTH, TrainingParameters, predict_oob, train
from .metrics import largest_event_time, naive_concordance
from .splitting import SplitFinderSpec
from .validation import check_covariates, check_response


class CompetingRiskForest(BaseEstimator):
    """Random competing-risks forest.

    Parameters
    ----------
    ntree : int, default=100
        Number of trees, each grown on a bootstrap resample.
    mtry : int, optional
        Covariates tried per split; defaults to ``ceil(sqrt(n_features))``.
    number_of_splits : int, default=0
        Random candidate splits per covariate; 0 tries every split.
    node_size : int, default=15
        Nodes with fewer than ``2 * node_size`` rows become terminal.
    max_node_depth : int, default=100000
    split_rule : {'logrank', 'gray'}, default='logrank'
        ``'gray'`` needs censor times for every subject.
    events_of_focus : sequence of int, optional
        Events the split statistic is built from; defaults to all events.
    random_seed : int, optional
    cores : int, optional
        Worker processes used for training; does not change the result.
    save_path : str, optional
        Directory receiving each tree as soon as it is grown; an interrupted
        fit with the same arguments resumes from it.
    categorical_features : sequence, optional
        Indices of array columns holding categorical codes (data frames use
        their dtypes instead).

    Attributes
    ----------
    forest_ : Forest
    n_events_ : int
    n_features_in_ : int
    mortality_tau_ : float
        Largest uncensored training time; default horizon for mortality.
    """

    def __init__(self, ntree=100, mtry=None, number_of_splits=0, node_size=15,
                 max_node_depth=DEFAULT_MAX_NODE_DEPTH, split_rule="logrank",
                 events_of_focus=None, random_seed=None, cores=None, save_path=None,
                 categorical_features=()):
        self.ntree = ntree
        self.mtry = mtry
        self.number_of_splits = number_of_splits
        self.node_size = node_size
        self.max_node_depth = max_node_depth
        self.split_rule = split_rule
        self.events_of_focus = events_of_focus
        self.random_seed = random_seed
        self.cores = cores
        self.save_path = save_path
        self.categorical_features = categorical_features

    def _parameters(self, n_events):
        spec = SplitFinderSpec.for_events(self.split_rule, n_events, self.events_of_focus)
        return TrainingParameters(
            ntree=self.ntree, mtry=self.mtry, number_of_splits=self.number_of_splits,
            node_size=self.node_size, max_node_depth=self.max_node_depth,
            split_finder=spec, random_seed=self.random_seed, cores=self.cores,
            save_path=self.save_path)

    def fit(self, X, y=None, censor_time=None):
        """Grow the forest.

        ``X`` may be a :class:`Dataset` (then ``y`` is taken from it), a data
        frame or an array; ``y`` is anything :func:`check_response` accepts.
        """
        if isinstance(X, Dataset) and y is None:
            dataset = X
        else:
            Xa, columns = check_covariates(X, categorical_features=self.categorical_features)
            response = check_response(y, censor_time)
            dataset = Dataset(Xa, columns, response, check_event_codes(response.event))
        self.forest_ = train(dataset, self._parameters(dataset.n_events))
        self.n_events_ = dataset.n_events
        self.n_features_in_ = dataset.X.shape[1]
        self.feature_names_in_ = np.array(dataset.feature_names, dtype=object)
        self.mortality_tau_ = largest_event_time(dataset.response)
        self._train_data = dataset
        return self

    def _check_fitted(self):
        if not hasattr(self, "forest_"):
            raise NotFittedError("this CompetingRiskForest is not fitted yet; call fit first")

    def _encode(self, X):
        self._check_fitted()
        Xa, _ = check_covariates(X, columns=self.forest_.columns)
        return Xa

    def predict(self, X, seed=None):
        """Averaged survival, CIF and CHF curves for each row (a PredictionSet)."""
        X = self._encode(X)
        return self.forest_.predict(X, seed=seed)

    def predict_oob(self, seed=None):
        """Out-of-bag predictions for the training rows."""
        self._check_fitted()
        return predict_oob(self.forest_, self._train_data, seed)

    def predict_cif(self, X, event):
        return self.predict(X).cifs(event)

    def predict_mortality(self, X, event, tau=None):
        self._check_fitted()
        tau = self.mortality_tau_ if tau is None else tau
        return self.predict(X).mortality(event, tau)

    def score(self, X, y, tau=None):
        """Mean naive concordance index over events (higher is better)."""
        response = check_response(y)
        preds = self.predict(X)
        tau = self.mortality_tau_ if tau is None else tau
        morts = [preds.mortality(j, tau) for j in range(1, self.n_events_ + 1)]
        return float(np.nanmean(1.0 - naive_concordance(response.time, response.event, morts)))
