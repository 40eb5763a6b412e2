"""scikit-learn compatible wrappers around the streaming operators.

Rows of ``X`` are time steps and columns are independent series. ``fit``
only validates the input and initialises the operator state; ``transform``
replays the operator from that initial state (so it is repeatable), while
``partial_transform`` continues from wherever the previous call stopped,
which is what a live stream needs.

>>> import numpy as np
>>> from sklearn.pipeline import make_pipeline
>>> pipe = make_pipeline(LagTransformer(1), DiffTransformer(1))
>>> pipe.fit_transform(np.array([[1.0], [2.0], [4.0]])).ravel().tolist()
[nan, nan, 1.0]
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, OneToOneFeatureMixin, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted, validate_data

from .core import Sequence, check_seed, scan
from .learnloop import OnlineSupervisedLearner, linear_squared
from .modules import EWMA, Diff, EWMVar, Lag, PctChange, RollingMean
from .validation import check_learning_rate


class StreamTransformer(OneToOneFeatureMixin, TransformerMixin, BaseEstimator):
    """Base class: subclasses build their operator in ``_build``."""

    def _build(self):
        raise NotImplementedError

    def _validate(self, X, reset):
        return validate_data(
            self, X, reset=reset, dtype=np.float64, ensure_all_finite="allow-nan"
        )

    def fit(self, X, y=None):
        X = self._validate(X, reset=True)
        self.transform_ = self._build()
        self.params_, self.initial_state_ = self.transform_.init(
            check_seed(self.seed), (X.shape[1],)
        )
        self.state_ = self.initial_state_
        return self

    def _run(self, X, state):
        outputs, state = scan(self.transform_, self.params_, state, list(X))
        return np.asarray(outputs, dtype=np.float64).reshape(len(X), -1), state

    def transform(self, X):
        check_is_fitted(self, "transform_")
        X = self._validate(X, reset=False)
        return self._run(X, self.initial_state_)[0]

    def partial_transform(self, X):
        """Transform the next chunk of a stream, carrying state across calls."""
        check_is_fitted(self, "transform_")
        X = self._validate(X, reset=False)
        out, self.state_ = self._run(X, self.state_)
        return out

    def to_sequence(self, X, timestamps=None) -> Sequence:
        """Transform ``X`` and wrap the result with its timestamps."""
        return Sequence.from_values(self.transform(X), timestamps)


class EWMATransformer(StreamTransformer):
    def __init__(self, alpha=0.5, adjust=True, ignore_na=False, seed=0):
        self.alpha = alpha
        self.adjust = adjust
        self.ignore_na = ignore_na
        self.seed = seed

    def _build(self):
        return EWMA(self.alpha, self.adjust, self.ignore_na)


class EWMVarTransformer(EWMATransformer):
    def _build(self):
        return EWMVar(self.alpha, self.adjust, self.ignore_na)


class LagTransformer(StreamTransformer):
    def __init__(self, k=1, seed=0):
        self.k = k
        self.seed = seed

    def _build(self):
        return Lag(self.k)


class DiffTransformer(LagTransformer):
    def _build(self):
        return Diff(self.k)


class PctChangeTransformer(LagTransformer):
    def _build(self):
        return PctChange(self.k)


class RollingMeanTransformer(StreamTransformer):
    def __init__(self, window=3, min_periods=None, seed=0):
        self.window = window
        self.min_periods = min_periods
        self.seed = seed

    def _build(self):
        return RollingMean(self.window, self.min_periods)


class OnlineLinearRegressor(RegressorMixin, BaseEstimator):
    """Linear regression trained by single-pass SGD on squared loss.

    ``partial_fit`` continues from the current weights; ``fit`` restarts from
    ``w0`` (zeros by default). ``loss_curve_`` holds the pre-update loss of
    every sample seen so far.
    """

    def __init__(self, learning_rate=0.01, w0=None):
        self.learning_rate = learning_rate
        self.w0 = w0

    def fit(self, X, y):
        for attr in ("coef_", "loss_curve_"):
            if hasattr(self, attr):
                delattr(self, attr)
        return self.partial_fit(X, y)

    def partial_fit(self, X, y):
        first = not hasattr(self, "coef_")
        X, y = validate_data(self, X, y, reset=first, dtype=np.float64, y_numeric=True)
        lr = check_learning_rate(self.learning_rate)
        if first:
            w0 = np.zeros(X.shape[1]) if self.w0 is None else np.asarray(self.w0, dtype=np.float64)
            self.coef_ = w0
            self.loss_curve_ = []
        learner = OnlineSupervisedLearner(linear_squared(), lr, self.coef_)
        params, state = learner.init(0, ((X.shape[1],), ()))
        outputs, state = scan(learner, params, state, list(zip(X, y)))
        self.coef_ = state["weights"]
        self.loss_curve_.extend(float(o[1]) for o in outputs)
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = validate_data(self, X, reset=False, dtype=np.float64)
        return X @ self.coef_
