"""Streaming time-series computation: stateful transforms, stream
synchronisation, incremental operators and online-learning feedback loops."""

from .core import Sequence, Transform, chain, compose, identity, scan, unroll, unroll_columns
from .exceptions import (
    CodeRangeError,
    ConsistencyError,
    EmptyInputError,
    NumericError,
    OrderingError,
    ParameterError,
    ResourceError,
    ShapeError,
    StreamloopError,
)
from .learnloop import (
    GymFeedback,
    LoopOutput,
    OnlineSupervisedLearner,
    SupervisedModel,
    linear_squared,
    logistic,
    nonstationary_regression_experiment,
)
from .modules import (
    EWMA,
    Buffer,
    Diff,
    EWMCov,
    EWMVar,
    EwSpec,
    Lag,
    PctChange,
    RollingMean,
    TrailingOHLC,
    UpdateOnEvent,
    WindowSpec,
    trailing_ohlc,
)
from .sync import ForwardFill, Schedule, StreamSpec, Window, execute, synchronized_unroll, trace
from .timecodec import decode_time, encode_time, label_decode, label_encode

__version__ = "0.1.0"
