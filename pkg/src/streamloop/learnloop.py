"""Online learning and agent/environment feedback loops as stateful transforms.

The learner keeps its weights in the transform *state*, so a plain
:func:`~streamloop.core.unroll` drives training. :func:`GymFeedback` wires an
agent and an environment into one transform whose observation path goes
through a one-step delay line.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .core import Sequence, Transform, rng, split_seed, unroll
from .exceptions import NumericError, ParameterError, ShapeError
from .modules import Lag
from .validation import check_learning_rate, check_positive_int


@dataclass(frozen=True)
class SupervisedModel:
    """A differentiable model: prediction, loss, and the loss gradient in the weights."""

    predict: Callable[[np.ndarray, np.ndarray], float]
    loss: Callable[[float, float], float]
    grad: Callable[[np.ndarray, np.ndarray, float], np.ndarray]
    name: str = "model"


def linear_squared() -> SupervisedModel:
    """``y_hat = w . x`` with squared loss ``(y_hat - y) ** 2``."""

    def predict(w, x):
        return float(np.dot(w, x))

    def loss(pred, y):
        return (pred - y) ** 2

    def grad(w, x, y):
        return 2.0 * (float(np.dot(w, x)) - y) * np.asarray(x, dtype=np.float64)

    return SupervisedModel(predict, loss, grad, "linear_squared")


def logistic() -> SupervisedModel:
    """``p = sigmoid(w . x)`` with binary cross-entropy against ``y`` in [0, 1]."""

    def predict(w, x):
        z = float(np.dot(w, x))
        if z >= 0:
            return 1.0 / (1.0 + np.exp(-z))
        ez = np.exp(z)
        return ez / (1.0 + ez)

    def loss(p, y):
        eps = 1e-15
        p = min(max(p, eps), 1.0 - eps)
        return -(y * np.log(p) + (1.0 - y) * np.log1p(-p))

    def grad(w, x, y):
        return (predict(w, x) - y) * np.asarray(x, dtype=np.float64)

    return SupervisedModel(predict, loss, grad, "logistic")


def OnlineSupervisedLearner(model: SupervisedModel, learning_rate: float, w0) -> Transform:
    """SGD on ``(x, y)`` rows.

    Each step predicts with the current weights, emits
    ``(prediction, loss, weights_used)`` and then moves the weights along the
    negative gradient.
    """
    lr = check_learning_rate(learning_rate)
    w0 = np.array(w0, dtype=np.float64)
    if w0.ndim != 1:
        raise ShapeError(f"w0 must be a vector, got shape {w0.shape}")
    dim = w0.shape[0]

    def init(seed, input_shape):
        if not (isinstance(input_shape, tuple) and len(input_shape) == 2
                and input_shape[0] == (dim,) and input_shape[1] == ()):
            raise ShapeError(f"learner expects (x[{dim}], y) rows, got shape {input_shape}")
        return {}, {"weights": w0.copy()}

    def apply(params, state, row):
        x, y = row
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (dim,):
            raise ShapeError(f"x has shape {x.shape}, expected ({dim},)")
        w = state["weights"]
        pred = model.predict(w, x)
        loss = model.loss(pred, float(y))
        g = np.asarray(model.grad(w, x, float(y)), dtype=np.float64)
        if not np.all(np.isfinite(g)):
            raise NumericError("non-finite gradient")
        return (pred, loss, w), {"weights": w - lr * g}

    return Transform(init, apply, name=f"OnlineSupervisedLearner({model.name})")


@dataclass(frozen=True)
class LoopOutput:
    reward: float
    action: np.ndarray
    observation: object
    diagnostics: dict = field(default_factory=dict)


def _split_info(out):
    if isinstance(out, tuple) and len(out) == 2 and isinstance(out[1], dict):
        return out
    return out, {}


def _sub(mapping, prefix):
    n = len(prefix)
    return {k[n:]: v for k, v in mapping.items() if k.startswith(prefix)}


def _pre(mapping, prefix):
    return {prefix + k: v for k, v in mapping.items()}


def _flatten_obs(obs):
    if isinstance(obs, tuple):
        return np.concatenate([np.atleast_1d(np.asarray(o, dtype=np.float64)) for o in obs])
    return np.atleast_1d(np.asarray(obs, dtype=np.float64))


def GymFeedback(agent: Transform, env: Transform, initial_observation) -> Transform:
    """Close the loop between an agent and an environment.

    For each raw observation ``raw_t``::

        a_t        = agent(o_{t-1})          # o_{-1} = initial_observation
        r_t, o_t   = env(raw_t, a_t)

    and the step emits ``LoopOutput(r_t, a_t, o_t, diagnostics)``. The agent
    may return ``(action, info)`` and the environment ``((reward, obs), info)``;
    ``info`` dicts are merged into the diagnostics under ``agent/`` and
    ``env/``. Observations may be arrays or tuples of arrays; the delay line
    stores them flattened in a ``Lag(1)`` buffer.
    """
    obs_template = initial_observation
    flat0 = _flatten_obs(initial_observation)
    splits = None
    if isinstance(obs_template, tuple):
        sizes = [np.atleast_1d(np.asarray(o)).size for o in obs_template]
        splits = np.cumsum(sizes)[:-1]
    delay = Lag(1, fill_value=np.nan)

    def unflatten(flat):
        if splits is None:
            return flat.reshape(np.shape(obs_template))
        parts = np.split(flat, splits)
        return tuple(p.reshape(np.shape(o)) for p, o in zip(parts, obs_template))

    def init(seed, input_shape):
        agent_seed, env_seed = split_seed(seed, 2)
        obs_shape = tuple(np.shape(o) for o in obs_template) if splits is not None \
            else np.shape(obs_template)
        p_a, s_a = agent.init(agent_seed, obs_shape)
        action_shape = agent.output_shape(obs_shape)
        p_e, s_e = env.init(env_seed, (input_shape, action_shape))
        # prime the delay line so the first read returns the initial observation
        s_d = {"buffer": np.stack([flat0, flat0])}
        params = {**_pre(p_a, "agent/"), **_pre(p_e, "env/")}
        state = {**_pre(s_a, "agent/"), **_pre(s_e, "env/"), **_pre(s_d, "delay/")}
        return params, state

    def apply(params, state, raw):
        s_d = _sub(state, "delay/")
        prev_obs = unflatten(s_d["buffer"][-1])
        out, s_a = agent.apply(_sub(params, "agent/"), _sub(state, "agent/"), prev_obs)
        action, agent_info = _split_info(out)
        out, s_e = env.apply(_sub(params, "env/"), _sub(state, "env/"), (raw, action))
        (reward, obs), env_info = _split_info(out)
        _, s_d = delay.apply({}, s_d, _flatten_obs(obs))
        diagnostics = {**_pre(agent_info, "agent/"), **_pre(env_info, "env/")}
        new_state = {**_pre(s_a, "agent/"), **_pre(s_e, "env/"), **_pre(s_d, "delay/")}
        return LoopOutput(float(reward), action, obs, diagnostics), new_state

    return Transform(init, apply, name=f"GymFeedback({agent.name}, {env.name})")


# -- non-stationary online linear regression --------------------------------


def regression_agent(dim: int, learning_rate: float) -> Transform:
    """Agent whose action is its current weight vector.

    It observes the previous ``(x, y)`` pair, takes one SGD step on it and
    returns the updated weights; the zero initial observation is a no-op.
    """
    learner = OnlineSupervisedLearner(linear_squared(), learning_rate, np.zeros(dim))

    def init(seed, obs_shape):
        return learner.init(seed, obs_shape)

    def apply(params, state, obs):
        _, state = learner.apply(params, state, obs)
        w = state["weights"]
        return (w, {"weights": w}), state

    return Transform(init, apply, lambda s: s[0], name="regression_agent")


def regression_env(w_star, flip_step: int) -> Transform:
    """Environment producing labels from hidden weights that flip sign at ``flip_step``.

    Raw observations are ``(x, noise)``. The reward is minus the squared error
    of the agent's weights on the new point; the next observation is ``(x, y)``.
    """
    w_star = np.asarray(w_star, dtype=np.float64)

    def init(seed, input_shape):
        return {"w_star": w_star.copy()}, {"step": np.array(0, dtype=np.int64)}

    def apply(params, state, row):
        (x, noise), w_hat = row
        step = int(state["step"])
        w_true = params["w_star"] if step < flip_step else -params["w_star"]
        y = float(np.dot(w_true, x)) + float(noise)
        loss = (float(np.dot(w_hat, x)) - y) ** 2
        info = {"loss": loss, "w_star": w_true}
        return ((-loss, (x, y)), info), {"step": np.array(step + 1, dtype=np.int64)}

    return Transform(init, apply, name="regression_env")


@dataclass
class RunRecord:
    """Per-step trace of one regression experiment plus the settings that produced it."""

    loss: np.ndarray
    regret: np.ndarray
    reward: np.ndarray
    weights: np.ndarray
    true_weights: np.ndarray
    settings: dict

    @property
    def steps(self) -> int:
        return len(self.loss)

    def columns(self):
        d = self.weights.shape[1]
        return (["step", "loss", "regret"] + [f"w_hat_{i + 1}" for i in range(d)]
                + [f"w_star_{i + 1}" for i in range(d)] + ["reward"])

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns())
        for t in range(self.steps):
            writer.writerow(
                [t, repr(float(self.loss[t])), repr(float(self.regret[t]))]
                + [repr(float(v)) for v in self.weights[t]]
                + [repr(float(v)) for v in self.true_weights[t]]
                + [repr(float(self.reward[t]))]
            )
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


def nonstationary_regression_experiment(
    seed: int = 0,
    dims: int = 3,
    steps: int = 4000,
    flip_step: int = 2000,
    noise_std: float = 0.1,
    learning_rate: float = 0.01,
) -> RunRecord:
    """Online linear regression whose true weights change sign at ``flip_step``.

    ``x_t`` is standard normal, ``y_t = w*_t . x_t + noise_std * eps_t`` and
    ``w*`` is drawn uniformly in ``[-1, 1]^dims``. ``flip_step == steps``
    gives a single stationary regime. Everything is seeded.
    """
    dims = check_positive_int(dims, "dims")
    steps = check_positive_int(steps, "steps")
    if isinstance(flip_step, bool) or not 0 < int(flip_step) <= steps:
        raise ParameterError(f"flip_step must satisfy 0 < flip_step <= steps, got {flip_step}")
    noise_std = float(noise_std)
    if not noise_std >= 0:
        raise ParameterError(f"noise_std must be >= 0, got {noise_std}")
    learning_rate = check_learning_rate(learning_rate)

    w_seed, data_seed, loop_seed = split_seed(seed, 3)
    w_star = rng(w_seed).uniform(-1.0, 1.0, size=dims)
    gen = rng(data_seed)
    xs = gen.standard_normal((steps, dims))
    noise = noise_std * gen.standard_normal(steps)

    loop = GymFeedback(
        regression_agent(dims, learning_rate),
        regression_env(w_star, int(flip_step)),
        (np.zeros(dims), 0.0),
    )
    raws = Sequence(np.arange(steps), [(x, n) for x, n in zip(xs, noise)])
    outputs = unroll(loop, loop_seed, raws).rows

    loss = np.array([o.diagnostics["env/loss"] for o in outputs])
    return RunRecord(
        loss=loss,
        regret=np.cumsum(loss),
        reward=np.array([o.reward for o in outputs]),
        weights=np.array([o.action for o in outputs]),
        true_weights=np.array([o.diagnostics["env/w_star"] for o in outputs]),
        settings=dict(seed=seed, dims=dims, steps=steps, flip_step=int(flip_step),
                      noise_std=noise_std, learning_rate=learning_rate),
    )
