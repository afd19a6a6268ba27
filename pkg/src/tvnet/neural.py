"""Single-hidden-layer network ``sum_i alpha_i h(a_i s + b_i tau - theta_i)``.

Exact backpropagation for the batch MSE, an Adam optimizer and a
minibatch epoch loop. Parameters travel between functions as
:class:`MlpParams`; internally the optimizer works on the flat vector
``[a, b, theta, alpha]``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
from scipy.special import expit

from . import rng

__all__ = [
    "MlpParams",
    "Activation",
    "ACTIVATIONS",
    "CATALOGUE",
    "get_activation",
    "AdamState",
    "forward",
    "mse",
    "gradient",
    "loss_and_gradient",
    "adam_step",
    "train_epoch",
    "init_params",
    "finite_difference_gradient",
    "gradient_relative_error",
    "near_kink",
]

PARAM_NAMES = ("a", "b", "theta", "alpha")


@dataclass
class MlpParams:
    a: np.ndarray
    b: np.ndarray
    theta: np.ndarray
    alpha: np.ndarray

    def __post_init__(self):
        for name in PARAM_NAMES:
            setattr(self, name, np.array(getattr(self, name), dtype=float).reshape(-1))
        k = len(self.a)
        if k < 1 or any(len(getattr(self, n)) != k for n in PARAM_NAMES):
            raise ValueError("a, b, theta and alpha must all have the same length k >= 1")
        if not np.all(np.isfinite(self.to_vector())):
            raise ValueError("parameters must be finite")

    @property
    def k(self) -> int:
        return len(self.a)

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.a, self.b, self.theta, self.alpha])

    @classmethod
    def from_vector(cls, vec) -> "MlpParams":
        vec = np.asarray(vec, dtype=float)
        if vec.ndim != 1 or len(vec) % 4:
            raise ValueError("flat parameter vector must have length 4k")
        return cls(*np.split(vec, 4))

    @classmethod
    def zeros(cls, k: int) -> "MlpParams":
        return cls.from_vector(np.zeros(4 * k))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["name", "index", "value"])
            for name in PARAM_NAMES:
                for i, v in enumerate(getattr(self, name).tolist()):
                    w.writerow([name, i, repr(v)])

    @classmethod
    def from_csv(cls, path) -> "MlpParams":
        cols: dict[str, dict[int, float]] = {n: {} for n in PARAM_NAMES}
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != ["name", "index", "value"]:
                raise ValueError(f"{path}: expected header name,index,value")
            for lineno, row in enumerate(reader, start=2):
                if len(row) != 3 or row[0] not in cols:
                    raise ValueError(f"{path}:{lineno}: malformed parameter row {row!r}")
                cols[row[0]][int(row[1])] = float(row[2])
        k = len(cols["a"])
        return cls(*([cols[n][i] for i in range(k)] for n in PARAM_NAMES))


# ---------------------------------------------------------------------------
# activations


@dataclass(frozen=True)
class Activation:
    """Elementwise activation with its derivative.

    ``joint`` activations (softmax) act on the whole vector of hidden
    pre-activations at once; their ``fn`` maps along the last axis and
    ``derivative`` is unused by backprop. ``kinks`` lists points where the
    derivative jumps, ``bound`` is ``sup |h|``.
    """

    name: str
    fn: Callable[[np.ndarray], np.ndarray]
    derivative: Callable[[np.ndarray], np.ndarray]
    kinks: tuple = ()
    bound: float = math.inf
    joint: bool = False


_SELU_ALPHA = 1.6732632423543772848170429916717
_SELU_SCALE = 1.0507009873554804934193349852946


def _softmax(z):
    e = np.exp(z - np.max(z, axis=-1, keepdims=True))
    return e / np.sum(e, axis=-1, keepdims=True)


def _softmax_jvp_diag(z):
    h = _softmax(z)
    return h * (1.0 - h)


def _elu(z):
    return np.where(z > 0, z, np.expm1(np.minimum(z, 0.0)))


def _selu(z):
    return _SELU_SCALE * np.where(z > 0, z, _SELU_ALPHA * np.expm1(np.minimum(z, 0.0)))


def _softplus(z):
    return np.logaddexp(0.0, z)


def _hard_sigmoid(z):
    return np.clip(0.2 * z + 0.5, 0.0, 1.0)


def _sigmoid_prime(z):
    h = expit(z)
    return h * (1.0 - h)


ACTIVATIONS: dict[str, Activation] = {
    a.name: a
    for a in [
        Activation("sigmoid", expit, _sigmoid_prime, bound=1.0),
        Activation("tanh", np.tanh, lambda z: 1.0 - np.tanh(z) ** 2, bound=1.0),
        Activation("relu", lambda z: np.maximum(z, 0.0), lambda z: (z > 0).astype(float), kinks=(0.0,)),
        Activation("elu", _elu, lambda z: np.where(z > 0, 1.0, np.exp(np.minimum(z, 0.0))), kinks=(0.0,)),
        Activation(
            "selu",
            _selu,
            lambda z: _SELU_SCALE * np.where(z > 0, 1.0, _SELU_ALPHA * np.exp(np.minimum(z, 0.0))),
            kinks=(0.0,),
        ),
        Activation("softplus", _softplus, expit),
        Activation("softsign", lambda z: z / (1.0 + np.abs(z)), lambda z: 1.0 / (1.0 + np.abs(z)) ** 2, bound=1.0),
        Activation("softmax", _softmax, _softmax_jvp_diag, bound=1.0, joint=True),
        Activation(
            "hard_sigmoid",
            _hard_sigmoid,
            lambda z: np.where(np.abs(z) < 2.5, 0.2, 0.0),
            kinks=(-2.5, 2.5),
            bound=1.0,
        ),
        Activation("exponential", np.exp, np.exp),
        Activation("swish", lambda z: z * expit(z), lambda z: expit(z) * (1.0 + z * (1.0 - expit(z)))),
        # not part of the catalogue; used for convex sanity checks
        Activation("linear", lambda z: np.asarray(z, dtype=float) * 1.0, lambda z: np.ones_like(z, dtype=float)),
    ]
}

CATALOGUE: tuple[str, ...] = (
    "sigmoid",
    "tanh",
    "relu",
    "elu",
    "selu",
    "softplus",
    "softsign",
    "softmax",
    "hard_sigmoid",
    "exponential",
    "swish",
)

_ALIASES = {"logistic": "sigmoid", "hardsigmoid": "hard_sigmoid", "hard-sigmoid": "hard_sigmoid", "silu": "swish"}


def get_activation(act) -> Activation:
    if isinstance(act, Activation):
        return act
    name = _ALIASES.get(act, act)
    try:
        return ACTIVATIONS[name]
    except KeyError:
        raise ValueError(f"unknown activation {act!r}; choose from {', '.join(CATALOGUE)}") from None


# ---------------------------------------------------------------------------
# forward / loss / backprop


def _hidden(vec, s, tau):
    k = len(vec) // 4
    a, b, theta = vec[:k], vec[k : 2 * k], vec[2 * k : 3 * k]
    return s[:, None] * a + tau[:, None] * b - theta


def predict_flat(vec, act: Activation, s, tau):
    z = _hidden(vec, s, tau)
    h = act.fn(z)
    return h @ vec[3 * (len(vec) // 4) :]


def forward(params: MlpParams, act, s, tau):
    """Network output at ``(s, tau)``; scalars in, float out."""
    act = get_activation(act)
    scalar = np.ndim(s) == 0 and np.ndim(tau) == 0
    s, tau = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(tau, dtype=float))
    shape = s.shape
    out = predict_flat(params.to_vector(), act, s.reshape(-1), tau.reshape(-1)).reshape(shape)
    return float(out) if scalar else out


def mse(predictions, targets) -> float:
    p = np.asarray(predictions, dtype=float)
    t = np.asarray(targets, dtype=float)
    if p.shape != t.shape:
        raise ValueError(f"length mismatch: {p.shape} predictions vs {t.shape} targets")
    if p.size == 0:
        raise ValueError("mse of an empty batch is undefined")
    d = p - t
    return float(np.mean(d * d))


def loss_grad_flat(vec, act: Activation, s, tau, y):
    """Batch MSE and its gradient with respect to the flat parameter vector."""
    k = len(vec) // 4
    alpha = vec[3 * k :]
    z = _hidden(vec, s, tau)
    h = act.fn(z)
    resid = h @ alpha - y
    n = len(y)
    dpred = (2.0 / n) * resid
    if act.joint:
        # d(alpha . softmax(z)) / dz_j = h_j (alpha_j - alpha . h)
        dz = dpred[:, None] * h * (alpha - (h @ alpha)[:, None])
    else:
        dz = dpred[:, None] * act.derivative(z) * alpha
    grad = np.empty_like(vec)
    grad[:k] = s @ dz
    grad[k : 2 * k] = tau @ dz
    grad[2 * k : 3 * k] = -dz.sum(axis=0)
    grad[3 * k :] = dpred @ h
    return float(resid @ resid) / n, grad


def loss_and_gradient(params: MlpParams, act, s, tau, y):
    s = np.asarray(s, dtype=float)
    if s.size == 0:
        raise ValueError("gradient of an empty batch is undefined")
    loss, g = loss_grad_flat(params.to_vector(), get_activation(act), s, np.asarray(tau, dtype=float), np.asarray(y, dtype=float))
    return loss, MlpParams.from_vector(g)


def gradient(params: MlpParams, act, batch, target_selector: str) -> MlpParams:
    """Gradient of the batch MSE against ``batch.targets(target_selector)``."""
    return loss_and_gradient(params, act, batch.s, batch.tau, batch.targets(target_selector))[1]


def finite_difference_gradient(vec, act, s, tau, y, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of the batch MSE, for checking backprop."""
    act = get_activation(act)
    vec = np.asarray(vec, dtype=float)
    out = np.empty_like(vec)
    for i in range(len(vec)):
        e = np.zeros_like(vec)
        e[i] = h
        out[i] = (loss_grad_flat(vec + e, act, s, tau, y)[0] - loss_grad_flat(vec - e, act, s, tau, y)[0]) / (2 * h)
    return out


def gradient_relative_error(vec, act, s, tau, y, h: float = 1e-5, floor: float = 1e-6) -> float:
    """Largest componentwise ``|analytic - fd| / max(|analytic|, |fd|, floor)``."""
    act = get_activation(act)
    g = loss_grad_flat(np.asarray(vec, dtype=float), act, s, tau, y)[1]
    fd = finite_difference_gradient(vec, act, s, tau, y, h)
    return float(np.max(np.abs(g - fd) / np.maximum(np.maximum(np.abs(g), np.abs(fd)), floor)))


def near_kink(vec, act, s, tau, margin: float = 1e-4) -> bool:
    """True if any hidden pre-activation lies within ``margin`` of a kink."""
    act = get_activation(act)
    if not act.kinks:
        return False
    z = _hidden(np.asarray(vec, dtype=float), np.asarray(s, dtype=float), np.asarray(tau, dtype=float))
    return bool(np.min(np.abs(z[..., None] - np.asarray(act.kinks))) < margin)


# ---------------------------------------------------------------------------
# optimizer


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params, **hyper) -> "AdamState":
        n = len(params.to_vector()) if isinstance(params, MlpParams) else len(np.asarray(params).reshape(-1))
        return cls(np.zeros(n), np.zeros(n), **hyper)


def adam_step(state: AdamState, params, grad):
    """One bias-corrected Adam update; returns ``(new_state, new_params)``.

    ``params`` and ``grad`` may be :class:`MlpParams` or plain arrays; the
    returned parameters have the same type as ``params``.
    """
    as_mlp = isinstance(params, MlpParams)
    p = params.to_vector() if as_mlp else np.asarray(params, dtype=float)
    g = grad.to_vector() if isinstance(grad, MlpParams) else np.asarray(grad, dtype=float)
    if p.shape != g.shape or p.shape != state.m.shape:
        raise ValueError("parameter, gradient and moment shapes must match")
    t = state.step + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * g
    v = state.beta2 * state.v + (1.0 - state.beta2) * (g * g)
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = v / (1.0 - state.beta2**t)
    new_p = p - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    new_state = replace(state, m=m, v=v, step=t)
    return new_state, (MlpParams.from_vector(new_p) if as_mlp else new_p)


def train_epoch(params: MlpParams, state: AdamState, act, dataset, batch_size: int = 128, shuffle_seed: int = 0, target_selector: str = "price"):
    """Shuffle, sweep the minibatches once, return ``(params, state, mse)``.

    The reported MSE is over the whole dataset after the epoch. The order
    comes from :func:`tvnet.rng.permutation` on ``stream(shuffle_seed)``.
    """
    act = get_activation(act)
    n = len(dataset)
    if n == 0:
        raise ValueError("cannot train on an empty dataset")
    s, tau, y = dataset.s, dataset.tau, dataset.targets(target_selector)
    order = rng.permutation(rng.stream(shuffle_seed), n)
    s_sh, tau_sh, y_sh = s[order], tau[order], y[order]
    vec = params.to_vector()
    m, v, t = state.m.copy(), state.v.copy(), state.step
    b1, b2, lr, eps = state.beta1, state.beta2, state.lr, state.eps
    for start in range(0, n, batch_size):
        sl = slice(start, start + batch_size)
        _, g = loss_grad_flat(vec, act, s_sh[sl], tau_sh[sl], y_sh[sl])
        # same arithmetic as adam_step, in place
        t += 1
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        vec = vec - lr * (m / (1.0 - b1**t)) / (np.sqrt(v / (1.0 - b2**t)) + eps)
    new_params = MlpParams.from_vector(vec)
    new_state = replace(state, m=m, v=v, step=t)
    return new_params, new_state, mse(predict_flat(vec, act, s, tau), y)


def n_batches(n: int, batch_size: int) -> list[int]:
    return [min(batch_size, n - start) for start in range(0, n, batch_size)]


def init_params(k: int = 4, seed: int = 0, scheme: str = "glorot_uniform") -> MlpParams:
    """Glorot-uniform weights per layer, thresholds zero.

    Hidden weights ``a, b`` are drawn from ``U[-l1, l1]`` with
    ``l1 = sqrt(6 / (2 + k))``, output weights from ``U[-l2, l2]`` with
    ``l2 = sqrt(6 / (k + 1))``. ``scheme="glorot_uniform_thresholds"``
    draws the thresholds from ``U[-l1, l1]`` as well.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    if scheme not in ("glorot_uniform", "glorot_uniform_thresholds"):
        raise ValueError(f"unknown initialization scheme {scheme!r}")
    l1, l2 = glorot_limits(k)
    u = rng.open_uniform(rng.stream(seed), 4 * k)
    a = l1 * (2.0 * u[:k] - 1.0)
    b = l1 * (2.0 * u[k : 2 * k] - 1.0)
    theta = l1 * (2.0 * u[2 * k : 3 * k] - 1.0) if scheme == "glorot_uniform_thresholds" else np.zeros(k)
    alpha = l2 * (2.0 * u[3 * k :] - 1.0)
    return MlpParams(a, b, theta, alpha)


def glorot_limits(k: int) -> tuple[float, float]:
    return math.sqrt(6.0 / (2 + k)), math.sqrt(6.0 / (k + 1))
