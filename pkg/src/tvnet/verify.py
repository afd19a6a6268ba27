"""Numerical checks of the analytic facts behind the time-value model.

* :func:`check_mills_bound`: Gaussian tail ``1 - N(t) < exp(-t^2/2) / 2``.
* :func:`check_timevalue_integrability`: dyadic shell integrals of
  ``|g|^p`` decay super-polynomially in the moneyness.
* :func:`check_sigmoid_difference_bound`: two shifted, scaled logistic
  ridges differ by at most ``B C exp(-B |y1 x1| / 2)`` away from the origin.
* :func:`tail_generalization_probe`: price-space errors of the two trained
  models far outside the training range.
* :func:`empirical_uat_sweep`: fitted-network L2 error against width
  (an illustration only).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize
from scipy.special import ndtr

from . import neural, rng
from .pricing import MarketParams, bs_call_normalized, intrinsic_normalized, time_value_normalized

__all__ = [
    "BoundReport",
    "RidgeBoundConstants",
    "ShellReport",
    "check_mills_bound",
    "check_timevalue_integrability",
    "check_sigmoid_difference_bound",
    "sigmoid_ridge_difference",
    "envelope",
    "tail_generalization_probe",
    "empirical_uat_sweep",
    "default_mills_grid",
]

REPORT_HEADER = ["check", "point", "lhs", "rhs", "slack"]


@dataclass
class BoundReport:
    """``lhs <= rhs`` (or ``<`` when ``strict``) checked pointwise.

    ``slack = lhs - rhs``; the bound holds where slack is negative (or
    zero for non-strict bounds).
    """

    check: str
    grid: str
    points: list
    lhs: np.ndarray
    rhs: np.ndarray
    strict: bool = False

    @property
    def slack(self) -> np.ndarray:
        return np.asarray(self.lhs) - np.asarray(self.rhs)

    @property
    def violation(self) -> float:
        return float(np.max(self.slack))

    @property
    def witness(self):
        i = int(np.argmax(self.slack))
        return self.points[i], float(self.lhs[i]), float(self.rhs[i])

    @property
    def passed(self) -> bool:
        sl = self.slack
        return bool(np.all(sl < 0) if self.strict else np.all(sl <= 0))

    def rows(self):
        for pt, lo, hi, sl in zip(self.points, np.asarray(self.lhs).tolist(), np.asarray(self.rhs).tolist(), self.slack.tolist()):
            yield [self.check, _fmt_point(pt), repr(lo), repr(hi), repr(sl)]

    def to_csv(self, path, header: bool = True) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            if header:
                w.writerow(REPORT_HEADER)
            w.writerows(self.rows())

    def summary(self) -> str:
        pt, lo, hi = self.witness
        verdict = "PASS" if self.passed else "FAIL"
        rel = "<" if self.strict else "<="
        return (
            f"{self.check}: {verdict} ({len(self.points)} points, {self.grid}; lhs {rel} rhs required)\n"
            f"  max slack {self.violation!r} at {_fmt_point(pt)} (lhs={lo!r}, rhs={hi!r})"
        )


def _fmt_point(pt) -> str:
    if isinstance(pt, dict):
        return ";".join(f"{k}={v!r}" for k, v in pt.items())
    return repr(pt)


# ---------------------------------------------------------------------------
# Gaussian tail


def default_mills_grid() -> np.ndarray:
    return np.logspace(-3, 1, 200)


def check_mills_bound(t_grid=None) -> BoundReport:
    """``1 - N(t)`` against ``exp(-t^2/2) / 2`` for ``t > 0``; strict."""
    t = default_mills_grid() if t_grid is None else np.asarray(t_grid, dtype=float)
    if np.any(~(t > 0)):
        raise ValueError("the tail bound is stated for t > 0")
    lhs = ndtr(-t)
    rhs = 0.5 * np.exp(-0.5 * t * t)
    grid = f"t in [{float(t.min())!r}, {float(t.max())!r}]"
    return BoundReport("mills", grid, [{"t": float(x)} for x in t], lhs, rhs, strict=True)


# ---------------------------------------------------------------------------
# integrability of the time value


@dataclass
class ShellReport:
    p: float
    shells: list  # j values
    integrals: np.ndarray
    errors: np.ndarray
    ratio_from: float = 32.0
    ratio_limit: float = 0.1
    problems: list = field(default_factory=list)

    @property
    def ratios(self) -> np.ndarray:
        I = np.asarray(self.integrals)
        with np.errstate(divide="ignore", invalid="ignore"):
            return I[1:] / I[:-1]

    def checked(self) -> list:
        """Indices ``j`` whose ratio ``I_{j+1}/I_j`` is tested (``2^j >= 32``)."""
        return [i for i, j in enumerate(self.shells[:-1]) if 2.0**j >= self.ratio_from]

    @property
    def passed(self) -> bool:
        idx = self.checked()
        if self.problems or not idx:
            return False
        r = self.ratios[idx]
        return bool(np.all(np.isfinite(r)) and np.all(r < self.ratio_limit))

    def rows(self):
        ratios = self.ratios
        for i, j in enumerate(self.shells):
            if i + 1 < len(self.shells):
                lhs, rhs = float(ratios[i]), self.ratio_limit if 2.0**j >= self.ratio_from else math.inf
            else:
                lhs, rhs = math.nan, math.inf
            yield [
                f"integrability_p{self.p:g}",
                f"j={j};integral={float(self.integrals[i])!r};abserr={float(self.errors[i])!r}",
                repr(lhs),
                repr(rhs),
                repr(lhs - rhs),
            ]

    def summary(self) -> str:
        lines = [f"integrability p={self.p:g}: {'PASS' if self.passed else 'FAIL'} (ratio I[j+1]/I[j] < {self.ratio_limit} for 2^j >= {self.ratio_from:g})"]
        ratios = self.ratios
        for i, j in enumerate(self.shells):
            r = f"  ratio {ratios[i]:.3e}" if i + 1 < len(self.shells) else ""
            lines.append(f"  shell [{2.0**j:g}, {2.0 ** (j + 1):g}]  I = {self.integrals[i]:.6e}{r}")
        lines.extend(f"  problem: {p}" for p in self.problems)
        return "\n".join(lines)


def _tau_rule(n: int = 64):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def shell_integral(params: MarketParams, j: int, p: float = 1.0, epsrel: float = 1e-9, n_tau: int = 64):
    """``int_{2^j}^{2^{j+1}} int_0^1 |g(s, tau)|^p dtau ds``.

    Adaptive Gauss-Kronrod (QUADPACK) in ``s``, fixed Gauss-Legendre in
    ``tau``; the rule's nodes avoid ``tau = 0`` where ``g`` vanishes anyway.
    Returns ``(value, abs_error_estimate, quad_info_message)``.
    """
    nodes, weights = _tau_rule(n_tau)

    def inner(s):
        g = time_value_normalized(np.full(n_tau, s), nodes, params)
        return float(weights @ np.abs(g) ** p)

    lo, hi = 2.0**j, 2.0 ** (j + 1)
    # the intrinsic kink s = exp((q - r) tau) lies in the first shell for typical params
    kinks = [x for x in (math.exp(params.q - params.r), 1.0) if lo < x < hi]
    val, err, *rest = integrate.quad(inner, lo, hi, epsabs=0.0, epsrel=epsrel, limit=200, points=kinks or None, full_output=1)
    msg = rest[1] if len(rest) > 1 and isinstance(rest[1], str) else ""
    return val, err, msg


def check_timevalue_integrability(params: MarketParams | None = None, p_list=(1, 2), s_max_exponent: int = 7, epsrel: float = 1e-9) -> list[ShellReport]:
    """Shell integrals ``I_j`` for ``j = 0 .. s_max_exponent`` and each ``p``.

    A shell is flagged when quadrature reports trouble or the integral
    underflows to zero (which happens for ``p = 2`` beyond ``s ~ 2^8`` at
    ``sigma = 0.2``).
    """
    params = params or MarketParams()
    reports = []
    for p in p_list:
        vals, errs, problems = [], [], []
        shells = list(range(0, s_max_exponent + 1))
        for j in shells:
            v, e, msg = shell_integral(params, j, p, epsrel)
            vals.append(v)
            errs.append(e)
            if msg:
                problems.append(f"p={p:g} shell j={j}: {msg.strip().splitlines()[0]}")
            if not v > 0:
                problems.append(f"p={p:g} shell j={j}: integral underflowed to {v!r}")
        reports.append(ShellReport(float(p), shells, np.array(vals), np.array(errs), problems=problems))
    return reports


# ---------------------------------------------------------------------------
# logistic ridge differences


@dataclass(frozen=True)
class RidgeBoundConstants:
    """Constants of the ridge-difference bound for ``y = (y1, y2)``, shifts ``theta1, theta2``.

    ``c6 = |y2| + max(|theta1|, |theta2|)`` bounds ``|y2 x2 + theta|`` on
    ``x2 in [0, 1]``; then ``X = 2 c6 / |y1|``, ``B = 2 / |y1 X| = 1 / c6``
    and ``C = |theta1 - theta2|``.
    """

    y1: float
    y2: float
    theta1: float
    theta2: float

    def __post_init__(self):
        if self.y1 == 0:
            raise ValueError("y1 must be non-zero")
        if self.c6 == 0:
            raise ValueError("degenerate constants: y2 = theta1 = theta2 = 0")
        if not math.isfinite(self.B):
            raise ValueError("degenerate constants: B overflows")

    @property
    def c6(self) -> float:
        return abs(self.y2) + max(abs(self.theta1), abs(self.theta2))

    @property
    def X(self) -> float:
        return 2.0 * self.c6 / abs(self.y1)

    @property
    def B(self) -> float:
        return 2.0 / abs(self.y1 * self.X)

    @property
    def C(self) -> float:
        return abs(self.theta1 - self.theta2)


def _log_cosh(x):
    ax = np.abs(x)
    return ax + np.log1p(np.exp(-2.0 * ax)) - math.log(2.0)


def _log_sinh(x):
    # x >= 0
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        small = np.log(np.sinh(np.minimum(x, 1.0)))
    large = x + np.log1p(-np.exp(-2.0 * np.maximum(x, 1.0))) - math.log(2.0)
    return np.where(x < 1.0, small, large)


def sigmoid_ridge_difference(consts: RidgeBoundConstants, beta, x1, x2):
    """``|phi(beta(<y, x> + theta1)) - phi(beta(<y, x> + theta2))|``.

    Uses ``phi(u) - phi(w) = sinh((u - w)/2) / (2 cosh(u/2) cosh(w/2))``
    in log space, so there is no cancellation when both ridges saturate.
    """
    beta, x1, x2 = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (beta, x1, x2)))
    base = consts.y1 * x1 + consts.y2 * x2
    u = beta * (base + consts.theta1)
    w = beta * (base + consts.theta2)
    half = 0.5 * np.abs(u - w)
    out = np.exp(_log_sinh(half) - math.log(2.0) - _log_cosh(0.5 * u) - _log_cosh(0.5 * w))
    return np.where(half == 0, 0.0, out)


def envelope(consts: RidgeBoundConstants, beta, x1):
    """``beta C exp(-beta |y1 x1| / 2)``; at ``beta = B`` this is the bound."""
    beta = np.asarray(beta, dtype=float)
    return beta * consts.C * np.exp(-0.5 * beta * np.abs(consts.y1 * np.asarray(x1, dtype=float)))


DEFAULT_RIDGE_CONSTANTS = (
    RidgeBoundConstants(1.0, 0.5, 0.0, 1.0),
    RidgeBoundConstants(-2.0, 1.0, -0.5, 0.75),
    RidgeBoundConstants(0.3, -2.0, 1.5, -1.0),
)


def check_sigmoid_difference_bound(consts: RidgeBoundConstants | None = None, beta_grid=None, x1_grid=None, x2_grid=None) -> BoundReport:
    """Ridge difference against ``B C exp(-B |y1 x1| / 2)`` on a grid.

    Default grids: ``beta = B * (1.01 .. 64)``, ``x1 = +-X * (1.01 .. 16)``,
    ``x2`` eleven points on [0, 1].
    """
    consts = consts or DEFAULT_RIDGE_CONSTANTS[0]
    B, X = consts.B, consts.X
    beta = np.asarray(beta_grid if beta_grid is not None else B * np.array([1.01, 1.25, 1.5, 2, 3, 4, 8, 16, 32, 64]), dtype=float)
    x1 = np.asarray(x1_grid if x1_grid is not None else np.concatenate([s * X * np.array([1.01, 1.1, 1.5, 2, 3, 4, 8, 16]) for s in (-1, 1)]), dtype=float)
    x2 = np.asarray(x2_grid if x2_grid is not None else np.linspace(0.0, 1.0, 11), dtype=float)
    if np.any(beta <= B):
        raise ValueError(f"beta grid must exceed B = {B!r}")
    if np.any(np.abs(x1) <= X):
        raise ValueError(f"x1 grid must satisfy |x1| > X = {X!r}")
    if np.any((x2 < 0) | (x2 > 1)):
        raise ValueError("x2 grid must lie in [0, 1]")
    bb, xx1, xx2 = (a.ravel() for a in np.meshgrid(beta, x1, x2, indexing="ij"))
    lhs = sigmoid_ridge_difference(consts, bb, xx1, xx2)
    rhs = B * consts.C * np.exp(-0.5 * B * np.abs(consts.y1 * xx1))
    pts = [{"beta": float(b), "x1": float(a), "x2": float(c)} for b, a, c in zip(bb, xx1, xx2)]
    grid = f"y=({consts.y1!r},{consts.y2!r}) theta=({consts.theta1!r},{consts.theta2!r}) B={B!r} X={X!r} C={consts.C!r}"
    return BoundReport("lemma3", grid, pts, lhs, rhs, strict=False)


# ---------------------------------------------------------------------------
# tail probe


@dataclass
class TailProbe:
    s: np.ndarray
    tau: np.ndarray
    f: np.ndarray  # Black-Scholes C/K
    g: np.ndarray  # time value V/K
    price_error: np.ndarray  # |price_net - f|
    timevalue_error: np.ndarray  # |timevalue_net + intrinsic - f|
    price_net_bound: float  # sum |alpha| * sup |h|

    def at(self, s: float, tau: float) -> tuple[float, float]:
        i = int(np.argmin((self.s - s) ** 2 + (self.tau - tau) ** 2))
        return float(self.price_error[i]), float(self.timevalue_error[i])

    def rows(self):
        for vals in zip(*(np.asarray(a).tolist() for a in (self.s, self.tau, self.f, self.g, self.price_error, self.timevalue_error))):
            s, tau, f, g, pe, te = vals
            yield ["tailprobe", f"s={s!r};tau={tau!r};f={f!r};g={g!r}", repr(pe), repr(te), repr(pe - te)]


def tail_generalization_probe(price_params: neural.MlpParams, timevalue_params: neural.MlpParams, activation, params: MarketParams | None = None, s_grid=None, tau_grid=None) -> TailProbe:
    """Price-space absolute errors of both models on ``s_grid x tau_grid``.

    The price model predicts ``f`` directly; the time-value model's price
    is its output plus the intrinsic value.
    """
    params = params or MarketParams()
    act = neural.get_activation(activation)
    s_grid = np.linspace(2.0, 10.0, 17) if s_grid is None else np.asarray(s_grid, dtype=float)
    tau_grid = np.array([0.1, 0.25, 0.5, 0.75, 1.0]) if tau_grid is None else np.asarray(tau_grid, dtype=float)
    ss, tt = (a.ravel() for a in np.meshgrid(s_grid, tau_grid, indexing="ij"))
    f = bs_call_normalized(ss, tt, params)
    g = time_value_normalized(ss, tt, params)
    iv = intrinsic_normalized(ss, tt, params)
    price_err = np.abs(neural.forward(price_params, act, ss, tt) - f)
    tv_err = np.abs(neural.forward(timevalue_params, act, ss, tt) + iv - f)
    bound = float(np.sum(np.abs(price_params.alpha)) * act.bound)
    return TailProbe(ss, tt, f, g, price_err, tv_err, bound)


# ---------------------------------------------------------------------------
# width sweep


@dataclass
class UatSweep:
    """L2 errors ``errors[truncation][k]`` -> per-seed array."""

    k_list: list
    truncations: list
    errors: dict
    label: str = "illustration only: error vs width, not a density proof"

    def median(self, truncation, k) -> float:
        return float(np.median(self.errors[tuple(truncation)][k]))

    def nonincreasing(self, band: float = 0.05) -> bool:
        for tr in self.truncations:
            med = [self.median(tr, k) for k in self.k_list]
            for a, b in zip(med, med[1:]):
                if b > a * (1.0 + band):
                    return False
        return True

    def rows(self):
        for tr in self.truncations:
            for k in self.k_list:
                for seed, err in enumerate(self.errors[tuple(tr)][k].tolist()):
                    yield ["uatsweep", f"s_range={tr[0]!r}..{tr[1]!r};k={k};seed={seed}", repr(err), "nan", "nan"]

    def summary(self) -> str:
        lines = [f"uatsweep ({self.label})"]
        for tr in self.truncations:
            med = "  ".join(f"k={k}: {self.median(tr, k):.3e}" for k in self.k_list)
            lines.append(f"  s in [{tr[0]:g}, {tr[1]:g}]  median L2 error  {med}")
        lines.append(f"  nonincreasing in k (5% band): {self.nonincreasing()}")
        return "\n".join(lines)


def _grid(truncation, n_s: int, n_tau: int):
    lo, hi = truncation
    s = lo + (np.arange(n_s) + 0.5) * (hi - lo) / n_s
    tau = (np.arange(n_tau) + 0.5) / n_tau
    ss, tt = (a.ravel() for a in np.meshgrid(s, tau, indexing="ij"))
    return ss, tt, (hi - lo) / n_s / n_tau


def _ridge_init(k: int, seed: int, truncation, scale: float = 10.0) -> np.ndarray:
    """Steep random ridges centred inside the truncated domain, small output weights."""
    lo, hi = truncation
    u = rng.open_uniform(rng.stream(seed), 4 * k)
    a = scale * (2.0 * u[:k] - 1.0)
    b = scale * (2.0 * u[k : 2 * k] - 1.0)
    theta = a * (lo + (hi - lo) * u[2 * k : 3 * k])
    alpha = 0.1 * (2.0 * u[3 * k :] - 1.0)
    return np.concatenate([a, b, theta, alpha])


def _pad(vec: np.ndarray, k_new: int, seed: int, truncation) -> np.ndarray:
    """Widen a net with extra units whose output weight is zero (same function)."""
    k = len(vec) // 4
    extra = _ridge_init(k_new - k, seed, truncation)
    m = k_new - k
    parts = [np.concatenate([vec[i * k : (i + 1) * k], extra[i * m : (i + 1) * m]]) for i in range(3)]
    parts.append(np.concatenate([vec[3 * k :], np.zeros(m)]))
    return np.concatenate(parts)


def _fit(vec, act, ss, tt, y, adam_steps: int, lr: float, maxiter: int) -> np.ndarray:
    state = neural.AdamState(np.zeros_like(vec), np.zeros_like(vec), lr=lr)
    for _ in range(adam_steps):
        _, g = neural.loss_grad_flat(vec, act, ss, tt, y)
        state, vec = neural.adam_step(state, vec, g)
    if maxiter:
        res = optimize.minimize(
            neural.loss_grad_flat, vec, args=(act, ss, tt, y), jac=True, method="L-BFGS-B",
            options={"maxiter": maxiter, "ftol": 0.0, "gtol": 1e-14},
        )
        vec = res.x
    return vec


def _l2(vec, act, ss, tt, y, cell) -> float:
    r = neural.predict_flat(vec, act, ss, tt) - y
    return math.sqrt(float(r @ r) * cell)


def fit_width_sequence(target, truncation, k_list, seed: int, activation="sigmoid", adam_steps: int = 1000, lr: float = 0.05, maxiter: int = 3000, n_s: int = 64, n_tau: int = 16) -> dict:
    """L2 error of the best ``k``-unit fit for each ``k`` in ascending ``k_list``.

    Each width is fitted from a fresh ridge initialization (Adam, then an
    L-BFGS polish) and also from the previous width's best net padded with
    zero-output units; the better of the two is kept. Errors are midpoint-
    rule L2 norms over the truncated domain.
    """
    act = neural.get_activation(activation)
    ss, tt, cell = _grid(truncation, n_s, n_tau)
    y = np.asarray(target(ss, tt), dtype=float)
    out = {}
    prev = None
    for idx, k in enumerate(sorted(k_list)):
        child = rng.derive_seed(seed, k)
        cands = [_fit(_ridge_init(k, child, truncation), act, ss, tt, y, adam_steps, lr, maxiter)]
        if prev is not None:
            cands.append(_fit(_pad(prev, k, child + 1, truncation), act, ss, tt, y, 0, lr, maxiter))
        errs = [_l2(c, act, ss, tt, y, cell) for c in cands]
        best = int(np.argmin(errs))
        prev = cands[best]
        out[k] = errs[best]
    return out


def empirical_uat_sweep(k_list=(1, 2, 4, 8), truncations=((0.0, 4.0), (0.0, 8.0)), activation="sigmoid", params: MarketParams | None = None, n_seeds: int = 5, adam_steps: int = 1000, maxiter: int = 3000, target=None) -> UatSweep:
    """Fit ``k``-unit networks to the time value on each truncated domain.

    ``target(s, tau)`` defaults to ``g``; truncation ``(lo, hi)`` means
    ``s in (lo, hi)``, ``tau in [0, 1]``.
    """
    params = params or MarketParams()
    if target is None:
        def target(s, tau):
            return time_value_normalized(s, tau, params)
    k_sorted = sorted(k_list)
    errors = {}
    for tr in truncations:
        tr = tuple(float(x) for x in tr)
        per_seed = [fit_width_sequence(target, tr, k_sorted, seed, activation, adam_steps, maxiter=maxiter) for seed in range(n_seeds)]
        errors[tr] = {k: np.array([d[k] for d in per_seed]) for k in k_sorted}
    return UatSweep(k_sorted, [tuple(float(x) for x in tr) for tr in truncations], errors)
