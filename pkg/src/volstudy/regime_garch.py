"""Two-regime Markov-switching GJR-GARCH with skewed Student-t innovations.

Each regime carries its own GJR variance recursion driven by the observed
returns, so the regime-conditional variance at time t does not depend on the
regime path.  That makes the forward filter exact and O(T), and the
brute-force path-enumeration used in the tests agrees with it to float
precision.  Regime 1 is reported as the lower-unconditional-variance regime
after fitting.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.special import gammaln

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a hard dependency, but stay runnable
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda func: func

N_REGIMES = 2
_STATIONARITY_CAP = 1.0 - 1e-6


@dataclass(frozen=True, slots=True)
class RegimeParams:
    """GJR-GARCH and innovation parameters of one regime."""

    omega: float
    alpha: float
    gamma: float
    beta: float
    nu: float
    xi: float

    def __post_init__(self) -> None:
        if self.omega <= 0:
            raise ValueError(f"omega must be positive, got {self.omega}")
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be nonnegative")
        if self.alpha + self.gamma < 0:
            raise ValueError("alpha + gamma must be nonnegative")
        if self.alpha + self.gamma / 2.0 + self.beta >= 1.0:
            raise ValueError("regime is not covariance-stationary: alpha + gamma/2 + beta >= 1")
        if self.nu <= 2:
            raise ValueError(f"tail parameter nu must exceed 2, got {self.nu}")
        if self.xi <= 0:
            raise ValueError(f"skew parameter xi must be positive, got {self.xi}")

    @property
    def unconditional_variance(self) -> float:
        return self.omega / (1.0 - self.alpha - self.gamma / 2.0 - self.beta)


@dataclass(frozen=True, slots=True)
class MsGarchParams:
    """Two regime parameter sets plus the Markov chain's stay probabilities."""

    regimes: tuple[RegimeParams, RegimeParams]
    p11: float
    p22: float

    def __post_init__(self) -> None:
        if len(self.regimes) != N_REGIMES:
            raise ValueError("exactly two regimes are supported")
        for p, name in ((self.p11, "p11"), (self.p22, "p22")):
            # the closed boundary p = 1 is admitted for absorbing-chain simulation
            if not 0.0 < p <= 1.0:
                raise ValueError(f"{name} must lie in (0, 1], got {p}")

    @property
    def transition_matrix(self) -> np.ndarray:
        return np.array([[self.p11, 1.0 - self.p11], [1.0 - self.p22, self.p22]])

    @property
    def stationary_distribution(self) -> np.ndarray:
        escape = (1.0 - self.p11) + (1.0 - self.p22)
        if escape == 0.0:
            raise ValueError("stationary distribution undefined: both regimes absorbing")
        return np.array([(1.0 - self.p22) / escape, (1.0 - self.p11) / escape])

    def flat(self) -> np.ndarray:
        values = []
        for r in self.regimes:
            values += [r.omega, r.alpha, r.gamma, r.beta, r.nu, r.xi]
        values += [self.p11, self.p22]
        return np.array(values)


@dataclass
class MsGarchFit:
    """Maximum-likelihood fit: parameters, likelihood, and regime probabilities.

    Probability matrices are T x 2 with column 0 for regime 1, the regime with
    the lower unconditional variance.
    """

    params: MsGarchParams
    log_likelihood: float
    filtered_probs: np.ndarray
    smoothed_probs: np.ndarray
    converged: bool
    iterations: int
    n_obs: int


def _skewt_location_scale(nu: float, xi: float) -> tuple[float, float]:
    """Location/scale constants that standardize the skewed density to mean 0, variance 1."""
    abs_moment = (2.0 * math.sqrt(nu - 2.0) / (nu - 1.0)
                  * math.exp(gammaln((nu + 1.0) / 2.0) - gammaln(nu / 2.0)) / math.sqrt(math.pi))
    location = abs_moment * (xi - 1.0 / xi)
    scale_sq = (xi * xi + 1.0 / (xi * xi) - 1.0) - location * location
    return location, math.sqrt(scale_sq)


def _check_shape(nu: float, xi: float) -> None:
    if nu <= 2:
        raise ValueError(f"tail parameter nu must exceed 2, got {nu}")
    if xi <= 0:
        raise ValueError(f"skew parameter xi must be positive, got {xi}")


def skewed_t_logpdf(z: np.ndarray | float, nu: float, xi: float) -> np.ndarray | float:
    """Log density of the standardized (mean 0, variance 1) skewed Student-t."""
    _check_shape(nu, xi)
    location, scale = _skewt_location_scale(nu, xi)
    z = np.asarray(z, dtype=float)
    u = scale * z + location
    arg = u * np.where(u >= 0, 1.0 / xi, xi)
    log_norm = (math.log(scale) + math.log(2.0 / (xi + 1.0 / xi))
                + gammaln((nu + 1.0) / 2.0) - gammaln(nu / 2.0)
                - 0.5 * math.log(math.pi * (nu - 2.0)))
    out = log_norm - (nu + 1.0) / 2.0 * np.log1p(arg * arg / (nu - 2.0))
    return float(out) if out.ndim == 0 else out


def skewed_t_density(z: np.ndarray | float, nu: float, xi: float) -> np.ndarray | float:
    """Density of the standardized skewed Student-t; xi = 1 is the symmetric case."""
    return np.exp(skewed_t_logpdf(z, nu, xi))


def _skewed_t_rvs(rng: np.random.Generator, size: int, nu: float, xi: float) -> np.ndarray:
    location, scale = _skewt_location_scale(nu, xi)
    draw = np.abs(rng.standard_t(nu, size)) * math.sqrt((nu - 2.0) / nu)
    positive = rng.random(size) < xi * xi / (1.0 + xi * xi)
    raw = np.where(positive, xi * draw, -draw / xi)
    return (raw - location) / scale


def gjr_variance_path(returns: np.ndarray, regime: RegimeParams, h1: float) -> np.ndarray:
    """Conditional variance recursion h_t = omega + (alpha + gamma*1[r<0]) r^2 + beta h."""
    returns = np.asarray(returns, dtype=float)
    if not np.all(np.isfinite(returns)):
        raise ValueError("returns must be finite")
    if h1 <= 0:
        raise ValueError(f"initial variance must be positive, got {h1}")
    path = np.empty(returns.size)
    h = float(h1)
    path[0] = h
    for t in range(1, returns.size):
        r_prev = returns[t - 1]
        arch = (regime.alpha + (regime.gamma if r_prev < 0.0 else 0.0)) * r_prev * r_prev
        h = regime.omega + arch + regime.beta * h
        path[t] = h
    return path


@njit(cache=True)
def _filter_core(returns: np.ndarray, flat: np.ndarray, h1: float) -> tuple[float, np.ndarray]:
    """Forward filter: (log-likelihood, T x 2 filtered probabilities).

    ``flat`` is [omega, alpha, gamma, beta, nu, xi] per regime then [p11, p22].
    All per-step mixing is arithmetically symmetric in the two regimes so that
    swapping regime labels (together with p11/p22) reproduces the
    log-likelihood exactly.
    """
    T = returns.shape[0]
    p11 = flat[12]
    p22 = flat[13]
    escape = (1.0 - p11) + (1.0 - p22)
    pred1 = (1.0 - p22) / escape
    pred2 = (1.0 - p11) / escape

    h = np.empty(2)
    log_norm = np.empty(2)
    loc = np.empty(2)
    scl = np.empty(2)
    for j in range(2):
        nu = flat[6 * j + 4]
        xi = flat[6 * j + 5]
        abs_moment = (2.0 * math.sqrt(nu - 2.0) / (nu - 1.0)
                      * math.exp(math.lgamma((nu + 1.0) / 2.0) - math.lgamma(nu / 2.0))
                      / math.sqrt(math.pi))
        loc[j] = abs_moment * (xi - 1.0 / xi)
        scl[j] = math.sqrt((xi * xi + 1.0 / (xi * xi) - 1.0) - loc[j] * loc[j])
        log_norm[j] = (math.log(scl[j]) + math.log(2.0 / (xi + 1.0 / xi))
                       + math.lgamma((nu + 1.0) / 2.0) - math.lgamma(nu / 2.0)
                       - 0.5 * math.log(math.pi * (nu - 2.0)))
        h[j] = h1

    filtered = np.empty((T, 2))
    log_like = 0.0
    for t in range(T):
        if t > 0:
            r_prev = returns[t - 1]
            for j in range(2):
                arch = flat[6 * j + 1] + (flat[6 * j + 2] if r_prev < 0.0 else 0.0)
                h[j] = flat[6 * j] + arch * r_prev * r_prev + flat[6 * j + 3] * h[j]
        x = np.empty(2)
        for j in range(2):
            nu = flat[6 * j + 4]
            xi = flat[6 * j + 5]
            z = returns[t] / math.sqrt(h[j])
            u = scl[j] * z + loc[j]
            arg = u / xi if u >= 0.0 else u * xi
            log_dens = (log_norm[j]
                        - (nu + 1.0) / 2.0 * math.log1p(arg * arg / (nu - 2.0))
                        - 0.5 * math.log(h[j]))
            pred = pred1 if j == 0 else pred2
            x[j] = (math.log(pred) if pred > 0.0 else -math.inf) + log_dens
        top = max(x[0], x[1])
        w1 = math.exp(x[0] - top)
        w2 = math.exp(x[1] - top)
        total = w1 + w2
        log_like += top + math.log(total)
        f1 = w1 / total
        f2 = w2 / total
        filtered[t, 0] = f1
        filtered[t, 1] = f2
        pred1 = f1 * p11 + f2 * (1.0 - p22)
        pred2 = f1 * (1.0 - p11) + f2 * p22
    return log_like, filtered


def hamilton_loglik(
    returns: np.ndarray,
    params: MsGarchParams,
    h1: float | None = None,
) -> tuple[float, np.ndarray]:
    """Log-likelihood and filtered regime probabilities of the two-regime model.

    The regime chain starts from its stationary distribution; both regime
    variance recursions start at ``h1`` (sample variance of the returns when
    not given).  The recursion works in log space, so the likelihood only
    reaches -inf if a conditional density is truly zero.
    """
    returns = np.ascontiguousarray(returns, dtype=float)
    if returns.ndim != 1 or returns.size < 2:
        raise ValueError("need a 1-d return series of length >= 2")
    if not np.all(np.isfinite(returns)):
        raise ValueError("returns must be finite")
    if params.p11 == 1.0 and params.p22 == 1.0:
        raise ValueError("stationary distribution undefined: both regimes absorbing")
    if h1 is None:
        h1 = float(np.var(returns, ddof=1))
    if h1 <= 0:
        raise ValueError("initial variance must be positive (degenerate return series?)")
    log_like, filtered = _filter_core(returns, params.flat(), float(h1))
    return float(log_like), filtered


def kim_smoother(filtered_probs: np.ndarray, params: MsGarchParams) -> np.ndarray:
    """Backward recursion turning filtered into smoothed regime probabilities."""
    filtered = np.asarray(filtered_probs, dtype=float)
    if filtered.ndim != 2 or filtered.shape[1] != N_REGIMES:
        raise ValueError("filtered probabilities must be a T x 2 matrix")
    if np.any(filtered < 0) or np.any(filtered > 1):
        raise ValueError("filtered probabilities must lie in [0, 1]")
    if not np.allclose(filtered.sum(axis=1), 1.0, atol=1e-9):
        raise ValueError("filtered probability rows must sum to 1")
    transition = params.transition_matrix
    smoothed = np.empty_like(filtered)
    smoothed[-1] = filtered[-1]
    for t in range(filtered.shape[0] - 2, -1, -1):
        predicted = filtered[t] @ transition
        # an unreachable state has predicted = smoothed = 0; its ratio contributes nothing
        ratio = np.divide(smoothed[t + 1], predicted, out=np.zeros(N_REGIMES), where=predicted > 0)
        smoothed[t] = filtered[t] * (transition @ ratio)
    return smoothed


# ---------------------------------------------------------------------------
# maximum-likelihood estimation over a smooth unconstrained reparameterization
# ---------------------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class FitConfig:
    """Optimizer settings; the fit is deterministic for a given config."""

    max_iter: int = 500
    tol: float = 1e-8
    min_obs_warning: int = 100


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def _logit(p: float) -> float:
    p = min(max(p, 1e-12), 1.0 - 1e-12)
    return math.log(p / (1.0 - p))


def _pack_regime(regime: RegimeParams) -> list[float]:
    persistence = regime.alpha + regime.gamma / 2.0 + regime.beta
    arch_mass = persistence - regime.beta
    share = regime.alpha / (2.0 * arch_mass) if arch_mass > 0 else 0.5
    return [
        math.log(regime.omega),
        _logit(persistence / _STATIONARITY_CAP),
        _logit(regime.beta / persistence if persistence > 0 else 0.5),
        _logit(share),
        math.log(regime.nu - 2.0),
        math.log(regime.xi),
    ]


def _bounded_exp(x: float) -> float:
    # keeps extreme optimizer probes finite instead of raising OverflowError
    return math.exp(min(max(x, -700.0), 700.0))


def _unpack_regime(u: Sequence[float]) -> RegimeParams:
    persistence = _STATIONARITY_CAP * _sigmoid(u[1])
    beta = persistence * _sigmoid(u[2])
    arch_mass = persistence - beta
    share = _sigmoid(u[3])
    return RegimeParams(
        omega=_bounded_exp(u[0]),
        alpha=2.0 * arch_mass * share,
        gamma=2.0 * arch_mass * (1.0 - 2.0 * share),
        beta=beta,
        nu=2.0 + _bounded_exp(u[4]),
        xi=_bounded_exp(u[5]),
    )


def pack_params(params: MsGarchParams) -> np.ndarray:
    """Map parameters to the unconstrained optimization vector."""
    values: list[float] = []
    for regime in params.regimes:
        values += _pack_regime(regime)
    values += [_logit(params.p11), _logit(params.p22)]
    return np.array(values)


def unpack_params(vector: np.ndarray) -> MsGarchParams:
    """Inverse of :func:`pack_params`; always yields a valid, stationary parameter set."""
    vector = np.asarray(vector, dtype=float)
    if vector.shape != (14,):
        raise ValueError(f"expected a 14-element vector, got {vector.shape}")
    regimes = (_unpack_regime(vector[0:6]), _unpack_regime(vector[6:12]))

    def stay_prob(x: float) -> float:
        # the float sigmoid saturates to 0/1; keep the chain strictly ergodic
        return min(max(_sigmoid(x), 1e-12), 1.0 - 1e-12)

    return MsGarchParams(regimes=regimes, p11=stay_prob(vector[12]), p22=stay_prob(vector[13]))


def negative_loglik_objective(
    returns: np.ndarray,
    h1: float | None = None,
) -> Callable[[np.ndarray], float]:
    """Negative log-likelihood over the unconstrained vector (the optimizer's objective)."""
    returns = np.ascontiguousarray(returns, dtype=float)
    if h1 is None:
        h1 = float(np.var(returns, ddof=1))

    def objective(vector: np.ndarray) -> float:
        try:
            flat = unpack_params(vector).flat()
            log_like, _ = _filter_core(returns, flat, h1)
        except (ValueError, OverflowError, ZeroDivisionError):
            return 1e12
        if not math.isfinite(log_like):
            return 1e12
        return -log_like

    return objective


def _fixed_starts(sample_var: float) -> list[np.ndarray]:
    """Eight deterministic multi-start points spanning variance split, persistence, and shape."""
    starts = []
    for var_factors in ((0.5, 2.0), (0.25, 4.0)):
        for stay_prob in (0.90, 0.98):
            for alpha, beta in ((0.05, 0.90), (0.15, 0.70)):
                gamma = 0.02
                vector: list[float] = []
                for factor in var_factors:
                    omega = factor * sample_var * (1.0 - alpha - gamma / 2.0 - beta)
                    vector += _pack_regime(RegimeParams(omega, alpha, gamma, beta, nu=6.0, xi=1.0))
                vector += [_logit(stay_prob), _logit(stay_prob)]
                starts.append(np.array(vector))
    return starts


def _order_regimes(params: MsGarchParams) -> MsGarchParams:
    """Fix label switching: regime 1 is the lower unconditional variance regime."""
    if params.regimes[0].unconditional_variance <= params.regimes[1].unconditional_variance:
        return params
    return MsGarchParams(
        regimes=(params.regimes[1], params.regimes[0]),
        p11=params.p22,
        p22=params.p11,
    )


def fit_msgarch(returns: np.ndarray, config: FitConfig | None = None) -> MsGarchFit:
    """Maximum-likelihood fit via L-BFGS-B from eight fixed starting points.

    Deterministic: no randomness enters the optimization, so refits on the same
    data and config are bit-identical.  The best start wins; ties break toward
    the lowest start index.
    """
    config = config or FitConfig()
    returns = np.ascontiguousarray(returns, dtype=float)
    if returns.ndim != 1 or returns.size < 2:
        raise ValueError("need a 1-d return series of length >= 2")
    if not np.all(np.isfinite(returns)):
        raise ValueError("returns must be finite")
    sample_var = float(np.var(returns, ddof=1))
    if sample_var <= 0:
        raise ValueError("return series has zero variance")
    if returns.size < config.min_obs_warning:
        warnings.warn(
            f"only {returns.size} observations; regime estimates may be unreliable",
            stacklevel=2,
        )

    objective = negative_loglik_objective(returns, h1=sample_var)
    best = None
    for index, start in enumerate(_fixed_starts(sample_var)):
        result = minimize(
            objective,
            start,
            method="L-BFGS-B",
            options={"maxiter": config.max_iter, "ftol": config.tol, "gtol": 1e-6},
        )
        if best is None or result.fun < best[1].fun:
            best = (index, result)
    _, chosen = best

    params = _order_regimes(unpack_params(chosen.x))
    log_like, filtered = hamilton_loglik(returns, params, h1=sample_var)
    smoothed = kim_smoother(filtered, params)
    return MsGarchFit(
        params=params,
        log_likelihood=log_like,
        filtered_probs=filtered,
        smoothed_probs=smoothed,
        converged=bool(chosen.success),
        iterations=int(chosen.nit),
        n_obs=int(returns.size),
    )


def simulate_msgarch(params: MsGarchParams, T: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Simulate a return series and its latent regime path (labels 1 and 2).

    The chain starts from its stationary distribution; each regime's variance
    recursion starts at that regime's unconditional variance and is driven by
    the realized returns.
    """
    if T < 1:
        raise ValueError(f"T must be at least 1, got {T}")
    rng = np.random.default_rng(seed)
    innovations = np.column_stack([
        _skewed_t_rvs(rng, T, regime.nu, regime.xi) for regime in params.regimes
    ])
    uniforms = rng.random(T)
    stationary = params.stationary_distribution
    h = np.array([regime.unconditional_variance for regime in params.regimes])
    stay = (params.p11, params.p22)

    returns = np.empty(T)
    regime_path = np.empty(T, dtype=np.int64)
    state = 0 if uniforms[0] < stationary[0] else 1
    for t in range(T):
        if t > 0:
            if uniforms[t] >= stay[state]:
                state = 1 - state
            r_prev = returns[t - 1]
            for j, regime in enumerate(params.regimes):
                arch = (regime.alpha + (regime.gamma if r_prev < 0.0 else 0.0)) * r_prev * r_prev
                h[j] = regime.omega + arch + regime.beta * h[j]
        regime_path[t] = state + 1
        returns[t] = math.sqrt(h[state]) * innovations[t, state]
    return returns, regime_path
