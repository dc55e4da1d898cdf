"""Additive Gaussian-process surrogate: likelihood, fitting, posteriors.

The surrogate is a zero-mean GP whose covariance is the additive kernel
of a decomposition.  Hyperparameters (per-dimension lengthscales and the
observation-noise variance) are tuned by maximising the log marginal
likelihood with a multi-start projected gradient ascent in log space.

Inputs are expected in the normalised unit box and observations in
whatever units the caller standardised them to; this module performs no
rescaling of its own.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .decomposition import Component, Decomposition
from .errors import FitError, InvalidParameterError, NumericalError
from .kernel import (
    KernelParams,
    chol_with_jitter,
    component_cross_covariance,
    component_gram,
    componentwise_sq_dists,
    cross_covariance,
    gram_matrix,
)

LOG_LENGTHSCALE_BOUNDS = (np.log(1e-3), np.log(1e3))
LOG_NOISE_BOUNDS = (np.log(1e-6), np.log(1.0))


@dataclass(frozen=True)
class Dataset:
    """Paired inputs (``t x d``) and scalar observations (``t``)."""

    X: np.ndarray
    y: np.ndarray

    def __init__(self, X, y):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        y = np.atleast_1d(np.asarray(y, dtype=float))
        if X.shape[0] != y.shape[0]:
            raise InvalidParameterError(
                f"X has {X.shape[0]} rows but y has {y.shape[0]} entries"
            )
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    def __len__(self):
        return self.y.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class FitOptions:
    """Contract of the marginal-likelihood optimiser.

    Three ascent starts: the warm start (previous round's parameters or a
    default), plus ``restarts - 1`` random draws.  Each start runs
    backtracking-line-search gradient ascent for at most ``max_steps``
    iterations, stopping early once the projected gradient norm falls
    below ``grad_tol``.
    """

    restarts: int = 3
    max_steps: int = 200
    grad_tol: float = 1e-5
    warm_start: KernelParams | None = None
    rng: np.random.Generator = field(default_factory=lambda: np.random.default_rng(0))


@dataclass(frozen=True)
class GpModel:
    """A fitted surrogate with its cached Gram factorization.

    ``chol`` is the lower Cholesky factor of ``K + noise * I`` and
    ``weights`` solves ``(K + noise * I) w = y``.
    """

    dataset: Dataset
    g: Decomposition
    params: KernelParams
    chol: np.ndarray
    weights: np.ndarray

    @property
    def num_components(self) -> int:
        return len(self.g)


def _pack(params: KernelParams) -> np.ndarray:
    return np.concatenate([np.log(params.lengthscales), [np.log(params.noise_variance)]])


def _unpack(eta: np.ndarray) -> KernelParams:
    return KernelParams(np.exp(eta[:-1]), float(np.exp(eta[-1])))


def _bounds(d: int) -> tuple[np.ndarray, np.ndarray]:
    lo = np.concatenate([np.full(d, LOG_LENGTHSCALE_BOUNDS[0]), [LOG_NOISE_BOUNDS[0]]])
    hi = np.concatenate([np.full(d, LOG_LENGTHSCALE_BOUNDS[1]), [LOG_NOISE_BOUNDS[1]]])
    return lo, hi


def log_marginal_likelihood(
    dataset: Dataset, g: Decomposition, params: KernelParams
) -> tuple[float, np.ndarray]:
    """Gaussian log marginal likelihood and its gradient.

    Returns the value
    ``-0.5 y^T (K + s I)^{-1} y - 0.5 ln det(K + s I) - (t/2) ln 2 pi``
    together with the analytic gradient over the log-lengthscales and the
    log noise variance, in that order.
    """
    if len(dataset) == 0:
        raise InvalidParameterError("dataset must be non-empty")
    t = len(dataset)
    sq = componentwise_sq_dists(dataset.X, params)
    K = np.zeros((t, t))
    comp_grams = []
    for c in g.components:
        Kc = component_gram(sq, c.dims)
        comp_grams.append(Kc)
        K += Kc
    C = K + params.noise_variance * np.eye(t)
    L = chol_with_jitter(C)
    alpha = cho_solve((L, True), dataset.y)
    value = (
        -0.5 * float(dataset.y @ alpha)
        - float(np.sum(np.log(np.diag(L))))
        - 0.5 * t * np.log(2.0 * np.pi)
    )
    # M = alpha alpha^T - C^{-1}; grad_j = 0.5 tr(M dC/d eta_j).
    M = np.outer(alpha, alpha) - cho_solve((L, True), np.eye(t))
    grad = np.empty(params.d + 1)
    for i in range(params.d):
        dK = np.zeros((t, t))
        for c, Kc in zip(g.components, comp_grams):
            if (i + 1) in c.dims:
                dK += Kc * sq[i]
        grad[i] = 0.5 * float(np.sum(M * dK))
    grad[-1] = 0.5 * params.noise_variance * float(np.trace(M))
    return value, grad


def _ascend(dataset, g, eta0, lo, hi, options):
    """Projected gradient ascent with backtracking from one start point."""
    eta = np.clip(eta0, lo, hi)
    value, grad = log_marginal_likelihood(dataset, g, _unpack(eta))
    step = 0.1
    for _ in range(options.max_steps):
        # Zero out gradient components pushing against an active bound.
        proj = grad.copy()
        proj[(eta <= lo) & (grad < 0)] = 0.0
        proj[(eta >= hi) & (grad > 0)] = 0.0
        if np.linalg.norm(proj) < options.grad_tol:
            break
        advanced = False
        for _ in range(30):
            trial = np.clip(eta + step * proj, lo, hi)
            move = trial - eta
            if not np.any(move):
                break
            try:
                trial_value, trial_grad = log_marginal_likelihood(
                    dataset, g, _unpack(trial)
                )
            except NumericalError:
                step *= 0.5
                continue
            if trial_value >= value + 1e-4 * float(grad @ move):
                eta, value, grad = trial, trial_value, trial_grad
                step = min(step * 2.0, 10.0)
                advanced = True
                break
            step *= 0.5
        if not advanced:
            break
    return eta, value


def build_model(dataset: Dataset, g: Decomposition, params: KernelParams) -> GpModel:
    """Assemble a model with the given hyperparameters (no optimisation)."""
    if len(dataset) == 0:
        L = np.zeros((0, 0))
        return GpModel(dataset, g, params, L, np.zeros(0))
    K = gram_matrix(g, params, dataset.X)
    C = K + params.noise_variance * np.eye(len(dataset))
    L = chol_with_jitter(C)
    weights = cho_solve((L, True), dataset.y)
    return GpModel(dataset, g, params, L, weights)


def fit(dataset: Dataset, g: Decomposition, options: FitOptions | None = None) -> GpModel:
    """Maximise the marginal likelihood and return the fitted model.

    The reported parameters achieve a marginal likelihood at least as
    high as every start point's, and are a stationary point of the
    bounded ascent up to the gradient tolerance.
    """
    if len(dataset) == 0:
        raise InvalidParameterError("cannot fit on an empty dataset")
    options = options or FitOptions()
    d = dataset.d
    lo, hi = _bounds(d)
    starts = []
    warm = options.warm_start or KernelParams(np.full(d, 0.3), 1e-3)
    starts.append(_pack(warm))
    for _ in range(max(options.restarts - 1, 0)):
        ls = np.exp(options.rng.uniform(np.log(5e-2), np.log(5.0), size=d))
        nv = float(np.exp(options.rng.uniform(np.log(1e-6), np.log(1e-1))))
        starts.append(_pack(KernelParams(ls, nv)))
    best_eta, best_value = None, -np.inf
    failures = []
    for eta0 in starts:
        try:
            eta, value = _ascend(dataset, g, eta0, lo, hi, options)
        except (NumericalError, FloatingPointError) as exc:
            failures.append(exc)
            continue
        if value > best_value:
            best_eta, best_value = eta, value
    if best_eta is None:
        raise FitError(f"all {len(starts)} restarts failed: {failures[-1]}")
    return build_model(dataset, g, _unpack(best_eta))


def refit(model: GpModel, dataset: Dataset, g: Decomposition, rng=None) -> GpModel:
    """Fit on new data, warm-starting from a previous model's parameters."""
    options = FitOptions(warm_start=model.params if model is not None else None,
                         rng=rng or np.random.default_rng(0))
    return fit(dataset, g, options)


def posterior(model: GpModel, x) -> tuple[float, float] | tuple[np.ndarray, np.ndarray]:
    """Posterior mean and variance of the latent function at ``x``.

    Accepts a single point (returns scalars) or a batch of rows (returns
    arrays).  With no data this is the prior ``(0, |g|)``; variances are
    clamped to zero from small negative round-off.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    Z = np.atleast_2d(x)
    prior_var = float(model.num_components)
    if len(model.dataset) == 0:
        mean = np.zeros(Z.shape[0])
        var = np.full(Z.shape[0], prior_var)
    else:
        Kt = cross_covariance(model.g, model.params, model.dataset.X, Z)
        mean = Kt.T @ model.weights
        V = solve_triangular(model.chol, Kt, lower=True)
        var = np.maximum(prior_var - np.sum(V * V, axis=0), 0.0)
    if single:
        return float(mean[0]), float(var[0])
    return mean, var


def posterior_component(model: GpModel, c: Component, xc):
    """Posterior of one component sub-function at component coordinates.

    Means over all components sum exactly to the full posterior mean;
    the component variance lies in ``[0, 1]``.  ``xc`` may be one
    coordinate vector (scalars returned) or a batch of rows.
    """
    if c not in model.g.components:
        raise InvalidParameterError(f"component {c} not in the model decomposition")
    xc = np.asarray(xc, dtype=float)
    single = xc.ndim <= 1 and xc.size == len(c)
    Zc = xc.reshape(1, -1) if single else np.atleast_2d(xc)
    if len(model.dataset) == 0:
        mean = np.zeros(Zc.shape[0])
        var = np.ones(Zc.shape[0])
    else:
        Ktc = component_cross_covariance(model.params, model.dataset.X, Zc, c.dims)
        mean = Ktc.T @ model.weights
        V = solve_triangular(model.chol, Ktc, lower=True)
        var = np.clip(1.0 - np.sum(V * V, axis=0), 0.0, 1.0)
    if single:
        return float(mean[0]), float(var[0])
    return mean, var


def with_params(model: GpModel, params: KernelParams) -> GpModel:
    """Rebuild the cached factorization for new hyperparameters."""
    return build_model(model.dataset, model.g, params)


def standardize(y: np.ndarray) -> tuple[np.ndarray, float, float]:
    """Zero-mean unit-variance rescaling, returning ``(scaled, mean, scale)``."""
    y = np.asarray(y, dtype=float)
    mean = float(np.mean(y)) if y.size else 0.0
    scale = float(np.std(y)) if y.size else 1.0
    if not np.isfinite(scale) or scale < 1e-8:
        scale = 1.0
    return (y - mean) / scale, mean, scale
