"""Additive squared-exponential kernels over a decomposition.

Each component of a decomposition carries a unit-amplitude squared
exponential sub-kernel restricted to that component's dimensions, with
one lengthscale per input dimension shared across components.  The full
kernel is the plain (unnormalised) sum of the sub-kernels, so its
diagonal equals the number of components.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cholesky, LinAlgError

from .decomposition import Decomposition
from .errors import InvalidMatrixError, InvalidParameterError, NumericalError

# One-shot diagonal jitter applied when a factorization fails; a second
# failure is reported as an error.
CHOL_JITTER = 1e-8


@dataclass(frozen=True)
class KernelParams:
    """Per-dimension lengthscales and observation-noise variance."""

    lengthscales: np.ndarray
    noise_variance: float

    def __init__(self, lengthscales, noise_variance: float):
        ls = np.atleast_1d(np.asarray(lengthscales, dtype=float))
        if np.any(ls <= 0):
            raise InvalidParameterError("all lengthscales must be positive")
        if noise_variance <= 0:
            raise InvalidParameterError("noise variance must be positive")
        object.__setattr__(self, "lengthscales", ls)
        object.__setattr__(self, "noise_variance", float(noise_variance))

    @property
    def d(self) -> int:
        return self.lengthscales.shape[0]


def se_component(xc, xc_other, lengthscales_c) -> float:
    """Squared-exponential kernel on one component's dimensions.

    ``exp(-0.5 * sum(((x - x') / theta)**2))`` over the component's
    coordinates; equals 1 exactly when the sub-vectors coincide.
    """
    a = np.asarray(xc, dtype=float)
    b = np.asarray(xc_other, dtype=float)
    t = np.asarray(lengthscales_c, dtype=float)
    if not a.shape == b.shape == t.shape or a.ndim != 1 or a.size < 1:
        raise InvalidParameterError(
            f"mismatched component shapes: {a.shape}, {b.shape}, {t.shape}"
        )
    z = (a - b) / t
    return float(np.exp(-0.5 * np.dot(z, z)))


def additive_kernel(g: Decomposition, params: KernelParams, x, x_other) -> float:
    """Sum of per-component squared-exponential values at two points."""
    a = np.asarray(x, dtype=float)
    b = np.asarray(x_other, dtype=float)
    if a.shape != (g.d,) or b.shape != (g.d,):
        raise InvalidParameterError(f"inputs must have shape ({g.d},)")
    total = 0.0
    for c in g.components:
        idx = [i - 1 for i in c.dims]
        total += se_component(a[idx], b[idx], params.lengthscales[idx])
    return total


def componentwise_sq_dists(X: np.ndarray, params: KernelParams) -> np.ndarray:
    """Per-dimension scaled squared distances, shape ``(d, t, t)``.

    ``out[i, a, b] = ((X[a, i] - X[b, i]) / theta_i)**2``; shared by the
    Gram matrix and the marginal-likelihood gradient.
    """
    X = np.asarray(X, dtype=float)
    diff = X[:, None, :] - X[None, :, :]
    return np.moveaxis((diff / params.lengthscales) ** 2, -1, 0)


def component_gram(sq: np.ndarray, dims: tuple[int, ...]) -> np.ndarray:
    """Gram matrix of one component from precomputed scaled distances."""
    acc = sq[dims[0] - 1]
    for i in dims[1:]:
        acc = acc + sq[i - 1]
    return np.exp(-0.5 * acc)


def gram_matrix(g: Decomposition, params: KernelParams, X) -> np.ndarray:
    """Additive-kernel Gram matrix of ``X`` (``t x d``).

    Symmetric with diagonal equal to the number of components, and
    positive semi-definite.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    sq = componentwise_sq_dists(X, params)
    t = X.shape[0]
    K = np.zeros((t, t))
    for c in g.components:
        K += component_gram(sq, c.dims)
    return K


def cross_covariance(
    g: Decomposition, params: KernelParams, X: np.ndarray, Z: np.ndarray
) -> np.ndarray:
    """Kernel evaluations between query points ``Z`` and data ``X``, shape ``(t, n)``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    out = np.zeros((X.shape[0], Z.shape[0]))
    for c in g.components:
        out += component_cross_covariance(params, X, Z, c.dims)
    return out


def component_cross_covariance(
    params: KernelParams, X: np.ndarray, Zc: np.ndarray, dims: tuple[int, ...]
) -> np.ndarray:
    """Sub-kernel evaluations between component coordinates and data, shape ``(t, n)``.

    ``Zc`` may carry either full ``d``-dimensional rows or just the
    component's coordinates in ``dims`` order.
    """
    idx = [i - 1 for i in dims]
    Xc = X[:, idx]
    Zc = np.atleast_2d(np.asarray(Zc, dtype=float))
    if Zc.shape[1] == params.d and params.d != len(dims):
        Zc = Zc[:, idx]
    theta = params.lengthscales[idx]
    diff = (Xc[:, None, :] - Zc[None, :, :]) / theta
    return np.exp(-0.5 * np.sum(diff * diff, axis=-1))


def chol_with_jitter(A: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor, retrying once with diagonal jitter."""
    try:
        return cholesky(A, lower=True)
    except LinAlgError:
        try:
            return cholesky(A + CHOL_JITTER * np.eye(A.shape[0]), lower=True)
        except LinAlgError as exc:
            raise NumericalError(
                f"Cholesky failed even with {CHOL_JITTER:g} jitter"
            ) from exc


def information_gain(K, noise_std: float) -> float:
    """Mutual information between noisy observations and latent values.

    ``0.5 * ln det(I + K / noise_std**2)``, evaluated through the
    eigenvalues of ``K``.  Non-negative, and monotone under adding a PSD
    matrix to ``K``.
    """
    K = np.asarray(K, dtype=float)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise InvalidMatrixError(f"K must be square, got shape {K.shape}")
    if noise_std <= 0:
        raise InvalidParameterError("noise_std must be positive")
    if not np.allclose(K, K.T, atol=1e-10):
        raise InvalidMatrixError("K is not symmetric")
    eigvals = np.linalg.eigvalsh(K)
    floor = -1e-8 * max(1.0, float(eigvals[-1]))
    if eigvals[0] < floor:
        raise InvalidMatrixError(f"K has negative eigenvalue {eigvals[0]:g}")
    lam = np.clip(eigvals, 0.0, None)
    return float(0.5 * np.sum(np.log1p(lam / noise_std**2)))
