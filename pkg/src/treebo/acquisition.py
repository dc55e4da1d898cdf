"""Additive acquisition functions and their exploration schedule.

Both families decompose over the components of the model's
decomposition: the total acquisition is the sum of per-component terms,
each depending only on its own dimensions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.stats import norm

from .decomposition import Component
from .errors import InvalidParameterError
from .gp import GpModel, posterior_component

FAMILIES = ("add-ucb", "add-ei")


def beta(t: int) -> float:
    """Default exploration bonus ``0.5 * ln(2 t)`` for round ``t >= 1``."""
    if t < 1:
        raise InvalidParameterError(f"round index must be >= 1, got {t}")
    return 0.5 * math.log(2.0 * t)


def constant_schedule(value: float) -> Callable[[int], float]:
    if value < 0:
        raise InvalidParameterError("beta override must be non-negative")
    return lambda t: value


@dataclass(frozen=True)
class AcquisitionSpec:
    """Acquisition family plus its schedule and incumbent.

    ``incumbent`` is the best input found so far (normalised
    coordinates); only the expected-improvement family uses it, taking
    the component posterior mean there as the improvement reference.
    """

    family: str = "add-ucb"
    beta_schedule: Callable[[int], float] = field(default=beta)
    incumbent: np.ndarray | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidParameterError(
                f"family must be one of {FAMILIES}, got {self.family!r}"
            )


def component_term(model: GpModel, c: Component, xc, spec: AcquisitionSpec, t: int):
    """Per-component acquisition at component coordinates ``xc``.

    Vectorised: ``xc`` may be one coordinate vector or a batch of rows,
    mirroring :func:`treebo.gp.posterior_component`.
    """
    mean, var = posterior_component(model, c, xc)
    mean = np.asarray(mean, dtype=float)
    std = np.sqrt(np.asarray(var, dtype=float))
    if spec.family == "add-ucb":
        out = mean + spec.beta_schedule(t) * std
    else:
        if spec.incumbent is None:
            raise InvalidParameterError("add-ei requires an incumbent input")
        idx = [i - 1 for i in c.dims]
        inc_mean, _ = posterior_component(
            model, c, np.asarray(spec.incumbent, dtype=float)[idx]
        )
        improve = mean - inc_mean
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(std > 0, improve / np.where(std > 0, std, 1.0), 0.0)
        ei = improve * norm.cdf(z) + std * norm.pdf(z)
        out = np.where(std > 0, ei, np.maximum(improve, 0.0))
    return float(out) if out.ndim == 0 else out


def total_acquisition(model: GpModel, x, spec: AcquisitionSpec, t: int) -> float:
    """Sum of all component terms at a full input point."""
    x = np.asarray(x, dtype=float)
    total = 0.0
    for c in model.g.components:
        idx = [i - 1 for i in c.dims]
        total += component_term(model, c, x[idx], spec, t)
    return float(total)
