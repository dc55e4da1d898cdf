"""Benchmark functions with known optima, plus the external black-box protocol."""

from __future__ import annotations

import math
import select
import shlex
import subprocess
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import BlackboxError, InvalidParameterError, UnknownOptimumError


@dataclass(frozen=True)
class Benchmark:
    """A scalar objective over a box domain.

    ``sense`` is ``"min"`` or ``"max"``; ``known_optimum`` is the
    analytic optimum value when one exists (None for external boxes).
    """

    name: str
    d: int
    domain: tuple
    evaluate: Callable[[np.ndarray], float]
    known_optimum: float | None
    sense: str = "min"

    def __call__(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.d,):
            raise InvalidParameterError(
                f"{self.name} expects {self.d} coordinates, got shape {x.shape}"
            )
        for value, (lo, hi) in zip(x, self.domain):
            span = hi - lo
            if value < lo - 1e-9 * span or value > hi + 1e-9 * span:
                raise InvalidParameterError(
                    f"coordinate {value} outside [{lo}, {hi}] for {self.name}"
                )
        return float(self.evaluate(x))


def _stybtang_constants():
    # Stationary points of x**4 - 16 x**2 + 5 x; the minimiser is the
    # most negative real root of the derivative cubic.
    roots = np.roots([4.0, 0.0, -32.0, 5.0])
    x_star = float(np.real(roots[np.argmin(np.real(roots))]))
    per_dim = 0.5 * (x_star**4 - 16.0 * x_star**2 + 5.0 * x_star)
    return x_star, per_dim


STYBTANG_ARGMIN, STYBTANG_PER_DIM_MIN = _stybtang_constants()


def stybtang(x):
    return 0.5 * np.sum(x**4 - 16.0 * x**2 + 5.0 * x)


def rosenbrock(x):
    return np.sum(100.0 * (x[1:] - x[:-1] ** 2) ** 2 + (1.0 - x[:-1]) ** 2)


_HARTMANN6_A = np.array(
    [
        [10.0, 3.0, 17.0, 3.5, 1.7, 8.0],
        [0.05, 10.0, 17.0, 0.1, 8.0, 14.0],
        [3.0, 3.5, 1.7, 10.0, 17.0, 8.0],
        [17.0, 8.0, 0.05, 10.0, 0.1, 14.0],
    ]
)
_HARTMANN6_P = 1e-4 * np.array(
    [
        [1312.0, 1696.0, 5569.0, 124.0, 8283.0, 5886.0],
        [2329.0, 4135.0, 8307.0, 3736.0, 1004.0, 9991.0],
        [2348.0, 1451.0, 3522.0, 2883.0, 3047.0, 6650.0],
        [4047.0, 8828.0, 8732.0, 5743.0, 1091.0, 381.0],
    ]
)
_HARTMANN6_ALPHA = np.array([1.0, 1.2, 3.0, 3.2])
HARTMANN6_ARGMIN = np.array([0.20169, 0.150011, 0.476874, 0.275332, 0.311652, 0.6573])


def hartmann6(x):
    inner = np.sum(_HARTMANN6_A * (x[None, :6] - _HARTMANN6_P) ** 2, axis=1)
    return -np.sum(_HARTMANN6_ALPHA * np.exp(-inner))


HARTMANN6_MIN = float(hartmann6(HARTMANN6_ARGMIN))

# Two-bump mixture on [0, 1000]^3 with an inert third coordinate: a
# correlated mode at (800, 800) and a separable mode at (300, 300).
_TOY_W = (1.0 / 6.0, 2.5 / 6.0, 2.5 / 6.0)
_TOY_MU_XY = np.array([800.0, 800.0])
_TOY_MU_1D = 300.0
_TOY_COV_XY = np.array([[20000.0, 15000.0], [15000.0, 20000.0]])
_TOY_VAR_1D = 10000.0
_TOY_COV_XY_INV = np.linalg.inv(_TOY_COV_XY)
_TOY_COV_XY_NORM = 1.0 / (2.0 * math.pi * math.sqrt(np.linalg.det(_TOY_COV_XY)))
_TOY_NORM_1D = 1.0 / math.sqrt(2.0 * math.pi * _TOY_VAR_1D)


def _toy_quad(x, y):
    v = np.array([x, y]) - _TOY_MU_XY
    return float(v @ _TOY_COV_XY_INV @ v)


def toy_gmm_paper(x):
    """Weighted sum of normalised Gaussian densities (two 1-d, one 2-d)."""
    bump_xy = _TOY_COV_XY_NORM * math.exp(-0.5 * _toy_quad(x[0], x[1]))
    bump_x = _TOY_NORM_1D * math.exp(-((x[0] - _TOY_MU_1D) ** 2) / (2.0 * _TOY_VAR_1D))
    bump_y = _TOY_NORM_1D * math.exp(-((x[1] - _TOY_MU_1D) ** 2) / (2.0 * _TOY_VAR_1D))
    return _TOY_W[0] * bump_xy + _TOY_W[1] * bump_x + _TOY_W[2] * bump_y


def toy_gmm_figure(x):
    """Same bumps rescaled to unit peak height, reweighted 0.6/0.2/0.2.

    Makes the correlated (800, 800) mode the global maximum and the
    separable (300, 300) mode a local one.
    """
    bump_xy = math.exp(-0.5 * _toy_quad(x[0], x[1]))
    bump_x = math.exp(-((x[0] - _TOY_MU_1D) ** 2) / (2.0 * _TOY_VAR_1D))
    bump_y = math.exp(-((x[1] - _TOY_MU_1D) ** 2) / (2.0 * _TOY_VAR_1D))
    return 0.6 * bump_xy + 0.2 * bump_x + 0.2 * bump_y


def _box(lo, hi, d):
    return tuple((float(lo), float(hi)) for _ in range(d))


def _hartmann6_14(x):
    return hartmann6(x[:6])


def get_benchmark(name: str, d: int | None = None) -> Benchmark:
    """Look up a synthetic benchmark, checking dimension compatibility."""
    fixed = {
        "hartmann6": (6, _box(0, 1, 6), hartmann6, HARTMANN6_MIN, "min"),
        "hartmann6_14": (20, _box(0, 1, 20), _hartmann6_14, HARTMANN6_MIN, "min"),
        "toy_gmm_paper": (
            3,
            _box(0, 1000, 3),
            toy_gmm_paper,
            toy_gmm_paper(np.array([300.0, 300.0, 0.0])),
            "max",
        ),
        "toy_gmm_figure": (
            3,
            _box(0, 1000, 3),
            toy_gmm_figure,
            toy_gmm_figure(np.array([800.0, 800.0, 0.0])),
            "max",
        ),
    }
    if name in fixed:
        dim, box, fn, opt, sense = fixed[name]
        if d is not None and d != dim:
            raise InvalidParameterError(f"{name} is {dim}-dimensional, got d={d}")
        return Benchmark(name, dim, box, fn, opt, sense)
    if name == "stybtang":
        if d is None or d < 1:
            raise InvalidParameterError("stybtang needs an explicit dimension >= 1")
        return Benchmark(name, d, _box(-5, 5, d), stybtang, STYBTANG_PER_DIM_MIN * d, "min")
    if name == "rosenbrock":
        if d is None or d < 2:
            raise InvalidParameterError("rosenbrock needs an explicit dimension >= 2")
        return Benchmark(name, d, _box(-2.048, 2.048, d), rosenbrock, 0.0, "min")
    raise InvalidParameterError(f"unknown benchmark {name!r}")


BENCHMARK_NAMES = (
    "stybtang",
    "rosenbrock",
    "hartmann6",
    "hartmann6_14",
    "toy_gmm_paper",
    "toy_gmm_figure",
)


def eval_benchmark(name: str, x, d: int | None = None) -> float:
    x = np.asarray(x, dtype=float)
    return get_benchmark(name, d if d is not None else x.shape[0])(x)


def known_optimum(name: str, d: int | None = None) -> float:
    bench = get_benchmark(name, d)
    if bench.known_optimum is None:
        raise UnknownOptimumError(f"{name} has no analytic optimum")
    return bench.known_optimum


class ExternalBlackbox:
    """A child process evaluated through a line protocol.

    Each request is one line of space-separated decimal coordinates on
    the child's stdin; the reply is one line holding a single decimal
    number on its stdout.  The process is started lazily and reused for
    the whole run.
    """

    def __init__(self, command: str, d: int, timeout: float = 60.0):
        self.command = command
        self.d = d
        self.timeout = timeout
        self._proc: subprocess.Popen | None = None

    def _ensure_process(self):
        if self._proc is None or self._proc.poll() is not None:
            self._proc = subprocess.Popen(
                shlex.split(self.command),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        return self._proc

    def _fail(self, proc, reason):
        captured = ""
        try:
            proc.kill()
            _, err = proc.communicate(timeout=5)
            captured = (err or "").strip()
        except Exception:
            pass
        self._proc = None
        detail = f"; stderr: {captured}" if captured else ""
        raise BlackboxError(f"{reason} (command: {self.command}){detail}")

    def __call__(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.d,):
            raise InvalidParameterError(f"expected {self.d} coordinates")
        proc = self._ensure_process()
        request = " ".join(repr(float(v)) for v in x) + "\n"
        try:
            proc.stdin.write(request)
            proc.stdin.flush()
        except (BrokenPipeError, OSError):
            self._fail(proc, "black-box process closed its input")
        ready, _, _ = select.select([proc.stdout], [], [], self.timeout)
        if not ready:
            self._fail(proc, f"black-box reply timed out after {self.timeout:g}s")
        line = proc.stdout.readline()
        if line == "":
            self._fail(proc, "black-box process exited before replying")
        try:
            value = float(line.strip())
        except ValueError:
            self._fail(proc, f"non-numeric black-box reply {line.strip()!r}")
        if not math.isfinite(value):
            self._fail(proc, f"non-finite black-box reply {line.strip()!r}")
        return value

    def close(self):
        if self._proc is not None and self._proc.poll() is None:
            try:
                self._proc.stdin.close()
                self._proc.wait(timeout=5)
            except Exception:
                self._proc.kill()
        self._proc = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def external_benchmark(
    command: str, d: int, domain=None, timeout: float = 60.0
) -> tuple[Benchmark, ExternalBlackbox]:
    """Wrap an external command as a benchmark over the given box (unit by default)."""
    box = tuple((float(lo), float(hi)) for lo, hi in domain) if domain else _box(0, 1, d)
    if len(box) != d:
        raise InvalidParameterError(f"domain lists {len(box)} dims, expected {d}")
    blackbox = ExternalBlackbox(command, d, timeout)
    bench = Benchmark(f"external:{command}", d, box, blackbox, None, "min")
    return bench, blackbox
