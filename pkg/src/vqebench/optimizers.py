"""Derivative-free optimizers with a shared trace format.

One *iteration* is one NFT sweep over all parameters, one SPSA update, or one
Nelder-Mead step; traces record one entry per iteration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .rng import as_generator

ITERATION_UNITS = {
    "nft": "one sweep over all parameters",
    "spsa": "one simultaneous-perturbation update",
    "nelder-mead": "one simplex step",
}


class OptimizerConfigError(ValueError):
    pass


class CostEvaluator:
    """Counts calls to a cost function of a parameter vector."""

    def __init__(self, fn: Callable[[np.ndarray], float]):
        self.fn = fn
        self.count = 0

    def __call__(self, params: Sequence[float]) -> float:
        self.count += 1
        return float(self.fn(np.asarray(params, dtype=float)))


@dataclass
class OptimizerTrace:
    params: list[np.ndarray] = field(default_factory=list)
    costs: list[float] = field(default_factory=list)
    evaluations: list[int] = field(default_factory=list)

    def record(self, params, cost: float, evaluations: int) -> None:
        self.params.append(np.array(params, dtype=float))
        self.costs.append(float(cost))
        self.evaluations.append(int(evaluations))

    def __len__(self) -> int:
        return len(self.costs)

    @property
    def final_cost(self) -> float:
        return self.costs[-1]

    @property
    def final_params(self) -> np.ndarray:
        return self.params[-1]


# ---------------------------------------------------------------------------
# NFT


def sinusoid_minimum(z0: float, z_plus: float, z_minus: float) -> tuple[float, float]:
    """Fit a + b cos(d) + c sin(d) through d = 0, +pi/2, -pi/2.

    Returns (shift d* to the minimum, predicted minimum value).
    """
    a = 0.5 * (z_plus + z_minus)
    b = z0 - a
    c = 0.5 * (z_plus - z_minus)
    shift = math.atan2(-c, -b)
    return shift, a - math.hypot(b, c)


def nft_minimize(
    evaluate: CostEvaluator,
    x0: Sequence[float],
    iterations: int,
    reset_interval: int | None = 32,
) -> OptimizerTrace:
    """Sequential minimal optimization for costs sinusoidal in each parameter.

    Each parameter update costs two evaluations (at +-pi/2); the current cost is
    carried over from the previous update's predicted minimum and re-measured
    every ``reset_interval`` updates (``None`` never re-measures after the start).
    """
    x = np.array(x0, dtype=float)
    trace = OptimizerTrace()
    if iterations <= 0:
        return trace
    if reset_interval is not None and reset_interval < 1:
        raise OptimizerConfigError("reset_interval must be positive")
    current = None
    updates = 0
    for _ in range(iterations):
        for j in range(len(x)):
            if current is None or (reset_interval is not None and updates % reset_interval == 0):
                current = evaluate(x)
            step = np.zeros_like(x)
            step[j] = math.pi / 2
            z_plus = evaluate(x + step)
            z_minus = evaluate(x - step)
            shift, current = sinusoid_minimum(current, z_plus, z_minus)
            x[j] = math.remainder(x[j] + shift, 2 * math.pi)
            updates += 1
        trace.record(x, current, evaluate.count)
    return trace


# ---------------------------------------------------------------------------
# SPSA


@dataclass(frozen=True)
class SPSAGains:
    a: float = 0.2
    c: float = 0.15
    A: float = 10.0
    alpha: float = 0.602
    gamma: float = 0.101

    def __post_init__(self):
        for name in ("a", "c", "alpha", "gamma"):
            if getattr(self, name) <= 0:
                raise OptimizerConfigError(f"SPSA gain {name} must be positive")
        if self.A < 0:
            raise OptimizerConfigError("SPSA stability constant A must be non-negative")


def spsa_minimize(
    evaluate: CostEvaluator,
    x0: Sequence[float],
    iterations: int,
    gains: SPSAGains | None = None,
    rng_seed: int | np.random.Generator | None = 0,
) -> OptimizerTrace:
    """Simultaneous-perturbation updates; each iteration records the mean of its two evaluations."""
    gains = gains or SPSAGains()
    rng = as_generator(rng_seed)
    x = np.array(x0, dtype=float)
    trace = OptimizerTrace()
    for k in range(iterations):
        ak = gains.a / (gains.A + k + 1) ** gains.alpha
        ck = gains.c / (k + 1) ** gains.gamma
        delta = rng.choice([-1.0, 1.0], size=len(x))
        f_plus = evaluate(x + ck * delta)
        f_minus = evaluate(x - ck * delta)
        grad = (f_plus - f_minus) / (2 * ck) / delta
        x = x - ak * grad
        trace.record(x, 0.5 * (f_plus + f_minus), evaluate.count)
    return trace


# ---------------------------------------------------------------------------
# Nelder-Mead


@dataclass(frozen=True)
class SimplexCoefficients:
    reflect: float = 1.0
    expand: float = 2.0
    contract: float = 0.5
    shrink: float = 0.5
    initial_step: float = 0.25


def nelder_mead_minimize(
    evaluate: CostEvaluator,
    x0: Sequence[float],
    iterations: int,
    coefficients: SimplexCoefficients | None = None,
) -> OptimizerTrace:
    """Nelder-Mead simplex; the start simplex offsets x0 by ``initial_step`` along each axis."""
    co = coefficients or SimplexCoefficients()
    x0 = np.array(x0, dtype=float)
    n = len(x0)
    simplex = [x0] + [x0 + co.initial_step * np.eye(n)[i] for i in range(n)]
    values = [evaluate(v) for v in simplex]
    trace = OptimizerTrace()
    for _ in range(iterations):
        order = np.argsort(values, kind="stable")
        simplex = [simplex[i] for i in order]
        values = [values[i] for i in order]
        centroid = np.mean(simplex[:-1], axis=0)
        worst = simplex[-1]

        reflected = centroid + co.reflect * (centroid - worst)
        f_r = evaluate(reflected)
        if f_r < values[0]:
            expanded = centroid + co.expand * (reflected - centroid)
            f_e = evaluate(expanded)
            if f_e < f_r:
                simplex[-1], values[-1] = expanded, f_e
            else:
                simplex[-1], values[-1] = reflected, f_r
        elif f_r < values[-2]:
            simplex[-1], values[-1] = reflected, f_r
        else:
            if f_r < values[-1]:
                contracted = centroid + co.contract * (reflected - centroid)
            else:
                contracted = centroid + co.contract * (worst - centroid)
            f_c = evaluate(contracted)
            if f_c < min(f_r, values[-1]):
                simplex[-1], values[-1] = contracted, f_c
            else:
                best = simplex[0]
                for i in range(1, n + 1):
                    simplex[i] = best + co.shrink * (simplex[i] - best)
                    values[i] = evaluate(simplex[i])
        i_best = int(np.argmin(values))
        trace.record(simplex[i_best], values[i_best], evaluate.count)
    return trace


# ---------------------------------------------------------------------------


OPTIMIZERS = ("nft", "spsa", "nelder-mead")


def run_optimizer(
    name: str,
    evaluate: CostEvaluator,
    x0: Sequence[float],
    iterations: int,
    options: dict | None = None,
    rng: np.random.Generator | None = None,
) -> OptimizerTrace:
    options = dict(options or {})
    if name == "nft":
        reset = options.pop("reset_interval", 32)
        if reset in (0, "inf", "none"):
            reset = None
        _reject_unknown(name, options)
        return nft_minimize(evaluate, x0, iterations, reset_interval=reset)
    if name == "spsa":
        gains = SPSAGains(**options)
        return spsa_minimize(evaluate, x0, iterations, gains, rng_seed=rng)
    if name in ("nelder-mead", "nelder_mead"):
        return nelder_mead_minimize(evaluate, x0, iterations, SimplexCoefficients(**options))
    raise OptimizerConfigError(f"unknown optimizer {name!r}; choose from {', '.join(OPTIMIZERS)}")


def _reject_unknown(name: str, options: dict) -> None:
    if options:
        raise OptimizerConfigError(f"unknown {name} options {sorted(options)}")
