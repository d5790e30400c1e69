"""Uncertain autoregressive plant and parameter realization strategies.

The plant is the scalar recursion

    y[k+1] = a1[k]*y[k] + a2[k]*y[k-1] + ... + an[k]*y[k-n+1] + u[k]

with y[k] = 0 for k < 0 and each coefficient ai[k] drawn (possibly per
step) from the box [ai* - eps_i, ai* + eps_i].  The controllable
canonical state-space form is equivalent; the simulator works on the
recursion directly.  The product of the nominal eigenvalues equals an*,
which is what all the rate/loss bounds depend on.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

ParamContext = Callable[[Sequence[float]], float]


@dataclass(frozen=True)
class UncertainPlant:
    n: int
    a_star: tuple[float, ...]
    eps: tuple[float, ...]
    y0_bound: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "a_star", tuple(float(a) for a in self.a_star))
        object.__setattr__(self, "eps", tuple(float(e) for e in self.eps))
        if self.n < 1:
            raise ValueError(f"plant order must be >= 1, got {self.n}")
        if len(self.a_star) != self.n or len(self.eps) != self.n:
            raise ValueError(
                f"need {self.n} nominal coefficients and radii, got "
                f"{len(self.a_star)} and {len(self.eps)}"
            )
        if any(e < 0.0 for e in self.eps):
            raise ValueError(f"uncertainty radii must be nonnegative: {self.eps}")
        if abs(self.a_star[-1]) - self.eps[-1] <= 1.0:
            raise ValueError(
                "plant violates |an*| - eps_n > 1 "
                f"(got |{self.a_star[-1]}| - {self.eps[-1]})"
            )
        if self.y0_bound <= 0.0:
            raise ValueError(f"initial output bound must be positive, got {self.y0_bound}")

    def box(self, i: int) -> tuple[float, float]:
        """Uncertainty interval of coefficient i (0-based)."""
        return (self.a_star[i] - self.eps[i], self.a_star[i] + self.eps[i])


def lambda_pi(plant: UncertainPlant) -> float:
    """Product of the nominal eigenvalues; equals the last coefficient an*."""
    return plant.a_star[-1]


def step_unchecked(history: Sequence[float], u: float, params: Sequence[float]) -> float:
    """Plant recursion without box validation; history is oldest-first."""
    acc = u
    n = len(params)
    for i in range(n):
        acc += params[i] * history[n - 1 - i]
    return acc


def step(
    plant: UncertainPlant,
    history: Sequence[float],
    u: float,
    params: Sequence[float],
) -> float:
    """One plant step: y_next = sum_i params[i] * history[-i] + u.

    history holds the last n outputs oldest-first, i.e.
    (y[k-n+1], ..., y[k]); params[i] is the realized coefficient a_{i+1}
    multiplying y[k-i].
    """
    if len(history) != plant.n or len(params) != plant.n:
        raise ValueError("history and params must both have length n")
    for i, (a, e, v) in enumerate(zip(plant.a_star, plant.eps, params)):
        if not (a - e <= v <= a + e):
            raise ValueError(f"parameter {i} = {v} outside [{a - e}, {a + e}]")
    return step_unchecked(history, u, params)


@dataclass
class ParamStrategy:
    """How the simulator realizes time-varying coefficients inside the box.

    kinds:
      nominal            ai* every step
      fixed_vertex       ai* + signs[i]*eps_i every step
      iid_uniform        independent uniform draw in each box, seeded
      greedy_adversarial per coordinate, the box endpoint that maximizes
                         the magnitude of the candidate next output

    One instance per simulation trial; iid_uniform carries its own
    generator so trials with equal seeds replay bit-identically.
    """

    kind: str = "nominal"
    seed: int = 0
    signs: tuple[int, ...] | None = None
    _rng: random.Random = field(init=False, repr=False, compare=False)

    KINDS = ("nominal", "fixed_vertex", "iid_uniform", "greedy_adversarial")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown strategy kind {self.kind!r}; pick one of {self.KINDS}")
        if self.kind == "fixed_vertex" and self.signs is None:
            raise ValueError("fixed_vertex strategy needs a sign pattern")
        self._rng = random.Random(self.seed)

    def with_seed(self, seed: int) -> "ParamStrategy":
        """Fresh instance for a new trial."""
        return ParamStrategy(kind=self.kind, seed=seed, signs=self.signs)


def realize_params(
    plant: UncertainPlant,
    strategy: ParamStrategy,
    context: ParamContext | None = None,
) -> tuple[float, ...]:
    """Draw one coefficient vector according to the strategy.

    context maps a full parameter vector to the candidate next output and
    is required for greedy_adversarial, which sweeps the coordinates once,
    keeping for each the endpoint that gives the larger |next output|
    (starting from the nominal vector, so the result never does worse than
    nominal).
    """
    kind = strategy.kind
    if kind == "nominal":
        return plant.a_star
    if kind == "fixed_vertex":
        signs = strategy.signs
        if signs is None or len(signs) != plant.n:
            raise ValueError(f"sign pattern must have length {plant.n}")
        return tuple(a + s * e for a, s, e in zip(plant.a_star, signs, plant.eps))
    if kind == "iid_uniform":
        rng = strategy._rng
        return tuple(
            a + e * (2.0 * rng.random() - 1.0) for a, e in zip(plant.a_star, plant.eps)
        )
    # greedy_adversarial
    if context is None:
        raise ValueError("greedy_adversarial strategy needs a context function")
    current = list(plant.a_star)
    for i in range(plant.n):
        if plant.eps[i] == 0.0:
            continue
        lo, hi = plant.box(i)
        current[i] = lo
        y_lo = abs(context(current))
        current[i] = hi
        y_hi = abs(context(current))
        current[i] = hi if y_hi >= y_lo else lo
    return tuple(current)


def companion_matrix(params: Sequence[float]) -> np.ndarray:
    """Controllable-canonical A matrix for one realized coefficient vector."""
    n = len(params)
    m = np.zeros((n, n))
    for i in range(n - 1):
        m[i, i + 1] = 1.0
    # last row carries (an, a(n-1), ..., a1)
    m[n - 1, :] = list(reversed(params))
    return m


@dataclass(frozen=True)
class InstabilityDiagnostic:
    params: tuple[float, ...]
    min_eigenvalue_modulus: float


def check_unstable_assumption(
    plant: UncertainPlant, grid: int = 3, max_reports: int = 100
) -> list[InstabilityDiagnostic]:
    """Sampled check that every eigenvalue stays outside the unit circle.

    Sweeps all box vertices plus a per-coordinate grid and reports any
    sampled coefficient vector whose companion matrix has an eigenvalue
    with modulus <= 1.  Warn-only by design: the analysis assumes the
    property, it does not require verifying it, and the hard
    |an*| - eps_n > 1 check already ran at construction.
    """
    if grid < 1:
        raise ValueError(f"grid must be >= 1, got {grid}")
    axes = []
    for i in range(plant.n):
        lo, hi = plant.box(i)
        pts = {lo, hi}
        if grid > 1:
            pts.update(np.linspace(lo, hi, grid).tolist())
        axes.append(sorted(pts))
    out: list[InstabilityDiagnostic] = []
    idx = [0] * plant.n
    while True:
        params = tuple(axes[i][idx[i]] for i in range(plant.n))
        eig = np.linalg.eigvals(companion_matrix(params))
        worst = float(np.min(np.abs(eig)))
        if worst <= 1.0:
            out.append(InstabilityDiagnostic(params, worst))
            if len(out) >= max_reports:
                return out
        for i in range(plant.n):
            idx[i] += 1
            if idx[i] < len(axes[i]):
                break
            idx[i] = 0
        else:
            return out
