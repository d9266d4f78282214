"""One-dimensional analogue g' = |g|^(1/2) on [-1, 1].

Everything about the planar equation has a scalar shadow here: a strictly
positive initial value forces quadratic growth (g(1) exceeds 1/4 whenever
g(0) > 0), while from a zero value the equation branches into a whole
family of solutions that stay identically zero on an interval of any
length before lifting off.  The closed forms make the module an oracle
for the PDE-side expectations rather than a consumer of them.

rk4_integrate applies the textbook fourth-order scheme to the literal
right-hand side, no smoothing at g = 0.  Started exactly at zero every
stage evaluates to zero, so the scheme selects the identically-zero
member of the family; that selection is reported output, not an error,
mirroring how the planar solver treats a zero anchor.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import sqrt

import numpy as np


@dataclass(frozen=True)
class OdeTrajectory:
    """Sampled solution curve; xs strictly increasing, values finite."""

    xs: np.ndarray
    gs: np.ndarray
    g0: float
    method: str

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=np.float64)
        gs = np.asarray(self.gs, dtype=np.float64)
        if xs.ndim != 1 or xs.shape != gs.shape:
            raise ValueError("xs and gs must be matching 1-d arrays")
        if xs.size < 2:
            raise ValueError("a trajectory needs at least two samples")
        if not np.all(np.diff(xs) > 0):
            raise ValueError("xs must be strictly increasing")
        if not (np.isfinite(xs).all() and np.isfinite(gs).all()):
            raise ValueError("non-finite trajectory data")
        xs.setflags(write=False)
        gs.setflags(write=False)
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "gs", gs)
        object.__setattr__(self, "g0", float(self.g0))

    def value_at_end(self) -> float:
        return float(self.gs[-1])

    def to_csv(self, path) -> str:
        with open(path, "w", encoding="ascii") as fh:
            fh.write("x,g\n")
            for x, g in zip(self.xs, self.gs):
                fh.write(f"{float(x)!r},{float(g)!r}\n")
        return str(path)


def exact_forward(g0: float, x: float) -> float:
    """The forward solution (x/2 + sqrt(g0))^2; unique branch for g0 > 0."""
    g0 = float(g0)
    x = float(x)
    if g0 < 0:
        raise ValueError("initial value must be >= 0")
    if x < 0:
        raise ValueError("forward evaluation needs x >= 0")
    root = x / 2.0 + sqrt(g0)
    return root * root


def rk4_integrate(g0: float, steps: int = 1000) -> OdeTrajectory:
    """Classical fourth-order march of g' = |g|^(1/2) across [0, 1]."""
    if steps < 10:
        raise ValueError("steps must be >= 10")
    g0 = float(g0)
    h = 1.0 / steps
    xs = np.linspace(0.0, 1.0, steps + 1)
    gs = np.empty(steps + 1)
    gs[0] = g0
    g = g0

    def rhs(v: float) -> float:
        return sqrt(abs(v))

    for i in range(steps):
        k1 = rhs(g)
        k2 = rhs(g + 0.5 * h * k1)
        k3 = rhs(g + 0.5 * h * k2)
        k4 = rhs(g + h * k3)
        g = g + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        gs[i + 1] = g
    return OdeTrajectory(xs, gs, g0, "rk4")


def nonuniq_family(c: float, x):
    """Member g_c: zero up to x = c, then ((x - c)/2)^2; solves the ODE.

    Vectorized in x.  Every member has g_c(0) = 0 for c >= 0, so the
    family witnesses non-uniqueness from a vanishing initial value.
    """
    c = float(c)
    if c < 0:
        raise ValueError("transition point must be >= 0")
    x = np.asarray(x, dtype=np.float64)
    t = np.maximum(x - c, 0.0) / 2.0
    out = t * t
    if out.ndim == 0:
        return float(out)
    return out


def family_trajectory(c: float, samples: int = 2001) -> OdeTrajectory:
    """nonuniq_family(c) sampled uniformly on [-1, 1]."""
    if samples < 2:
        raise ValueError("samples must be >= 2")
    xs = np.linspace(-1.0, 1.0, samples)
    return OdeTrajectory(xs, nonuniq_family(c, xs), 0.0, f"family({c!r})")


@dataclass(frozen=True)
class LowerBoundResult:
    holds: bool
    slack: float
    g_at_one: float


def lower_bound_check(g0: float) -> LowerBoundResult:
    """Check g(1) > 1/4 for the forward solution from g0 > 0.

    The closed form gives slack g(1) - 1/4 = sqrt(g0) + g0, strictly
    positive for every positive initial value.
    """
    g0 = float(g0)
    if g0 <= 0:
        raise ValueError("the bound concerns strictly positive initial values")
    g1 = exact_forward(g0, 1.0)
    slack = g1 - 0.25
    return LowerBoundResult(slack > 0, slack, g1)
