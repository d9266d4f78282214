"""Truncated power-series inversion of near-identity holomorphic maps.

An origin-preserving holomorphic map with nonvanishing linear term can be
inverted degree by degree: there is a unique origin-preserving series phi
with Z1(phi(z)) = z through any truncation degree.  This is the
reparameterization that turns a holomorphic first component into the
identity so the second component becomes an honest graph.

Series here are finite coefficient vectors a_1..a_D with a_0 = 0 pinned.
No disc-of-convergence bookkeeping is attempted: the downstream use is
qualitative (the inverse of a map close to the identity is close to the
identity), and composition residuals at the default degree sit far below
the geometric tail of any coefficient bound we exercise.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import ceil, log2

import numpy as np

DEFAULT_DEGREE = 32


def _as_poly(series: "PowerSeries", degree: int) -> np.ndarray:
    """Coefficient vector indexed by degree 0..degree, constant term zero."""
    out = np.zeros(degree + 1, dtype=np.complex128)
    take = min(len(series.coefficients), degree)
    out[1 : take + 1] = series.coefficients[:take]
    return out


def _trunc_mul(p: np.ndarray, q: np.ndarray, degree: int) -> np.ndarray:
    return np.convolve(p, q)[: degree + 1]


def _reciprocal(p: np.ndarray, degree: int) -> np.ndarray:
    """Series reciprocal by Newton doubling; needs p[0] != 0."""
    if p[0] == 0:
        raise ZeroDivisionError("series with vanishing constant term")
    r = np.zeros(degree + 1, dtype=np.complex128)
    r[0] = 1.0 / p[0]
    correct = 1
    while correct <= degree:
        # r <- r (2 - p r), valid degree doubles each pass
        pr = _trunc_mul(p, r, degree)
        pr = -pr
        pr[0] += 2.0
        r = _trunc_mul(r, pr, degree)
        correct *= 2
    return r


@dataclass(frozen=True)
class PowerSeries:
    """Origin-preserving truncated series: coefficients are a_1..a_D."""

    coefficients: tuple

    def __post_init__(self):
        coeffs = tuple(complex(c) for c in self.coefficients)
        if len(coeffs) == 0:
            raise ValueError("a series needs at least the linear coefficient")
        if not all(np.isfinite(c.real) and np.isfinite(c.imag) for c in coeffs):
            raise ValueError("non-finite coefficient")
        object.__setattr__(self, "coefficients", coeffs)

    @classmethod
    def identity(cls, degree: int = DEFAULT_DEGREE) -> "PowerSeries":
        return cls((1.0,) + (0.0,) * (degree - 1))

    @property
    def degree(self) -> int:
        return len(self.coefficients)

    def linear_coefficient(self) -> complex:
        return self.coefficients[0]

    def __call__(self, z):
        """Evaluate by Horner; fine inside the empirical disc of validity."""
        acc = np.zeros_like(np.asarray(z, dtype=np.complex128))
        for c in reversed(self.coefficients):
            acc = acc * z + c
        return acc * z

    def to_json_dict(self) -> dict:
        return {
            "kind": "power_series",
            "coefficients": [[c.real, c.imag] for c in self.coefficients],
        }

    @classmethod
    def from_json_dict(cls, blob: dict) -> "PowerSeries":
        if blob.get("kind") != "power_series":
            raise ValueError("not a power-series record")
        return cls(tuple(complex(re, im) for re, im in blob["coefficients"]))


def compose(f: PowerSeries, g: PowerSeries, degree: int = DEFAULT_DEGREE) -> PowerSeries:
    """Truncated composition f(g(z)) through the given degree.

    Horner over truncated polynomial arithmetic: since g has no constant
    term, the degree-k coefficient of the result never sees coefficients
    of f beyond degree k, so truncating every product is lossless.
    """
    if degree < 1:
        raise ValueError("degree must be >= 1")
    gp = _as_poly(g, degree)
    acc = np.zeros(degree + 1, dtype=np.complex128)
    for c in reversed(f.coefficients[:degree]):
        acc = _trunc_mul(acc, gp, degree)
        acc[0] += c
    out = _trunc_mul(acc, gp, degree)
    return PowerSeries(tuple(out[1:]))


def invert_near_identity(z1: PowerSeries, degree: int = DEFAULT_DEGREE) -> PowerSeries:
    """Series phi with z1(phi(w)) = w through the given degree.

    Newton iteration phi <- phi - (z1(phi) - id) / z1'(phi); the number of
    correct coefficients doubles each step, so ceil(log2(degree)) + 1
    passes suffice.  The linear coefficient of z1 must be nonzero.
    """
    if degree < 1:
        raise ValueError("degree must be >= 1")
    a1 = z1.linear_coefficient()
    if a1 == 0:
        raise ValueError("linear coefficient vanishes: jet is not invertible")
    zp = _as_poly(z1, degree)
    dz = np.zeros(degree + 1, dtype=np.complex128)
    dz[:-1] = zp[1:] * np.arange(1, degree + 1)

    phi = np.zeros(degree + 1, dtype=np.complex128)
    phi[1] = 1.0 / a1
    ident = np.zeros(degree + 1, dtype=np.complex128)
    ident[1] = 1.0

    for _ in range(ceil(log2(degree)) + 1 if degree > 1 else 1):
        z_of_phi = _compose_poly(zp, phi, degree)
        dz_of_phi = _compose_poly(dz, phi, degree)
        err = z_of_phi - ident
        phi = phi - _trunc_mul(err, _reciprocal(dz_of_phi, degree), degree)
        phi[0] = 0.0
    return PowerSeries(tuple(phi[1:]))


def _compose_poly(p: np.ndarray, q: np.ndarray, degree: int) -> np.ndarray:
    """p(q(x)) truncated; q may have any constant term only if p is linear,
    so callers keep q origin-preserving."""
    acc = np.zeros(degree + 1, dtype=np.complex128)
    for c in p[::-1]:
        acc = _trunc_mul(acc, q, degree)
        acc[0] += c
    return acc
