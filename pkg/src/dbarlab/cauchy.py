"""Solid Cauchy transform on the grid: a discrete right inverse of d/dzbar.

f(z) = (1/pi) * sum over masked nodes zeta of g(zeta) / (z - zeta) * h^2,
with the singular node zeta = z contributing zero: the kernel 1/w is odd
under w -> -w, so its principal-value integral over the centered square cell
vanishes, and dropping the cell is second-order consistent.

Two independent evaluation paths are kept alive deliberately.  The direct
path is the literal O(N^4) double sum.  The fast path observes that the sum
is a discrete convolution with the kernel sampled on signed node offsets and
evaluates it by zero-padded FFT (circular length >= 2N-1 per axis, so no
wrap-around reaches the output window).  Both paths must agree to 1e-10
relative; tests and the acceptance suite enforce that.
"""

from __future__ import annotations

import numpy as np
from scipy import fft as sfft

from .grid import ComplexField

AGREEMENT_RTOL = 1e-10


class CauchyTransform:
    """FFT evaluator with the padded kernel transform cached for reuse.

    Bound to one (grid, mask) pair; the Picard solver applies it once per
    iteration, so caching the kernel FFT halves the transform cost.
    """

    def __init__(self, spec, mask: np.ndarray):
        self.spec = spec
        self.mask = np.asarray(mask, dtype=bool)
        n = spec.resolution
        h = spec.spacing
        m = sfft.next_fast_len(2 * n - 1)
        idx = np.arange(m)
        # wrapped signed offsets; slots that no data pair can reach stay zero
        off = np.where(idx <= n - 1, idx, idx - m)
        live = np.abs(off) <= n - 1
        ox = (off * h)[np.newaxis, :]
        oy = (off * h)[:, np.newaxis]
        d = ox + 1j * oy
        with np.errstate(divide="ignore", invalid="ignore"):
            k = np.where(d == 0, 0.0 + 0.0j, 1.0 / d)
        k = np.where(live[:, np.newaxis] & live[np.newaxis, :], k, 0.0 + 0.0j)
        self._m = m
        self._scale = h * h / np.pi
        self._kernel_fft = sfft.fft2(k)

    def apply_values(self, values: np.ndarray) -> np.ndarray:
        n = self.spec.resolution
        a = np.zeros((self._m, self._m), dtype=np.complex128)
        a[:n, :n] = np.where(self.mask, values, 0) * self._scale
        conv = sfft.ifft2(sfft.fft2(a) * self._kernel_fft)
        return np.ascontiguousarray(conv[:n, :n])

    def apply(self, g: ComplexField) -> ComplexField:
        return ComplexField(g.spec, self.apply_values(g.values), g.margin, g.mask)


def _direct_values(spec, mask: np.ndarray, values: np.ndarray) -> np.ndarray:
    n = spec.resolution
    zz = spec.nodes()
    w = np.where(mask, values, 0) * (spec.spacing ** 2 / np.pi)
    wf = w.ravel()
    zf = zz.ravel()
    out = np.empty(n * n, dtype=np.complex128)
    chunk = max(1, (1 << 22) // (n * n))  # keep the difference table around 64 MB
    for lo in range(0, n * n, chunk):
        hi = min(lo + chunk, n * n)
        d = zf[lo:hi, np.newaxis] - zf[np.newaxis, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = wf[np.newaxis, :] / d
        t[d == 0] = 0.0
        out[lo:hi] = t.sum(axis=1)
    return out.reshape(n, n)


def cauchy_transform(g: ComplexField, method: str = "fft") -> ComplexField:
    """Apply the transform along the requested path ("fft" or "direct").

    The result keeps g's grid, margin, and mask; its values are defined at
    every node (the kernel sum is finite everywhere) and satisfy
    wirtinger_dzbar(result) ~ g on the mask interior to first order.
    """
    vals = np.asarray(g.values)
    if method == "fft":
        return CauchyTransform(g.spec, g.mask).apply(g)
    if method == "direct":
        out = _direct_values(g.spec, g.mask, vals)
        return ComplexField(g.spec, out, g.margin, g.mask)
    raise ValueError(f"unknown method {method!r}; expected 'fft' or 'direct'")


def adjust_value_at_zero(f: ComplexField, b: complex) -> ComplexField:
    """Add the constant b - f(0); the shift is holomorphic, so d/dzbar is untouched."""
    c = f.spec.center
    if not f.mask[c, c]:
        raise ValueError("origin node is not masked; nothing to anchor")
    b = complex(b)
    shift = b - f.at_origin()
    vals = f.values + shift
    vals[c, c] = b  # pin exactly; the residual rounding of f0 + (b - f0) is below 1 ulp
    return f.like(vals)
