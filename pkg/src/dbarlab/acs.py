"""Explicit almost complex structure on a bidisc and its graph reduction.

The target domain is the product of the open disc of radius 2 (first
complex coordinate) with the open disc of radius 1/10 (second coordinate),
viewed as R^4 with coordinates (x1, y1, x2, y2).  The structure matrix
couples the two factors through a single real entry

    lambda(z2) = -2 |z2|^(1/2),

which is only Hoelder-1/2 in z2, and that low regularity is the whole
point of the construction.  A map Z = (Z1, Z2) of a disc into the target
is structure-holomorphic when dZ/dy = J(Z) dZ/dx at every node; the first
two rows of that system say Z1 is holomorphic, and for graph maps
Z(z) = (z, f(z)) the last two rows collapse to the scalar equation
df/dzbar = |f|^(1/2) handled by the dbar module.

reduction_identity checks that collapse with identical stencils on both
sides, so it holds to rounding for ANY masked field, solved or not.  The
residual of the full 4 x 4 system and the scalar defect are then the same
number by algebra, and any daylight between them is a bug, not
discretization error.  lambda_val deliberately evaluates through
np.sqrt(np.abs(.)), the same floating-point path the dbar right-hand side
uses, to keep that comparison at rounding level.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .grid import (
    ComplexField,
    GridSpec,
    RealField,
    central_dx,
    central_dy,
    erode4,
    load_complex_field,
    save_field,
    sup_norm,
    wirtinger_dzbar,
)

Z1_RADIUS = 2.0
Z2_RADIUS = 0.1
# open-set membership: a point must sit below each radius by at least this
MEMBERSHIP_SLACK = 1e-12
HOELDER_EXPONENT = 0.5

# coupling entries live at rows 3 and 4 (positions [2,1] and [3,0])
_TEMPLATE = np.array(
    [
        [0.0, -1.0, 0.0, 0.0],
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, -1.0],
        [0.0, 0.0, 1.0, 0.0],
    ]
)


def lambda_val(z2):
    """Coupling entry -2 |z2|^(1/2); vectorized over arrays of points."""
    with np.errstate(invalid="ignore"):
        out = -2.0 * np.sqrt(np.abs(z2))
    if np.ndim(out) == 0:
        return float(out)
    return out


def in_target(z1: complex, z2: complex) -> bool:
    """Strict membership in the open product domain, with rounding slack."""
    return bool(
        abs(z1) < Z1_RADIUS - MEMBERSHIP_SLACK
        and abs(z2) < Z2_RADIUS - MEMBERSHIP_SLACK
    )


@dataclass(frozen=True)
class JMatrix:
    """The 4 x 4 structure matrix at one point of the target.

    entries is frozen and always matches the fixed template with the
    coupling value written into rows 3 and 4; hoelder_exponent records how
    the coupling varies with the second coordinate (metadata, not used in
    arithmetic).
    """

    entries: np.ndarray
    lam: float
    hoelder_exponent: float = HOELDER_EXPONENT

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=np.float64)
        if e.shape != (4, 4):
            raise ValueError("entries must be a 4 x 4 matrix")
        expected = _TEMPLATE.copy()
        expected[2, 1] = self.lam
        expected[3, 0] = self.lam
        if not np.array_equal(e, expected):
            raise ValueError("entries do not match the structure template")
        e = e.copy()
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)
        object.__setattr__(self, "lam", float(self.lam))

    def squared_deviation(self) -> float:
        """Max entry of |J @ J + I|; zero in exact arithmetic."""
        return float(np.max(np.abs(self.entries @ self.entries + np.eye(4))))


def j_at(p) -> JMatrix:
    """Structure matrix at p = (z1, z2); rejects points outside the target."""
    z1, z2 = complex(p[0]), complex(p[1])
    if not in_target(z1, z2):
        raise ValueError(f"point ({z1}, {z2}) lies outside the open target domain")
    lam = lambda_val(z2)
    e = _TEMPLATE.copy()
    e[2, 1] = lam
    e[3, 0] = lam
    return JMatrix(e, lam)


def j_squared_deviation(z1, z2, chunk: int = 200_000) -> float:
    """Max |J^2 + I| entry over batches of sample points.

    Vectorized so a million-point sweep stays cheap; every sample must lie
    in the target.
    """
    z1 = np.asarray(z1, dtype=np.complex128).ravel()
    z2 = np.asarray(z2, dtype=np.complex128).ravel()
    if z1.shape != z2.shape:
        raise ValueError("component sample arrays must have matching shapes")
    if np.any(np.abs(z1) >= Z1_RADIUS - MEMBERSHIP_SLACK) or np.any(
        np.abs(z2) >= Z2_RADIUS - MEMBERSHIP_SLACK
    ):
        raise ValueError("sample points must lie inside the open target domain")
    eye = np.eye(4)
    worst = 0.0
    for start in range(0, z1.size, chunk):
        lam = lambda_val(z2[start : start + chunk])
        mats = np.broadcast_to(_TEMPLATE, (lam.size, 4, 4)).copy()
        mats[:, 2, 1] = lam
        mats[:, 3, 0] = lam
        dev = np.einsum("mij,mjk->mik", mats, mats) + eye
        worst = max(worst, float(np.max(np.abs(dev))))
    return worst


@dataclass(frozen=True)
class DiscMap:
    """A two-component map of a disc grid into the target domain.

    Both components share one grid and one mask, and the sampled range
    must stay strictly inside the open product (the coupling entry is
    defined everywhere, but the target is the open bidisc, so escape is a
    hard error rather than a warning).
    """

    grid: GridSpec
    z1: ComplexField
    z2: ComplexField

    def __post_init__(self):
        if self.z1.spec != self.grid or self.z2.spec != self.grid:
            raise ValueError("component fields must live on the declared grid")
        if not np.array_equal(self.z1.mask, self.z2.mask):
            raise ValueError("component masks differ")
        m = self.z1.mask
        if np.max(np.abs(self.z1.values[m])) >= Z1_RADIUS - MEMBERSHIP_SLACK:
            raise ValueError("first component leaves the radius-2 disc")
        if np.max(np.abs(self.z2.values[m])) >= Z2_RADIUS - MEMBERSHIP_SLACK:
            raise ValueError("second component leaves the radius-1/10 disc")


def graph_map(f: ComplexField) -> DiscMap:
    """The graph z -> (z, f(z)) as a DiscMap; requires sup |f| < 1/10."""
    s = sup_norm(f)
    if s >= Z2_RADIUS - MEMBERSHIP_SLACK:
        raise ValueError(f"graph leaves the target: sup |f| = {s:.6g} >= 1/10")
    ident = ComplexField(f.spec, f.spec.nodes(), f.margin, f.mask)
    return DiscMap(f.spec, ident, f)


def jholo_residual(zmap: DiscMap):
    """Defect of dZ/dy = J(Z) dZ/dx, componentwise.

    Returns ((r1, r2, r3, r4), sup) where the four RealFields are the rows
    of dZ/dy - J(Z(z)) dZ/dx on the common stencil mask and sup is the max
    Euclidean norm of that 4-vector.  Rows 1 and 2 do not involve the
    coupling; they vanish to stencil accuracy exactly when the first
    component is holomorphic, and identically when it is linear.
    """
    z1, z2 = zmap.z1, zmap.z2
    d1x = central_dx(z1)
    d1y = central_dy(z1)
    d2x = central_dx(z2)
    d2y = central_dy(z2)
    lam = lambda_val(z2.values)
    mask = d1x.mask & erode4(z1.mask)

    r1 = d1y.values.real + d1x.values.imag
    r2 = d1y.values.imag - d1x.values.real
    r3 = d2y.values.real - lam * d1x.values.imag + d2x.values.imag
    r4 = d2y.values.imag - lam * d1x.values.real - d2x.values.real

    fields = tuple(
        RealField(zmap.grid, np.where(mask, r, 0.0), d1x.margin, mask)
        for r in (r1, r2, r3, r4)
    )
    norm = np.sqrt(r1 * r1 + r2 * r2 + r3 * r3 + r4 * r4)
    sup = float(np.max(norm[mask]))
    return fields, sup


def reduction_identity(f: ComplexField) -> float:
    """Max gap between the graph residual and the scalar dbar defect.

    For the graph of f the system rows 3 and 4 are, by algebra, the real
    and imaginary parts of 2 (df/dzbar - |f|^(1/2)) up to sign, so
    2 |df/dzbar - |f|^(1/2)| and the Euclidean norm of (r3, r4) agree to
    rounding when both sides ride the same centered stencils.  Returns the
    max pointwise discrepancy; anything above 1e-10 means the reduction is
    miswired.
    """
    (r1, r2, r3, r4), _ = jholo_residual(graph_map(f))
    dzb = wirtinger_dzbar(f)
    with np.errstate(invalid="ignore"):
        s = np.sqrt(np.abs(f.values))
    left = np.abs(2.0 * dzb.values - 2.0 * s)
    right = np.hypot(r3.values, r4.values)
    m = r3.mask & dzb.mask
    return float(np.max(np.abs(left - right)[m]))


def save_discmap(zmap: DiscMap, directory, stem: str) -> dict:
    """Write both components plus a JSON manifest; returns the paths."""
    os.makedirs(directory, exist_ok=True)
    z1_name = f"{stem}.z1.f64"
    z2_name = f"{stem}.z2.f64"
    save_field(zmap.z1, os.path.join(directory, z1_name))
    save_field(zmap.z2, os.path.join(directory, z2_name))
    manifest = {
        "kind": "discmap",
        "radius": zmap.grid.radius,
        "resolution": zmap.grid.resolution,
        "margin": zmap.z1.margin,
        "z1_file": z1_name,
        "z2_file": z2_name,
    }
    path = os.path.join(directory, f"{stem}.json")
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return {"manifest": path, "z1": os.path.join(directory, z1_name), "z2": os.path.join(directory, z2_name)}


def load_discmap(manifest_path) -> DiscMap:
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    if manifest.get("kind") != "discmap":
        raise ValueError("not a disc-map manifest")
    base = os.path.dirname(os.path.abspath(manifest_path))
    z1 = load_complex_field(os.path.join(base, manifest["z1_file"]))
    z2 = load_complex_field(os.path.join(base, manifest["z2_file"]))
    return DiscMap(z1.spec, z1, z2)
