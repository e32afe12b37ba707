"""Validity certification for high-order quadrilateral meshes.

An element is valid when the Jacobian determinant of its reference-to-
physical map is positive everywhere. det J is itself polynomial, so the
node-bound machinery applies: positive lower bounds at all control nodes
certify validity, a negative upper bound anywhere certifies inversion,
and the undecided strip in between gets subdivided until the tolerance
or level budget runs out.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .basis import basis_deriv_matrix, basis_matrix, gauss_lobatto_nodes, make_basis
from .bounder import PolyCoeffs, _as_ladder, bound_tensor, bernstein_bounds, subdivide

__all__ = [
    "CurvedMesh",
    "ElementReport",
    "ValidityReport",
    "MeshFormatError",
    "detj_coeffs",
    "classify_element",
    "check_mesh",
    "read_mesh",
    "write_mesh",
    "uniform_mesh",
    "perturb_mesh",
    "mirror_element",
    "refinement_ladder",
]

_MAX_GEOMETRIC_ORDER = 8


@dataclass(frozen=True)
class CurvedMesh:
    """2D quad mesh of geometric order p.

    Each element is a ((p+1)^2, 2) array of node coordinates in
    lexicographic reference order, xi varying fastest. Validity is
    element-local, so no connectivity is stored.
    """

    p: int
    elements: tuple

    def __post_init__(self):
        if not 1 <= self.p <= _MAX_GEOMETRIC_ORDER:
            raise ValueError(f"geometric order must be 1..{_MAX_GEOMETRIC_ORDER}")
        want = (self.p + 1) ** 2
        elems = []
        for k, e in enumerate(self.elements):
            arr = np.asarray(e, dtype=float)
            if arr.shape != (want, 2):
                raise ValueError(
                    f"element {k}: expected shape ({want}, 2), got {arr.shape}"
                )
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"element {k}: non-finite coordinates")
            arr = arr.copy()
            arr.flags.writeable = False
            elems.append(arr)
        object.__setattr__(self, "elements", tuple(elems))

    @property
    def n_elements(self) -> int:
        return len(self.elements)


@dataclass(frozen=True)
class ElementReport:
    index: int
    status: str  # valid | invalid | indeterminate
    min_detj_interval: tuple
    levels_used: int
    policy_invalid: bool = False  # indeterminate counted invalid by policy


@dataclass(frozen=True)
class ValidityReport:
    elements: tuple

    @property
    def all_valid(self) -> bool:
        return all(e.status == "valid" for e in self.elements)

    def counts(self) -> dict:
        out = {"valid": 0, "invalid": 0, "indeterminate": 0}
        for e in self.elements:
            out[e.status] += 1
        return out


class MeshFormatError(ValueError):
    """Malformed mesh file; the message names the offending record."""


def detj_coeffs(element, p: int) -> PolyCoeffs:
    """Jacobian determinant of one element as a nodal polynomial.

    The product of two order-p derivative fields has per-dimension order
    2p-1 at most, so interpolating det J at the (2p)^2 Gauss-Lobatto
    nodes of that target space is representation-exact.
    """
    if p > _MAX_GEOMETRIC_ORDER:
        raise ValueError(f"geometric order {p} exceeds the supported {_MAX_GEOMETRIC_ORDER}")
    nodes = np.asarray(element, dtype=float)
    want = (p + 1) ** 2
    if nodes.shape != (want, 2):
        raise ValueError(f"element must have shape ({want}, 2)")
    geom = make_basis("lobatto-nodal", p)
    X = nodes[:, 0].reshape(p + 1, p + 1)  # axes (eta, xi)
    Y = nodes[:, 1].reshape(p + 1, p + 1)

    target = make_basis("lobatto-nodal", 2 * p - 1)
    t = np.asarray(target.nodes)
    V = basis_matrix(geom, t)
    D = basis_deriv_matrix(geom, t)

    x_xi = V @ X @ D.T
    x_eta = D @ X @ V.T
    y_xi = V @ Y @ D.T
    y_eta = D @ Y @ V.T
    det = x_xi * y_eta - x_eta * y_xi
    return PolyCoeffs(2, target, det)


def _spans(M: int):
    for i in range(M - 1):
        for j in range(M - 1):
            yield i, j


def classify_element(element, tables, tol: float, max_levels: int = 10,
                     index: int = 0) -> ElementReport:
    """Decide valid / invalid / indeterminate for one element.

    Per generation: any control node with upper bound < 0 proves
    inversion; spans whose corner lower bounds are all positive are
    certified; the remaining straddling spans are re-interpolated and
    re-bounded, until they fall below tol (indeterminate by policy) or
    the level budget is spent. Successive generations first step up
    the supplied table ladder (tighter boxes at the same cost class),
    then subdivide with the finest table.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    ladder = _as_ladder(tables)
    p = int(round(np.sqrt(np.asarray(element, dtype=float).shape[0]))) - 1
    det = detj_coeffs(element, p)

    cells = [det]
    certified_lo = np.inf
    up_min = np.inf
    exhausted = False
    level = 0
    while True:
        # climb the M ladder first, then keep subdividing at its top
        table = ladder[min(level, len(ladder) - 1)]
        eta = table.eta()
        bnds = [bound_tensor(c, table) for c in cells]
        gen_lo = min(nb.lower.min() for nb in bnds)
        up_min = min(up_min, min(nb.upper.min() for nb in bnds))
        if any(nb.upper.min() < 0 for nb in bnds):
            lo = min(certified_lo, gen_lo)
            return ElementReport(index, "invalid", (float(lo), float(up_min)), level)
        can_refine = level < max_levels
        next_cells = []
        for cell, nb in zip(cells, bnds):
            if nb.lower.min() > 0:
                certified_lo = min(certified_lo, float(nb.lower.min()))
                continue
            gap = nb.upper - nb.lower
            M = nb.lower.shape[0]
            for i, j in _spans(M):
                corner_lo = nb.lower[i : i + 2, j : j + 2]
                if corner_lo.min() > 0:
                    certified_lo = min(certified_lo, float(corner_lo.min()))
                    continue
                if can_refine and gap[i : i + 2, j : j + 2].max() > tol:
                    # span index (i, j) is (eta, xi); subcell wants xi first
                    sub = [(eta[j], eta[j + 1]), (eta[i], eta[i + 1])]
                    next_cells.append(subdivide(cell, sub))
                else:
                    exhausted = True
                    certified_lo = min(certified_lo, float(corner_lo.min()))
        if not next_cells:
            if exhausted:
                return ElementReport(
                    index, "indeterminate",
                    (float(certified_lo), float(up_min)),
                    level, policy_invalid=True,
                )
            return ElementReport(
                index, "valid", (float(certified_lo), float(up_min)), level
            )
        cells = next_cells
        level += 1


def check_mesh(mesh: CurvedMesh, tables, tol: float,
               max_levels: int = 10) -> ValidityReport:
    """Classify every element independently."""
    reports = [
        classify_element(e, tables, tol, max_levels, index=k)
        for k, e in enumerate(mesh.elements)
    ]
    return ValidityReport(tuple(reports))


def refinement_ladder(coeffs: PolyCoeffs, table, levels: int):
    """Global lower bounds per uniform-quadrant refinement level.

    Returns one dict per level with the node-bound lower, the Bernstein
    lower, and whether each method has already proven a negative value.
    Used to compare tightness of the two bounding approaches.
    """
    rows = []
    cells = [coeffs]
    for lv in range(levels + 1):
        t_lo, t_hi = np.inf, np.inf
        b_lo, b_hi = np.inf, np.inf
        for c in cells:
            nb = bound_tensor(c, table)
            t_lo = min(t_lo, float(nb.lower.min()))
            t_hi = min(t_hi, float(nb.upper.min()))
            bl, bu = bernstein_bounds(c)
            b_lo = min(b_lo, bl)
            b_hi = min(b_hi, bu)
        rows.append({
            "level": lv,
            "table_lower": t_lo,
            "bernstein_lower": b_lo,
            "table_proves_negative": t_hi < 0,
            "bernstein_proves_negative": b_hi < 0,
        })
        if lv == levels:
            break
        halves = [(-1.0, 0.0), (0.0, 1.0)]
        cells = [
            subdivide(c, [hx, hy]) for c in cells for hy in halves for hx in halves
        ]
    return rows


def uniform_mesh(nx: int, ny: int, p: int, lo=(0.0, 0.0), hi=(1.0, 1.0)) -> CurvedMesh:
    """Axis-aligned nx-by-ny quad mesh with Gauss-Lobatto node placement."""
    if nx < 1 or ny < 1:
        raise ValueError("need at least one element per direction")
    t = gauss_lobatto_nodes(p + 1)
    hx = (hi[0] - lo[0]) / nx
    hy = (hi[1] - lo[1]) / ny
    elements = []
    for ey in range(ny):
        for ex in range(nx):
            cx = lo[0] + hx * (ex + 0.5 * (t + 1.0))
            cy = lo[1] + hy * (ey + 0.5 * (t + 1.0))
            XX, YY = np.meshgrid(cx, cy)  # rows = eta, cols = xi
            elements.append(np.column_stack([XX.ravel(), YY.ravel()]))
    return CurvedMesh(p, tuple(elements))


def perturb_mesh(mesh: CurvedMesh, amplitude: float, seed: int = 0) -> CurvedMesh:
    """Randomly displace non-corner nodes by up to amplitude*h per axis.

    Corners stay put so the element footprint is preserved; interior and
    edge nodes move, which is what bends the geometry.
    """
    rng = np.random.default_rng(seed)
    p = mesh.p
    n1 = p + 1
    corner = np.zeros((n1, n1), dtype=bool)
    corner[[0, 0, -1, -1], [0, -1, 0, -1]] = True
    keep = corner.ravel()
    out = []
    for e in mesh.elements:
        h = min(np.ptp(e[:, 0]), np.ptp(e[:, 1]))
        d = rng.uniform(-amplitude * h, amplitude * h, size=e.shape)
        d[keep] = 0.0
        out.append(e + d)
    return CurvedMesh(p, tuple(out))


def mirror_element(element) -> np.ndarray:
    """Reverse the xi direction; det J changes sign everywhere."""
    nodes = np.asarray(element, dtype=float)
    n1 = int(round(np.sqrt(nodes.shape[0])))
    return nodes.reshape(n1, n1, 2)[:, ::-1, :].reshape(-1, 2)


def write_mesh(mesh: CurvedMesh, path) -> None:
    lines = [
        "polybound-mesh v1",
        f"dim=2 p={mesh.p} elements={mesh.n_elements}",
    ]
    for e in mesh.elements:
        lines.append(" ".join(f"{v:.17g}" for v in e.ravel()))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_mesh(path) -> CurvedMesh:
    raw = Path(path).read_text(encoding="utf-8").splitlines()
    if not raw or raw[0].strip() != "polybound-mesh v1":
        raise MeshFormatError(f"{path}: missing 'polybound-mesh v1' header")
    if len(raw) < 2:
        raise MeshFormatError(f"{path}: truncated, missing metadata line")
    fields = {}
    for tok in raw[1].split():
        if "=" not in tok:
            raise MeshFormatError(f"{path}: bad metadata token {tok!r}")
        k, v = tok.split("=", 1)
        fields[k] = v
    for key in ("dim", "p", "elements"):
        if key not in fields:
            raise MeshFormatError(f"{path}: metadata missing {key!r}")
    try:
        dim = int(fields["dim"])
        p = int(fields["p"])
        n = int(fields["elements"])
    except ValueError as err:
        raise MeshFormatError(f"{path}: {err}") from None
    if dim != 2:
        raise MeshFormatError(f"{path}: only dim=2 meshes are supported")
    want = 2 * (p + 1) ** 2
    body = raw[2:]
    if len(body) < n:
        raise MeshFormatError(
            f"{path}: expected {n} element lines, found {len(body)}"
        )
    elements = []
    for k in range(n):
        parts = body[k].split()
        if len(parts) != want:
            raise MeshFormatError(
                f"{path}: element {k}: expected {want} values, got {len(parts)}"
            )
        try:
            flat = np.array([float(v) for v in parts])
        except ValueError as err:
            raise MeshFormatError(f"{path}: element {k}: {err}") from None
        elements.append(flat.reshape(-1, 2))
    return CurvedMesh(p, tuple(elements))
