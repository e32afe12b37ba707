"""Guaranteed bounds for polynomials from precomputed bounding tables.

The 1D combination splits a polynomial into its linear L2 projection plus
a fluctuation, prices each fluctuation coefficient against the table's
lower or upper box row depending on its sign, and reads off bounds at the
control nodes. Tensor products in 2D/3D run the same combination axis by
axis, carrying interval coefficients after the first sweep. A Bernstein
baseline, a sampling-plus-Newton oracle, subdivision, and an adaptive
refinement driver round out the toolbox.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from numpy.polynomial import chebyshev as _cheb

from .basis import (
    BasisSpec,
    basis_matrix,
    cheb_coeffs,
    gauss_legendre_rule,
    linear_coeffs,
    make_basis,
    FAMILIES,
)
from .boxopt import BoundingTable

__all__ = [
    "PolyCoeffs",
    "LinearPart",
    "NodeBounds",
    "BoundSummary",
    "CoeffsFormatError",
    "project_p1",
    "bound_1d",
    "bound_tensor",
    "bernstein_bounds",
    "brute_force_extrema",
    "subdivide",
    "bound_adaptive",
    "read_coeffs",
    "write_coeffs",
    "eval_on_grid",
    "last_op_count",
]


@dataclass(frozen=True)
class PolyCoeffs:
    """Tensor-product polynomial on [-1,1]^dim.

    The coefficient array has shape (N,)*dim with the x axis last, so the
    flat lexicographic order (x fastest) is the C-order ravel.
    """

    dim: int
    basis: BasisSpec
    u: np.ndarray

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValueError("dim must be 1, 2, or 3")
        N = self.basis.N
        arr = np.asarray(self.u, dtype=float)
        if arr.size != N**self.dim:
            raise ValueError(
                f"need {N}^{self.dim} coefficients, got {arr.size}"
            )
        arr = arr.reshape((N,) * self.dim).copy()
        if not np.all(np.isfinite(arr)):
            raise ValueError("coefficients must be finite")
        arr.flags.writeable = False
        object.__setattr__(self, "u", arr)

    def flat(self) -> np.ndarray:
        return self.u.ravel()


@dataclass(frozen=True)
class LinearPart:
    """Linear L2 projection a0 + a1*x of a 1D polynomial."""

    a0: float
    a1: float

    def __call__(self, x):
        return self.a0 + self.a1 * np.asarray(x)


@dataclass(frozen=True)
class NodeBounds:
    """Lower/upper bound values on the tensor grid of control nodes."""

    eta: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        up = np.asarray(self.upper, dtype=float)
        if lo.shape != up.shape:
            raise ValueError("lower/upper shape mismatch")
        if np.any(lo > up):
            raise ValueError("lower exceeds upper")
        for name, arr in (("eta", np.asarray(self.eta)), ("lower", lo), ("upper", up)):
            arr = arr.copy()
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def dim(self) -> int:
        return self.lower.ndim

    def gap(self) -> np.ndarray:
        return self.upper - self.lower

    def global_min(self) -> float:
        return float(self.lower.min())

    def global_max(self) -> float:
        return float(self.upper.max())


@dataclass(frozen=True)
class BoundSummary:
    global_min: float
    global_max: float
    levels_used: int
    nodes: NodeBounds | None = None
    converged: bool = True
    level_history: tuple = field(default_factory=tuple)


class CoeffsFormatError(ValueError):
    """Malformed coefficient file; the message names the offending record."""


# crude multiply-add tally of the latest bound_tensor call, for cost tests
_op_tally = {"count": 0}


def last_op_count() -> int:
    return _op_tally["count"]


def _quad_eval(basis: BasisSpec, n_quad: int):
    xg, wg = gauss_legendre_rule(n_quad)
    Phi = basis_matrix(basis, xg)
    return xg, wg, Phi


@lru_cache(maxsize=64)
def _p1_ops(basis: BasisSpec):
    """Precomputed projection vectors: coefficients -> (a0, a1) directly."""
    xg, wg, Phi = _quad_eval(basis, basis.p + 2)
    w0 = Phi.T @ (0.5 * wg)
    w1 = Phi.T @ (1.5 * wg * xg)
    e0 = linear_coeffs(basis, 1.0, 0.0)
    e1 = linear_coeffs(basis, 0.0, 1.0)
    return w0, w1, e0, e1


def _p1_batch(basis: BasisSpec, rows: np.ndarray):
    """Vectorized linear projection of stacked 1D coefficient rows.

    Returns (a0, a1, fluctuation rows). Quadrature with p+2 points is
    exact for the degree 2p+1 integrands involved.
    """
    w0, w1, e0, e1 = _p1_ops(basis)
    a0 = rows @ w0
    a1 = rows @ w1
    fluct = rows - np.outer(a0, e0) - np.outer(a1, e1)
    return a0, a1, fluct


def project_p1(coeffs: PolyCoeffs):
    """Split a 1D polynomial into its linear projection and fluctuation.

    The residual is L2-orthogonal to {1, x}; higher-dimensional use goes
    through bound_tensor which projects row-wise internally.
    """
    if coeffs.dim != 1:
        raise ValueError("project_p1 expects a 1D polynomial")
    a0, a1, fluct = _p1_batch(coeffs.basis, coeffs.u[None, :])
    return (
        LinearPart(float(a0[0]), float(a1[0])),
        PolyCoeffs(1, coeffs.basis, fluct[0]),
    )


def _bound_rows(basis: BasisSpec, rows: np.ndarray, table: BoundingTable):
    """Node bounds for stacked exact-coefficient rows: (B,N) -> (B,M)."""
    a0, a1, fluct = _p1_batch(basis, rows)
    eta = table.eta()
    lin = a0[:, None] + np.outer(a1, eta)
    pos = np.maximum(fluct, 0.0)
    neg = np.minimum(fluct, 0.0)
    lower = lin + pos @ table.q_lower + neg @ table.q_upper
    upper = lin + pos @ table.q_upper + neg @ table.q_lower
    return lower, upper


# scratch space for the four-product kernel; reallocating these 0.5 MB
# temporaries every stage of a long DG run costs more than the arithmetic
_scratch: dict = {}


def _scratch_for(shape):
    buf = _scratch.get(shape)
    if buf is None:
        buf = [np.empty(shape) for _ in range(6)]
        _scratch[shape] = buf
        if len(_scratch) > 8:
            _scratch.pop(next(iter(_scratch)))
    return buf


def _bound_interval_rows(basis: BasisSpec, lo_rows, hi_rows, table: BoundingTable):
    """Node bounds when each coefficient is only known to an interval.

    Projection uses the interval midpoints; the radius re-enters through
    the four products {lo*qlo, lo*qup, hi*qlo, hi*qup} per coefficient,
    the only sound combination for interval data.
    """
    mid = 0.5 * (lo_rows + hi_rows)
    rad = 0.5 * (hi_rows - lo_rows)
    a0, a1, fluct = _p1_batch(basis, mid)
    eta = table.eta()
    lin = a0[:, None] + np.outer(a1, eta)
    wl = (fluct - rad)[:, :, None]
    wh = (fluct + rad)[:, :, None]
    ql = table.q_lower
    qu = table.q_upper
    p1, p2, p3, p4, lo_acc, up_acc = _scratch_for((lo_rows.shape[0],) + ql.shape)
    np.multiply(wl, ql, out=p1)
    np.multiply(wl, qu, out=p2)
    np.multiply(wh, ql, out=p3)
    np.multiply(wh, qu, out=p4)
    np.minimum(p1, p2, out=lo_acc)
    np.minimum(lo_acc, p3, out=lo_acc)
    np.minimum(lo_acc, p4, out=lo_acc)
    np.maximum(p1, p2, out=up_acc)
    np.maximum(up_acc, p3, out=up_acc)
    np.maximum(up_acc, p4, out=up_acc)
    lower = lin + lo_acc.sum(axis=1)
    upper = lin + up_acc.sum(axis=1)
    return lower, upper


def _check_table(coeffs: PolyCoeffs, table: BoundingTable) -> None:
    if table.basis != coeffs.basis:
        raise ValueError(
            f"table basis {table.basis.family} p={table.basis.p} does not "
            f"match polynomial basis {coeffs.basis.family} p={coeffs.basis.p}"
        )


def bound_1d(coeffs: PolyCoeffs, table: BoundingTable) -> NodeBounds:
    """Guaranteed bounds of a 1D polynomial at the table's control nodes."""
    _check_table(coeffs, table)
    if coeffs.dim != 1:
        raise ValueError("bound_1d expects dim 1; use bound_tensor")
    lower, upper = _bound_rows(coeffs.basis, coeffs.u[None, :], table)
    return NodeBounds(table.eta(), lower[0], upper[0])


def _batch_bounds_2d(basis: BasisSpec, U: np.ndarray, table: BoundingTable):
    """Node bounds for many 2D coefficient arrays at once.

    U has shape (..., N, N) with x last; returns (lower, upper) of shape
    (..., M, M). Same sweeps as bound_tensor, batched for throughput.
    """
    N, M = basis.N, table.nodes.M
    lead = U.shape[:-2]
    lo, up = _bound_rows(basis, U.reshape(-1, N), table)
    lo = np.swapaxes(lo.reshape(lead + (N, M)), -1, -2).reshape(-1, N)
    up = np.swapaxes(up.reshape(lead + (N, M)), -1, -2).reshape(-1, N)
    lo2, up2 = _bound_interval_rows(basis, lo, up, table)
    lower = np.swapaxes(lo2.reshape(lead + (M, M)), -1, -2)
    upper = np.swapaxes(up2.reshape(lead + (M, M)), -1, -2)
    return lower, upper


def bound_tensor(coeffs: PolyCoeffs, table: BoundingTable) -> NodeBounds:
    """Axis-by-axis bounds of a 2D/3D polynomial on the node tensor grid.

    The first sweep bounds every 1D coefficient slice along x exactly;
    later sweeps carry interval coefficients. Total work is
    O(N^d M + N M^d) multiply-adds, tracked in last_op_count().
    """
    _check_table(coeffs, table)
    if coeffs.dim == 1:
        return bound_1d(coeffs, table)
    if coeffs.dim not in (2, 3):
        raise ValueError("bound_tensor supports dim 2 and 3")
    basis = coeffs.basis
    N, M = basis.N, table.nodes.M
    eta = table.eta()

    ops = 0
    lo = coeffs.u
    hi = coeffs.u
    for sweep in range(coeffs.dim):
        lead = lo.shape[:-1]
        lo2 = lo.reshape(-1, N)
        hi2 = hi.reshape(-1, N)
        if sweep == 0:
            lower, upper = _bound_rows(basis, lo2, table)
        else:
            lower, upper = _bound_interval_rows(basis, lo2, hi2, table)
        ops += lo2.shape[0] * N * M
        lo = np.moveaxis(lower.reshape(lead + (M,)), -1, 0)
        hi = np.moveaxis(upper.reshape(lead + (M,)), -1, 0)
    _op_tally["count"] = ops
    return NodeBounds(eta, lo, hi)


def bernstein_bounds(coeffs: PolyCoeffs):
    """Extreme Bernstein coefficients; they enclose the polynomial range."""
    if coeffs.basis.p >= 10:
        warnings.warn(
            "Bernstein conversion is badly conditioned for p >= 10; "
            "bounds may carry noticeable rounding slack",
            RuntimeWarning,
            stacklevel=2,
        )
    from .basis import change_basis

    target = make_basis("bernstein", coeffs.basis.p)
    conv = change_basis(coeffs, target)
    return float(conv.u.min()), float(conv.u.max())


def _cheb_tensor(coeffs: PolyCoeffs) -> np.ndarray:
    """Chebyshev tensor coefficients, same axis layout as coeffs.u."""
    T = cheb_coeffs(coeffs.basis)
    C = coeffs.u
    for axis in range(coeffs.dim):
        C = np.moveaxis(np.tensordot(T, C, axes=([1], [axis])), 0, axis)
    return C


def eval_on_grid(coeffs: PolyCoeffs, axes) -> np.ndarray:
    """Evaluate on a tensor grid; axes are per-dimension 1D arrays (x first)."""
    axes = [np.asarray(a, dtype=float) for a in axes]
    if len(axes) != coeffs.dim:
        raise ValueError("one axis array per dimension")
    C = _cheb_tensor(coeffs)
    if coeffs.dim == 1:
        return _cheb.chebval(axes[0], C)
    if coeffs.dim == 2:
        return _cheb.chebgrid2d(axes[1], axes[0], C)
    return _cheb.chebgrid3d(axes[2], axes[1], axes[0], C)


def _eval_point(C: np.ndarray, pt: np.ndarray) -> float:
    # contract trailing-dimension axes first: C axes are (z, y, x)
    v = C
    for coord in pt[::-1]:
        v = _cheb.chebval(coord, v)
    return float(v)


def _newton_polish(C, grads, hessians, x0, sign, grid_val, iters=20):
    """Local stationary-point polish; falls back to the grid value.

    sign=+1 seeks a maximum, -1 a minimum; only accepts a polished point
    inside the cell that actually improves on the grid candidate.
    """
    d = x0.size
    x = x0.copy()
    for _ in range(iters):
        g = np.array([_eval_point(grads[k], x) for k in range(d)])
        H = np.empty((d, d))
        for k in range(d):
            for l in range(k, d):
                H[k, l] = H[l, k] = _eval_point(hessians[k][l], x)
        try:
            step = np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            return grid_val, x0
        x_new = np.clip(x - step, -1.0, 1.0)
        if not np.all(np.isfinite(x_new)):
            return grid_val, x0
        if np.max(np.abs(x_new - x)) < 1e-14:
            x = x_new
            break
        x = x_new
    val = _eval_point(C, x)
    if sign * (val - grid_val) > 0.0:
        return val, x
    return grid_val, x0


def brute_force_extrema(coeffs: PolyCoeffs, samples_per_dim: int):
    """Approximate range by dense sampling plus Newton polish.

    Always an under-approximation: the returned minimum is >= the true
    minimum and the maximum <=. Good enough as a reference oracle.
    """
    if samples_per_dim < 2:
        raise ValueError("need at least 2 samples per dimension")
    d = coeffs.dim
    axis = np.linspace(-1.0, 1.0, samples_per_dim)
    vals = eval_on_grid(coeffs, [axis] * d)
    if coeffs.basis.p < 2:
        # multilinear: extremes sit at the corner samples already
        return float(vals.min()), float(vals.max())

    C = _cheb_tensor(coeffs)
    grads = [_cheb.chebder(C, axis=d - 1 - k) for k in range(d)]
    hessians = [
        {l: _cheb.chebder(grads[k], axis=d - 1 - l) for l in range(k, d)}
        for k in range(d)
    ]
    for k in range(d):
        for l in range(k):
            hessians[k][l] = hessians[l][k]

    def candidates(best_fn, n_top=3):
        flat = vals.ravel()
        order = np.argsort(flat)
        idx = order[:n_top] if best_fn is min else order[-n_top:]
        out = []
        for j in idx:
            multi = np.unravel_index(j, vals.shape)
            # multi is (z, y, x); points are (x, y, z)
            out.append(np.array([axis[multi[d - 1 - k]] for k in range(d)]))
        return out

    vmin = float(vals.min())
    for x0 in candidates(min):
        val, _ = _newton_polish(C, grads, hessians, x0, -1.0, _eval_point(C, x0))
        vmin = min(vmin, val)
    vmax = float(vals.max())
    for x0 in candidates(max):
        val, _ = _newton_polish(C, grads, hessians, x0, +1.0, _eval_point(C, x0))
        vmax = max(vmax, val)
    return vmin, vmax


def subdivide(coeffs: PolyCoeffs, subcell) -> PolyCoeffs:
    """Restrict to an axis-aligned subcell, remapped to the reference cell.

    subcell is one (a, b) pair per dimension, x first; a single pair is
    accepted in 1D. The restriction is representation-exact up to
    conditioning of the interpolation.
    """
    d = coeffs.dim
    cell = np.asarray(subcell, dtype=float)
    if cell.ndim == 1:
        cell = cell[None, :]
    if cell.shape != (d, 2):
        raise ValueError(f"subcell must be {d} (a, b) pairs")
    a, b = cell[:, 0], cell[:, 1]
    if np.any(b <= a):
        raise ValueError("empty subcell")
    if np.any(a < -1.0 - 1e-12) or np.any(b > 1.0 + 1e-12):
        raise ValueError("subcell must lie inside [-1, 1] per axis")

    N = coeffs.basis.N
    # interpolate at mapped Chebyshev points, then solve back per axis
    t = -np.cos(np.pi * (2 * np.arange(N) + 1) / (2 * N))
    mapped = [0.5 * (ai + bi) + 0.5 * (bi - ai) * t for ai, bi in zip(a, b)]
    vals = eval_on_grid(coeffs, mapped)
    V = basis_matrix(coeffs.basis, t)
    U = vals
    for axis in range(d):
        U = np.moveaxis(U, axis, 0)
        U = np.linalg.solve(V, U.reshape(N, -1)).reshape(U.shape)
        U = np.moveaxis(U, 0, axis)
    return PolyCoeffs(d, coeffs.basis, U)


def _as_ladder(tables) -> list[BoundingTable]:
    if isinstance(tables, BoundingTable):
        return [tables]
    ladder = list(tables)
    if not ladder:
        raise ValueError("need at least one table")
    if any(not isinstance(t, BoundingTable) for t in ladder):
        raise TypeError("tables must be BoundingTable instances")
    ladder.sort(key=lambda t: t.nodes.M)
    return ladder


def _spans_to_refine(nb: NodeBounds, tol: float):
    """Index boxes of node spans whose corner gap exceeds tol."""
    gap = nb.gap()
    d = gap.ndim
    M = gap.shape[0]
    bad = gap > tol
    spans = []
    for multi in np.ndindex(*([M - 1] * d)):
        corners = tuple(slice(i, i + 2) for i in multi)
        if np.any(bad[corners]):
            spans.append(multi)
    return spans


def bound_adaptive(coeffs: PolyCoeffs, tables, tol: float,
                   max_levels: int = 10,
                   strategy: str = "hybrid") -> BoundSummary:
    """Refine until every control node has gap <= tol, or levels run out.

    increase-M walks up the table ladder; subdivide recurses into the
    spans between adjacent control nodes that still fail; hybrid does the
    former until the ladder is exhausted, then the latter. Global bounds
    envelope every leaf cell, so they stay sound even when unconverged.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if strategy not in ("increase-M", "subdivide", "hybrid"):
        raise ValueError(f"unknown strategy {strategy!r}")
    ladder = _as_ladder(tables)

    def bound_with(c: PolyCoeffs, table: BoundingTable) -> NodeBounds:
        return bound_1d(c, table) if c.dim == 1 else bound_tensor(c, table)

    root = bound_with(coeffs, ladder[0])
    d = coeffs.dim
    eta0 = ladder[0].eta()

    # queue entries: (coefficients, table index on the ladder)
    queue = [(coeffs, 0, root)]
    gmin, gmax = np.inf, -np.inf
    history = []
    converged = True
    level = 0
    while queue:
        worst = max(float(nb.gap().max()) for _, _, nb in queue)
        history.append({"level": level, "cells": len(queue), "worst_gap": worst})
        if level >= max_levels:
            for _, _, nb in queue:
                gmin = min(gmin, nb.global_min())
                gmax = max(gmax, nb.global_max())
            converged = worst <= tol
            break
        next_queue = []
        for cell, ti, nb in queue:
            if float(nb.gap().max()) <= tol:
                gmin = min(gmin, nb.global_min())
                gmax = max(gmax, nb.global_max())
                continue
            grow_m = strategy == "increase-M" or (
                strategy == "hybrid" and ti + 1 < len(ladder)
            )
            if grow_m:
                if ti + 1 < len(ladder):
                    nb2 = bound_with(cell, ladder[ti + 1])
                    next_queue.append((cell, ti + 1, nb2))
                else:
                    # ladder exhausted; this cell cannot improve further
                    gmin = min(gmin, nb.global_min())
                    gmax = max(gmax, nb.global_max())
                    converged = False
                continue
            eta_t = ladder[ti].eta()
            for multi in _spans_to_refine(nb, tol):
                # multi indexes (z, y, x); subcell wants x first
                cellspec = [
                    (eta_t[multi[d - 1 - k]], eta_t[multi[d - 1 - k] + 1])
                    for k in range(d)
                ]
                child = subdivide(cell, cellspec)
                nb2 = bound_with(child, ladder[ti])
                next_queue.append((child, ti, nb2))
            # spans that already meet tol contribute their node values
            gap = nb.gap()
            ok = gap <= tol
            if np.any(ok):
                gmin = min(gmin, float(nb.lower[ok].min()))
                gmax = max(gmax, float(nb.upper[ok].max()))
        queue = next_queue
        if next_queue:
            level += 1

    if not np.isfinite(gmin):
        gmin, gmax = root.global_min(), root.global_max()
    return BoundSummary(
        global_min=float(gmin),
        global_max=float(gmax),
        levels_used=level,
        nodes=root,
        converged=converged,
        level_history=tuple(history),
    )


def write_coeffs(coeffs: PolyCoeffs, path) -> None:
    lines = [
        "polybound-coeffs v1",
        f"dim={coeffs.dim} family={coeffs.basis.family} p={coeffs.basis.p}",
        " ".join(f"{v:.17g}" for v in coeffs.flat()),
    ]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_coeffs(path) -> PolyCoeffs:
    raw = Path(path).read_text(encoding="utf-8").splitlines()
    if not raw or raw[0].strip() != "polybound-coeffs v1":
        raise CoeffsFormatError(f"{path}: missing 'polybound-coeffs v1' header")
    if len(raw) < 3:
        raise CoeffsFormatError(f"{path}: truncated, expected 3 lines")
    fields = {}
    for tok in raw[1].split():
        if "=" not in tok:
            raise CoeffsFormatError(f"{path}: bad metadata token {tok!r}")
        k, v = tok.split("=", 1)
        fields[k] = v
    for key in ("dim", "family", "p"):
        if key not in fields:
            raise CoeffsFormatError(f"{path}: metadata missing {key!r}")
    try:
        d = int(fields["dim"])
        p = int(fields["p"])
    except ValueError as err:
        raise CoeffsFormatError(f"{path}: {err}") from None
    if fields["family"] not in FAMILIES:
        raise CoeffsFormatError(f"{path}: unknown family {fields['family']!r}")
    basis = make_basis(fields["family"], p)
    parts = raw[2].split()
    want = basis.N**d
    if len(parts) != want:
        raise CoeffsFormatError(
            f"{path}: coefficient line: expected {want} values, got {len(parts)}"
        )
    try:
        u = np.array([float(v) for v in parts])
    except ValueError as err:
        raise CoeffsFormatError(f"{path}: coefficient line: {err}") from None
    return PolyCoeffs(d, basis, u)
