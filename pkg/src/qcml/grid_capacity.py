"""Discrete modulus of connecting families via Dirichlet-energy minimization.

A masked uniform grid carries the 5-point discrete Laplace problem with
u = 0 on Source nodes, u = 1 on Sink nodes, and zero flux on the remaining
boundary (half-weighted boundary edges, equivalent to mirror ghost cells).
The minimized energy sum c_e (u_a - u_b)^2 is the modulus estimate; a
Richardson extrapolation across h and h/2 supplies the certified bracket.

Hand-built admissible densities from the counterexample chains are exposed
as exact analytic integrals so the tracked constants stay grid-free.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import cg

from .conditional_modulus import METHOD_DISCRETE, ModulusBracket
from .errors import DomainError, SolveError

LABEL_FREE = 0
LABEL_SOURCE = 1
LABEL_SINK = 2
LABEL_INSULATED = 3


@dataclass
class GridDomain:
    """Masked uniform grid with labeled boundary nodes.

    ``cell_mask[iy, ix]`` marks active cells; ``node_label[iy, ix]`` tags the
    grid nodes (corners of cells).  ``regenerate`` rebuilds the domain from
    its analytic shape at another resolution; raw-mask domains refine by
    pixel doubling instead.
    """

    spacing: float
    cell_mask: np.ndarray
    node_label: np.ndarray
    regenerate: Callable[[int], "GridDomain"] | None = field(default=None, repr=False)
    name: str = "custom"

    def __post_init__(self):
        self.cell_mask = np.asarray(self.cell_mask, dtype=bool)
        self.node_label = np.asarray(self.node_label, dtype=np.int8)
        ny, nx = self.cell_mask.shape
        if self.node_label.shape != (ny + 1, nx + 1):
            raise DomainError("node_label must have cell_mask shape plus one")
        if not (self.node_label == LABEL_SOURCE).any() or not (
            self.node_label == LABEL_SINK
        ).any():
            raise DomainError("source and sink node sets must be nonempty")
        if not self._connected():
            raise DomainError("masked region must be 4-connected")

    def _connected(self) -> bool:
        mask = self.cell_mask
        if not mask.any():
            return False
        seen = np.zeros_like(mask)
        stack = [tuple(np.argwhere(mask)[0])]
        seen[stack[0]] = True
        while stack:
            y, x = stack.pop()
            for dy, dx in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                yy, xx = y + dy, x + dx
                if 0 <= yy < mask.shape[0] and 0 <= xx < mask.shape[1]:
                    if mask[yy, xx] and not seen[yy, xx]:
                        seen[yy, xx] = True
                        stack.append((yy, xx))
        return bool(seen.sum() == mask.sum())

    @property
    def n_cells(self) -> tuple[int, int]:
        return self.cell_mask.shape

    def refined(self, factor: int = 2) -> "GridDomain":
        if self.regenerate is not None:
            return self.regenerate(self.cell_mask.shape[1] * factor)
        mask = np.kron(self.cell_mask, np.ones((factor, factor), dtype=bool))
        ny, nx = mask.shape
        label = np.zeros((ny + 1, nx + 1), dtype=np.int8)
        label[::factor, ::factor] = self.node_label
        # spread labels onto inserted boundary nodes between same-labeled parents
        for axis in (0, 1):
            src = label.copy()
            for k in range(1, factor):
                sl_lo = [slice(None)] * 2
                sl_hi = [slice(None)] * 2
                sl_mid = [slice(None)] * 2
                sl_lo[axis] = slice(0, -factor, factor)
                sl_hi[axis] = slice(factor, None, factor)
                sl_mid[axis] = slice(k, None, factor)
                same = (src[tuple(sl_lo)] == src[tuple(sl_hi)]) & (src[tuple(sl_lo)] > 0)
                view = label[tuple(sl_mid)]
                lim = min(view.shape[axis], same.shape[axis])
                idx = [slice(None)] * 2
                idx[axis] = slice(0, lim)
                view[tuple(idx)] = np.where(
                    same[tuple(idx)], src[tuple(sl_lo)][tuple(idx)], view[tuple(idx)]
                )
        return GridDomain(self.spacing / factor, mask, label, None, self.name)


def square_domain(n: int, aspect: int = 1, name: str = "square") -> GridDomain:
    """aspect x 1 rectangle, Source/Sink on the two short (vertical) sides."""
    nx, ny = aspect * n, n
    mask = np.ones((ny, nx), dtype=bool)
    label = np.zeros((ny + 1, nx + 1), dtype=np.int8)
    label[:, 0] = LABEL_SOURCE
    label[:, -1] = LABEL_SINK
    label[0, 1:-1] = LABEL_INSULATED
    label[-1, 1:-1] = LABEL_INSULATED
    return GridDomain(
        1.0 / n, mask, label, lambda m: square_domain(m, aspect, name), name
    )


def annulus_domain(r_in: float, r_out: float, n: int) -> GridDomain:
    """Annulus {r_in < |z| < r_out}, Source on the inner circle, Sink outer."""
    if not (0 < r_in < r_out):
        raise DomainError("annulus needs 0 < r_in < r_out")
    h = 2.0 * r_out / n
    centers = (np.arange(n) + 0.5) * h - r_out
    cx, cy = np.meshgrid(centers, centers)
    rc = np.hypot(cx, cy)
    mask = (rc >= r_in) & (rc <= r_out)
    nodes = np.arange(n + 1) * h - r_out
    gx, gy = np.meshgrid(nodes, nodes)
    rn = np.hypot(gx, gy)
    label = np.zeros((n + 1, n + 1), dtype=np.int8)
    label[rn <= r_in] = LABEL_SOURCE
    label[rn >= r_out] = LABEL_SINK
    return GridDomain(
        h, mask, label, lambda m: annulus_domain(r_in, r_out, m), "annulus"
    )


def _energy(domain: GridDomain, weight: np.ndarray | None) -> float:
    """Minimize sum c_e (u_a - u_b)^2 with Dirichlet data on Source/Sink."""
    mask = domain.cell_mask
    ny, nx = mask.shape
    n_nodes = (ny + 1) * (nx + 1)

    def nid(iy, ix):
        return iy * (nx + 1) + ix

    cy, cx = np.nonzero(mask)
    w_cell = np.ones(len(cy)) if weight is None else np.asarray(weight)[cy, cx]
    if np.any(w_cell < 1.0 - 1e-12):
        raise DomainError("weight field must satisfy omega >= 1")
    half = 0.5 * w_cell
    rows, cols, vals = [], [], []
    # horizontal edges: bottom and top of each active cell
    for dy in (0, 1):
        a = nid(cy + dy, cx)
        b = nid(cy + dy, cx + 1)
        rows.append(a)
        cols.append(b)
        vals.append(half)
    # vertical edges: left and right of each active cell
    for dx in (0, 1):
        a = nid(cy, cx + dx)
        b = nid(cy + 1, cx + dx)
        rows.append(a)
        cols.append(b)
        vals.append(half)
    a = np.concatenate(rows)
    b = np.concatenate(cols)
    c = np.concatenate(vals)
    # graph Laplacian
    ij = np.concatenate([a, b, a, b])
    ji = np.concatenate([b, a, a, b])
    vv = np.concatenate([-c, -c, c, c])
    L = sparse.coo_matrix((vv, (ij, ji)), shape=(n_nodes, n_nodes)).tocsr()

    labels = domain.node_label.ravel()
    touched = np.zeros(n_nodes, dtype=bool)
    touched[a] = True
    touched[b] = True
    dirichlet = touched & ((labels == LABEL_SOURCE) | (labels == LABEL_SINK))
    free = touched & ~dirichlet
    u = np.zeros(n_nodes)
    u[labels == LABEL_SINK] = 1.0
    if free.any():
        A = L[free][:, free]
        rhs = -L[free][:, dirichlet] @ u[dirichlet]
        diag = A.diagonal()
        diag[diag <= 0] = 1.0
        M = sparse.diags(1.0 / diag)
        sol, info = cg(A, rhs, rtol=1e-12, atol=1e-14, maxiter=20000, M=M)
        if info != 0:
            raise SolveError(f"conjugate gradient failed to reach residual (info={info})")
        res = np.linalg.norm(A @ sol - rhs)
        scale = max(np.linalg.norm(rhs), 1e-30)
        if res / scale > 1e-9:
            raise SolveError(f"residual {res/scale:g} above tolerance")
        u[free] = sol
    du = u[a] - u[b]
    return float(np.sum(c * du * du))


def capacity(domain: GridDomain) -> ModulusBracket:
    """Modulus of the Source-to-Sink family with a Richardson bracket.

    The energy is first-order accurate in h for staircase boundaries, so the
    h and h/2 solves extrapolate linearly; the bracket width is twice the
    level difference.
    """
    return weighted_capacity(domain, None)


def weighted_capacity(domain: GridDomain, weight) -> ModulusBracket:
    """Weighted modulus min sum omega |grad u|^2; ``weight`` is a callable
    omega(x, y) >= 1 evaluated at cell centers, an array over cells, or None."""
    fine = domain.refined(2)
    e_h = _energy(domain, _weight_values(domain, weight))
    e_h2 = _energy(fine, _weight_values(fine, weight))
    extrap = 2.0 * e_h2 - e_h
    width = abs(e_h2 - e_h)
    return ModulusBracket(
        lower=max(0.0, extrap - width),
        upper=extrap + width,
        method=METHOD_DISCRETE,
        inv_lower=2.0 * math.pi / (extrap + width),
        inv_upper=2.0 * math.pi / max(extrap - width, 1e-300),
    )


def _weight_values(domain: GridDomain, weight) -> np.ndarray | None:
    if weight is None:
        return None
    ny, nx = domain.cell_mask.shape
    if callable(weight):
        h = domain.spacing
        # cell centers relative to the stored domain frame
        x0, y0 = _frame_origin(domain)
        xs = x0 + (np.arange(nx) + 0.5) * h
        ys = y0 + (np.arange(ny) + 0.5) * h
        gx, gy = np.meshgrid(xs, ys)
        return np.asarray(weight(gx, gy), dtype=float)
    w = np.asarray(weight, dtype=float)
    if w.shape != (ny, nx):
        raise DomainError("weight array must match the cell grid")
    return w


def _frame_origin(domain: GridDomain) -> tuple[float, float]:
    ny, nx = domain.cell_mask.shape
    if domain.name == "annulus":
        return (-0.5 * nx * domain.spacing, -0.5 * ny * domain.spacing)
    return (0.0, 0.0)


# -- exact admissible-density integrals -------------------------------------------


@dataclass(frozen=True)
class DensityReport:
    value: float
    density: str
    params: dict
    n_shells: int | None = None
    constant: float | None = None


def log_density_bound(alpha: float, rbar: float) -> DensityReport:
    """Exact square integral of the sector-avoiding logarithmic density.

    rho = 1/((2*pi - alpha)|z|) on the annulus rbar/(2 e^{2 pi}) <= |z| <= 1
    minus the sector of angle alpha; admissible for the wall-connecting
    family, value log(2 e^{2 pi} / rbar) / (2 pi - alpha).
    """
    if not (0.0 <= alpha < 2.0 * math.pi):
        raise DomainError("sector angle must lie in [0, 2*pi)")
    if not (0.0 < rbar < 1.0):
        raise DomainError("rbar must lie in (0, 1)")
    value = (math.log(2.0 / rbar) + 2.0 * math.pi) / (2.0 * math.pi - alpha)
    return DensityReport(
        value=value,
        density="log",
        params={"alpha": alpha, "rbar": rbar, "inner_radius_constant": 2.0 * math.e ** (2 * math.pi)},
    )


def dyadic_density_bound(diamU: float, d: float) -> DensityReport:
    """Square-integral bound C*n for the dyadic shell density.

    n is the smallest integer with 2^n d > diamU; the geometric constant
    C = pi + 4 (half-disk of radius 2^{i-1} d plus a unit boundary collar)
    is reported separately so bound chains can track it explicitly.
    """
    if d <= 0 or diamU <= 0:
        raise DomainError("diameters must be positive")
    if d > diamU:
        raise DomainError("d must not exceed diamU")
    n = 1
    while (2.0**n) * d <= diamU:
        n += 1
    constant = math.pi + 4.0
    return DensityReport(
        value=constant * n,
        density="dyadic",
        params={"diamU": diamU, "d": d},
        n_shells=n,
        constant=constant,
    )


def dyadic_shell_count_from_log(log_inv_d: float, diamU: float = 1.0) -> int:
    """Shell count for d = exp(-log_inv_d) without forming d itself."""
    if log_inv_d <= -math.log(diamU):
        raise DomainError("d must not exceed diamU")
    # smallest n with n*log2 > log(diamU) + log_inv_d
    target = (math.log(diamU) + log_inv_d) / math.log(2.0)
    n = int(math.floor(target)) + 1
    return max(n, 1)
