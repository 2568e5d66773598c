"""Closed planar polylines: simplicity sweep, arc indexing, three-point checks.

The three-point condition of a Jordan boundary compares, for every pair of
boundary points, the diameter of the smaller complementary arc against a
gauge of the chord length.  Arc diameters are approximated by the maximum
distance to one endpoint, which brackets the true diameter within a factor
of 2; reports carry both sides of that bracket.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, GeometryError

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def _orient(ax, ay, bx, by, cx, cy):
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


def segments_properly_intersect(p, q, r, s) -> bool:
    """True if open segments pq and rs intersect (shared endpoints excluded)."""
    d1 = _orient(*r, *s, *p)
    d2 = _orient(*r, *s, *q)
    d3 = _orient(*p, *q, *r)
    d4 = _orient(*p, *q, *s)
    if ((d1 > 0 and d2 < 0) or (d1 < 0 and d2 > 0)) and (
        (d3 > 0 and d4 < 0) or (d3 < 0 and d4 > 0)
    ):
        return True

    def on_open(a, b, c):
        if _orient(*a, *b, *c) != 0.0:
            return False
        return (
            min(a[0], b[0]) < c[0] < max(a[0], b[0])
            or min(a[1], b[1]) < c[1] < max(a[1], b[1])
        )

    return on_open(r, s, p) or on_open(r, s, q) or on_open(p, q, r) or on_open(p, q, s)


def segment_intersection_sweep(vertices: np.ndarray) -> tuple[int, int] | None:
    """Find a pair of non-adjacent self-intersecting edges of a closed polyline.

    Plane sweep over x: edges enter at their min-x and leave at max-x; each
    entering edge is tested against the active set after a bounding-box
    filter.  Returns the offending (i, j) edge pair or None when simple.
    """
    v = np.asarray(vertices, dtype=float)
    n = len(v)
    nxt = np.roll(np.arange(n), -1)
    a = v
    b = v[nxt]
    xmin = np.minimum(a[:, 0], b[:, 0])
    xmax = np.maximum(a[:, 0], b[:, 0])
    ymin = np.minimum(a[:, 1], b[:, 1])
    ymax = np.maximum(a[:, 1], b[:, 1])
    order = np.argsort(xmin, kind="stable")
    active: list[int] = []
    for idx in order:
        x_enter = xmin[idx]
        active = [j for j in active if xmax[j] >= x_enter]
        for j in active:
            if j == idx or nxt[j] == idx or nxt[idx] == j:
                continue
            if ymin[idx] > ymax[j] or ymax[idx] < ymin[j]:
                continue
            if segments_properly_intersect(a[idx], b[idx], a[j], b[j]):
                return (int(min(idx, j)), int(max(idx, j)))
        active.append(idx)
    return None


@dataclass
class JordanPolyline:
    """Closed, positively oriented, simple polyline with arc-length index."""

    vertices: np.ndarray
    arc_length: np.ndarray = field(init=False)
    _validated: bool = False

    def __init__(self, vertices, validate: bool = True):
        v = np.asarray(vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
            raise DomainError("polyline needs an (N, 2) array with N >= 3")
        if np.allclose(v[0], v[-1]):
            v = v[:-1]
        self.vertices = v
        seg = np.linalg.norm(np.diff(np.vstack([v, v[:1]]), axis=0), axis=1)
        self.arc_length = np.concatenate([[0.0], np.cumsum(seg)])
        self._validated = False
        if validate:
            self.validate()

    def __len__(self) -> int:
        return len(self.vertices)

    @property
    def total_length(self) -> float:
        return float(self.arc_length[-1])

    def signed_area(self) -> float:
        v = self.vertices
        x, y = v[:, 0], v[:, 1]
        return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))

    def validate(self) -> None:
        hit = segment_intersection_sweep(self.vertices)
        if hit is not None:
            raise GeometryError(f"polyline self-intersects at edges {hit}")
        if self.signed_area() <= 0:
            raise GeometryError("polyline must be positively oriented")
        self._validated = True


def circle_polyline(n: int = 1024, radius: float = 1.0) -> JordanPolyline:
    th = 2.0 * math.pi * np.arange(n) / n
    return JordanPolyline(radius * np.c_[np.cos(th), np.sin(th)])


def slit_disk_polyline(n_slit: int = 256, inner: float = 1e-3) -> JordanPolyline:
    """Unit disk minus the radial slit [0, 1), discretized degenerately thin.

    The two slit sides use incommensurate vertex spacings (golden-ratio
    stretched on the upper side) so that straddling vertex pairs come
    arbitrarily close under refinement instead of coinciding.
    """
    n_circ = max(64, n_slit)
    th = np.linspace(0.0, 2.0 * math.pi, n_circ + 1)[1:-1]
    # the slit is ideally width zero: the thin-slit proxy must collapse
    # faster than the sampling scale or the vertex gap floors every ratio
    half = 0.25 * inner / n_slit**2
    lower = np.linspace(inner, 1.0, n_slit)[::-1][1:]  # 1 -> inner, mouth excluded
    n_up = max(3, int(round(n_slit / GOLDEN)))
    upper = np.linspace(inner, 1.0, n_up)[:-1]  # inner -> 1, mouth excluded
    pts = [np.array([[1.0, half]])]
    pts.append(np.c_[np.cos(th), np.sin(th)])
    pts.append(np.array([[1.0, -half]]))
    pts.append(np.c_[lower, np.full(len(lower), -half)])
    pts.append(np.array([[inner * 0.5, 0.0]]))
    pts.append(np.c_[upper, np.full(len(upper), half)])
    v = np.vstack(pts)
    return JordanPolyline(v, validate=False)


@dataclass(frozen=True)
class ThreePointReport:
    worst_ratio: float
    worst_ratio_upper: float
    witness: tuple[tuple[float, float], tuple[float, float]]
    passed: bool
    approximation_factor: float
    samples: int

    @property
    def required_scale(self) -> float:
        """Smallest gauge multiplier making the check pass (lower-bound side)."""
        return self.worst_ratio


def three_point_check(
    boundary: JordanPolyline, h, C: float = 1.0, samples: int = 1024
) -> ThreePointReport:
    """Worst ratio of smaller-arc diameter to h(C * chord) over sampled pairs.

    For each sampled anchor the distances to every polyline vertex are
    scanned once, so both complementary arcs of every anchor/sample pair get
    their max-distance-from-endpoint diameter proxy in O(N) per anchor.  The
    proxy underestimates the true diameter by at most a factor of 2;
    ``worst_ratio`` uses the proxy, ``worst_ratio_upper`` its doubled value.
    """
    v = boundary.vertices
    n = len(v)
    if samples > n:
        raise DomainError("samples must not exceed the vertex count")
    if h(0.0) != 0.0:
        raise DomainError("gauge must satisfy h(0) = 0")
    idx = np.unique(np.linspace(0, n - 1, samples).round().astype(int))
    worst = -math.inf
    witness = ((0.0, 0.0), (0.0, 0.0))
    for i in idx:
        rolled = np.roll(v, -i, axis=0)
        d = np.linalg.norm(rolled - rolled[0], axis=1)
        fwd = np.maximum.accumulate(d)
        bwd = np.maximum.accumulate(d[::-1])[::-1]
        j_rel = (idx - i) % n
        j_rel = j_rel[j_rel > 0]
        chord = d[j_rel]
        min_diam = np.minimum(fwd[j_rel], bwd[j_rel])
        gauge_vals = np.asarray(h(C * chord), dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratios = np.where(gauge_vals > 0, min_diam / gauge_vals, np.inf)
        k = int(np.argmax(ratios))
        if ratios[k] > worst:
            worst = float(ratios[k])
            other = (i + j_rel[k]) % n
            witness = (tuple(v[i]), tuple(v[other]))
    return ThreePointReport(
        worst_ratio=worst,
        worst_ratio_upper=2.0 * worst,
        witness=witness,
        passed=worst <= 1.0,
        approximation_factor=2.0,
        samples=len(idx),
    )


def linear_gauge(scale: float = 1.0):
    return lambda t: scale * np.asarray(t, dtype=float)


def log_power_gauge(exponent: float, scale: float = 1.0):
    """h(t) = scale * t * log^exponent(1 + 1/t), the snake-matched shape."""

    def h(t):
        t = np.asarray(t, dtype=float)
        safe = np.maximum(t, 1e-300)
        out = np.where(t > 0, scale * t * np.log1p(1.0 / safe) ** exponent, 0.0)
        return out if out.ndim else float(out)

    return h


def power_gauge(s: float, scale: float = 1.0):
    """h(t) = scale * t^s."""
    if not (0.0 < s <= 1.0):
        raise DomainError("power gauge exponent must lie in (0, 1]")
    return lambda t: scale * np.asarray(t, dtype=float) ** s
