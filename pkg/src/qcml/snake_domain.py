"""Serpentine-tunnel counterexample domains and their modulus bound chains.

The domain is the unit disk minus a snake-like channel folded inside the
sector |arg z| <= alpha/2, with tube and gap widths following a radial
profile (log-power or power law), joined to the circle by a crosscut along
the positive real axis.  Both sides of the modulus contradiction are
computable: exact strip integrals of the channel's admissible density from
below, explicit dyadic-density chains from above, and a bisection locates
the depth where they cross.

Radii are carried as L = log(1/r) throughout; crossover depths like
exp(-(C_u/C_l)^5) underflow doubles long before the arithmetic degrades.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from shapely.geometry import Polygon, box
from shapely.geometry.polygon import orient
from shapely.ops import unary_union

from .errors import DomainError, GeometryError, NoCrossoverError
from .grid_capacity import dyadic_shell_count_from_log
from .polyline import (
    JordanPolyline,
    ThreePointReport,
    linear_gauge,
    log_power_gauge,
    power_gauge,
    segment_intersection_sweep,
    three_point_check,
)

LOG2 = math.log(2.0)
_GAUSS_X, _GAUSS_W = np.polynomial.legendre.leggauss(12)
_GX = 0.5 * (_GAUSS_X + 1.0)  # nodes on [0, 1]
_GW = 0.5 * _GAUSS_W
N_EXACT_TUBES = 200_000


# -- width profiles ---------------------------------------------------------------


@dataclass(frozen=True)
class LogPowerProfile:
    """w(r) = c * r / log^(1/2+epsilon)(1 + 1/r)."""

    epsilon: float
    c: float = 0.05
    kind = "log_power"

    def __post_init__(self):
        if self.epsilon <= 0 or self.c <= 0:
            raise DomainError("log-power profile needs epsilon > 0 and c > 0")

    def width_ratio(self, L):
        """w(r)/r at r = e^-L (vectorized, safe for huge L)."""
        L = np.asarray(L, dtype=float)
        log1p_inv = L + np.log1p(np.exp(-np.minimum(L, 700.0)))
        return self.c / log1p_inv ** (0.5 + self.epsilon)


@dataclass(frozen=True)
class PowerProfile:
    """w(r) = c * r^(1/s), s in (0, 1)."""

    s: float
    c: float = 0.25
    kind = "power"

    def __post_init__(self):
        if not (0.0 < self.s < 1.0) or self.c <= 0:
            raise DomainError("power profile needs s in (0, 1) and c > 0")

    def width_ratio(self, L):
        L = np.asarray(L, dtype=float)
        return self.c * np.exp(-L * (1.0 / self.s - 1.0))


@dataclass(frozen=True)
class SnakeParams:
    profile: LogPowerProfile | PowerProfile
    alpha: float = math.pi / 4.0
    r_min: float = 1e-4
    tubes_per_decade: int = 128

    def __post_init__(self):
        if not (0.0 < self.alpha <= 0.5 * math.pi):
            raise DomainError("sector angle alpha must lie in (0, pi/2]")
        if not (0.0 < self.r_min < 0.5):
            raise DomainError("r_min must lie in (0, 1/2)")
        if self.tubes_per_decade < 1:
            raise DomainError("tubes_per_decade must be positive")
        tan_half = math.tan(0.5 * self.alpha)
        # the tunnel must fit its sector: w(r) < r tan(alpha/2)/4, checked at
        # the wide end (both profiles have w/r nonincreasing as r shrinks)
        if float(self.profile.width_ratio(math.log(2.0))) >= 0.25 * tan_half:
            raise DomainError(
                "width constant too large: tunnel does not fit the sector"
            )

    @property
    def tan_half(self) -> float:
        return math.tan(0.5 * self.alpha)


def _tube_log_radii(params: SnakeParams, L_stop: float, max_tubes: int) -> np.ndarray:
    """Abscissa recursion L_{n+1} = L_n - log(1 - 2 w/r), from r0 = 1/2."""
    out = []
    L = math.log(2.0)
    profile = params.profile
    for _ in range(max_tubes):
        if L > L_stop:
            break
        out.append(L)
        omega = float(profile.width_ratio(L))
        L = L - math.log1p(-2.0 * omega)
    return np.asarray(out)


# -- geometry ----------------------------------------------------------------------


@dataclass
class SnakeGeometry:
    params: SnakeParams
    tube_L: np.ndarray  # log(1/r_n) per tube, all tubes down to r_min
    boundary: JordanPolyline
    tubes_in_polyline: int
    polyline_complete: bool
    n_circle: int

    @property
    def r_min(self) -> float:
        return self.params.r_min

    @property
    def tube_r(self) -> np.ndarray:
        return np.exp(-self.tube_L)

    @property
    def tube_w(self) -> np.ndarray:
        return self.params.profile.width_ratio(self.tube_L) * self.tube_r

    @property
    def tubes(self) -> list[dict]:
        """Tube rectangles as dicts {r_n, w_n, y0, y1} (turning areas excluded)."""
        r, w = self.tube_r, self.tube_w
        y1 = r * self.params.tan_half - w
        return [
            {"r_n": float(rn), "w_n": float(wn), "y0": float(-y), "y1": float(y)}
            for rn, wn, y in zip(r, w, y1)
        ]

    def tip_arcs(self, rbar: float) -> dict:
        """Split the boundary into the deep piece E and the remaining walls U, F."""
        if rbar < self.params.r_min:
            raise DomainError("rbar below the geometry cutoff r_min")
        v = self.boundary.vertices
        radius = np.linalg.norm(v, axis=1)
        on_circle = radius > 1.0 - 1e-9
        deep = (~on_circle) & (radius <= rbar)
        if not deep.any():
            raise DomainError("no boundary vertices below rbar")
        idx = np.nonzero(deep)[0]
        # deep set must be one contiguous cyclic block
        gaps = np.nonzero(np.diff(idx) > 1)[0]
        if len(gaps) > 1:
            raise GeometryError("deep boundary piece is not a single arc")
        if len(gaps) == 1:
            idx = np.concatenate([idx[gaps[0] + 1 :], idx[: gaps[0] + 1]])
        n = len(v)
        after = np.arange(idx[-1] + 1, idx[-1] + 1 + n - len(idx)) % n
        circ_pos = np.nonzero(on_circle[after])[0]
        if len(circ_pos) == 0:
            raise GeometryError("boundary has no circle piece outside rbar")
        U = after[: circ_pos[0]]
        F = after[circ_pos[-1] + 1 :]
        return {"E": idx, "U": U, "F": F}


def build_snake(params: SnakeParams) -> SnakeGeometry:
    """Construct the serpentine domain and certify its boundary is Jordan."""
    L_stop = math.log(1.0 / params.r_min)
    tube_L = _tube_log_radii(params, L_stop, max_tubes=50_000_000)
    if len(tube_L) < 3:
        raise GeometryError(
            f"fewer than 3 tubes between r0=1/2 and r_min={params.r_min:g}"
        )
    decades = max(1.0, (L_stop - math.log(2.0)) / math.log(10.0))
    n_poly = min(len(tube_L), max(3, int(params.tubes_per_decade * decades)))

    tan_half = params.tan_half
    r = np.exp(-tube_L[:n_poly])
    w = np.asarray(params.profile.width_ratio(tube_L[:n_poly])) * r
    y1 = r * tan_half - w

    rects = []
    # entrance corridor along the positive real axis, through the circle
    rects.append(box(r[0] - w[0], -0.5 * w[0], 1.1, 0.5 * w[0]))
    for k in range(n_poly):
        rects.append(box(r[k] - w[k], -y1[k], r[k], y1[k]))
    for k in range(n_poly - 1):
        x_lo = r[k + 1] - w[k + 1]
        x_hi = r[k]
        if k % 2 == 0:  # turn at the top
            rects.append(box(x_lo, y1[k + 1] - w[k + 1], x_hi, y1[k + 1]))
        else:  # turn at the bottom
            rects.append(box(x_lo, -y1[k + 1], x_hi, -y1[k + 1] + w[k + 1]))
    channel = unary_union(rects)

    n_circle = 720
    th = 2.0 * math.pi * np.arange(n_circle) / n_circle
    disk = Polygon(np.c_[np.cos(th), np.sin(th)])
    omega = disk.difference(channel)
    if omega.geom_type != "Polygon" or omega.interiors:
        raise GeometryError("channel construction failed to leave a Jordan domain")
    omega = orient(omega, sign=1.0)
    verts = np.asarray(omega.exterior.coords)[:-1]
    keep = np.linalg.norm(np.diff(np.vstack([verts, verts[:1]]), axis=0), axis=1) > 1e-15
    verts = verts[keep]
    boundary = JordanPolyline(verts, validate=False)
    hit = segment_intersection_sweep(boundary.vertices)
    if hit is not None:
        raise GeometryError(f"snake boundary self-intersects at edges {hit}")
    if boundary.signed_area() <= 0:
        raise GeometryError("snake boundary has non-positive orientation")
    return SnakeGeometry(
        params=params,
        tube_L=tube_L,
        boundary=boundary,
        tubes_in_polyline=n_poly,
        polyline_complete=(n_poly == len(tube_L)),
        n_circle=n_circle,
    )


# -- exponents and explicit upper bounds --------------------------------------------


def preimage_diam_exponent(K: float, alpha: float) -> float:
    """Exponent q with diam f^{-1}(E_rbar) >= C * rbar^q; q = pi K/(2 pi - 2 alpha)."""
    if K < 1.0:
        raise DomainError("K must be >= 1")
    if not (0.0 < alpha < math.pi):
        raise DomainError("sector angle must lie in (0, pi)")
    return math.pi * K / (2.0 * math.pi - 2.0 * alpha)


def exponent_threshold(s: float) -> float:
    """Integrability threshold s/(2(1-s)) for the power-profile regime."""
    if not (0.0 < s < 1.0):
        raise DomainError("s must lie in (0, 1)")
    return s / (2.0 * (1.0 - s))


@dataclass(frozen=True)
class UpperBoundReport:
    value: float
    log_value: float
    mode: str
    log_inv_rbar: float
    log_inv_d: float
    n_shells: int | None
    distortion_term: float
    density_term: float
    constants: dict


def _log_inv_rbar(rbar: float | None, log_rbar: float | None) -> float:
    if (rbar is None) == (log_rbar is None):
        raise DomainError("give exactly one of rbar or log_rbar")
    if rbar is not None:
        if not (0.0 < rbar < 1.0):
            raise DomainError("rbar must lie in (0, 1)")
        return math.log(1.0 / rbar)
    if log_rbar <= 0.0:
        raise DomainError("log_rbar = log(1/rbar) must be positive")
    return float(log_rbar)


def upper_bound_weighted_modulus_exp(
    rbar: float | None = None,
    K: float = 1.0,
    p: float = 1.0,
    alpha: float = math.pi / 6.0,
    I_exp: float = 1.0,
    log_rbar: float | None = None,
) -> UpperBoundReport:
    """Explicit exponential-budget upper bound I_exp/p + 3(pi+4) n log(1/d) / p.

    d = rbar^q with q the preimage diameter exponent; n is the dyadic shell
    count for diam 1.  Every factor is exposed so crossover reports can track
    the constants instead of absorbing them.
    """
    if p <= 0:
        raise DomainError("p must be positive")
    L = _log_inv_rbar(rbar, log_rbar)
    q = preimage_diam_exponent(K, alpha)
    L_d = q * L
    if L_d <= 0:
        raise DomainError("preimage diameter d must be < 1")
    n = dyadic_shell_count_from_log(L_d)
    density_term = (math.pi + 4.0) * n * 3.0 * L_d / p
    value = I_exp / p + density_term
    return UpperBoundReport(
        value=value,
        log_value=math.log(value),
        mode="exp",
        log_inv_rbar=L,
        log_inv_d=L_d,
        n_shells=n,
        distortion_term=I_exp / p,
        density_term=density_term,
        constants={
            "shell_area_constant": math.pi + 4.0,
            "log_factor": 3.0,
            "preimage_exponent": q,
        },
    )


def upper_bound_weighted_modulus_Lp(
    rbar: float | None = None,
    K: float = 1.0,
    p: float = 1.0,
    alpha: float = math.pi / 6.0,
    I_p: float = 1.0,
    log_rbar: float | None = None,
) -> UpperBoundReport:
    """Explicit p-integrable-budget upper bound.

    p > 1: I_p^{1/p} * C_p^{(p-1)/p} * (1/d)^{2/p} with the geometric-series
    constant C_p = (pi+4)/(1 - 2^{-2/(p-1)}); p = 1: I_1 / d^2.
    """
    if p < 1.0:
        raise DomainError("the p-integrable chain needs p >= 1")
    L = _log_inv_rbar(rbar, log_rbar)
    q = preimage_diam_exponent(K, alpha)
    L_d = q * L
    if L_d <= 0:
        raise DomainError("preimage diameter d must be < 1")
    if p > 1.0:
        C_p = (math.pi + 4.0) / (1.0 - 2.0 ** (-2.0 / (p - 1.0)))
        log_value = (
            math.log(I_p) / p + (p - 1.0) / p * math.log(C_p) + 2.0 * L_d / p
        )
        constants = {"series_constant": C_p, "preimage_exponent": q}
    else:
        log_value = math.log(I_p) + 2.0 * L_d
        constants = {"series_constant": math.pi + 4.0, "preimage_exponent": q}
    value = math.exp(log_value) if log_value < 709 else math.inf
    return UpperBoundReport(
        value=value,
        log_value=log_value,
        mode="lp",
        log_inv_rbar=L,
        log_inv_d=L_d,
        n_shells=None,
        distortion_term=0.0,
        density_term=value,
        constants=constants,
    )


# -- channel lower bound ------------------------------------------------------------


def _tube_integral_log(profile, tan_half: float, L: np.ndarray) -> np.ndarray:
    """log of the per-tube strip integral, vectorized over tube depths L.

    LogPower: integrand |z|^-2 log^(1+2 eps)(1 + 1/|z|); Power: |z|^(-2/s).
    Tensor Gauss quadrature in tube-relative coordinates keeps every factor
    expressible through L, so arbitrarily deep tubes stay computable.
    """
    L = np.atleast_1d(np.asarray(L, dtype=float))
    omega = np.asarray(profile.width_ratio(L))
    ytop = tan_half - omega  # y1 / r
    xi = 1.0 - omega[:, None, None] * (1.0 - _GX[None, :, None])  # x / r
    ups = ytop[:, None, None] * _GX[None, None, :]  # y / r
    rho = np.sqrt(xi**2 + ups**2)
    if isinstance(profile, LogPowerProfile):
        # log(1 + 1/(r rho)) = L - log(rho) + log1p(r rho), r = e^-L
        r_rho = np.exp(-np.minimum(L[:, None, None], 700.0)) * rho
        logfac = (L[:, None, None] - np.log(rho) + np.log1p(r_rho)) ** (
            1.0 + 2.0 * profile.epsilon
        )
        core = logfac / rho**2
        log_scale = np.zeros_like(L)
    else:
        core = rho ** (-2.0 / profile.s)
        log_scale = (2.0 / profile.s - 2.0) * L
    wts = _GW[None, :, None] * _GW[None, None, :]
    base = 2.0 * omega * ytop * np.sum(core * wts, axis=(1, 2))
    return log_scale + np.log(base)


def _log_sum_tube_integrals(profile, tan_half: float, L: np.ndarray) -> float:
    """log of sum(exp(tube integral logs)), chunked to bound memory."""
    chunk = 50_000
    peaks, sums = [], []
    for k in range(0, len(L), chunk):
        vals = _tube_integral_log(profile, tan_half, L[k : k + chunk])
        pk = float(vals.max())
        peaks.append(pk)
        sums.append(float(np.sum(np.exp(vals - pk))))
    top = max(peaks)
    return top + math.log(sum(s * math.exp(p - top) for p, s in zip(peaks, sums)))


def tunnel_lower_modulus(
    geometry: SnakeGeometry,
    rbar: float | None = None,
    log_rbar: float | None = None,
) -> float:
    """Sum of exact strip integrals over tubes with r_n > rbar.

    Lower-bounds the image-side modulus of the wall-connecting family up to
    the admissibility normalization tracked by the crossover report.
    """
    L_bar = _log_inv_rbar(rbar, log_rbar)
    if L_bar > math.log(1.0 / geometry.r_min) + 1e-12:
        raise DomainError("rbar below the geometry cutoff r_min")
    L = geometry.tube_L[geometry.tube_L < L_bar]
    if len(L) == 0:
        return 0.0
    return math.exp(
        _log_sum_tube_integrals(geometry.params.profile, geometry.params.tan_half, L)
    )


def _lower_total_log(params: SnakeParams, L_bar: float) -> float:
    """log of the tube-integral sum down to depth L_bar, profile-defined.

    Tubes are enumerated exactly up to a count budget; beyond it the sum is
    continued with the tube-density integral (one tube per -log(1 - 2 w/r)
    of depth) plus trapezoidal endpoint corrections.  The density step is
    exact to O(w/r) relative, which vanishes with depth; the switchover is
    validated against the exact sum in tests.
    """
    profile = params.profile
    tan_half = params.tan_half
    L_grid = _tube_log_radii(params, L_bar, max_tubes=N_EXACT_TUBES)
    if len(L_grid) == 0:
        return -math.inf
    head_log = _log_sum_tube_integrals(profile, tan_half, L_grid)
    last_omega = float(profile.width_ratio(L_grid[-1]))
    L_next = L_grid[-1] - math.log1p(-2.0 * last_omega)
    if L_next > L_bar:
        return head_log
    # enumeration budget exhausted: continue with the tube-density integral
    a, b = L_next, L_bar
    nodes_t = np.linspace(math.log(a), math.log(b), 2048)
    nodes = np.exp(nodes_t)
    om = np.asarray(profile.width_ratio(nodes))
    delta = -np.log1p(-2.0 * om)
    vals = _tube_integral_log(profile, tan_half, nodes)
    peak = max(head_log, float(vals.max()))
    f = np.exp(vals - peak) / delta
    integral = float(np.trapezoid(f * nodes, nodes_t))
    ends = 0.5 * (f[0] * delta[0] + f[-1] * delta[-1])
    total = math.exp(head_log - peak) + integral + ends
    return peak + math.log(total)


# -- crossover ---------------------------------------------------------------------


@dataclass(frozen=True)
class CrossoverReport:
    mode: str
    log_rbar_star: float
    rbar_star: float
    lower_at_log: float
    upper_at_log: float
    predicted_log_rbar_star: float | None
    constants: dict


def crossover(
    params: SnakeParams,
    K: float,
    p: float,
    mode: str,
    I_exp: float = 1.0,
    I_p: float = 1.0,
) -> CrossoverReport:
    """Largest rbar where the channel lower bound exceeds the matching upper bound.

    Below that depth the distortion-weighted modulus inequality fails, so no
    extension with the stated budget exists for the tracked constants.
    Depths are bisected in L = log(1/rbar).
    """
    if mode == "exp":
        if not isinstance(params.profile, LogPowerProfile):
            raise DomainError("exp mode needs a LogPower profile")

        def upper_log(L):
            return upper_bound_weighted_modulus_exp(
                K=K, p=p, alpha=params.alpha, I_exp=I_exp, log_rbar=L
            ).log_value

        eps = params.profile.epsilon
        q = preimage_diam_exponent(K, alpha=params.alpha)
        C_u = 3.0 * (math.pi + 4.0) * q * q / (p * LOG2)
        C_l = params.tan_half / (2.0 + 2.0 * eps)
        predicted = (C_u / C_l) ** (1.0 / (2.0 * eps))
        constants = {"C_upper": C_u, "C_lower": C_l, "epsilon": eps, "q": q}
    elif mode == "lp":
        if not isinstance(params.profile, PowerProfile):
            raise DomainError("lp mode needs a Power profile")
        s = params.profile.s
        q = preimage_diam_exponent(K, alpha=params.alpha)
        lower_exp = (2.0 - 2.0 * s) / s
        if p < 1.0:
            raise NoCrossoverError(
                f"p={p} < 1 lies outside the p-integrable chain"
            )
        upper_exp = 2.0 * q / p
        if lower_exp <= upper_exp + 1e-12:
            raise NoCrossoverError(
                f"lower growth exponent {lower_exp:g} does not exceed the upper "
                f"exponent {upper_exp:g}: p below the threshold "
                f"{exponent_threshold(s):g} (+ sector correction)"
            )

        def upper_log(L):
            return upper_bound_weighted_modulus_Lp(
                K=K, p=p, alpha=params.alpha, I_p=I_p, log_rbar=L
            ).log_value

        predicted = None
        constants = {
            "lower_exponent": lower_exp,
            "upper_exponent": upper_exp,
            "threshold": exponent_threshold(s),
            "q": q,
        }
    else:
        raise DomainError("mode must be 'exp' or 'lp'")

    def diff(L):
        return _lower_total_log(params, L) - upper_log(L)

    L_lo = math.log(1.0 / params.r_min) * 0.0 + 2.0
    if diff(L_lo) > 0:
        L_lo = 1.0
    L_hi = L_lo
    for _ in range(80):
        if diff(L_hi) > 0:
            break
        L_hi *= 2.0
        if L_hi > 1e13:
            raise NoCrossoverError("no crossover found below log(1/rbar) = 1e13")
    else:
        raise NoCrossoverError("no crossover found")
    for _ in range(80):
        mid = math.sqrt(L_lo * L_hi)
        if diff(mid) > 0:
            L_hi = mid
        else:
            L_lo = mid
        if L_hi / L_lo < 1.0 + 1e-12:
            break
    L_star = math.sqrt(L_lo * L_hi)
    return CrossoverReport(
        mode=mode,
        log_rbar_star=L_star,
        rbar_star=math.exp(-L_star) if L_star < 745 else 0.0,
        lower_at_log=_lower_total_log(params, L_star),
        upper_at_log=upper_log(L_star),
        predicted_log_rbar_star=predicted,
        constants=constants,
    )
