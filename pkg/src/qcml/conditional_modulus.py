"""Budget-constrained (conditional) modulus of annuli.

For the family of curves joining the boundary circles of
A = {e^-n < |x| < e^-m}, the supremum of the distortion-weighted modulus over
all radial distortions K with shell budget I reduces to a separable convex
program over shell weights b_j summing to 1.  The two discrete displays
(shell exponents e^(2j) and e^(2(j+1))) bracket the inverse quantity
2*pi / M within an additive 1; the asymptotic integral through the log-gauge
inverse reproduces the bracket midpoint up to a vanishing term, and four
gauge families admit leading-order closed forms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from .errors import (
    DomainError,
    HypothesisError,
    IntegrationError,
    SolverError,
    UnsupportedKindError,
)
from .gauge import (
    Exponential,
    GaugeFunction,
    PowerExponential,
    PowerLp,
    SubExponentialLog,
    TabulatedMonotone,
)

TWO_PI = 2.0 * math.pi

METHOD_DISCRETE = "DiscreteSandwich"
METHOD_ASYMPTOTIC = "Asymptotic"
METHOD_CLOSED_FORM = "ClosedForm"
METHOD_RADIAL_EXACT = "RadialExact"


@dataclass(frozen=True)
class ShellRange:
    """Integer shell indices for the annulus {e^-n < |x| < e^-m}."""

    m: int
    n: int

    def __post_init__(self):
        if not (0 <= self.m < self.n):
            raise DomainError("shell range needs 0 <= m < n")

    @property
    def indices(self) -> np.ndarray:
        return np.arange(self.m + 1, self.n + 1)

    def annulus(self) -> "AnnulusSpec":
        return AnnulusSpec.from_log(float(self.n), float(self.m))


@dataclass(frozen=True)
class AnnulusSpec:
    """Annulus {r < |x| < R}, radii carried as log(1/r), log(1/R).

    Log-scale storage keeps radii like e^(-1e6) representable; the float
    radius properties underflow gracefully to 0.
    """

    log_inv_r: float
    log_inv_R: float

    def __post_init__(self):
        if not (self.log_inv_r > self.log_inv_R >= 0.0):
            raise DomainError("annulus needs 0 < r < R <= 1")

    @classmethod
    def from_radii(cls, r: float, R: float) -> "AnnulusSpec":
        if not (0.0 < r < R <= 1.0):
            raise DomainError("annulus needs 0 < r < R <= 1")
        return cls(math.log(1.0 / r), math.log(1.0 / R))

    @classmethod
    def from_log(cls, log_inv_r: float, log_inv_R: float) -> "AnnulusSpec":
        return cls(float(log_inv_r), float(log_inv_R))

    @property
    def r(self) -> float:
        return math.exp(-self.log_inv_r) if self.log_inv_r < 745 else 0.0

    @property
    def R(self) -> float:
        return math.exp(-self.log_inv_R)

    def to_shells(self) -> ShellRange:
        """Round real radii to shell indices (ceil outside, floor inside)."""
        m = max(0, math.ceil(self.log_inv_R - 1e-12))
        n = math.floor(self.log_inv_r + 1e-12)
        if n <= m:
            n = m + 1
        return ShellRange(m, n)


@dataclass(frozen=True)
class DistortionBudget:
    I: float

    def __post_init__(self):
        if self.I <= 0:
            raise DomainError("budget I must be positive")

    @property
    def I0(self) -> float:
        return self.I / TWO_PI


@dataclass
class ShellProfile:
    """Extremal shell allocation: weights b_j, reciprocal integrals a_j, K_j."""

    shells: ShellRange
    b: np.ndarray
    a: np.ndarray
    K: np.ndarray
    objective: float
    lambda_star: float
    capped: np.ndarray
    budget_used: float
    budget_limit: float
    stationarity_gap: float
    exponent_offset: int = 0

    def distortion_step(self) -> tuple[np.ndarray, np.ndarray]:
        """Radial step distortion: breakpoints e^-j and per-shell K values.

        K is constant on (e^-(j+1), e^-j) for j = m+1..n; returns the log
        breakpoints t_j = j..n+1 and the K value on each interval.
        """
        j = self.shells.indices
        t_breaks = np.concatenate([j.astype(float), [self.shells.n + 1.0]])
        return t_breaks, self.K.copy()

    def matching_annulus(self) -> AnnulusSpec:
        """The annulus tiled exactly by this profile's shells."""
        return AnnulusSpec.from_log(self.shells.n + 1.0, self.shells.m + 1.0)


@dataclass(frozen=True)
class ModulusBracket:
    lower: float
    upper: float
    method: str
    inv_lower: float  # 2*pi / upper
    inv_upper: float  # 2*pi / lower

    def __post_init__(self):
        if not (0.0 <= self.lower <= self.upper + 1e-15):
            raise DomainError("bracket needs 0 <= lower <= upper")

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lower + self.upper)

    @property
    def inv_midpoint(self) -> float:
        return 0.5 * (self.inv_lower + self.inv_upper)

    @property
    def inv_gap(self) -> float:
        return self.inv_upper - self.inv_lower


# -- shell-wise convex program -------------------------------------------------


def _solve_x(psi: GaugeFunction, targets: np.ndarray) -> np.ndarray:
    """Vectorized solve of F(x) = g(x) + log g'(x) + 2 log x = target, x >= 1.

    F is strictly increasing for every supported gauge (g convex enough that
    g''/g' >= -g', so F' >= 2/x > 0).
    """

    def F(x):
        return psi.g_raw(x) + np.log(psi.gp_raw(x)) + 2.0 * np.log(x)

    targets = np.asarray(targets, dtype=float)
    lo = np.ones_like(targets)
    hi = np.full_like(targets, 2.0)
    for _ in range(600):
        todo = F(hi) < targets
        if not todo.any():
            break
        hi[todo] *= 2.0
        if np.any(hi > 1e300):
            raise SolverError("per-shell inversion bracket exceeded 1e300")
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        below = F(mid) < targets
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)


def _invert_g(psi: GaugeFunction, log_y: np.ndarray) -> np.ndarray:
    """Vectorized g^{-1}: solve g(x) = log_y, x >= 1 (assumes log_y >= g(1))."""
    log_y = np.asarray(log_y, dtype=float)
    lo = np.ones_like(log_y)
    hi = np.full_like(log_y, 2.0)
    for _ in range(600):
        todo = psi.g_raw(hi) < log_y
        if not todo.any():
            break
        hi[todo] *= 2.0
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        below = psi.g_raw(mid) < log_y
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)


def _waterfill_suffix(
    psi: GaugeFunction, log_c: np.ndarray, log_tau: np.ndarray
) -> tuple[np.ndarray, np.ndarray, float] | None:
    """Equal-marginal solve of min sum 1/x_j over the simplex, all shells on.

    Shells stay on the decreasing branch (x >= 1, weight floor tau = psi(1)/c);
    S(lambda) = sum max(tau_j, b_j(lambda)) is continuous and decreasing, so
    plain bisection on the multiplier applies.  Returns (b, x, log_lambda) or
    None when even the floors exceed the unit budget.
    """
    tau = np.exp(log_tau)
    if float(tau.sum()) >= 1.0:
        return None

    def allocation(log_lam: float) -> tuple[np.ndarray, np.ndarray]:
        x = np.maximum(1.0, _solve_x(psi, log_c - log_lam))
        b = np.maximum(tau, np.exp(psi.g_raw(x) - log_c))
        return b, x

    log_lam_lo = 0.0
    for _ in range(600):
        b, _ = allocation(log_lam_lo)
        if b.sum() > 1.0:
            break
        log_lam_lo -= math.log(2.0)
    else:
        raise SolverError("lambda bracket: lower end not found")
    log_lam_hi = log_lam_lo
    for _ in range(600):
        b, _ = allocation(log_lam_hi)
        if b.sum() < 1.0:
            break
        log_lam_hi += math.log(2.0)
    else:
        raise SolverError("lambda bracket: upper end not found")
    for _ in range(64):
        mid = 0.5 * (log_lam_lo + log_lam_hi)
        b, _ = allocation(mid)
        if b.sum() > 1.0:
            log_lam_lo = mid
        else:
            log_lam_hi = mid
    log_lam = 0.5 * (log_lam_lo + log_lam_hi)
    b, x = allocation(log_lam)
    # exact feasibility: rescale the off-floor weights by the tiny residual
    free = b > tau * (1.0 + 1e-12)
    if free.any():
        slack = 1.0 - float(b[~free].sum())
        factor = slack / float(b[free].sum())
        b[free] *= factor
        if abs(factor - 1.0) > 1e-10:
            x[free] = np.maximum(
                1.0, _invert_g(psi, log_c[free] + np.log(b[free]))
            )
    return b, x, log_lam


def extremal_profile(
    psi: GaugeFunction,
    budget: DistortionBudget,
    shells: ShellRange,
    exponent_offset: int = 0,
) -> ShellProfile:
    """Minimize sum_j min(1, 1/psi^{-1}(I0 e^{2(j+offset)} b_j)) over the simplex.

    The objective is flat (value 1) wherever a shell cannot buy distortion
    above 1, so the true optimum caps a prefix of shells at K_j = 1 with
    vanishing weight and water-fills the remaining suffix by equal marginals.
    The suffix start is found by a short unimodal search; within a suffix the
    multiplier comes from bisection and each shell from a monotone inversion
    of the marginal map.
    """
    I0 = budget.I0
    j = shells.indices
    log_c = math.log(I0) + 2.0 * (j + exponent_offset).astype(float)
    g1 = psi.log_at_one()
    log_tau = g1 - log_c

    best = None  # (objective, k, b_suffix, x_suffix, log_lam)
    patience = 0
    for k in range(len(j)):
        sol = _waterfill_suffix(psi, log_c[k:], log_tau[k:])
        if sol is None:
            continue
        b_suf, x_suf, log_lam = sol
        obj = float(k + np.sum(np.minimum(1.0, 1.0 / x_suf)))
        if best is None or obj < best[0] - 1e-13:
            best = (obj, k, b_suf, x_suf, log_lam)
            patience = 0
        else:
            patience += 1
            if patience >= 3 and best is not None:
                break
    if best is None:
        raise SolverError(
            "degenerate budget: every shell saturates the a_j = 1 cap "
            "(floor weights exceed the unit simplex for all suffixes)"
        )
    obj, k, b_suf, x_suf, log_lam = best

    # capped prefix carries vanishing weight, shaved from the largest suffix entry
    b = np.empty(len(j))
    x = np.ones(len(j))
    eps_mass = np.exp(np.minimum(log_tau[:k], -40.0)) if k else np.empty(0)
    b[:k] = eps_mass
    b[k:] = b_suf * (1.0 - eps_mass.sum())
    x[k:] = x_suf
    a = np.minimum(1.0, 1.0 / x)
    strict = x > 1.0 + 1e-12
    if strict.any():
        marg = 1.0 / (b[strict] * psi.log_gauge_derivative(x[strict]) * x[strict] ** 2)
        stat_gap = float(np.max(marg) / np.min(marg) - 1.0)
    else:
        stat_gap = 0.0
    # K_j = 1 shells are free: the dropped psi(1) normalization prices identity
    # distortion at zero, so only strictly distorted shells draw on the budget
    budget_used = float(
        np.sum(np.exp(psi.log_gauge(x[strict]) - 2.0 * (j[strict] + exponent_offset)))
    )
    return ShellProfile(
        shells=shells,
        b=b,
        a=a,
        K=1.0 / a,
        objective=float(np.sum(a)),
        lambda_star=math.exp(log_lam),
        capped=~strict,
        budget_used=budget_used,
        budget_limit=I0,
        stationarity_gap=stat_gap,
        exponent_offset=exponent_offset,
    )


def conditional_modulus_bracket(
    psi: GaugeFunction, budget: DistortionBudget, shells: ShellRange
) -> ModulusBracket:
    """Certified modulus bracket from the two shell-exponent displays.

    The e^(2j) display minimum is an upper estimate of 2*pi/M (hence a lower
    modulus bound); the e^(2(j+1)) display gives the other side.  The two
    inverse quantities differ by at most 1.
    """
    upper_inv = extremal_profile(psi, budget, shells, exponent_offset=0).objective
    lower_inv = extremal_profile(psi, budget, shells, exponent_offset=1).objective
    if lower_inv > upper_inv + 1e-9:
        raise SolverError(
            f"display solves out of order: {lower_inv} > {upper_inv}"
        )
    lower_inv = min(lower_inv, upper_inv)
    return ModulusBracket(
        lower=TWO_PI / upper_inv,
        upper=TWO_PI / lower_inv,
        method=METHOD_DISCRETE,
        inv_lower=lower_inv,
        inv_upper=upper_inv,
    )


# -- exact radial modulus ---------------------------------------------------------


def radial_weighted_modulus(Kprofile, annulus: AnnulusSpec) -> float:
    """2*pi * (int_r^R du / (K(u) u))^-1 for a radial weight K >= 1.

    ``Kprofile`` is either a callable u -> K(u) on [r, R], or a step profile
    ``(t_breaks, K_values)`` with K constant between consecutive log-radius
    breakpoints t = log(1/u).
    """
    t_lo, t_hi = annulus.log_inv_R, annulus.log_inv_r
    if isinstance(Kprofile, tuple):
        t_breaks, K_vals = Kprofile
        t_breaks = np.asarray(t_breaks, dtype=float)
        K_vals = np.asarray(K_vals, dtype=float)
        if np.any(K_vals < 1.0 - 1e-12):
            raise DomainError("radial weight must satisfy K >= 1")
        edges = np.clip(t_breaks, t_lo, t_hi)
        widths = np.diff(edges)
        total = float(np.sum(widths / K_vals[: len(widths)]))
        return TWO_PI / total

    def integrand(t: float) -> float:
        val = float(Kprofile(math.exp(-t)))
        if val < 1.0 - 1e-12:
            raise DomainError("radial weight must satisfy K >= 1")
        return 1.0 / val

    total, err = integrate.quad(integrand, t_lo, t_hi, epsabs=0.0, epsrel=1e-12, limit=400)
    if not math.isfinite(total) or (total > 0 and err / total > 1e-10):
        raise IntegrationError(f"radial quadrature error {err:g} on value {total:g}")
    return TWO_PI / total


# -- asymptotic integral ----------------------------------------------------------


def _check_asymptotic_hypothesis(psi: GaugeFunction) -> None:
    # The double-log tail integral is finite for all four analytic kinds:
    # log g grows at most like alpha*log x.  Tabulated gauges are evaluated
    # on a finite hull, so the definite integral below needs no tail control.
    if isinstance(
        psi, (Exponential, PowerExponential, SubExponentialLog, PowerLp, TabulatedMonotone)
    ):
        return
    raise HypothesisError("cannot certify the double-log tail for this gauge")


def asymptotic_inverse_modulus(psi: GaugeFunction, annulus: AnnulusSpec) -> float:
    """(1/2) int g'(x)/x dx between g^{-1}(2 log 1/R) and g^{-1}(2 log 1/r).

    Computed as int dt / g^{-1}(2t) for t in [log 1/R, log 1/r] (substitution
    x = g^{-1}(2t)), with g^{-1} capped at 1 below g(1).  Approximates
    2*pi / M up to a term vanishing as R -> 0; advisory, not certified.
    """
    _check_asymptotic_hypothesis(psi)
    t_lo, t_hi = annulus.log_inv_R, annulus.log_inv_r
    g1 = psi.log_at_one()

    def inv_x(t: float) -> float:
        if 2.0 * t <= g1:
            return 1.0
        return 1.0 / psi.inverse_from_log(2.0 * t)

    split = min(t_hi, max(t_lo, 1.0) * 10.0)
    total = 0.0
    total_err = 0.0
    if split > t_lo:
        val, err = integrate.quad(inv_x, t_lo, split, epsabs=1e-13, epsrel=1e-11, limit=400)
        total += val
        total_err += err
    if t_hi > split:
        val, err = integrate.quad(
            lambda tau: math.exp(tau) * inv_x(math.exp(tau)),
            math.log(split),
            math.log(t_hi),
            epsabs=1e-13,
            epsrel=1e-11,
            limit=400,
        )
        total += val
        total_err += err
    if not math.isfinite(total) or (total > 0 and total_err / total > 1e-9):
        raise IntegrationError(f"asymptotic quadrature error {total_err:g}")
    return total


def closed_form_inverse_modulus(psi: GaugeFunction, annulus: AnnulusSpec) -> float:
    """Leading-order inverse quantity (the bracketed expression, o(1) set to 0)."""
    Lr, LR = annulus.log_inv_r, annulus.log_inv_R
    if isinstance(psi, Exponential) or (
        isinstance(psi, PowerExponential) and psi.alpha == 1.0
    ):
        if LR <= 0:
            raise DomainError("closed form needs R < 1")
        return 0.5 * psi.p * (math.log(Lr) - math.log(LR))
    if isinstance(psi, PowerExponential):
        q = (psi.alpha - 1.0) / psi.alpha
        return (
            (0.5 * psi.p) ** (1.0 / psi.alpha)
            * (psi.alpha / (psi.alpha - 1.0))
            * (Lr**q - LR**q)
        )
    if isinstance(psi, SubExponentialLog):
        if LR <= 1.0:
            raise DomainError("closed form needs log(1/R) > 1")
        if psi.beta == 1.0:
            return 0.5 * psi.p * (math.log(math.log(Lr)) - math.log(math.log(LR)))
        q = 1.0 - psi.beta
        return 0.5 * psi.p / q * (math.log(Lr) ** q - math.log(LR) ** q)
    raise UnsupportedKindError(f"no closed form for gauge kind {psi.kind}")


def closed_form_modulus(psi: GaugeFunction, annulus: AnnulusSpec) -> float:
    """2*pi over the leading-order bracketed expression; leading order only."""
    return TWO_PI / closed_form_inverse_modulus(psi, annulus)
