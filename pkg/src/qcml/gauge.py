"""Distortion gauge functions: convex increasing budgets psi(K) and their calculus.

A gauge maps a distortion value K >= 1 to the price psi(K) charged against an
integral budget.  Every downstream modulus estimate works through three
derived objects: the log-gauge g = log(psi), the numeric inverse psi^{-1},
and the cavitation dichotomy (does the budgeted modulus of thin annuli tend
to zero at all).

All kinds are used un-shifted (psi(1) > 0); callers that need psi^{-1} below
psi(1) must apply their own cap (see conditional_modulus).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    BelowRangeError,
    ConfigError,
    DomainError,
    ExtrapolationError,
    UndecidableError,
)

DIVERGENT = "Divergent"
CONVERGENT = "Convergent"

_INV_ABS_TOL = 1e-12


@dataclass(frozen=True)
class CavitationReport:
    verdict: str
    diagnostic: float | None
    certificate: str

    def __bool__(self) -> bool:  # truthy when thin annuli degenerate
        return self.verdict == DIVERGENT


class GaugeFunction:
    """Base class; concrete kinds implement the log-gauge and its derivative."""

    kind = "abstract"

    # -- log-gauge primitives -------------------------------------------------

    def g_raw(self, x):
        """Log-gauge without domain checks; assumes x >= 1 (hot paths)."""
        raise NotImplementedError

    def gp_raw(self, x):
        """Log-gauge derivative without domain checks; assumes x >= 1."""
        raise NotImplementedError

    def log_gauge(self, x):
        self._check_domain(x)
        return self.g_raw(x)

    def log_gauge_derivative(self, x):
        self._check_domain(x)
        return self.gp_raw(x)

    # -- derived surface ------------------------------------------------------

    def eval(self, x):
        self._check_domain(x)
        return np.exp(self.log_gauge(x))

    def value_at_one(self) -> float:
        return float(np.exp(self.log_gauge(1.0)))

    def log_at_one(self) -> float:
        return float(self.log_gauge(1.0))

    def derivative_at_one(self) -> float:
        """psi'(1) = g'(1) * psi(1)."""
        return float(self.log_gauge_derivative(1.0) * np.exp(self.log_gauge(1.0)))

    def inverse(self, y: float) -> float:
        if y < self.value_at_one() * (1.0 - 1e-12):
            raise BelowRangeError(
                f"inverse target {y} below psi(1)={self.value_at_one()}"
            )
        return self.inverse_from_log(math.log(y))

    def inverse_from_log(self, log_y: float) -> float:
        """Solve g(x) = log_y for x >= 1.

        Bracket by doubling, bisect to 1e-12 absolute in x, then one Newton
        polish step.  Overflow-safe: only log-gauge values are compared.
        """
        g1 = self.log_at_one()
        if log_y < g1 - 1e-12:
            raise BelowRangeError(f"log target {log_y} below g(1)={g1}")
        if log_y <= g1:
            return 1.0
        lo, hi = 1.0, 2.0
        while self.log_gauge(hi) < log_y:
            lo, hi = hi, hi * 2.0
            if hi > 1e300:
                raise DomainError("inverse bracket exceeded 1e300")
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if self.log_gauge(mid) < log_y:
                lo = mid
            else:
                hi = mid
            if hi - lo < _INV_ABS_TOL * max(1.0, lo):
                break
        x = 0.5 * (lo + hi)
        gp = self.log_gauge_derivative(x)
        if gp > 0.0:
            x_newton = x - (self.log_gauge(x) - log_y) / gp
            if lo <= x_newton <= hi or abs(x_newton - x) < 1e-6 * x:
                x = max(1.0, x_newton)
        return float(x)

    def cavitation_test(self) -> CavitationReport:
        """Classify divergence of the tail integral of log(psi(x))/x^2.

        Divergent means the budgeted modulus of long annuli tends to zero,
        so modulus-based continuity estimates are possible.
        """
        raise NotImplementedError

    # -- plumbing ---------------------------------------------------------------

    @staticmethod
    def _check_domain(x) -> None:
        if np.any(np.asarray(x) < 1.0):
            raise DomainError("gauge arguments must satisfy x >= 1")

    def to_json(self) -> str:
        return json.dumps(self._params())

    def _params(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Exponential(GaugeFunction):
    """psi(x) = exp(p*x)."""

    p: float
    kind = "Exponential"

    def __post_init__(self):
        if self.p <= 0:
            raise DomainError("Exponential gauge needs p > 0")

    def g_raw(self, x):
        return self.p * np.asarray(x, dtype=float)

    def gp_raw(self, x):
        return np.full_like(np.asarray(x, dtype=float), self.p)

    def inverse_from_log(self, log_y: float) -> float:
        g1 = self.p
        if log_y < g1 - 1e-12:
            raise BelowRangeError(f"log target {log_y} below g(1)={g1}")
        return max(1.0, log_y / self.p)

    def cavitation_test(self) -> CavitationReport:
        return CavitationReport(
            DIVERGENT, None, f"integrand ~ {self.p}/x, tail integral diverges"
        )

    def _params(self) -> dict:
        return {"kind": self.kind, "p": self.p}


@dataclass(frozen=True)
class PowerExponential(GaugeFunction):
    """psi(x) = exp(p*x^alpha), alpha >= 1."""

    p: float
    alpha: float
    kind = "PowerExponential"

    def __post_init__(self):
        if self.p <= 0 or self.alpha < 1:
            raise DomainError("PowerExponential needs p > 0 and alpha >= 1")

    def g_raw(self, x):
        return self.p * np.asarray(x, dtype=float) ** self.alpha

    def gp_raw(self, x):
        x = np.asarray(x, dtype=float)
        return self.p * self.alpha * x ** (self.alpha - 1.0)

    def inverse_from_log(self, log_y: float) -> float:
        g1 = self.p
        if log_y < g1 - 1e-12:
            raise BelowRangeError(f"log target {log_y} below g(1)={g1}")
        return max(1.0, (log_y / self.p) ** (1.0 / self.alpha))

    def cavitation_test(self) -> CavitationReport:
        return CavitationReport(
            DIVERGENT,
            None,
            f"integrand ~ {self.p}*x^{self.alpha - 1:g}, tail integral diverges",
        )

    def _params(self) -> dict:
        return {"kind": self.kind, "p": self.p, "alpha": self.alpha}


@dataclass(frozen=True)
class SubExponentialLog(GaugeFunction):
    """psi(x) = exp(p*x/log^beta(x)) for x beyond e^(1+beta).

    The raw log-gauge p*x/log^beta(x) decreases on (1, e^beta) and its second
    derivative changes sign at x = e^(1+beta), so below that point the
    log-gauge continues along its tangent line.  The junction is C^2 (the raw
    second derivative vanishes there) and the composite stays strictly
    increasing and convex on [1, inf).
    """

    p: float
    beta: float
    kind = "SubExponentialLog"
    _x_join: float = field(init=False, repr=False)
    _g_join: float = field(init=False, repr=False)
    _gp_join: float = field(init=False, repr=False)

    def __post_init__(self):
        if self.p <= 0 or not (0 < self.beta <= 1):
            raise DomainError("SubExponentialLog needs p > 0 and beta in (0, 1]")
        x_join = math.exp(1.0 + self.beta)
        object.__setattr__(self, "_x_join", x_join)
        object.__setattr__(self, "_g_join", self._raw(x_join))
        object.__setattr__(self, "_gp_join", self._raw_derivative(x_join))

    def _raw(self, x):
        return self.p * np.asarray(x, dtype=float) / np.log(x) ** self.beta

    def _raw_derivative(self, x):
        lx = np.log(np.asarray(x, dtype=float))
        return self.p * (lx - self.beta) / lx ** (self.beta + 1.0)

    def g_raw(self, x):
        x = np.asarray(x, dtype=float)
        tangent = self._g_join + self._gp_join * (x - self._x_join)
        out = np.where(
            x >= self._x_join, self._raw(np.maximum(x, self._x_join)), tangent
        )
        return out if out.ndim else float(out)

    def gp_raw(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where(
            x >= self._x_join,
            self._raw_derivative(np.maximum(x, self._x_join)),
            self._gp_join,
        )
        return out if out.ndim else float(out)

    def cavitation_test(self) -> CavitationReport:
        return CavitationReport(
            DIVERGENT,
            None,
            f"integrand ~ {self.p}/(x*log^{self.beta:g}(x)), tail integral diverges",
        )

    def _params(self) -> dict:
        return {"kind": self.kind, "p": self.p, "beta": self.beta}


@dataclass(frozen=True)
class PowerLp(GaugeFunction):
    """psi(x) = x^p, p >= 1 (L^p-integrable distortion)."""

    p: float
    kind = "PowerLp"

    def __post_init__(self):
        if self.p < 1:
            raise DomainError("PowerLp needs p >= 1")

    def g_raw(self, x):
        return self.p * np.log(np.asarray(x, dtype=float))

    def gp_raw(self, x):
        return self.p / np.asarray(x, dtype=float)

    def inverse_from_log(self, log_y: float) -> float:
        if log_y < -1e-12:
            raise BelowRangeError(f"log target {log_y} below g(1)=0")
        return max(1.0, math.exp(log_y / self.p))

    def cavitation_test(self) -> CavitationReport:
        # int_2^inf p*log(x)/x^2 dx = p*(log 2 + 1)/2, finite.
        value = self.p * (math.log(2.0) + 1.0) / 2.0
        return CavitationReport(
            CONVERGENT, value, "tail integral p*(log2+1)/2, convergent"
        )

    def _params(self) -> dict:
        return {"kind": self.kind, "p": self.p}


class TabulatedMonotone(GaugeFunction):
    """Gauge given by increasing samples (x_i, psi_i), log-linear in between.

    Convexity requires the slopes of log(psi) in x to be nondecreasing; this
    is validated at load time with tolerance 1e-7 relative.
    """

    kind = "TabulatedMonotone"

    def __init__(self, samples: Sequence[Sequence[float]]):
        pts = np.asarray(sorted((float(a), float(b)) for a, b in samples))
        if pts.shape[0] < 2:
            raise ConfigError("tabulated gauge needs at least two samples")
        if pts[0, 0] < 1.0:
            raise DomainError("tabulated gauge samples must have x >= 1")
        if np.any(np.diff(pts[:, 0]) <= 0) or np.any(np.diff(pts[:, 1]) <= 0):
            raise ConfigError("tabulated gauge samples must be strictly increasing")
        self.x = pts[:, 0]
        self.logpsi = np.log(pts[:, 1])
        slopes = np.diff(self.logpsi) / np.diff(self.x)
        if np.any(np.diff(slopes) < -1e-7 * np.abs(slopes[:-1])):
            raise ConfigError("tabulated gauge violates convexity beyond 1e-7")
        self._slopes = slopes

    def _check_hull(self, x) -> None:
        x = np.asarray(x, dtype=float)
        if np.any(x < self.x[0]) or np.any(x > self.x[-1]):
            raise ExtrapolationError(
                f"tabulated gauge defined on [{self.x[0]}, {self.x[-1]}]"
            )

    def g_raw(self, x):
        self._check_hull(x)
        return np.interp(np.asarray(x, dtype=float), self.x, self.logpsi)

    def log_gauge(self, x):
        self._check_domain(x)
        return self.g_raw(x)

    def gp_raw(self, x):
        return self.log_gauge_derivative(x)

    def log_gauge_derivative(self, x):
        # centered difference with relative step 1e-6, clamped to the hull
        self._check_domain(x)
        self._check_hull(x)
        x = np.asarray(x, dtype=float)
        h = 1e-6 * np.maximum(x, 1.0)
        lo = np.maximum(x - h, self.x[0])
        hi = np.minimum(x + h, self.x[-1])
        glo = np.interp(lo, self.x, self.logpsi)
        ghi = np.interp(hi, self.x, self.logpsi)
        out = (ghi - glo) / (hi - lo)
        return out if out.ndim else float(out)

    def inverse_from_log(self, log_y: float) -> float:
        if log_y < self.logpsi[0] - 1e-12:
            raise BelowRangeError("inverse target below tabulated range")
        if log_y > self.logpsi[-1] + 1e-12:
            raise ExtrapolationError("inverse target above tabulated range")
        return float(np.interp(log_y, self.logpsi, self.x))

    def cavitation_test(self) -> CavitationReport:
        """Doubling-horizon quadrature of log(psi(x))/x^2 within the hull."""
        x_lo, x_hi = max(2.0, self.x[0]), self.x[-1]
        if x_hi <= x_lo * 8.0:
            raise UndecidableError("tabulated hull too short to classify the tail")
        horizons = [x_lo]
        while horizons[-1] * 2.0 < x_hi:
            horizons.append(horizons[-1] * 2.0)
        horizons.append(x_hi)

        def block(a: float, b: float) -> float:
            t = np.linspace(a, b, 257)
            y = self.log_gauge(t) / t**2
            return float(np.trapezoid(y, t))

        increments = [block(a, b) for a, b in zip(horizons[:-1], horizons[1:])]
        total = float(np.sum(increments))
        if len(increments) < 4:
            raise UndecidableError("fewer than three doublings inside the hull")
        ratios = [
            increments[i + 1] / increments[i]
            for i in range(len(increments) - 1)
            if increments[i] > 0
        ]
        tail = ratios[-3:]
        if all(r > 0.9 for r in tail):
            return CavitationReport(DIVERGENT, total, "increments not shrinking")
        if all(r <= 0.9 for r in tail):
            return CavitationReport(CONVERGENT, total, "increments shrink geometrically")
        raise UndecidableError("mixed increment trend within the hull")

    def _params(self) -> dict:
        return {
            "kind": "tabulated",
            "samples": [[float(a), float(math.exp(b))] for a, b in zip(self.x, self.logpsi)],
        }


# -- module-level operation surface ----------------------------------------------


def eval(psi: GaugeFunction, x):  # noqa: A001 - spec operation name
    return psi.eval(x)


def inverse(psi: GaugeFunction, y: float) -> float:
    return psi.inverse(y)


def log_gauge(psi: GaugeFunction, x):
    return psi.log_gauge(x)


def log_gauge_derivative(psi: GaugeFunction, x):
    return psi.log_gauge_derivative(x)


def cavitation_test(psi: GaugeFunction) -> CavitationReport:
    return psi.cavitation_test()


_KINDS = {
    "exponential": lambda d: Exponential(p=float(d["p"])),
    "powerexponential": lambda d: PowerExponential(
        p=float(d["p"]), alpha=float(d["alpha"])
    ),
    "subexponentiallog": lambda d: SubExponentialLog(
        p=float(d["p"]), beta=float(d["beta"])
    ),
    "powerlp": lambda d: PowerLp(p=float(d["p"])),
    "tabulated": lambda d: TabulatedMonotone(d["samples"]),
    "tabulatedmonotone": lambda d: TabulatedMonotone(d["samples"]),
}


def gauge_from_json(spec) -> GaugeFunction:
    """Build a gauge from a JSON object/string like {"kind": "Exponential", "p": 1}."""
    if isinstance(spec, (str, bytes)):
        spec = json.loads(spec)
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError("gauge spec must be an object with a 'kind' field")
    key = str(spec["kind"]).lower()
    if key not in _KINDS:
        raise ConfigError(f"unknown gauge kind {spec['kind']!r}")
    try:
        return _KINDS[key](spec)
    except KeyError as missing:
        raise ConfigError(f"gauge spec missing parameter {missing}") from None
