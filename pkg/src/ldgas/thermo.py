"""Grand-canonical equation of state for ideal Bose and Fermi gases.

Pressure, density, critical density and the translated pressure
``g(lam) = p(mu + lam) - p(mu)`` with its first two derivatives, all by
adaptive radial quadrature of isotropic integrands.  Statistics are encoded
by ``sigma``: +1 for Bose-Einstein (BE), -1 for Fermi-Dirac (FD).

Conventions: hbar = 1, no unit conversions.  Infinite answers that are
semantically meaningful (critical density in low dimension, the translated
pressure beyond the Bose domain) are returned as ``math.inf`` rather than
raised as errors.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import IntegrationWarning, quad
from scipy.optimize import brentq
from scipy.special import gamma as gamma_fn

from .dispersion import DispersionRelation
from .errors import AccuracyError, DomainError

__all__ = [
    "BE",
    "FD",
    "ThermoState",
    "EosResult",
    "occupation",
    "pressure",
    "density",
    "equation_of_state",
    "critical_density",
    "translated_pressure",
]

BE = +1
FD = -1

_TRUNCATION_RATIO = 1e-16  # stop extending the domain below this integrand share


@dataclass(frozen=True)
class ThermoState:
    """Inverse temperature, chemical potential and statistics flag.

    BE requires mu < 0 (the one-particle spectrum starts at 0); FD allows
    any real mu.
    """

    beta: float
    mu: float
    sigma: int

    def __post_init__(self):
        if self.beta <= 0:
            raise DomainError("beta must be positive")
        if self.sigma not in (BE, FD):
            raise DomainError("sigma must be +1 (BE) or -1 (FD)")
        if self.sigma == BE and self.mu >= 0:
            raise DomainError("BE requires mu < 0")

    @property
    def fugacity(self) -> float:
        return math.exp(self.beta * self.mu)


@dataclass(frozen=True)
class EosResult:
    """Pressure and density with their quadrature error estimates."""

    pressure: float
    density: float
    pressure_error: float
    density_error: float

    def __post_init__(self):
        if self.pressure < 0 or self.density < 0:
            raise AccuracyError("equation of state produced a negative value")


# ---------------------------------------------------------------------------
# integrands (numerically stable forms; w = beta * (eps - mu))
# ---------------------------------------------------------------------------

def _scalar_in(w):
    arr = np.atleast_1d(np.asarray(w, dtype=float))
    return arr, np.ndim(w) == 0


def _scalar_out(arr, scalar):
    return float(arr[0]) if scalar else arr


def _occ_from_w(w, sigma):
    """1 / (e^w - sigma), stable for large |w|."""
    w, scalar = _scalar_in(w)
    out = np.empty_like(w)
    pos = w >= 0
    t = np.exp(-w[pos])
    with np.errstate(divide="ignore"):
        out[pos] = t / (1.0 - sigma * t)
    if np.any(~pos):
        if sigma == BE:
            raise DomainError("BE occupation requires eps(k) > mu")
        out[~pos] = 1.0 / (np.exp(w[~pos]) + 1.0)
    return _scalar_out(out, scalar)


def _log_weight_from_w(w, sigma):
    """-sigma * log(1 - sigma e^{-w}), the pressure integrand factor."""
    w, scalar = _scalar_in(w)
    if sigma == FD:
        out = np.empty_like(w)
        pos = w >= 0
        out[pos] = np.log1p(np.exp(-w[pos]))
        out[~pos] = -w[~pos] + np.log1p(np.exp(w[~pos]))
        return _scalar_out(out, scalar)
    if np.any(w < 0):
        raise DomainError("BE pressure requires eps(k) > mu")
    with np.errstate(divide="ignore"):
        out = -np.log1p(-np.exp(-w))
    return _scalar_out(out, scalar)


def _susceptibility_from_w(w, beta, sigma):
    """beta e^{-w} / (1 - sigma e^{-w})^2 = d(occupation)/d(mu)."""
    occ = _occ_from_w(w, sigma)
    return beta * occ * (1.0 + sigma * occ)


def occupation(k, state: ThermoState, disp: DispersionRelation):
    """Mean occupation 1 / (e^{beta (eps(k) - mu)} - sigma).

    Raises ``DomainError`` for BE if eps(k) <= mu (invalid chemical
    potential for the mode).
    """
    w = state.beta * (np.asarray(disp.evaluate(k), dtype=float) - state.mu)
    if state.sigma == BE and np.any(w <= 0):
        raise DomainError("BE requires eps(k) - mu > 0")
    return _occ_from_w(w if w.ndim else float(w), state.sigma)


# ---------------------------------------------------------------------------
# adaptive radial quadrature
# ---------------------------------------------------------------------------

def _surface_area(d: int) -> float:
    """Area of the unit sphere S^{d-1} (2 for d = 1)."""
    return float(2.0 * math.pi ** (d / 2.0) / gamma_fn(d / 2.0))


def _thermal_wavevector(beta: float, disp: DispersionRelation) -> float:
    """k where beta * eps(k) = 1, locating the thermal scale."""
    f = lambda k: beta * float(disp.evaluate(k)) - 1.0
    hi = 1.0
    for _ in range(200):
        if f(hi) > 0:
            break
        hi *= 2.0
    else:
        raise AccuracyError("dispersion does not reach the thermal scale")
    lo = hi / 2.0
    while f(lo) > 0 and lo > 1e-300:
        lo /= 2.0
    if f(lo) > 0:
        return hi
    return brentq(f, lo, hi, xtol=1e-14, rtol=1e-12)


def _radial_quad(radial_f, beta, disp, tol, substitute_origin=False):
    """Adaptive quadrature of ``int_0^inf k^{d-1} radial_f(k) dk``.

    Panels split at the thermal wavevector, then extended geometrically until
    the integrand falls below 1e-16 of the running total.  With
    ``substitute_origin`` the first panel is integrated in t = sqrt(k),
    which regularizes the BE occupation divergence for gamma = 2 dispersions
    near condensation.
    """
    d = disp.dimension
    weight = lambda k: k ** (d - 1) * radial_f(k)
    k1 = _thermal_wavevector(beta, disp)
    epsrel = max(min(tol * 0.1, 1e-8), 1e-13)

    total = 0.0
    err = 0.0
    with warnings.catch_warnings():
        # the error budget is enforced below; QUADPACK's roundoff chatter
        # near machine precision is redundant
        warnings.simplefilter("ignore", IntegrationWarning)
        if substitute_origin:
            # k = t^2:  int_0^{k1} k^{d-1} f dk = int_0^{sqrt(k1)} 2 t^{2d-1} f(t^2) dt
            g = lambda t: 2.0 * t ** (2 * d - 1) * radial_f(t * t)
            v, e = quad(g, 0.0, math.sqrt(k1), epsabs=0.0, epsrel=epsrel, limit=400)
        else:
            v, e = quad(weight, 0.0, k1, epsabs=0.0, epsrel=epsrel, limit=400)
        total += v
        err += e

        a, b = k1, 8.0 * k1
        for _ in range(60):
            v, e = quad(
                weight, a, b,
                epsabs=max(1e-300, abs(total)) * epsrel, epsrel=epsrel, limit=400,
            )
            total += v
            err += e
            if abs(weight(b)) * b < _TRUNCATION_RATIO * max(abs(total), 1e-300):
                break
            a, b = b, 2.0 * b
        else:
            raise AccuracyError("radial integrand failed to decay within the search range")

    scale = max(abs(total), 1e-300)
    if err > tol * scale:
        raise AccuracyError(
            f"quadrature achieved {err / scale:.3e} relative, requested {tol:.3e}",
            estimate=err,
        )
    return total, err


def _pressure_raw(beta, mu, sigma, disp, tol):
    """Pressure allowing the BE boundary mu = 0 (the mu -> 0- limit)."""
    if sigma == BE and mu > 0:
        raise DomainError("BE pressure requires mu <= 0")
    f = lambda k: _log_weight_from_w(beta * (disp.evaluate(k) - mu), sigma)
    pref = _surface_area(disp.dimension) / (beta * (2.0 * math.pi) ** disp.dimension)
    v, e = _radial_quad(f, beta, disp, tol, substitute_origin=(sigma == BE))
    return pref * v, pref * e


def _density_raw(beta, mu, sigma, disp, tol):
    if sigma == BE and mu > 0:
        raise DomainError("BE density requires mu <= 0")
    if sigma == BE and mu == 0 and disp.dimension <= disp.gamma:
        return math.inf, 0.0
    f = lambda k: _occ_from_w(beta * (disp.evaluate(k) - mu), sigma)
    pref = _surface_area(disp.dimension) / (2.0 * math.pi) ** disp.dimension
    v, e = _radial_quad(f, beta, disp, tol, substitute_origin=(sigma == BE))
    return pref * v, pref * e


def _susceptibility_raw(beta, mu, sigma, disp, tol):
    if sigma == BE and mu >= 0:
        raise DomainError("BE susceptibility requires mu < 0")
    f = lambda k: _susceptibility_from_w(beta * (disp.evaluate(k) - mu), beta, sigma)
    pref = _surface_area(disp.dimension) / (2.0 * math.pi) ** disp.dimension
    v, e = _radial_quad(f, beta, disp, tol, substitute_origin=(sigma == BE))
    return pref * v, pref * e


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------

def pressure(state: ThermoState, disp: DispersionRelation, tol: float = 1e-10) -> float:
    """Grand-canonical pressure p_sigma(mu).

    Adaptive radial quadrature with estimated relative error <= tol;
    raises ``AccuracyError`` (carrying the achieved estimate) otherwise.
    """
    if tol <= 0:
        raise DomainError("tol must be positive")
    v, _ = _pressure_raw(state.beta, state.mu, state.sigma, disp, tol)
    return v


def density(state: ThermoState, disp: DispersionRelation, tol: float = 1e-10) -> float:
    """Average particle density rho_sigma(mu) = dp/dmu."""
    if tol <= 0:
        raise DomainError("tol must be positive")
    v, _ = _density_raw(state.beta, state.mu, state.sigma, disp, tol)
    return v


def equation_of_state(state: ThermoState, disp: DispersionRelation, tol: float = 1e-10) -> EosResult:
    """Pressure and density together, with quadrature error estimates."""
    p, pe = _pressure_raw(state.beta, state.mu, state.sigma, disp, tol)
    r, re = _density_raw(state.beta, state.mu, state.sigma, disp, tol)
    return EosResult(pressure=p, density=r, pressure_error=pe, density_error=re)


def critical_density(
    beta: float,
    disp: DispersionRelation,
    statistics: int = BE,
    tol: float = 1e-10,
) -> float:
    """Maximal normal-fluid density: the mu = 0 BE density.

    Returns ``inf`` when the dimension does not exceed the small-k exponent
    (d <= gamma) and, by convention, for Fermi statistics.
    """
    if beta <= 0:
        raise DomainError("beta must be positive")
    if statistics == FD:
        return math.inf
    if disp.dimension <= disp.gamma:
        return math.inf
    v, _ = _density_raw(beta, 0.0, BE, disp, tol)
    return v


def translated_pressure(
    lam: float,
    state: ThermoState,
    disp: DispersionRelation,
    order: int = 0,
    tol: float = 1e-10,
) -> float:
    """Translated pressure g(lam) = p(mu + lam) - p(mu) and derivatives.

    order 0 returns g(lam); order 1 returns g'(lam) = rho(mu + lam);
    order 2 returns g''(lam) = (d rho / d mu)(mu + lam).

    For BE, g(lam) = inf for lam > -mu (returned as a sentinel, order 0
    only); at lam = -mu order 0 returns the finite limit p(0) - p(mu) while
    orders 1 and 2 raise ``DomainError``.
    """
    if order not in (0, 1, 2):
        raise DomainError("order must be 0, 1 or 2")
    beta, mu, sigma = state.beta, state.mu, state.sigma
    mu_eff = mu + lam
    if sigma == BE and mu_eff >= 0:
        if order == 0:
            if mu_eff > 0:
                return math.inf
            # lam = -mu: finite limit of g from below
        else:
            raise DomainError("BE derivatives of g require lam < -mu")
    if order == 0:
        p_shift, _ = _pressure_raw(beta, mu_eff, sigma, disp, tol)
        p_ref, _ = _pressure_raw(beta, mu, sigma, disp, tol)
        return p_shift - p_ref
    if order == 1:
        v, _ = _density_raw(beta, mu_eff, sigma, disp, tol)
        return v
    v, _ = _susceptibility_raw(beta, mu_eff, sigma, disp, tol)
    return v
