"""Legendre-transform machinery for density large deviations.

The translated pressure g is convex and increasing on its domain
(all of R for FD, (-inf, -mu) for BE).  The rate function is

    f(x) = inf_lam ( g(lam) - lam x ) = g(lam_o) - lam_o x,

with the minimizer lam_o determined by g'(lam_o) = x for densities between
0 and the critical density, and pinned at -mu above it (Bose condensation
turns f into an affine segment with slope mu there).  f <= 0 with maximum
0 at the mean density.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.optimize import brentq

from .dispersion import DispersionRelation
from .errors import AccuracyError, DomainError
from .thermo import (
    FD,
    ThermoState,
    critical_density,
    density,
    pressure,
    translated_pressure,
)

__all__ = ["RateContext", "RatePoint", "minimizer", "rate_value", "interval_rate"]

_BRACKET_LIMIT_POW = 40  # expanding search stops at lam = -2^40 / beta


@dataclass(frozen=True)
class RateContext:
    """Frozen inputs for rate-function evaluations.

    rho_bar is the mean density g'(0); rho_c may be ``inf``;
    lambda_upper is the right edge of the domain of g (inf for FD, -mu
    for BE).
    """

    state: ThermoState
    disp: DispersionRelation
    rho_bar: float
    rho_c: float
    lambda_upper: float
    tol: float = 1e-10

    @classmethod
    def build(cls, state: ThermoState, disp: DispersionRelation, tol: float = 1e-10) -> "RateContext":
        rho_bar = density(state, disp, tol)
        rho_c = critical_density(state.beta, disp, statistics=state.sigma, tol=tol)
        if not rho_bar < rho_c:
            raise DomainError("mean density must lie below the critical density")
        lam_up = math.inf if state.sigma == FD else -state.mu
        return cls(state=state, disp=disp, rho_bar=rho_bar, rho_c=rho_c,
                   lambda_upper=lam_up, tol=tol)

    def g(self, lam: float) -> float:
        return translated_pressure(lam, self.state, self.disp, order=0, tol=self.tol)

    def gprime(self, lam: float) -> float:
        return translated_pressure(lam, self.state, self.disp, order=1, tol=self.tol)


@dataclass(frozen=True)
class RatePoint:
    """Rate-function value at density x, with the minimizing tilt.

    lam0 and f may be ``-inf`` sentinels (x <= 0 and x < 0 respectively).
    """

    x: float
    lam0: float
    f: float


def minimizer(x: float, ctx: RateContext, tol: float = 1e-10) -> float:
    """Tilt lam_o minimizing g(lam) - lam x.

    -inf for x <= 0; the unique root of g'(lam) = x for 0 < x < rho_c
    (residual below tol * max(x, rho_bar)); -mu for x >= rho_c (BE).
    """
    if tol <= 0:
        raise DomainError("tol must be positive")
    if x <= 0:
        return -math.inf
    if x >= ctx.rho_c:
        return -ctx.state.mu

    beta = ctx.state.beta
    gp = ctx.gprime

    # left bracket end: double from -1/beta until g' drops below x
    left = -1.0 / beta
    while gp(left) > x:
        left *= 2.0
        if -left > 2.0 ** _BRACKET_LIMIT_POW / beta:
            raise AccuracyError("no bracket: g' stays above x down to the search limit")

    # right bracket end
    if x <= ctx.rho_bar:
        right = 0.0
    elif ctx.state.sigma == FD:
        right = 1.0 / beta
        while gp(right) < x:
            right *= 2.0
            if right > 2.0 ** _BRACKET_LIMIT_POW / beta:
                raise AccuracyError("no bracket: g' stays below x up to the search limit")
    else:
        # approach -mu from below; g' -> rho_c > x guarantees success
        gap = ctx.lambda_upper - left
        right = ctx.lambda_upper - 0.5 * gap
        for _ in range(200):
            if gp(right) >= x:
                break
            right = ctx.lambda_upper - 0.5 * (ctx.lambda_upper - right)
        else:
            raise AccuracyError("no bracket below the BE domain edge")

    if right == left:
        return right
    root = brentq(lambda lam: gp(lam) - x, left, right, xtol=1e-13, rtol=9e-16, maxiter=300)
    residual = abs(gp(root) - x)
    if residual > tol * max(x, ctx.rho_bar):
        raise AccuracyError(
            f"minimizer residual {residual:.3e} above tolerance", estimate=residual
        )
    return root


def rate_value(x: float, ctx: RateContext, tol: float = 1e-10) -> RatePoint:
    """Rate function f(x) = inf_lam (g(lam) - lam x) with its minimizer.

    f = -inf for x < 0; f(0) = -p(mu) (the lam -> -inf limit); the affine
    condensation branch p(0) - p(mu) + mu x applies for x >= rho_c (BE).
    """
    if x < 0:
        return RatePoint(x=x, lam0=-math.inf, f=-math.inf)
    if x == 0:
        # lim_{lam -> -inf} g(lam) = -p(mu), and lam * x = 0 on this ray
        return RatePoint(x=x, lam0=-math.inf, f=-pressure(ctx.state, ctx.disp, ctx.tol))
    if x >= ctx.rho_c:
        g_edge = translated_pressure(ctx.lambda_upper, ctx.state, ctx.disp, order=0, tol=tol)
        mu = ctx.state.mu
        return RatePoint(x=x, lam0=-mu, f=g_edge + mu * x)
    lam0 = minimizer(x, ctx, tol)
    f = ctx.g(lam0) - lam0 * x
    return RatePoint(x=x, lam0=lam0, f=f)


def interval_rate(a: float, b: float, ctx: RateContext, tol: float = 1e-10) -> float:
    """sup of f over [a, b], exploiting concavity of f (maximum at rho_bar)."""
    if a > b:
        raise DomainError("interval requires a <= b")
    if a <= ctx.rho_bar <= b:
        return 0.0
    if b < ctx.rho_bar:
        return rate_value(b, ctx, tol).f
    return rate_value(a, ctx, tol).f
