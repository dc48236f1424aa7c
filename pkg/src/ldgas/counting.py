"""Counting statistics of particles in an interval of the infinite gas.

The number of particles in [0, L] is governed by the compression of the
occupation operator to the interval.  Discretizing on the kernel grid
(Nystrom, uniform weights h) gives a dense symmetric matrix whose
eigenvalues kappa_i determine everything:

  * the generating function  <zeta^N> = prod (1 + (zeta-1) kappa_i)^{-sigma},
  * the exact law of N as an independent sum of Bernoulli(kappa_i) (FD)
    or geometric factors with q_i = |kappa_i| / (1 + |kappa_i|) (BE),
  * exponential tilts, cumulants and large-deviation probabilities.

Desk scale fixes d = 1: the dense eigensolve is the cost ceiling.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.integrate import quad

from .errors import AccuracyError, DomainError
from .kernel import KernelTable
from .thermo import BE, FD, translated_pressure

__all__ = [
    "CountingMatrix",
    "CountingDistribution",
    "build_counting_matrix",
    "log_generating_function",
    "lambda_max",
    "trace_moments",
    "counting_pmf",
    "ldp_log_prob",
    "cumulants_clt",
    "tilted_moments",
    "chebyshev_bound",
]

_SPECTRUM_TOL_FACTOR = 1e-8   # discretization-noise allowance, times ||K||
# tail mass stays well under the 1e-14 budget; the headroom keeps the
# zeta-transform identity sharp, since dropped mass is amplified by zeta^n
_PMF_TAIL = 1e-17
_FACTOR_TAIL = 1e-21


@dataclass(frozen=True)
class CountingMatrix:
    """Nystrom discretization of the interval-compressed occupation operator."""

    kernel: KernelTable
    length: float
    h: float
    matrix: np.ndarray = field(repr=False)
    eigenvalues: np.ndarray = field(repr=False)

    @property
    def statistics(self) -> int:
        return self.kernel.state.sigma

    @property
    def beta(self) -> float:
        return self.kernel.state.beta

    @property
    def volume(self) -> float:
        return self.length

    @property
    def fugacity(self) -> float:
        return self.kernel.state.fugacity

    @property
    def spectral_bound(self) -> float:
        """Continuum spectrum edge: 1/(1 + 1/z) for FD, 1/(1 - 1/z) for BE."""
        z = self.fugacity
        if self.statistics == FD:
            return 1.0 / (1.0 + 1.0 / z)
        return 1.0 / (1.0 - 1.0 / z)

    @property
    def norm(self) -> float:
        return float(np.max(np.abs(self.eigenvalues)))

    def spectrum_to_csv(self, path) -> None:
        """Write the sorted eigenvalues, one per row."""
        with open(path, "w") as fh:
            fh.write("# counting-matrix spectrum: index, kappa\n")
            for i, kappa in enumerate(self.eigenvalues):
                fh.write(f"{i},{float(kappa)!r}\n")


def build_counting_matrix(kernel: KernelTable, length: float, h: float | None = None) -> CountingMatrix:
    """Assemble K[i, j] = h d((i - j) h) on [0, L] and diagonalize it.

    Requires the kernel grid to subdivide h, L to be a multiple of h, and
    L within the kernel extent (the kernel has decayed at range L).  The
    eigenvalues must respect the continuum spectrum containment up to
    1e-8 ||K||; a violation raises ``AccuracyError`` advising a smaller h.
    """
    if kernel.dimension != 1:
        raise DomainError("counting matrices are built at desk scale, d = 1 only")
    h = kernel.h if h is None else h
    stride = h / kernel.h
    if abs(stride - round(stride)) > 1e-9:
        raise DomainError("h must be an integer multiple of the kernel grid spacing")
    stride = int(round(stride))
    n = length / h
    if abs(n - round(n)) > 1e-9:
        raise DomainError("h must divide the interval length")
    n = int(round(n))
    if n < 1:
        raise DomainError("interval shorter than one grid cell")
    if length > kernel.extent:
        raise DomainError("interval exceeds the kernel extent guard")

    idx = np.arange(n)
    offsets = np.abs(idx[:, None] - idx[None, :]) * stride
    K = h * kernel.at_offsets(offsets)
    eig = np.linalg.eigvalsh(K)

    m = CountingMatrix(kernel=kernel, length=float(length), h=float(h), matrix=K, eigenvalues=eig)
    tol = _SPECTRUM_TOL_FACTOR * m.norm
    edge = m.spectral_bound
    if m.statistics == FD:
        ok = (eig.min() >= -tol) and (eig.max() <= edge + tol)
    else:
        ok = (eig.min() >= edge - tol) and (eig.max() <= tol)
    if not ok:
        raise AccuracyError(
            "eigenvalues violate the continuum spectrum containment; "
            "use a smaller grid spacing h"
        )
    return m


def lambda_max(m: CountingMatrix) -> float:
    """Largest tilt with a finite generating function.

    Infinite for FD.  For BE it is beta^{-1} log(1 - 1/kappa_min) with
    kappa_min the most negative eigenvalue, decreasing to -mu as the
    interval grows.  A degenerate spectrum (kappa_min >= 0) returns inf
    with a warning.
    """
    if m.statistics == FD:
        return math.inf
    kappa_min = float(m.eigenvalues.min())
    if kappa_min >= 0.0:
        warnings.warn("degenerate BE spectrum: no negative eigenvalue", stacklevel=2)
        return math.inf
    return math.log1p(-1.0 / kappa_min) / m.beta


def log_generating_function(m: CountingMatrix, lam: float) -> float:
    """(1/|I|) log <e^{beta lam N}>, from the eigenvalue product.

    BE tilts at or beyond ``lambda_max`` return the ``inf`` sentinel.
    """
    zt = math.expm1(m.beta * lam)
    if m.statistics == BE and lam >= lambda_max(m):
        return math.inf
    terms = np.log1p(zt * m.eigenvalues)
    total = float(np.sum(terms))
    return (-m.statistics) * total / m.volume


class MomentComparison(NamedTuple):
    order: int
    empirical: float
    target: float
    rel_gap: float


def trace_moments(m: CountingMatrix, m_max: int) -> list[MomentComparison]:
    """Normalized traces |I|^{-1} tr K^m against their infinite-volume targets.

    The target of order m is (2 pi)^{-1} int (symbol)^m dk (d = 1 radial
    quadrature); gaps close like the surface-to-volume ratio.
    """
    if not 1 <= m_max <= 8:
        raise DomainError("m_max must lie in 1..8")
    sym = m.kernel.symbol
    out = []
    for order in range(1, m_max + 1):
        emp = float(np.sum(m.eigenvalues ** order)) / m.volume
        tgt = (1.0 / math.pi) * quad(
            lambda k: sym(k) ** order, 0.0, _symbol_cutoff(m), limit=400
        )[0]
        gap = abs(emp - tgt) / max(abs(tgt), 1e-300)
        out.append(MomentComparison(order, emp, tgt, gap))
    return out


def _symbol_cutoff(m: CountingMatrix) -> float:
    """k beyond which the symbol is negligible for moment quadrature."""
    sym = m.kernel.symbol
    k = 1.0
    for _ in range(60):
        if abs(sym(k)) < 1e-20:
            return k
        k *= 2.0
    return k


@dataclass(frozen=True)
class CountingDistribution:
    """Exact law of the interval particle number.

    ``pmf[n]`` is P(N = n) for n = 0..len-1 (FD support is the matrix
    rank; BE support is truncated at tail mass ``tail_mass`` < 1e-14).
    Cumulants come from the per-factor closed forms, not from the pmf.
    """

    pmf: np.ndarray = field(repr=False)
    mean: float = 0.0
    variance: float = 0.0
    cumulants: tuple = (0.0, 0.0, 0.0, 0.0)
    tail_mass: float = 0.0
    volume: float = 1.0
    beta: float = 1.0

    def pgf(self, zeta: float) -> float:
        """Probability generating function sum_n pmf[n] zeta^n."""
        return float(np.polynomial.polynomial.polyval(zeta, self.pmf))

    def to_csv(self, path) -> None:
        """Write (n, P(N = n)) rows."""
        with open(path, "w") as fh:
            fh.write("# particle-number law: n, probability\n")
            for n, p in enumerate(self.pmf):
                fh.write(f"{n},{float(p)!r}\n")


def _clamped_probabilities(m: CountingMatrix) -> np.ndarray:
    """Bernoulli parameters from FD eigenvalues, clamped within noise."""
    tol = _SPECTRUM_TOL_FACTOR * m.norm
    kap = m.eigenvalues.copy()
    bad = (kap < -tol) | (kap > 1.0 + tol)
    if np.any(bad):
        raise AccuracyError("FD eigenvalue outside [0, 1] beyond noise tolerance")
    return np.clip(kap, 0.0, 1.0)


def _geometric_parameters(m: CountingMatrix) -> np.ndarray:
    """q_i = |kappa_i| / (1 + |kappa_i|) from BE eigenvalues."""
    tol = _SPECTRUM_TOL_FACTOR * m.norm
    kap = m.eigenvalues.copy()
    if np.any(kap > tol) or np.any(kap < m.spectral_bound - tol):
        raise AccuracyError("BE eigenvalue outside the spectral interval beyond noise")
    kap = np.minimum(kap, 0.0)
    return -kap / (1.0 - kap)


def _convolve_truncated(pmf, factor):
    out = np.convolve(pmf, factor)
    # drop a negligible far tail to keep BE supports finite
    tail = np.cumsum(out[::-1])[::-1]
    cut = np.searchsorted(-tail, -_PMF_TAIL)  # first index with tail < _PMF_TAIL
    return out[: max(cut, 1)], float(tail[cut]) if cut < out.size else 0.0


def counting_pmf(m: CountingMatrix) -> CountingDistribution:
    """Exact pmf of N by sequential convolution of per-eigenvalue factors."""
    beta = m.beta
    if m.statistics == FD:
        probs = _clamped_probabilities(m)
        pmf = np.array([1.0])
        for p in probs:
            if p == 0.0:
                continue
            pmf = np.convolve(pmf, [1.0 - p, p])
        tail = 0.0
        k1 = float(np.sum(probs))
        k2 = float(np.sum(probs * (1 - probs)))
        k3 = float(np.sum(probs * (1 - probs) * (1 - 2 * probs)))
        k4 = float(np.sum(probs * (1 - probs) * (1 - 6 * probs * (1 - probs))))
    else:
        qs = _geometric_parameters(m)
        pmf = np.array([1.0])
        tail = 0.0
        for q in qs:
            if q < _FACTOR_TAIL:
                continue
            support = int(math.ceil(math.log(_FACTOR_TAIL) / math.log(q))) + 1
            factor = (1.0 - q) * q ** np.arange(support)
            pmf, dropped = _convolve_truncated(pmf, factor)
            tail += dropped
        u = qs / (1.0 - qs)  # per-factor mean
        k1 = float(np.sum(u))
        k2 = float(np.sum(u + u ** 2))
        k3 = float(np.sum(u + 3 * u ** 2 + 2 * u ** 3))
        k4 = float(np.sum((1 + 6 * u + 6 * u ** 2) * (u + u ** 2)))
    return CountingDistribution(
        pmf=pmf,
        mean=k1,
        variance=k2,
        cumulants=(k1, k2, k3, k4),
        tail_mass=tail,
        volume=m.volume,
        beta=beta,
    )


def ldp_log_prob(
    m: CountingMatrix,
    a: float,
    b: float,
    dist: CountingDistribution | None = None,
) -> float:
    """(beta |I|)^{-1} log P(N in |I| [a, b]) from the exact pmf.

    Returns ``-inf`` when no integer lies in the window (or the mass is
    entirely in the truncated tail).
    """
    if a > b:
        raise DomainError("interval requires a <= b")
    if dist is None:
        dist = counting_pmf(m)
    vol = dist.volume
    lo = max(0, int(math.ceil(a * vol - 1e-9)))
    hi = int(math.floor(b * vol + 1e-9))
    if hi < lo:
        return -math.inf
    mass = float(np.sum(dist.pmf[lo : hi + 1]))
    if mass <= 0.0:
        return -math.inf
    return math.log(mass) / (dist.beta * vol)


class CltReport(NamedTuple):
    """Cumulants of (N - <N>) / sqrt(|I|) with the Gaussian-limit targets."""

    values: tuple          # C(1)..C(4)
    variance_target: float # beta^{-1} d rho / d mu, the k = 2 limit


def cumulants_clt(m: CountingMatrix, dist: CountingDistribution | None = None) -> CltReport:
    """Scaled cumulants C(k) = kappa_k(N) / |I|^{k/2}, k = 1..4.

    C(1) is exactly 0 (centered variable); C(2) converges to the
    compressibility beta^{-1} d rho / d mu; higher orders vanish in the
    limit.
    """
    if dist is None:
        dist = counting_pmf(m)
    vol = dist.volume
    _, k2, k3, k4 = dist.cumulants
    target = translated_pressure(0.0, m.kernel.state, m.kernel.disp, order=2) / m.beta
    return CltReport(
        values=(0.0, k2 / vol, k3 / vol ** 1.5, k4 / vol ** 2),
        variance_target=target,
    )


def tilted_moments(m: CountingMatrix, lam: float) -> tuple[float, float]:
    """Mean density and beta * variance / |I| under the exponential tilt.

    The tilt maps Bernoulli parameters to zeta kappa / (1 + (zeta-1) kappa)
    and geometric parameters to zeta q; their targets are rho(mu + lam)
    and (d rho / d mu)(mu + lam).
    """
    if m.statistics == BE and lam >= lambda_max(m):
        raise DomainError("tilt at or beyond lambda_max")
    zeta = math.exp(m.beta * lam)
    zt = zeta - 1.0
    if m.statistics == FD:
        p = _clamped_probabilities(m)
        pt = zeta * p / (1.0 + zt * p)
        mean = float(np.sum(pt))
        var = float(np.sum(pt * (1.0 - pt)))
    else:
        q = _geometric_parameters(m) * zeta
        mean = float(np.sum(q / (1.0 - q)))
        var = float(np.sum(q / (1.0 - q) ** 2))
    return mean / m.volume, m.beta * var / m.volume


def chebyshev_bound(m: CountingMatrix, a: float, lam_grid=None) -> float:
    """Exponential-Chebyshev upper bound on (beta|I|)^{-1} log P(N >= a|I|).

    Minimizes phi(lam)/beta - lam a over a grid of admissible tilts; the
    bound holds exactly at every finite size.
    """
    if lam_grid is None:
        top = lambda_max(m)
        hi = 4.0 / m.beta if math.isinf(top) else top * (1.0 - 1e-6)
        lam_grid = np.linspace(0.0, hi, 81)[1:]
    vals = [log_generating_function(m, float(l)) / m.beta - float(l) * a for l in lam_grid]
    return float(min(vals))
