"""Finite periodic box: mode occupations, exact particle-number law, sampling.

The dual lattice of an ell-sided periodic box is (2 pi Z / ell)^d.  Each
mode is occupied independently: Bernoulli for FD, geometric for BE, so the
total particle number is an exact convolution and can also be sampled
mode by mode.  Modes are grouped by energy shells (isotropic dispersion),
truncated where the mean occupation falls below a floor, with the
discarded mass certified against an integral bound.

The condensation experiment tunes the chemical potential so the box holds
a target density above the critical one and compares the law of N/ell^d
with the limiting shifted exponential.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq
from scipy.stats import binom as _binom, nbinom as _nbinom

from .dispersion import DispersionRelation
from .errors import AccuracyError, DomainError, ResourceError
from .thermo import BE, FD, ThermoState, critical_density, _occ_from_w, _log_weight_from_w, _surface_area

__all__ = [
    "ModeLattice",
    "box_pressure",
    "box_log_pgf",
    "mean_density",
    "box_pmf",
    "solve_lambda_V",
    "sample_NV",
    "kac_test",
    "KacResult",
]

_OCC_FLOOR = 1e-12
_TAIL_BUDGET = 1e-9          # discarded mass, relative to retained
# kept well under the 1e-14 budget so the generating-function identity
# survives the zeta^n amplification of any dropped mass
_PMF_TAIL = 1e-17
_MODE_BUDGET = 100_000


@dataclass(frozen=True)
class ModeLattice:
    """Dual lattice of a periodic box, grouped by energy shells.

    ``energies`` and ``multiplicities`` describe the retained shells;
    ``tilt_ceiling`` is the largest chemical-potential shift the truncation
    certifiably covers (0 - mu for BE: every admissible tilt).
    """

    state: ThermoState
    disp: DispersionRelation
    ell: float
    energies: np.ndarray = field(repr=False)
    multiplicities: np.ndarray = field(repr=False)
    discarded_mass: float = 0.0
    tilt_ceiling: float = math.inf
    seed: int | None = None

    @property
    def dimension(self) -> int:
        return self.disp.dimension

    @property
    def volume(self) -> float:
        return self.ell ** self.dimension

    @property
    def mode_count(self) -> int:
        return int(np.sum(self.multiplicities))

    def occupations(self, lam: float = 0.0) -> np.ndarray:
        """Per-shell mean occupations at chemical potential mu + lam."""
        self._check_tilt(lam)
        w = self.state.beta * (self.energies - (self.state.mu + lam))
        return _occ_from_w(w, self.state.sigma)

    def _check_tilt(self, lam: float) -> None:
        mu_eff = self.state.mu + lam
        if self.state.sigma == BE and mu_eff >= 0.0:
            raise DomainError("BE box requires mu + lam < 0 (ground mode at 0)")
        if lam > self.tilt_ceiling:
            raise DomainError(
                f"tilt {lam} exceeds the truncation ceiling {self.tilt_ceiling}; "
                "rebuild the lattice with more headroom"
            )

    @classmethod
    def build(
        cls,
        state: ThermoState,
        disp: DispersionRelation,
        ell: float,
        occupation_floor: float = _OCC_FLOOR,
        fd_tilt_headroom: float | None = None,
        seed: int | None = None,
    ) -> "ModeLattice":
        """Enumerate dual-lattice shells with occupation above the floor.

        Truncation is decided at the least favourable admissible potential:
        mu -> 0- for BE (covers every tilt), mu + headroom for FD (default
        headroom 4 / beta).  The discarded mean occupation is certified
        below 1e-9 of the retained total via an integral tail bound; the
        floor is lowered automatically if the budget fails.
        """
        if ell <= 0:
            raise DomainError("box side must be positive")
        d = disp.dimension
        if d not in (1, 2, 3):
            raise DomainError("mode lattices support d = 1, 2, 3")
        beta = state.beta
        if state.sigma == BE:
            ceiling = -state.mu  # exclusive: mu + lam < 0
            w_trunc = lambda e: beta * e
        else:
            head = 4.0 / beta if fd_tilt_headroom is None else fd_tilt_headroom
            ceiling = head
            w_trunc = lambda e: beta * (e - (state.mu + head))

        floor = occupation_floor
        for _ in range(8):
            lattice = cls._enumerate(state, disp, ell, floor, w_trunc, ceiling, seed)
            retained = float(np.sum(lattice.multiplicities * lattice.occupations(0.0)))
            if lattice.discarded_mass <= _TAIL_BUDGET * max(retained, 1e-300):
                return lattice
            floor *= 1e-3
        raise AccuracyError("mode truncation tail budget not met")

    @classmethod
    def _enumerate(cls, state, disp, ell, floor, w_trunc, ceiling, seed):
        d = disp.dimension
        sigma = state.sigma
        dk = 2.0 * math.pi / ell

        def occ_trunc(e):
            w = w_trunc(np.asarray(e, dtype=float))
            return _occ_from_w(w if w.ndim else float(w), sigma)

        # radius where the truncation-potential occupation falls below floor
        k_cut = dk
        for _ in range(200):
            if occ_trunc(float(disp.evaluate(k_cut))) < floor:
                break
            k_cut *= 2.0
        else:
            raise AccuracyError("occupation does not fall below the floor")
        n_max = int(math.ceil(1.25 * k_cut / dk)) + 1
        if (2 * n_max + 1) ** d > 2e8:
            raise ResourceError("dual-lattice enumeration too large")

        span = np.arange(-n_max, n_max + 1)
        if d == 1:
            n2 = span ** 2
        elif d == 2:
            a, b = np.meshgrid(span, span, indexing="ij")
            n2 = (a * a + b * b).ravel()
        else:
            a, b, c = np.meshgrid(span, span, span, indexing="ij")
            n2 = (a * a + b * b + c * c).ravel()
        shells, counts = np.unique(n2, return_counts=True)
        energies = np.asarray(disp.evaluate(dk * np.sqrt(shells.astype(float))), dtype=float)
        keep = occ_trunc(energies) >= floor
        energies, counts = energies[keep], counts[keep]
        order = np.argsort(energies)
        energies, counts = energies[order], counts[order]

        # integral bound on the discarded mean occupation (mode density
        # (ell/2pi)^d, integrand decreasing beyond the cutoff, one lattice
        # diagonal of safety margin)
        k_lo = max(dk, k_cut - dk * math.sqrt(d))
        tail_f = lambda k: k ** (d - 1) * occ_trunc(float(disp.evaluate(k)))
        tail, _ = quad(tail_f, k_lo, 16.0 * k_cut, limit=400)
        discarded = (ell / (2.0 * math.pi)) ** d * _surface_area(d) * tail

        return cls(
            state=state,
            disp=disp,
            ell=float(ell),
            energies=energies,
            multiplicities=counts.astype(np.int64),
            discarded_mass=float(discarded),
            tilt_ceiling=ceiling,
            seed=seed,
        )


def box_pressure(lat: ModeLattice) -> float:
    """(beta ell^d)^{-1} log Xi, the finite-volume grand-canonical pressure."""
    st = lat.state
    w = st.beta * (lat.energies - st.mu)
    terms = _log_weight_from_w(w, st.sigma)
    return float(np.sum(lat.multiplicities * terms)) / (st.beta * lat.volume)


def box_log_pgf(lat: ModeLattice, zeta: float) -> float:
    """log <zeta^{N}> as a mode sum (the product route to the same object)."""
    st = lat.state
    t = np.exp(-st.beta * (lat.energies - st.mu))
    if st.sigma == FD:
        terms = np.log1p(zeta * t) - np.log1p(t)
    else:
        if np.any(zeta * t >= 1.0):
            return math.inf
        terms = -(np.log1p(-zeta * t) - np.log1p(-t))
    return float(np.sum(lat.multiplicities * terms))


def mean_density(lat: ModeLattice, lam: float = 0.0) -> float:
    """Mean particle density of the box at chemical potential mu + lam."""
    occ = lat.occupations(lam)
    return float(np.sum(lat.multiplicities * occ)) / lat.volume


def box_pmf(lat: ModeLattice, n_max: int | None = None, lam: float = 0.0) -> np.ndarray:
    """Exact pmf of the box particle number by shell-wise convolution.

    Shells convolve as binomial (FD) or negative-binomial (BE) blocks;
    the truncated tail mass stays below 1e-14.  Raises ``ResourceError``
    above 100000 retained modes (sample instead).
    """
    if lat.mode_count > _MODE_BUDGET:
        raise ResourceError("too many modes for exact convolution; use sampling")
    lat._check_tilt(lam)
    st = lat.state
    t = np.exp(-st.beta * (lat.energies - (st.mu + lam)))
    pmf = np.array([1.0])
    for ti, mult in zip(t, lat.multiplicities):
        if st.sigma == FD:
            p = ti / (1.0 + ti)
            if p < 1e-18:
                continue
            block = _binom.pmf(np.arange(mult + 1), int(mult), p)
        else:
            q = ti
            if q < 1e-18:
                continue
            r = int(mult)
            mean = r * q / (1.0 - q)
            std = math.sqrt(r * q) / (1.0 - q)
            hi = int(mean + 10.0 * std) + 20
            while _nbinom.sf(hi, r, 1.0 - q) > 1e-18:
                hi *= 2
            block = _nbinom.pmf(np.arange(hi + 1), r, 1.0 - q)
        pmf = np.convolve(pmf, block)
        tail = np.cumsum(pmf[::-1])[::-1]
        cut = int(np.searchsorted(-tail, -_PMF_TAIL))
        pmf = pmf[: max(cut, 1)]
        if n_max is not None and pmf.size > n_max + 1:
            pmf = pmf[: n_max + 1]
    return pmf


def solve_lambda_V(lat: ModeLattice, a: float, tol: float = 1e-10) -> float:
    """Tilt lam_V with box mean density a: rho^V(mu + lam_V) = a.

    For BE the solution exists for every a > 0 (the ground mode diverges
    as mu + lam -> 0-), including the condensation regime a > rho_c.
    """
    if a <= 0:
        raise DomainError("target density must be positive")
    if tol <= 0:
        raise DomainError("tol must be positive")
    st = lat.state
    f = lambda lam: mean_density(lat, lam) - a

    if st.sigma == BE:
        # the ground-mode occupation diverges as mu + lam -> 0-, so a point
        # just below the edge dominates any sane target density
        hi = -st.mu - 1e-13 * max(1.0, -st.mu)
        if f(hi) < 0:
            raise AccuracyError("BE density bracket failed below the domain edge")
    else:
        hi = 1.0 / st.beta
        while f(hi) < 0:
            hi *= 2.0
            if hi > lat.tilt_ceiling:
                raise DomainError("target density needs a tilt beyond the lattice ceiling")
    lo = -1.0 / st.beta
    while f(lo) > 0:
        lo *= 2.0
        if -lo > 2.0 ** 40 * st.beta:
            raise AccuracyError("density bracket failed on the dilute side")
    lam = brentq(f, lo, hi, xtol=1e-14, rtol=9e-16, maxiter=300)
    if abs(f(lam)) > tol * a:
        raise AccuracyError("lambda_V residual above tolerance", estimate=abs(f(lam)))
    return lam


def sample_NV(
    lat: ModeLattice,
    lam: float,
    samples: int,
    seed: "int | np.random.SeedSequence | None" = None,
) -> np.ndarray:
    """Seeded independent draws of N/ell^d under the tilted box law.

    Replica i uses the spawned child stream i of ``seed`` (an integer or a
    prepared ``SeedSequence``); geometric draws are inverse-CDF transforms
    of single uniforms, Bernoulli draws are threshold tests, so identical
    seeds reproduce identical samples.
    """
    if samples < 1:
        raise DomainError("need at least one sample")
    lat._check_tilt(lam)
    if seed is None:
        seed = lat.seed
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    st = lat.state
    t = np.exp(-st.beta * (lat.energies - (st.mu + lam)))
    if st.sigma == FD:
        params = np.repeat(t / (1.0 + t), lat.multiplicities)
    else:
        if np.any(t >= 1.0):
            raise DomainError("BE tilt puts a mode at or beyond divergence")
        params = np.repeat(t, lat.multiplicities)
        log_q = np.log(params)
    children = seed.spawn(samples)
    out = np.empty(samples)
    for i, child in enumerate(children):
        u = np.random.default_rng(child).random(params.size)
        if st.sigma == FD:
            out[i] = np.count_nonzero(u < params)
        else:
            out[i] = float(np.sum(np.floor(np.log1p(-u) / log_q)))
    return out / lat.volume


def samples_to_csv(samples: np.ndarray, path) -> None:
    """Write one sampled density per row."""
    with open(path, "w") as fh:
        fh.write("# sampled box densities N/ell^d\n")
        for x in samples:
            fh.write(f"{float(x)!r}\n")


def pmf_to_csv(pmf: np.ndarray, path) -> None:
    """Write (n, P(N = n)) rows for a box particle-number law."""
    with open(path, "w") as fh:
        fh.write("# box particle-number law: n, probability\n")
        for n, p in enumerate(pmf):
            fh.write(f"{n},{float(p)!r}\n")


@dataclass(frozen=True)
class KacResult:
    """Condensation-regime comparison with the limiting shifted exponential."""

    ks_distance: float
    lambda_v: float
    location: float          # rho_c of the infinite gas
    scale: float             # a - rho_c
    sample_mean: float
    sample_variance: float
    box_normal_density: float
    samples: np.ndarray = field(repr=False)
    empirical_cdf: np.ndarray = field(repr=False)   # columns: x, F_emp(x)
    target_cdf: np.ndarray = field(repr=False)      # columns: x, F_target(x)

    def summary_to_json(self, path) -> None:
        """Write the scalar summary (everything but the sample tables)."""
        import json

        payload = {
            "ks_distance": self.ks_distance,
            "lambda_v": self.lambda_v,
            "location": self.location,
            "scale": self.scale,
            "sample_mean": self.sample_mean,
            "sample_variance": self.sample_variance,
            "box_normal_density": self.box_normal_density,
            "n_samples": int(self.samples.size),
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, sort_keys=True, indent=2)
            fh.write("\n")


def kac_test(lat: ModeLattice, a: float, samples: int, seed: int | None = None) -> KacResult:
    """Sample N/ell^3 at the density-a tilt and compare with the Kac law.

    The reference law is the exponential of mean a - rho_c shifted to
    rho_c (density (a - rho_c)^{-1} exp(-(x - rho_c)/(a - rho_c)) on
    [rho_c, inf)); the Kolmogorov-Smirnov distance is taken between it and
    the empirical law.  Requires d = 3, BE, finite rho_c and a > rho_c.
    """
    if lat.dimension != 3 or lat.state.sigma != BE:
        raise DomainError("the condensation test is defined for BE in d = 3")
    rho_c = critical_density(lat.state.beta, lat.disp)
    if not math.isfinite(rho_c):
        raise DomainError("critical density must be finite")
    if a <= rho_c:
        raise DomainError("target density must exceed the critical density")

    lam_v = solve_lambda_V(lat, a)
    xs = np.sort(sample_NV(lat, lam_v, samples, seed))
    scale = a - rho_c
    target = np.where(xs >= rho_c, 1.0 - np.exp(-np.maximum(xs - rho_c, 0.0) / scale), 0.0)
    n = xs.size
    ecdf_hi = np.arange(1, n + 1) / n
    ecdf_lo = np.arange(0, n) / n
    ks = float(max(np.max(np.abs(ecdf_hi - target)), np.max(np.abs(ecdf_lo - target))))

    occ = lat.occupations(lam_v)
    normal = float(np.sum(lat.multiplicities[1:] * occ[1:])) / lat.volume

    return KacResult(
        ks_distance=ks,
        lambda_v=lam_v,
        location=rho_c,
        scale=scale,
        sample_mean=float(xs.mean()),
        sample_variance=float(xs.var()),
        box_normal_density=normal,
        samples=xs,
        empirical_cdf=np.column_stack([xs, ecdf_hi]),
        target_cdf=np.column_stack([xs, target]),
    )
