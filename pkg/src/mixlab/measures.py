"""Multi-modal data distributions and spherically symmetric noise measures.

The data class is a finite mixture: one designated far mode (a ball of
radius delta*R at distance R(1+delta) from the origin, optionally joined by
further modes) plus a centred Gaussian bulk carrying the remaining mass.
Noise measures have unnormalised density exp(-H(|x|)) with a power-law
radial profile H(r) = a*r^p, which admits an exact radial sampler: with
s = a*r^p, the radial density becomes Gamma(d/p, 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammainc

from .errors import DomainError, StructuralError
from .rng import Seed, derive, substream

MODE_KINDS = ("uniform-ball", "truncated-gaussian")

# largest Gamma shape d/p the radial sampler accepts
MAX_GAMMA_SHAPE = 1e7


@dataclass(frozen=True)
class RadialProfile:
    """Radial exponent profile H(r) = a * r**p, defined for all r >= 0.

    ``quadratic(a)`` (p = 2) makes exp(-H(|x|)) a centred Gaussian with
    covariance I/(2a); ``power_tail(a, p)`` covers the stretched-exponential
    family with p in (0, 2].
    """

    a: float
    p: float

    def __post_init__(self):
        if not self.a > 0:
            raise StructuralError("profile scale a must be positive")
        if not 0 < self.p <= 2:
            raise StructuralError("profile exponent p must lie in (0, 2]")

    @classmethod
    def quadratic(cls, a: float) -> "RadialProfile":
        return cls(float(a), 2.0)

    @classmethod
    def power_tail(cls, a: float, p: float) -> "RadialProfile":
        return cls(float(a), float(p))

    @property
    def is_quadratic(self) -> bool:
        return self.p == 2.0

    def value(self, r):
        return self.a * np.asarray(r, dtype=float) ** self.p

    def deriv(self, r):
        """dH/dr; for p < 1 this diverges at r = 0 and callers must mask r > 0."""
        return self.a * self.p * np.asarray(r, dtype=float) ** (self.p - 1.0)


@dataclass(frozen=True)
class SphericalMeasure:
    """Rotation-invariant probability measure with density proportional to exp(-H(|x|))."""

    d: int
    profile: RadialProfile

    def __post_init__(self):
        if int(self.d) < 1:
            raise StructuralError("dimension d must be a positive integer")
        object.__setattr__(self, "d", int(self.d))

    def log_density_unnormalized(self, x) -> np.ndarray:
        """Return -H(|x|) for a single point or an (n, d) batch."""
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1)
        return -self.profile.value(r)

    def sample_radii(self, n: int, seed: Seed) -> np.ndarray:
        """Exact radial draws: s = a*r^p is Gamma(d/p, 1), so r = (s/a)^(1/p)."""
        shape = self.d / self.profile.p
        if shape > MAX_GAMMA_SHAPE:
            raise DomainError(
                f"parameter out of supported range: d/p = {shape:.3g} exceeds {MAX_GAMMA_SHAPE:.0e}"
            )
        rng = substream(seed)
        s = rng.gamma(shape, 1.0, size=int(n))
        return (s / self.profile.a) ** (1.0 / self.profile.p)

    def sample(self, n: int, seed: Seed) -> np.ndarray:
        """Draw n points: exact Gamma radius times a uniform direction.

        Deterministic in (n, seed); n = 0 yields an empty (0, d) array.
        """
        n = int(n)
        if n == 0:
            return np.zeros((0, self.d))
        shape = self.d / self.profile.p
        if shape > MAX_GAMMA_SHAPE:
            raise DomainError(
                f"parameter out of supported range: d/p = {shape:.3g} exceeds {MAX_GAMMA_SHAPE:.0e}"
            )
        rng = substream(seed)
        s = rng.gamma(shape, 1.0, size=n)
        r = (s / self.profile.a) ** (1.0 / self.profile.p)
        z = rng.standard_normal((n, self.d))
        z /= np.linalg.norm(z, axis=1, keepdims=True)
        return r[:, None] * z


def projection_norm_samples(pi: SphericalMeasure, k: int, n: int, seed: Seed) -> np.ndarray:
    """Draw n values of |first-k-coordinates| under ``pi``.

    Uses |G_k(x)|^2 = r^2 * u/(u+w) with independent u ~ chi2(k) and
    w ~ chi2(d-k), exact for any rotation-invariant measure.  Costs O(n)
    regardless of d, so very high-dimensional quantiles stay cheap.
    """
    k = int(k)
    if not 1 <= k <= pi.d:
        raise StructuralError(f"projection dimension k={k} must satisfy 1 <= k <= d={pi.d}")
    rng = substream(seed)
    shape = pi.d / pi.profile.p
    if shape > MAX_GAMMA_SHAPE:
        raise DomainError(
            f"parameter out of supported range: d/p = {shape:.3g} exceeds {MAX_GAMMA_SHAPE:.0e}"
        )
    s = rng.gamma(shape, 1.0, size=int(n))
    r = (s / pi.profile.a) ** (1.0 / pi.profile.p)
    if k == pi.d:
        return r
    u = rng.chisquare(k, size=int(n))
    w = rng.chisquare(pi.d - k, size=int(n))
    return r * np.sqrt(u / (u + w))


@dataclass(frozen=True)
class QuantileEstimate:
    """Concentration level of the k-dimensional projection of a noise measure.

    ``r`` satisfies pi(1 + |G_k|^2 <= r^2) >= 1 - eps/2 up to Monte-Carlo
    error; ``ball_radius`` is the underlying empirical quantile q of |G_k|,
    with r = sqrt(1 + q^2).
    """

    r: float
    ball_radius: float
    se_r: float
    se_ball: float
    k: int
    eps: float
    n: int


def projection_quantile(pi: SphericalMeasure, k: int, eps: float, n: int, seed: Seed) -> QuantileEstimate:
    """Monte-Carlo estimate of the projection concentration level r_k.

    q is the order statistic of |first-k-coordinates| at rank
    ceil((1-eps/2)*n), without interpolation; the standard error comes from
    the order-statistic spread at ranks +- 3*sqrt(n*lev*(1-lev)).
    """
    k = int(k)
    n = int(n)
    if k < 3:
        raise StructuralError("projection dimension k must be at least 3")
    if k > pi.d:
        raise StructuralError(f"projection dimension k={k} exceeds d={pi.d}")
    if not 0 < eps < 1:
        raise DomainError("eps must lie in (0, 1)")
    if n < 2:
        raise DomainError("need at least 2 samples")
    g = np.sort(projection_norm_samples(pi, k, n, seed))
    lev = 1.0 - eps / 2.0
    j = int(math.ceil(lev * n))
    q = float(g[j - 1])
    m = max(1, int(math.ceil(3.0 * math.sqrt(n * lev * (1.0 - lev)))))
    lo = max(j - m, 1)
    hi = min(j + m, n)
    se_q = float(g[hi - 1] - g[lo - 1]) / 6.0
    r = math.sqrt(1.0 + q * q)
    return QuantileEstimate(
        r=r, ball_radius=q, se_r=(q / r) * se_q, se_ball=se_q, k=k, eps=float(eps), n=n
    )


@dataclass(frozen=True)
class ModeSpec:
    """One mixture mode: mass ``weight`` spread over a ball of the given radius."""

    center: np.ndarray
    radius: float
    weight: float

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float).reshape(-1).copy()
        c.setflags(write=False)
        object.__setattr__(self, "center", c)
        if not self.radius >= 0:
            raise StructuralError("mode radius must be nonnegative")
        if not 0 < self.weight <= 1:
            raise StructuralError("mode weight must lie in (0, 1]")

    @property
    def distance(self) -> float:
        return float(np.linalg.norm(self.center))


@dataclass(frozen=True)
class MultiModalData:
    """Mixture data distribution: far modes plus a centred Gaussian bulk.

    Admissible instances place the designated (furthest) mode at distance
    R(1+delta) with radius delta*R and mass above 3*eps, and keep all but
    eps/2 of the total mass inside the ball of radius R(1+2*delta); those
    constraints are measured by :func:`validate_data_spec`, not enforced
    at construction.

    The bulk is N(0, bulk_scale^2 I) with the weight left over by the
    modes.  The default bulk_scale = min(R/4, R(1+2delta)/(sqrt(d)+6))
    keeps the bulk tail mass outside B(0, R(1+2delta)) negligible in every
    dimension.
    """

    d: int
    R: float
    delta: float
    eps: float
    modes: tuple[ModeSpec, ...]
    bulk_scale: float | None = None
    mode_kind: str = "uniform-ball"

    def __post_init__(self):
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "modes", tuple(self.modes))
        if self.d < 1:
            raise StructuralError("dimension d must be a positive integer")
        if not self.R > 2:
            raise StructuralError("R must exceed 2")
        if not 0 < self.delta < 1:
            raise StructuralError("delta must lie in (0, 1)")
        if not 0 < self.eps < 1:
            raise StructuralError("eps must lie in (0, 1)")
        if not self.modes:
            raise StructuralError("at least one mode is required")
        if self.mode_kind not in MODE_KINDS:
            raise StructuralError(f"mode_kind must be one of {MODE_KINDS}")
        for m in self.modes:
            if m.center.shape != (self.d,):
                raise StructuralError(
                    f"mode center has dimension {m.center.shape[0]}, expected {self.d}"
                )
        total = sum(m.weight for m in self.modes)
        if total > 1.0 + 1e-12:
            raise StructuralError(f"mode weights sum to {total:.6g} > 1")
        if self.bulk_scale is None:
            default = min(
                self.R / 4.0, self.R * (1.0 + 2.0 * self.delta) / (math.sqrt(self.d) + 6.0)
            )
            object.__setattr__(self, "bulk_scale", default)
        if not self.bulk_scale >= 0:
            raise StructuralError("bulk_scale must be nonnegative")

    @property
    def bulk_weight(self) -> float:
        return max(0.0, 1.0 - sum(m.weight for m in self.modes))

    @property
    def designated_index(self) -> int:
        """Index of the furthest mode."""
        return int(np.argmax([m.distance for m in self.modes]))

    @property
    def designated_mode(self) -> ModeSpec:
        return self.modes[self.designated_index]

    @property
    def mode_direction(self) -> np.ndarray:
        """Unit vector pointing at the designated mode."""
        c = self.designated_mode.center
        return c / np.linalg.norm(c)

    @property
    def far_mass(self) -> float:
        """Aggregated weight of all modes at distance >= R."""
        return sum(m.weight for m in self.modes if m.distance >= self.R)

    def _sample_mode(self, rng: np.random.Generator, mode: ModeSpec, n: int) -> np.ndarray:
        if n == 0:
            return np.zeros((0, self.d))
        dirs = rng.standard_normal((n, self.d))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        if self.mode_kind == "uniform-ball":
            radii = mode.radius * rng.random(n) ** (1.0 / self.d)
            return mode.center + radii[:, None] * dirs
        # truncated Gaussian: sigma chosen so rejection stays cheap in any d
        sigma = mode.radius / (math.sqrt(self.d) + 3.0)
        pts = mode.center + sigma * rng.standard_normal((n, self.d))
        for _ in range(1000):
            bad = np.linalg.norm(pts - mode.center, axis=1) > mode.radius
            if not bad.any():
                return pts
            pts[bad] = mode.center + sigma * rng.standard_normal((int(bad.sum()), self.d))
        raise RuntimeError("truncated-gaussian rejection sampling failed to converge")

    def sample(self, n: int, seed: Seed) -> np.ndarray:
        """Draw n points from the mixture; bitwise deterministic in (n, seed)."""
        n = int(n)
        if n == 0:
            return np.zeros((0, self.d))
        rng = substream(seed)
        weights = np.array([m.weight for m in self.modes] + [self.bulk_weight])
        weights = np.maximum(weights, 0.0)
        weights /= weights.sum()
        comp = rng.choice(len(weights), size=n, p=weights)
        out = np.empty((n, self.d))
        for i, mode in enumerate(self.modes):
            idx = np.flatnonzero(comp == i)
            out[idx] = self._sample_mode(rng, mode, len(idx))
        idx = np.flatnonzero(comp == len(self.modes))
        out[idx] = self.bulk_scale * rng.standard_normal((len(idx), self.d))
        return out

    def mass_within_origin_ball(self, radius: float, n: int = 100_000, seed: Seed = 0) -> float:
        """Mixture mass of the closed ball B(0, radius).

        Closed form for the Gaussian bulk (chi-square CDF) and for modes whose
        support lies entirely inside or outside; Monte Carlo only for modes
        straddling the boundary.
        """
        total = 0.0
        for i, mode in enumerate(self.modes):
            lo = mode.distance - mode.radius
            hi = mode.distance + mode.radius
            if hi <= radius * (1.0 + 1e-12):
                total += mode.weight
            elif lo > radius:
                continue
            else:
                pts = self._sample_mode(substream(derive(seed, i)), mode, int(n))
                total += mode.weight * float(
                    np.mean(np.linalg.norm(pts, axis=1) <= radius)
                )
        if self.bulk_weight > 0:
            if self.bulk_scale == 0:
                total += self.bulk_weight
            else:
                # |bulk|^2 / bulk_scale^2 is chi-square with d degrees of freedom
                z = (radius / self.bulk_scale) ** 2
                total += self.bulk_weight * float(gammainc(self.d / 2.0, z / 2.0))
        return min(1.0, total)


@dataclass(frozen=True)
class CheckResult:
    """A single named validation check with its measured value."""

    name: str
    passed: bool
    value: float
    threshold: float
    se: float = 0.0
    note: str = ""


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[CheckResult, ...] = field(default_factory=tuple)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __iter__(self):
        return iter(self.checks)


def validate_data_spec(spec: MultiModalData, n: int = 100_000, seed: Seed = 0) -> ValidationReport:
    """Measure the admissibility constraints of a data mixture.

    Checks the designated-mode placement (|x0| = R(1+delta) and radius =
    delta*R, both to 1e-12 relative), the mode-mass inequality b > 3*eps
    against the stored weight, and the tail condition (mass outside
    B(0, R(1+2delta)) below eps/2) by Monte Carlo with a 3-sigma allowance.
    """
    if n < 100_000:
        n = 100_000
    checks: list[CheckResult] = []
    mode = spec.designated_mode
    target = spec.R * (1.0 + spec.delta)
    rel = abs(mode.distance - target) / target
    checks.append(
        CheckResult("furthest-mode-distance", rel <= 1e-12, mode.distance, target,
                    note="|x0| vs R(1+delta), 1e-12 relative")
    )
    rad_target = spec.delta * spec.R
    rel_rad = abs(mode.radius - rad_target) / rad_target
    checks.append(
        CheckResult("furthest-mode-radius", rel_rad <= 1e-12, mode.radius, rad_target,
                    note="radius vs delta*R, 1e-12 relative")
    )
    dists = np.array([m.distance for m in spec.modes])
    n_at_max = int(np.sum(dists >= dists.max() * (1.0 - 1e-9)))
    checks.append(
        CheckResult("furthest-mode-unique", n_at_max == 1, n_at_max, 1,
                    note="exactly one furthest mode")
    )
    checks.append(
        CheckResult("mode-mass", mode.weight > 3.0 * spec.eps, mode.weight, 3.0 * spec.eps,
                    note="designated-mode weight vs 3*eps")
    )
    checks.append(
        CheckResult("far-mass-aggregate", spec.far_mass > 3.0 * spec.eps, spec.far_mass,
                    3.0 * spec.eps, note="aggregate weight of modes at distance >= R")
    )
    pts = spec.sample(n, seed)
    outside = float(np.mean(np.linalg.norm(pts, axis=1) > spec.R * (1.0 + 2.0 * spec.delta)))
    se = math.sqrt(max(outside * (1.0 - outside), 1.0 / n) / n)
    checks.append(
        CheckResult("tail-mass", outside < spec.eps / 2.0 + 3.0 * se, outside, spec.eps / 2.0,
                    se=se, note="Monte-Carlo mass outside B(0, R(1+2delta))")
    )
    return ValidationReport(tuple(checks))
