"""Forward noising diffusions: exact OU transitions and tempered Langevin paths.

Both process families expose ``drift(x)`` and the diagonal of the dispersion
matrix a = sigma sigma^T on point batches, plus ``sample_endpoints`` for
drawing time-t marginals.  OU marginals are exact in distribution; tempered
Langevin paths use Euler-Maruyama.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DivergenceError, DomainError, StructuralError
from .measures import RadialProfile, SphericalMeasure
from .rng import Seed, substream

# |x| beyond this radius aborts integration as a numerical blow-up
DIVERGENCE_RADIUS = 1e12


@dataclass(frozen=True)
class IntegratorConfig:
    """Euler-Maruyama settings; the only supported scheme."""

    step: float
    scheme: str = "euler-maruyama"

    def __post_init__(self):
        if not self.step > 0:
            raise StructuralError("integrator step must be positive")
        if self.scheme != "euler-maruyama":
            raise StructuralError("scheme must be 'euler-maruyama'")


@dataclass(frozen=True)
class OUProcess:
    """dX = -mu X dt + sqrt(2) dB on R^d, invariant law N(0, I/mu)."""

    mu: float
    d: int

    def __post_init__(self):
        if not self.mu > 0:
            raise StructuralError("mu must be positive")
        if int(self.d) < 1:
            raise StructuralError("dimension d must be a positive integer")
        object.__setattr__(self, "d", int(self.d))

    def drift(self, x):
        return -self.mu * np.asarray(x, dtype=float)

    def dispersion_scalar(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.full(x.shape[0], math.sqrt(2.0))

    def dispersion_diag(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.full(x.shape, 2.0)

    def invariant_measure(self) -> SphericalMeasure:
        return SphericalMeasure(self.d, RadialProfile.quadratic(self.mu / 2.0))

    def evolve(self, points, T: float, seed: Seed) -> np.ndarray:
        """Exact time-T marginal per row: e^{-mu T} x + sqrt((1-e^{-2 mu T})/mu) Z."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if T < 0:
            raise DomainError("horizon T must be nonnegative")
        decay = math.exp(-self.mu * T)
        scale = math.sqrt((1.0 - math.exp(-2.0 * self.mu * T)) / self.mu)
        rng = substream(seed)
        return decay * pts + scale * rng.standard_normal(pts.shape)

    def transition_sample(self, x0, T: float, n: int, seed: Seed) -> np.ndarray:
        """n exact draws of X_T given X_0 = x0 (no discretization)."""
        x0 = np.asarray(x0, dtype=float).reshape(-1)
        return self.evolve(np.tile(x0, (int(n), 1)), T, seed)

    def sample_endpoints(self, x0, T: float, n: int, seed: Seed,
                         cfg: IntegratorConfig | None = None) -> np.ndarray:
        return self.transition_sample(x0, T, n, seed)


@dataclass(frozen=True)
class TemperedLangevin:
    """Multiplicative-noise diffusion leaving exp(-H(|x|)) invariant.

    Coefficients, with H the radial profile and temperature ell >= 0:

        b(x)     = -Hf(|x|)^(2 ell - 1) (Hf(|x|) - 2 ell) H'(|x|) x/|x|,  b(0) = 0
        sigma(x) = sqrt(2) H(|x|)^ell I

    where Hf = max(H, h_floor).  The floor applies to the drift only; it
    caps the negative power 2*ell - 1 < 0 near the origin without touching
    behaviour away from it.  The dispersion genuinely vanishes at the origin
    for ell > 0, and for ell > 1/2 the dynamics exactly at 0 are left as-is
    (a path started there does not move).
    """

    profile: RadialProfile
    ell: float
    d: int
    h_floor: float = 1e-8

    def __post_init__(self):
        if not self.ell >= 0:
            raise StructuralError("temperature ell must be nonnegative")
        if int(self.d) < 1:
            raise StructuralError("dimension d must be a positive integer")
        if not self.h_floor > 0:
            raise StructuralError("h_floor must be positive")
        object.__setattr__(self, "d", int(self.d))

    def radial_drift(self, r):
        """Signed drift magnitude along x/|x| at radius r > 0 (floored)."""
        r = np.asarray(r, dtype=float)
        h = self.profile.value(r)
        hf = np.maximum(h, self.h_floor)
        return -(hf ** (2.0 * self.ell - 1.0)) * (hf - 2.0 * self.ell) * self.profile.deriv(r)

    def drift(self, x):
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        pts = np.atleast_2d(x)
        r = np.linalg.norm(pts, axis=1)
        out = np.zeros_like(pts)
        nz = r > 0
        if nz.any():
            coef = self.radial_drift(r[nz]) / r[nz]
            out[nz] = coef[:, None] * pts[nz]
        return out[0] if single else out

    def dispersion_scalar(self, x):
        """sqrt(2) H(|x|)^ell, unfloored; vanishes at the origin when ell > 0."""
        pts = np.atleast_2d(np.asarray(x, dtype=float))
        r = np.linalg.norm(pts, axis=1)
        return math.sqrt(2.0) * self.profile.value(r) ** self.ell

    def dispersion_diag(self, x):
        s = self.dispersion_scalar(x)
        pts = np.atleast_2d(np.asarray(x, dtype=float))
        return np.repeat((s * s)[:, None], pts.shape[1], axis=1)

    def invariant_measure(self) -> SphericalMeasure:
        return SphericalMeasure(self.d, self.profile)

    def _steps(self, T: float, h: float) -> list[float]:
        n_full = int(math.floor(T / h + 1e-12))
        rem = T - n_full * h
        steps = [h] * n_full
        if rem > 1e-12 * max(1.0, T):
            steps.append(rem)
        return steps

    def sample_endpoints(self, x0, T: float, n: int, seed: Seed,
                         cfg: IntegratorConfig | None = None) -> np.ndarray:
        """Euler-Maruyama endpoints of n independent paths from x0."""
        if cfg is None:
            raise StructuralError("tempered Langevin sampling needs an IntegratorConfig")
        x0 = np.asarray(x0, dtype=float).reshape(-1)
        if T < 0:
            raise DomainError("horizon T must be nonnegative")
        state = np.tile(x0, (int(n), 1))
        if T == 0:
            return state
        if cfg.step > T:
            raise DomainError("integrator step exceeds the horizon T")
        rng = substream(seed)
        for i, dt in enumerate(self._steps(T, cfg.step)):
            b = self.drift(state)
            s = self.dispersion_scalar(state)
            state = state + b * dt + (s * math.sqrt(dt))[:, None] * rng.standard_normal(state.shape)
            if np.max(np.abs(state)) > DIVERGENCE_RADIUS:
                raise DivergenceError(
                    f"path diverged (|x| > {DIVERGENCE_RADIUS:.0e}) at step {i}", i
                )
        return state

    def simulate_path(self, x0, T: float, cfg: IntegratorConfig, seed: Seed,
                      return_path: bool = False):
        """Single Euler-Maruyama path; returns the endpoint, or (times, states)."""
        x0 = np.asarray(x0, dtype=float).reshape(-1)
        if T < 0:
            raise DomainError("horizon T must be nonnegative")
        if T == 0:
            return (np.array([0.0]), x0[None, :].copy()) if return_path else x0.copy()
        if cfg.step > T:
            raise DomainError("integrator step exceeds the horizon T")
        rng = substream(seed)
        state = x0.copy()
        times = [0.0]
        path = [state.copy()]
        t = 0.0
        for i, dt in enumerate(self._steps(T, cfg.step)):
            b = self.drift(state[None, :])[0]
            s = float(self.dispersion_scalar(state[None, :])[0])
            state = state + b * dt + s * math.sqrt(dt) * rng.standard_normal(state.shape)
            if np.max(np.abs(state)) > DIVERGENCE_RADIUS:
                raise DivergenceError(
                    f"path diverged (|x| > {DIVERGENCE_RADIUS:.0e}) at step {i}", i
                )
            t += dt
            if return_path:
                times.append(t)
                path.append(state.copy())
        if return_path:
            return np.array(times), np.array(path)
        return state


@dataclass(frozen=True)
class GrowthReport:
    """Directional linear-growth check |<b(x),u>| <= mu |<x,u>| over an envelope."""

    max_ratio: float
    worst_point: np.ndarray
    n_used: int

    @property
    def passed(self) -> bool:
        return self.max_ratio <= 1.0 + 1e-9


def check_linear_growth(process, mu: float, n_points: int, seed: Seed,
                        envelope_scale: float = 1.0) -> GrowthReport:
    """Sample the envelope law N(0, scale^2 I) and bound |<b,u>| / (mu |<x,u>|).

    Pairs with |<x,u>| < 1e-12 are skipped.  The check is an empirical probe
    of the global condition over the region the envelope covers; scale it to
    the experiment (typically the mode distance R).
    """
    rng = substream(seed)
    d = process.d
    x = envelope_scale * rng.standard_normal((int(n_points), d))
    u = rng.standard_normal((int(n_points), d))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    b = process.drift(x)
    num = np.abs(np.sum(b * u, axis=1))
    den = np.abs(np.sum(x * u, axis=1))
    keep = den >= 1e-12
    ratio = num[keep] / (mu * den[keep])
    i = int(np.argmax(ratio))
    return GrowthReport(max_ratio=float(ratio[i]), worst_point=x[keep][i], n_used=int(keep.sum()))


@dataclass(frozen=True)
class DriftConditionReport:
    """Grid check of the radial drift-growth condition for tempered processes."""

    max_excess: float
    worst_r: float
    r_min: float
    r_max: float
    n_grid: int

    @property
    def passed(self) -> bool:
        return self.max_excess <= 0.0


def check_drift_condition(tl: TemperedLangevin, mu: float, r_max: float,
                          n_grid: int = 4096, r_min: float | None = None) -> DriftConditionReport:
    """Verify H^(2 ell - 1) (H - 2 ell) H' <= mu r on a geometric radius grid.

    The condition bounds the inward drift magnitude by mu |x| and is what the
    generator inequality needs from the drift.  Evaluated on the exact
    (unfloored) profile; pass tolerance 1e-9 * (1 + mu r) per grid point.
    """
    if not r_max > 0:
        raise DomainError("r_max must be positive")
    if r_min is None:
        r_min = r_max * 1e-8
    grid = np.geomspace(r_min, r_max, int(n_grid))
    h = tl.profile.value(grid)
    lhs = h ** (2.0 * tl.ell - 1.0) * (h - 2.0 * tl.ell) * tl.profile.deriv(grid)
    excess = lhs - mu * grid - 1e-9 * (1.0 + mu * grid)
    i = int(np.argmax(excess))
    return DriftConditionReport(
        max_excess=float(excess[i]), worst_r=float(grid[i]),
        r_min=float(r_min), r_max=float(r_max), n_grid=int(n_grid),
    )


@dataclass(frozen=True)
class DispersionBalanceReport:
    """Check sum_j <a y_j, y_j> >= 3 <a G_hat, G_hat> at sampled points."""

    max_violation: float
    worst_point: np.ndarray
    n_points: int

    @property
    def passed(self) -> bool:
        return self.max_violation <= 1e-9


def check_dispersion_balance(process, basis, n_points: int, seed: Seed,
                             envelope_scale: float = 1.0) -> DispersionBalanceReport:
    """Probe the dispersion-balance inequality over an envelope sample.

    ``process`` either exposes ``dispersion_diag`` or is a callable giving
    the dispersion diagonal at a point batch.  ``basis`` holds k >= 3
    orthonormal rows; G_hat = G/sqrt(1+|G|^2) with G the projection onto
    their span.  Violations are measured relative to |lhs| + |rhs|.
    """
    basis = np.asarray(basis, dtype=float)
    if basis.ndim != 2:
        raise StructuralError("basis must be a (k, d) array")
    k, d = basis.shape
    if k < 3:
        raise StructuralError("need at least 3 basis vectors")
    gram = basis @ basis.T
    if np.max(np.abs(gram - np.eye(k))) > 1e-10:
        raise StructuralError("basis is not orthonormal (1e-10 tolerance)")
    rng = substream(seed)
    x = envelope_scale * rng.standard_normal((int(n_points), d))
    adiag = process(x) if callable(process) else process.dispersion_diag(x)
    adiag = np.asarray(adiag, dtype=float)
    lhs = adiag @ (basis * basis).sum(axis=0)
    coeff = x @ basis.T
    G = coeff @ basis
    hsq = 1.0 / (1.0 + (coeff * coeff).sum(axis=1))
    rhs = 3.0 * hsq * (adiag * G * G).sum(axis=1)
    viol = (rhs - lhs) / np.maximum(np.abs(lhs) + np.abs(rhs), 1e-300)
    i = int(np.argmax(viol))
    return DispersionBalanceReport(max_violation=float(viol[i]), worst_point=x[i],
                                   n_points=int(n_points))


class RegimeKind(str, Enum):
    SUBEXPONENTIAL = "subexponential"
    EXPONENTIAL = "exponential"
    UNIFORM = "uniform"


@dataclass(frozen=True)
class Regime:
    kind: RegimeKind
    exponent: float | None = None

    def describe(self) -> str:
        if self.kind is RegimeKind.SUBEXPONENTIAL:
            return f"subexponential (rate exp(-c t^{self.exponent:.6g}))"
        return self.kind.value


def classify_ergodicity(p: float, ell: float) -> Regime:
    """Ergodicity regime of the tempered diffusion for tail exponent p, temperature ell.

    For p in (0,1): subexponential with exponent p/(2 - p - 2 ell p) while
    ell < 1/p - 1, exponential on the closed band [1/p - 1, 1/p - 1/2],
    uniform above.  For p in [1,2]: exponential up to ell = 1/p - 1/2, then
    uniform.  For p > 2: uniform for every ell >= 0.
    """
    if not p > 0:
        raise StructuralError("tail exponent p must be positive")
    if not ell >= 0:
        raise StructuralError("temperature ell must be nonnegative")
    if p > 2:
        return Regime(RegimeKind.UNIFORM)
    if p >= 1:
        if ell <= 1.0 / p - 0.5:
            return Regime(RegimeKind.EXPONENTIAL)
        return Regime(RegimeKind.UNIFORM)
    if ell < 1.0 / p - 1.0:
        return Regime(RegimeKind.SUBEXPONENTIAL, exponent=p / (2.0 - p - 2.0 * ell * p))
    if ell <= 1.0 / p - 0.5:
        return Regime(RegimeKind.EXPONENTIAL)
    return Regime(RegimeKind.UNIFORM)
