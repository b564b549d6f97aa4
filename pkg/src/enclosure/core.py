"""Domain types, the complex spectral parameter and the exponential probe.

The probe for the heat problem on ``]0, a[`` is

    v(x, t) = exp(-z**2 t) exp(x z),   z = -c tau (1 + i sqrt(1 - 1/(c**2 tau)))

which solves the backward heat equation and satisfies ``|v| = exp(-tau (t + c x))``.
For the wave problem the probe is real, ``v = exp(-tau (c x + t))``.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field, replace
from enum import Enum

__all__ = [
    "Kind",
    "ProblemConfig",
    "SpectralPoint",
    "ScaledExp",
    "spectral_parameter",
    "spectral_parameter_mp",
    "wave_spectral_point",
    "probe_value",
    "probe_log",
    "weighted_probe_magnitude",
    "EXP_SPLIT",
]

# |Re(exponent)| above which exponentials are carried as (log-magnitude, phase)
EXP_SPLIT = 600.0


class Kind(str, Enum):
    HEAT = "heat"
    WAVE = "wave"


@dataclass(frozen=True)
class ProblemConfig:
    """Geometry and physics of one forward/inverse experiment.

    Parameters
    ----------
    a : float
        Rod length. Synthetic truth only; estimators never read it.
    T : float
        Observation horizon.
    T_prime : float
        Length of the window on which the flux is polynomial.
    c : float
        Probe slope (time per length).
    M : float
        Known upper bound, ``M >= 2a``.
    rho : float
        Robin coefficient at ``x = a`` (0 for Neumann).
    kind : Kind
        Heat or wave equation.
    """

    a: float
    T: float
    T_prime: float
    c: float
    M: float
    rho: float = 0.0
    kind: Kind = Kind.HEAT

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        problems = []
        if not self.a > 0:
            problems.append(f"a must be positive (got {self.a})")
        if not self.c > 0:
            problems.append(f"c must be positive (got {self.c})")
        if not (0 < self.T_prime <= self.T):
            problems.append(f"need 0 < T_prime <= T (got T_prime={self.T_prime}, T={self.T})")
        if not self.M >= 2 * self.a:
            problems.append(f"need M >= 2a (got M={self.M}, a={self.a})")
        if problems:
            raise ValueError("; ".join(problems))

    @property
    def travel_time(self) -> float:
        """Synthetic truth ``2ca``."""
        return 2.0 * self.c * self.a

    def window_ok(self, robin_or_wave: bool = False) -> bool:
        """Check the time-window condition on ``M c``.

        Heat/Neumann experiments need ``M c < min(T, 2 T')``; Robin and wave
        experiments only ``M c < T``.
        """
        mc = self.M * self.c
        if robin_or_wave:
            return mc < self.T
        return mc < min(self.T, 2.0 * self.T_prime)

    def min_tau(self) -> float:
        """Smallest admissible spectral parameter (exclusive) for the heat probe."""
        return 1.0 / self.c**2 if self.kind is Kind.HEAT else 0.0

    def with_(self, **kw) -> "ProblemConfig":
        return replace(self, **kw)

    def to_dict(self) -> dict:
        return {
            "a": self.a,
            "T": self.T,
            "T_prime": self.T_prime,
            "c": self.c,
            "M": self.M,
            "rho": self.rho,
            "kind": self.kind.value,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ProblemConfig":
        known = {"a", "T", "T_prime", "c", "M", "rho", "kind"}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown problem fields: {sorted(extra)}")
        missing = {"a", "T", "T_prime", "c", "M"} - set(d)
        if missing:
            raise ValueError(f"missing problem fields: {sorted(missing)}")
        return cls(**d)


@dataclass(frozen=True)
class SpectralPoint:
    """Spectral parameter of the probe.

    For the heat kind ``z`` and ``z_squared`` follow the complex formulas and are
    stored together so both stay bit-consistent. For the wave kind the weight is
    real and ``z = -c tau``, ``z_squared = tau`` are placeholders with the same
    modulus conventions (``|v(0,t)| = exp(-tau t)``).
    """

    tau: float
    c: float
    z: complex
    z_squared: complex
    kind: Kind = field(default=Kind.HEAT)

    @property
    def abs_z(self) -> float:
        return abs(self.z)


def spectral_parameter(tau: float, c: float) -> SpectralPoint:
    """Return the complex spectral point ``z(tau, c)``.

    ``Re z**2 = tau`` holds exactly because the real part is assigned, not
    computed from ``z*z``.

    Raises
    ------
    ValueError
        If ``c <= 0`` or ``tau <= 1/c**2``.
    """
    tau = float(tau)
    c = float(c)
    if not c > 0:
        raise ValueError(f"c must be positive (got {c})")
    arg = 1.0 - 1.0 / (c * c * tau) if tau > 0 else -1.0
    if not (tau > 0 and arg > 0):
        raise ValueError(f"tau must exceed 1/c^2 = {1.0 / c**2:.17g} (got {tau:.17g})")
    root = math.sqrt(arg)
    z = complex(-c * tau, -c * tau * root)
    z2 = complex(tau, 2.0 * c * c * tau * tau * root)
    return SpectralPoint(tau=tau, c=c, z=z, z_squared=z2, kind=Kind.HEAT)


def spectral_parameter_mp(tau, c):
    """``(z, z**2)`` as mpmath numbers at the current working precision.

    ``tau`` and ``c`` are taken as exact binary values, so the result is
    consistent with :func:`spectral_parameter` up to that function's rounding.
    """
    import mpmath

    tau = mpmath.mpf(tau)
    c = mpmath.mpf(c)
    arg = 1 - 1 / (c * c * tau)
    if not (tau > 0 and arg > 0):
        raise ValueError(f"tau must exceed 1/c^2 (got tau={tau}, c={c})")
    root = mpmath.sqrt(arg)
    z = mpmath.mpc(-c * tau, -c * tau * root)
    z2 = mpmath.mpc(tau, 2 * c * c * tau * tau * root)
    return z, z2


def wave_spectral_point(tau: float, c: float) -> SpectralPoint:
    """Real spectral point for the wave probe ``exp(-tau (c x + t))``."""
    if not (tau > 0 and c > 0):
        raise ValueError(f"wave probe needs tau > 0 and c > 0 (got tau={tau}, c={c})")
    return SpectralPoint(tau=float(tau), c=float(c), z=complex(-c * tau, 0.0),
                         z_squared=complex(tau, 0.0), kind=Kind.WAVE)


@dataclass(frozen=True)
class ScaledExp:
    """A complex number stored as ``exp(log_mag + i phase)``."""

    log_mag: float
    phase: float

    @property
    def value(self) -> complex:
        if self.log_mag < -745.0:
            return complex(0.0, 0.0)
        return cmath.rect(math.exp(self.log_mag), self.phase)

    def __mul__(self, other: "ScaledExp") -> "ScaledExp":
        return ScaledExp(self.log_mag + other.log_mag, self.phase + other.phase)


def probe_log(x: float, t: float, sp: SpectralPoint) -> ScaledExp:
    """Exponent of ``v(x,t)`` as a (log-magnitude, phase) pair."""
    e = -sp.z_squared * t + sp.z * x
    return ScaledExp(e.real, e.imag)


def probe_value(x: float, t: float, sp: SpectralPoint) -> complex:
    """Evaluate ``v(x, t) = exp(-z**2 t + x z)``.

    The exponent is split into magnitude and phase when its real part exceeds
    ``EXP_SPLIT`` in size, so a huge negative exponent gives a clean zero.
    """
    e = -sp.z_squared * t + sp.z * x
    if abs(e.real) > EXP_SPLIT:
        return probe_log(x, t, sp).value
    return cmath.exp(e)


def weighted_probe_magnitude(s: float, x: float, t: float, sp: SpectralPoint) -> float:
    """Return ``exp(tau s) |v(x,t)| = exp(tau (s - c x - t))``."""
    ex = sp.tau * (s - sp.c * x - t)
    if ex > 709.0:
        return math.inf
    return math.exp(ex)
