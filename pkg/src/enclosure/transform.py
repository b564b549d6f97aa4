"""Weighted time integrals ``int_0^T f(t) exp(-z^2 t) dt``.

The weight oscillates with angular frequency ``Im z^2 ~ 2 c^2 tau^2``. The
sampled integrator therefore integrates the piecewise-linear interpolant of
``f`` against the weight exactly on every segment (a Filon-type rule). Only
interpolation error is left, never oscillation error.

The indicator cancels ``O(1)`` integrands down to ``exp(-2 c a tau)``, which
costs about ``2 c a tau / ln 10`` digits. Three precisions are offered:

* ``plain``: float64 with compensated (``math.fsum``) accumulation.
  Usable while ``c M tau <= 30``.
* ``double_double``: about 32 significant digits (mpmath at 32 dps).
  Usable while ``c M tau <= 60``.
* ``multiprecision``: digits chosen from ``c M tau``. It is meant for callable
  (analytic) data, integrated by :func:`weighted_integral_callable`.

``M >= 2a`` is the known bound, so the ceilings never read the hidden ``a``.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Callable, Sequence

import mpmath
import numpy as np
from scipy.special import roots_legendre

from .core import Kind, SpectralPoint, spectral_parameter

__all__ = [
    "Precision",
    "BoundaryData",
    "ContinuousData",
    "WeightedIntegral",
    "weighted_integral_sampled",
    "weighted_integral_poly",
    "weighted_integral_callable",
    "w_prime_zero",
    "condition_c_check",
    "ConditionCReport",
    "tau_ceiling",
    "check_ceiling",
    "digits_needed",
    "gauss_legendre_mp",
    "DD_DPS",
]

DD_DPS = 32
_CEILING = {"plain": 30.0, "double_double": 60.0, "multiprecision": math.inf}


class Precision(str, Enum):
    PLAIN = "plain"
    DOUBLE_DOUBLE = "double_double"
    MULTIPRECISION = "multiprecision"

    @classmethod
    def parse(cls, s) -> "Precision":
        if isinstance(s, cls):
            return s
        return cls(str(s).replace("-", "_"))


def tau_ceiling(c: float, M: float, precision="plain") -> float:
    """Largest ``tau`` whose cancellation (``c M tau`` e-folds) the precision absorbs."""
    p = Precision.parse(precision)
    return _CEILING[p.value] / (c * M)


def check_ceiling(tau: float, c: float, M: float | None, precision) -> None:
    """Raise if ``tau`` lies beyond the cancellation ceiling.

    ``M=None`` skips the check (no cancellation bound was declared).
    """
    if M is None:
        return
    ceil = tau_ceiling(c, M, precision)
    if tau > ceil * (1 + 1e-12):
        p = Precision.parse(precision).value
        raise ValueError(
            f"tau={tau:.6g} exceeds the {p} cancellation ceiling {ceil:.6g} "
            f"(c M tau = {c * M * tau:.4g} > {_CEILING[p]:g}); use a higher precision"
        )


def digits_needed(c: float, M: float, tau: float, significant: int = 20) -> int:
    """Working digits for multiprecision runs: cancellation plus ``significant``."""
    return int(math.ceil(c * M * tau / math.log(10.0))) + significant


# ---------------------------------------------------------------- data types

@dataclass
class BoundaryData:
    """Sampled observations ``u(0,t)`` and ``u_x(0,t)`` on a uniform grid.

    ``noise``, when present, is a pair ``(E1, E2)`` added to ``u0`` and ``g``.
    """

    times: np.ndarray
    u0: np.ndarray
    g: np.ndarray
    noise: tuple | None = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.u0 = np.asarray(self.u0, dtype=float)
        self.g = np.asarray(self.g, dtype=float)
        n = self.times.size
        if n < 2:
            raise ValueError("need at least two samples")
        if self.u0.shape != (n,) or self.g.shape != (n,):
            raise ValueError("times, u0 and g must have equal length")
        if self.times[0] != 0.0:
            raise ValueError("time grid must start at 0")
        h = np.diff(self.times)
        if np.max(np.abs(h - h[0])) > 1e-9 * h[0]:
            raise ValueError("time grid must be uniform")
        if abs(self.u0[0]) > 1e-12:
            raise ValueError(f"u0[0] must vanish (zero initial data), got {self.u0[0]}")
        if self.noise is not None:
            e1, e2 = (np.asarray(e, dtype=float) for e in self.noise)
            if e1.shape != (n,) or e2.shape != (n,):
                raise ValueError("noise arrays must match the grid")
            self.noise = (e1, e2)

    @property
    def T(self) -> float:
        return float(self.times[-1])

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def observed_u0(self) -> np.ndarray:
        return self.u0 if self.noise is None else self.u0 + self.noise[0]

    @property
    def observed_g(self) -> np.ndarray:
        return self.g if self.noise is None else self.g + self.noise[1]

    def scaled(self, alpha: float) -> "BoundaryData":
        nz = None if self.noise is None else (alpha * self.noise[0], alpha * self.noise[1])
        return BoundaryData(self.times, alpha * self.u0, alpha * self.g, nz)


@dataclass
class ContinuousData:
    """Observations given as callables of ``t`` (mpmath in, mpmath out).

    Used by the multiprecision pipelines. The callables close over the
    forward model, and the estimators only ever evaluate them on ``[0, T]``.
    """

    u0: Callable
    g: Callable
    T: float
    singular_start: bool = True  # u0 ~ sqrt(t) near t = 0


@dataclass(frozen=True)
class WeightedIntegral:
    value: complex
    log_magnitude: float
    tau: float
    exact: object = None  # mpmath value when computed in extended precision

    @classmethod
    def make(cls, v, tau: float) -> "WeightedIntegral":
        if isinstance(v, (mpmath.mpc, mpmath.mpf)):
            lm = float(mpmath.log(abs(v))) if v != 0 else -math.inf
            return cls(complex(v), lm, tau, v)
        v = complex(v)
        lm = math.log(abs(v)) if v != 0 else -math.inf
        return cls(v, lm, tau)


# ---------------------------------------------------------------- sampled Filon

def _segment_weights_np(q: complex, h: float):
    """Per-segment coefficients A, B for ``f0 A + (f1 - f0) B`` (float)."""
    x = q * h
    if abs(x) < 0.5:
        # series to avoid cancellation: A/h = sum (-x)^k/(k+1)!, B/h = sum (-x)^k/(k!(k+2))
        A = 0j
        B = 0j
        term = 1.0 + 0j
        for k in range(30):
            A += term / (k + 1)
            B += term / (k + 2)
            term *= -x / (k + 1)
        return A * h, B * h
    e = cmath.exp(-x)
    A = (1.0 - e) / q
    B = (1.0 - (1.0 + x) * e) / (q * x)
    return A, B


def _filon_plain(f: np.ndarray, h: float, q: complex) -> complex:
    A, B = _segment_weights_np(q, h)
    t0 = np.arange(f.size - 1) * h
    e = np.exp(-q * t0)
    vals = e * (f[:-1] * A + (f[1:] - f[:-1]) * B)
    return complex(math.fsum(vals.real), math.fsum(vals.imag))


def _filon_mp(f: np.ndarray, h: float, sp: SpectralPoint, dps: int):
    with mpmath.workdps(dps + 8):
        # z^2 recomputed in mp so that it equals z*z to working precision
        q = _z2_mp(sp)
        hm = mpmath.mpf(h)
        x = q * hm
        if abs(x) < 0.5:
            A = B = mpmath.mpc(0)
            term = mpmath.mpc(1)
            for k in range(60):
                A += term / (k + 1)
                B += term / (k + 2)
                term *= -x / (k + 1)
            A, B = A * hm, B * hm
        else:
            e = mpmath.exp(-x)
            A = (1 - e) / q
            B = (1 - (1 + x) * e) / (q * x)
        step = mpmath.exp(-x)
        w = mpmath.mpc(1)
        fm = [mpmath.mpmathify(complex(v)) if np.iscomplexobj(f) else mpmath.mpf(float(v)) for v in f]
        acc = []
        for n in range(len(fm) - 1):
            acc.append(w * (fm[n] * A + (fm[n + 1] - fm[n]) * B))
            w *= step
            if n % 256 == 255:
                # refresh the running exponential to keep rounding from drifting
                w = mpmath.exp(-q * (n + 1) * hm)
        return +mpmath.fsum(acc)


def weighted_integral_sampled(f, times, sp: SpectralPoint, precision="plain", *, M: float | None = None,
                              dps: int | None = None) -> WeightedIntegral:
    """Exact integral of the piecewise-linear interpolant of ``f`` against ``exp(-z^2 t)``.

    Parameters
    ----------
    f : array (real or complex)
        Samples on the uniform grid ``times``.
    sp : SpectralPoint
        ``z_squared`` sets the weight (for the wave kind it is real, ``tau``).
    precision : {"plain", "double_double", "multiprecision"}
        Accumulation precision. ``multiprecision`` needs ``dps``.
    M : float, optional
        Known bound ``M >= 2a``. When given, the call is rejected beyond the
        cancellation ceiling of the precision.
    """
    f = np.asarray(f)
    times = np.asarray(times, dtype=float)
    if f.size == 0:
        raise ValueError("empty series")
    if f.shape != times.shape:
        raise ValueError("samples and grid differ in length")
    if f.size == 1:
        return WeightedIntegral.make(0.0, sp.tau)
    h = float(times[1] - times[0])
    d = np.diff(times)
    if np.max(np.abs(d - h)) > 1e-9 * h:
        raise ValueError("non-uniform grid")
    if times[0] != 0.0:
        raise ValueError("grid must start at t = 0")
    p = Precision.parse(precision)
    check_ceiling(sp.tau, sp.c, M, p)
    q = sp.z_squared
    if p is Precision.PLAIN:
        return WeightedIntegral.make(_filon_plain(f.astype(complex), h, q), sp.tau)
    digits = DD_DPS if p is Precision.DOUBLE_DOUBLE else int(dps or 50)
    return WeightedIntegral.make(_filon_mp(f, h, sp, digits), sp.tau)


# ---------------------------------------------------------------- polynomial

def _poly_moment(m: int, T, q, lib):
    """``int_0^T t^m/m! e^{-q t} dt``."""
    x = q * T
    if abs(x) > m + 1:
        # closed form (1 - e^{-x} sum_{i<=m} x^i/i!) / q^{m+1}; the sum is tame here
        s = 0
        term = 1
        for i in range(m + 1):
            s += term
            term = term * x / (i + 1)
        return (1 - lib.exp(-x) * s) / q ** (m + 1)
    # small |qT|: power series sum_k (-q)^k T^{m+k+1} / (k! m! (m+k+1)) written recursively
    acc = 0
    term = T ** (m + 1) / math.factorial(m)
    for k in range(200):
        add = term / (m + k + 1)
        acc += add
        if abs(add) < 1e-40 * abs(acc) and k > 5:
            break
        term = term * (-q * T) / (k + 1)
    return acc


def weighted_integral_poly(flux, T_upper: float, sp: SpectralPoint, *, dps: int | None = None) -> WeightedIntegral:
    """Closed-form ``int_0^{T_upper} sum_m gamma_m t^m/m! exp(-z^2 t) dt``.

    For large ``tau`` the value behaves like ``sum_m gamma_m / (z^2)^{m+1}``.
    """
    gam = tuple(flux.gamma)
    if not gam:
        raise ValueError("empty coefficient list")
    if dps is None:
        q = sp.z_squared
        v = sum(g * _poly_moment(m, T_upper, q, cmath) for m, g in enumerate(gam) if g)
        return WeightedIntegral.make(v, sp.tau)
    with mpmath.workdps(dps):
        q = _z2_mp(sp)
        T = mpmath.mpf(T_upper)
        v = mpmath.fsum(mpmath.mpf(g) * _poly_moment(m, T, q, mpmath) for m, g in enumerate(gam) if g)
        return WeightedIntegral.make(v, sp.tau)


def _z2_mp(sp: SpectralPoint):
    if sp.kind is Kind.WAVE:
        return mpmath.mpf(sp.tau)
    from .core import spectral_parameter_mp

    return spectral_parameter_mp(sp.tau, sp.c)[1]


def w_prime_zero(data, sp: SpectralPoint, precision="plain", *, dps: int | None = None,
                 M: float | None = None) -> WeightedIntegral:
    """``int_0^T u_x(0,t) exp(-z^2 t) dt`` from the flux samples (noise included)."""
    if isinstance(data, ContinuousData):
        v = weighted_integral_callable(data.g, data.T, [sp], dps=dps or 50, singular_start=False)[0]
        return WeightedIntegral.make(v, sp.tau)
    return weighted_integral_sampled(data.observed_g, data.times, sp, precision, M=M, dps=dps)


# ---------------------------------------------------------------- condition c

@dataclass(frozen=True)
class ConditionCReport:
    mu1: float
    mu2: float
    C1: float
    C2: float
    mu_fit: float
    passes: bool


def condition_c_check(f, times, c: float, tau_grid, *, spread: float = 100.0) -> ConditionCReport:
    """Finite-range diagnostic for a two-sided power bound ``C1 tau^mu1 <= |W| <= C2 tau^mu2``.

    The magnitudes are fitted by a single power law ``tau^mu``. The envelopes
    are then the extreme ratios ``|W|/tau^mu``. The check passes when every
    magnitude is positive and finite and ``C2/C1 <= spread``. A finite grid
    cannot decide the asymptotic condition; this is a diagnostic only.
    """
    taus = np.asarray(tau_grid, dtype=float)
    if np.any(np.diff(taus) <= 0):
        raise ValueError("tau_grid must be ascending")
    mags = np.array([abs(weighted_integral_sampled(f, times, spectral_parameter(t, c)).value) for t in taus])
    if np.any(~np.isfinite(mags)) or np.any(mags <= 0):
        return ConditionCReport(math.nan, math.nan, 0.0, math.inf, math.nan, False)
    lt, lm = np.log(taus), np.log(mags)
    A = np.column_stack([lt, np.ones_like(lt)])
    mu, _ = np.linalg.lstsq(A, lm, rcond=None)[0]
    ratio = mags / taus**mu
    C1, C2 = float(ratio.min()), float(ratio.max())
    # local slopes bracket the exponents
    loc = np.diff(lm) / np.diff(lt) if taus.size > 1 else np.array([mu])
    return ConditionCReport(float(loc.min()), float(loc.max()), C1, C2, float(mu), bool(C2 / C1 <= spread))


# ---------------------------------------------------------------- callable data

@lru_cache(maxsize=64)
def gauss_legendre_mp(n: int, dps: int):
    """Gauss-Legendre nodes and weights on ``[-1, 1]`` at ``dps`` digits.

    Float64 roots from scipy are polished by Newton steps on the three-term
    recurrence in mpmath, which is far cheaper than computing them from scratch.
    """
    x0, _ = roots_legendre(n)
    nodes, weights = [], []
    with mpmath.workdps(dps + 10):
        half = (n + 1) // 2
        for i in range(half):
            x = mpmath.mpf(float(x0[n - 1 - i]))
            for _ in range(60):
                p0, p1 = mpmath.mpf(1), x
                for k in range(2, n + 1):
                    p0, p1 = p1, ((2 * k - 1) * x * p1 - (k - 1) * p0) / k
                dp = n * (x * p1 - p0) / (x * x - 1)
                dx = p1 / dp
                x -= dx
                if abs(dx) < mpmath.mpf(10) ** (-(dps + 8)):
                    break
            p0, p1 = mpmath.mpf(1), x
            for k in range(2, n + 1):
                p0, p1 = p1, ((2 * k - 1) * x * p1 - (k - 1) * p0) / k
            dp = n * (x * p1 - p0) / (x * x - 1)
            w = 2 / ((1 - x * x) * dp * dp)
            nodes.append(x)
            weights.append(w)
        if n % 2 == 0:
            full_x = [-x for x in nodes] + nodes[::-1]
            full_w = weights + weights[::-1]
        else:
            # the last polished root is the middle node x = 0
            m = len(nodes) - 1
            full_x = [-x for x in nodes[:m]] + [mpmath.mpf(0)] + nodes[:m][::-1]
            full_w = weights[:m] + [weights[m]] + weights[:m][::-1]
    return tuple(full_x), tuple(full_w)


def _t_end(T, tau: float, dps: int) -> float:
    return min(float(T), (dps * math.log(10.0) + 40.0) / tau)


def _panel_plan(T, sps, dps: int, singular_start: bool, q_panel: float = 120.0,
                osc_factor: float = 0.6):
    """Panels ``(t0, t1, n, substitute_sqrt)``.

    Past ``t_end(tau)`` a spectral point no longer matters, so the panel width
    and node count at time ``t`` follow the largest ``|z^2|`` still active there.
    """
    ends = sorted(((_t_end(T, sp.tau, dps), abs(sp.z_squared)) for sp in sps), reverse=True)
    t_last = ends[0][0]

    def zloc(t):
        return max(zm for te, zm in ends if te > t)

    zmax = max(zm for _, zm in ends)
    smooth = int(math.ceil(0.7 * dps)) + 8
    plan = []
    t1 = min(t_last, 2.0 / zmax)
    plan.append((0.0, t1, smooth + 8, singular_start))
    t = t1
    while t < t_last * (1 - 1e-15):
        zl = zloc(t)
        h = min(t, 2.0 * q_panel / zl, t_last - t)
        n = smooth + int(math.ceil(osc_factor * zl * h)) + 8
        plan.append((t, t + h, n, False))
        t += h
    return plan


def weighted_integral_callable(f: Callable, T: float, sps: Sequence[SpectralPoint], *, dps: int,
                               singular_start: bool = True, q_panel: float = 120.0):
    """``int_0^T f(t) exp(-z^2 t) dt`` for many spectral points, in mpmath.

    The interval is split into a start panel ``[0, t1]`` with ``|z^2| t1 = 2``
    (optionally in the variable ``s = sqrt t`` to absorb a ``sqrt t`` onset),
    geometrically growing panels and then equal panels of bounded phase.
    Gauss-Legendre nodes are placed per panel; ``f`` is evaluated once per node
    and shared by every spectral point. Panels beyond
    ``t_end = min(T, (dps ln 10 + 40)/tau)`` are skipped for that ``tau`` since
    the weight is below ``10^-dps`` there.

    Parameters
    ----------
    f : callable or sequence of callables
        ``f(t: mpf) -> mpf`` evaluated at the working precision. A sequence
        shares nodes and weights and yields one result list per integrand.
    sps : sequence of SpectralPoint
        Heat or wave kind; the weight is ``exp(-z^2 t)``.
    dps : int
        Target digits (working precision adds 10 guard digits).

    Returns
    -------
    list of mpmath.mpc, or a list of such lists for a sequence ``f``
    """
    multi = not callable(f)
    fs = list(f) if multi else [f]
    sps = list(sps)
    if not sps:
        return [[] for _ in fs] if multi else []
    wdps = dps + 10
    plan = _panel_plan(T, sps, dps, singular_start, q_panel=q_panel)
    out = [[] for _ in fs]
    with mpmath.workdps(wdps):
        # sample every integrand once per node
        panels = []
        for t0, t1, n, sub in plan:
            xs, ws = gauss_legendre_mp(n, wdps)
            a0, b0 = mpmath.mpf(t0), mpmath.mpf(t1)
            if sub:
                sa, sb = mpmath.sqrt(a0), mpmath.sqrt(b0)
                half, mid = (sb - sa) / 2, (sb + sa) / 2
                ss = [mid + half * x for x in xs]
                ts = [s * s for s in ss]
                wts = [half * w * 2 * s for w, s in zip(ws, ss)]
            else:
                half, mid = (b0 - a0) / 2, (b0 + a0) / 2
                ts = [mid + half * x for x in xs]
                wts = [half * w for w in ws]
            wf = [[w * fk(t) for w, t in zip(wts, ts)] for fk in fs]
            panels.append((t0, ts, wf))
        for sp in sps:
            q = _z2_mp(sp)
            t_end = _t_end(T, sp.tau, dps)
            acc = [[] for _ in fs]
            for t0, ts, wf in panels:
                if t0 >= t_end:
                    break
                ex = [mpmath.exp(-q * t) for t in ts]
                for k in range(len(fs)):
                    acc[k].extend(e * v for e, v in zip(ex, wf[k]))
            for k in range(len(fs)):
                out[k].append(+mpmath.fsum(acc[k]))
    return out if multi else out[0]
