"""The alternating series S1, its remainder R1 and related asymptotics.

    S1(w) = sum_{k>=0} (-1)**k / (k**2 + w**2),      Re w > 0
    R1(w) = S1(w) - 1/(2 w**2)

Three evaluation paths are provided. ``direct_sum`` adds terms explicitly
and closes the series with an Euler-Boole tail. ``closed_form`` uses
``1/(2w^2) + pi/(2 w sinh(pi w))``, which is only trusted after it has been
checked against ``direct_sum`` (see the test-suite). ``asymptotic`` keeps the
first two exponentially small terms of the Macdonald-function expansion.
Since ``K_{-1/2}(x) = sqrt(pi/(2x)) exp(-x)`` exactly, every term of that
expansion reduces to ``(pi/w) exp(-(2j+1) pi w)``.

Every function accepts ``dps``. When it is given, mpmath is used at that many
decimal digits. Otherwise Python complex arithmetic is used.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from functools import lru_cache

import mpmath
import numpy as np

from .core import ProblemConfig, spectral_parameter, spectral_parameter_mp

__all__ = [
    "SpecFunValue",
    "s1",
    "r1",
    "r1_leading",
    "macdonald_half_asymptotic",
    "alternating_tail",
    "boole_coefficients",
    "eta2_partial_sums",
    "key_lemma_check",
    "CROSSOVER",
]

CROSSOVER = 6.0
_POLE_TOL = 1e-8


@dataclass(frozen=True)
class SpecFunValue:
    value: complex
    path: str
    terms_used: int = 0
    error_bound: float = 0.0


# ---------------------------------------------------------------- helpers

@lru_cache(maxsize=None)
def boole_coefficients(n: int) -> tuple:
    """Taylor coefficients of ``1/(1+e^x)`` through ``x**n`` as exact rationals.

    These weight the derivatives in the Euler-Boole formula
    ``sum_{k>=0} (-1)^k f(K+k) = sum_m C_m f^{(m)}(K)``.
    """
    from fractions import Fraction

    coef = [Fraction(0)] * (n + 1)
    coef[0] = Fraction(1, 2)
    for m in range(1, n // 2 + 2):
        p = 2 * m - 1
        if p > n:
            break
        bf = _bernoulli_fraction(2 * m)
        coef[p] = -(2 ** (2 * m) - 1) * bf / math.factorial(2 * m)
    return tuple(coef)


@lru_cache(maxsize=None)
def _bernoulli_fraction(n: int):
    # B_n via the Akiyama-Tanigawa algorithm (exact)
    from fractions import Fraction

    a = [Fraction(0)] * (n + 1)
    for m in range(n + 1):
        a[m] = Fraction(1, m + 1)
        for j in range(m, 0, -1):
            a[j - 1] = j * (a[j - 1] - a[j])
    b = a[0]
    return b if n != 1 else -b  # B_1 = -1/2 convention


def alternating_tail(derivs, K: int, nterms: int):
    """Euler-Boole estimate of ``sum_{k>=K} (-1)^k f(k)``.

    Parameters
    ----------
    derivs : callable
        ``derivs(m)`` returns ``f^{(m)}(K)``.
    K : int
        First index of the tail.
    nterms : int
        Highest derivative order used.

    Returns
    -------
    (value, bound)
        ``bound`` is the magnitude of the first omitted odd-order term.
    """
    coef = boole_coefficients(nterms + 2)
    acc = 0
    for m in range(nterms + 1):
        if coef[m] == 0:
            continue
        acc = acc + derivs(m) * _as_num(coef[m], derivs)
    nxt = next(m for m in range(nterms + 1, nterms + 3) if coef[m] != 0)
    bound = abs(derivs(nxt) * _as_num(coef[nxt], derivs))
    sign = -1 if K % 2 else 1
    return sign * acc, bound


def _as_num(frac, derivs):
    if getattr(derivs, "mp", False):
        return mpmath.mpf(frac.numerator) / frac.denominator
    return frac.numerator / frac.denominator


def _inv_power_deriv(center, k, m, lib):
    # d^m/dk^m (k - center)^{-1}
    return (-1) ** m * lib.factorial(m) / (k - center) ** (m + 1)


def _check_domain(w):
    if not (w.real > 0):
        raise ValueError(f"S1 requires Re w > 0 (got w={w})")
    # nearest pole of 1/(k^2+w^2) lies at k = +-i w; only k integer matter
    kk = round(abs(w.imag))
    if abs(kk * kk + w * w) < _POLE_TOL:
        raise ValueError(f"w={w} is within {_POLE_TOL} of a pole k^2 + w^2 = 0 (k={kk})")


# ---------------------------------------------------------------- S1 / R1

def _s1_direct(w, K: int, dps):
    """Termwise sum to K-1 plus Euler-Boole tail from K."""
    if dps is None:
        k = np.arange(K, dtype=float)
        terms = np.where(k % 2 == 0, 1.0, -1.0) / (k * k + w * w)
        head = complex(math.fsum(terms.real), math.fsum(terms.imag))
        iw = 1j * w

        def derivs(m):
            return (_inv_power_deriv(iw, K, m, math) - _inv_power_deriv(-iw, K, m, math)) / (2 * iw)

        tail, bound = alternating_tail(derivs, K, 7)
        return head + tail, bound
    with mpmath.workdps(dps + 10):
        wm = mpmath.mpc(w)
        head = mpmath.fsum((-1) ** k / (k * k + wm * wm) for k in range(K))
        iw = 1j * wm

        def derivs(m):
            return (_inv_power_deriv(iw, K, m, mpmath) - _inv_power_deriv(-iw, K, m, mpmath)) / (2 * iw)

        derivs.mp = True
        nterms = max(7, int(dps * 0.6))
        tail, bound = alternating_tail(derivs, K, nterms)
        return +(head + tail), float(bound)


def _r1_closed(w, dps):
    # pi/(2 w sinh(pi w)) written with decaying exponentials only
    if dps is None:
        q = cmath.exp(-math.pi * w)
        return (math.pi / w) * q / (1.0 - q * q)
    with mpmath.workdps(dps + 5):
        wm = mpmath.mpc(w)
        q = mpmath.exp(-mpmath.pi * wm)
        return (mpmath.pi / wm) * q / (1 - q * q)


def _r1_asym(w, dps, nexp=2):
    lib = mpmath if dps is not None else cmath
    pi = mpmath.pi if dps is not None else math.pi
    ctx = mpmath.workdps(dps + 5) if dps is not None else _null()
    with ctx:
        wm = mpmath.mpc(w) if dps is not None else w
        acc = 0
        for j in range(nexp):
            acc = acc + lib.exp(-(2 * j + 1) * pi * wm)
        val = (pi / wm) * acc
        bound = abs((pi / wm) * lib.exp(-(2 * nexp + 1) * pi * wm)) / (1 - abs(lib.exp(-2 * pi * wm)))
        return val, float(bound)


class _null:
    def __enter__(self):
        return self

    def __exit__(self, *a):
        return False


def s1(w, mode: str = "auto", *, K: int = 2000, dps: int | None = None) -> SpecFunValue:
    """Evaluate ``S1(w)``.

    Parameters
    ----------
    w : complex
        Argument with ``Re w > 0``.
    mode : {"auto", "direct_sum", "closed_form", "asymptotic"}
        ``auto`` uses the direct sum for ``|w| <= 6`` and the asymptotic path above.
    K : int
        Number of explicitly summed terms in ``direct_sum`` mode.
    dps : int, optional
        Decimal digits for an mpmath evaluation.
    """
    w = complex(w)
    _check_domain(w)
    if mode == "auto":
        mode = "direct_sum" if abs(w) <= CROSSOVER else "asymptotic"
    head = 1 / (2 * (mpmath.mpc(w) if dps is not None else w) ** 2)
    if mode == "direct_sum":
        val, bound = _s1_direct(w, K, dps)
        return SpecFunValue(val, "direct_sum", K, bound)
    if mode == "closed_form":
        return SpecFunValue(head + _r1_closed(w, dps), "closed_form")
    if mode == "asymptotic":
        val, bound = _r1_asym(w, dps)
        return SpecFunValue(head + val, "asymptotic", 0, bound)
    raise ValueError(f"unknown mode {mode!r}")


def r1(w, *, dps: int | None = None) -> SpecFunValue:
    """``R1(w) = S1(w) - 1/(2w^2)`` without subtracting close numbers.

    Uses the exponential closed form for ``|w| <= 6`` and the two-term
    asymptotic form above that (the omitted terms are below ``e^{-30 pi}``).
    """
    w = complex(w)
    _check_domain(w)
    if abs(w) <= CROSSOVER:
        return SpecFunValue(_r1_closed(w, dps), "closed_form")
    val, bound = _r1_asym(w, dps)
    return SpecFunValue(val, "asymptotic", 0, bound)


def r1_leading(w, *, dps: int | None = None):
    """Leading large-``w`` form ``pi exp(-pi w)/w`` of ``R1``."""
    if dps is None:
        w = complex(w)
        return math.pi * cmath.exp(-math.pi * w) / w
    with mpmath.workdps(dps):
        wm = mpmath.mpc(w)
        return mpmath.pi * mpmath.exp(-mpmath.pi * wm) / wm


def macdonald_half_asymptotic(zarg, *, dps: int | None = None):
    """Leading term ``sqrt(pi/(2z)) exp(-z)`` of ``K_{-1/2}(z)``.

    For order -1/2 the leading term is the whole function. Principal branches
    are used, so the sector ``|arg z| <= 3 pi/2 - 0.1`` always holds. ``z = 0``
    is rejected.
    """
    if dps is None:
        zarg = complex(zarg)
        if zarg == 0:
            raise ValueError("K_{-1/2} is singular at z = 0")
        return cmath.sqrt(math.pi / (2 * zarg)) * cmath.exp(-zarg)
    with mpmath.workdps(dps):
        zm = mpmath.mpc(zarg)
        if zm == 0:
            raise ValueError("K_{-1/2} is singular at z = 0")
        return mpmath.sqrt(mpmath.pi / (2 * zm)) * mpmath.exp(-zm)


def eta2_partial_sums(n: int):
    """Partial sums of ``sum_{k>=1} (-1)^(k-1)/k^2`` and their alternating bounds.

    Returns arrays ``(S_n, bound_n)`` where ``|pi^2/12 - S_n| <= 1/(n+1)^2``.
    """
    k = np.arange(1, n + 1, dtype=float)
    terms = np.where(k % 2 == 1, 1.0, -1.0) / (k * k)
    partial = np.cumsum(terms)
    return partial, 1.0 / (k + 1.0) ** 2


# ---------------------------------------------------------------- key lemma

def key_lemma_check(cfg: ProblemConfig, trunc=None, tau: float = 200.0, *,
                    route: str = "series", dps: int | None = None):
    """Evaluate ``z^3 exp(-a z) int_0^{T'} u(a,t) exp(-z^2 t) dt`` for unit flux.

    The leading-order value is 2. With the exact closed form of ``R1`` the
    ``r1`` route gives ``2/(1 - exp(2 a z))`` exactly.

    Parameters
    ----------
    cfg : ProblemConfig
        Neumann configuration. The observation window ``M c < min(T, 2 T')`` is required.
    trunc : SeriesTruncation, optional
        Number of explicitly summed eigenmodes for the ``series`` route
        (default 500). The remaining modes are added through an Euler-Boole tail.
    route : {"series", "r1", "integral"}
        ``series`` integrates the eigen-expansion termwise in closed form.
        ``r1`` uses the remainder function R1. ``integral`` integrates the
        image-series trace numerically (see ``transform.weighted_integral_callable``).
    dps : int, optional
        Working digits. The default covers the ``exp(-c a tau)`` cancellation.

    Returns
    -------
    mpmath.mpc
    """
    if abs(cfg.rho) > 0:
        raise ValueError("key lemma check is for the Neumann case (rho = 0)")
    if not cfg.window_ok():
        raise ValueError(f"window condition M c < min(T, 2T') fails: Mc={cfg.M * cfg.c}")
    sp = spectral_parameter(tau, cfg.c)
    if dps is None:
        dps = 30 + int(math.ceil(2.0 * cfg.c * cfg.a * tau / math.log(10)))
    with mpmath.workdps(dps):
        a, Tp = mpmath.mpf(cfg.a), mpmath.mpf(cfg.T_prime)
        z, z2 = spectral_parameter_mp(tau, cfg.c)
        pref = z**3 * mpmath.exp(-a * z)
        if route == "r1":
            # closed form of R1 at full working precision (r1() takes a rounded w)
            w = -a * z / mpmath.pi
            q = mpmath.exp(-mpmath.pi * w)
            R = (mpmath.pi / w) * q / (1 - q * q)
            val = -(2 * a / (mpmath.pi**2 * z2)) * mpmath.exp(-a * z) * R
            return +(val * z**3)
        if route == "series":
            K = 500 if trunc is None else int(trunc.K)
            return +(pref * _series_integral_uA(a, Tp, z2, K, dps))
        if route == "integral":
            from .forward import PolyFlux, image_trace_mp
            from .transform import weighted_integral_callable

            flux = PolyFlux((1.0,))
            f = lambda t: image_trace_mp(cfg.a, flux, t, "a")  # noqa: E731
            W = weighted_integral_callable(f, cfg.T_prime, [sp], dps=dps, singular_start=False)[0]
            return +(pref * W)
    raise ValueError(f"unknown route {route!r}")


def _series_integral_uA(a, Tp, z2, K, dps):
    """``int_0^{T'} u(a,t) e^{-z^2 t} dt`` for unit flux, termwise, in mpmath."""
    pi = mpmath.pi
    E = mpmath.exp(-z2 * Tp)
    e0 = (1 - E) / z2
    e1 = (1 - E * (1 + z2 * Tp)) / z2**2
    acc = a / 6 * e0 - e1 / a
    terms = []
    for k in range(1, K):
        lam = (k * pi / a) ** 2
        terms.append((-1) ** k / lam * (1 - mpmath.exp(-(lam + z2) * Tp)) / (lam + z2))
    head = mpmath.fsum(terms)
    # tail k >= K: exp(-lam T') is far below working precision there
    if (K * math.pi / float(a)) ** 2 * float(Tp) < (dps + 10) * math.log(10):
        raise ValueError("series truncation K too small for the tail formula")
    w = a * mpmath.sqrt(z2) / pi  # any root: f depends on w^2 only
    c4 = (a / pi) ** 4
    iw = 1j * w

    def derivs(m):
        # f(k) = c4 / (k^2 (k^2 + w^2)) = (c4/w^2)(1/k^2 - 1/(k^2+w^2))
        d_inv_k2 = (-1) ** m * mpmath.factorial(m + 1) / mpmath.mpf(K) ** (m + 2)
        d_lor = (_inv_power_deriv(iw, K, m, mpmath) - _inv_power_deriv(-iw, K, m, mpmath)) / (2 * iw)
        return c4 / w**2 * (d_inv_k2 - d_lor)

    derivs.mp = True
    tail, _ = alternating_tail(derivs, K, max(9, int(0.5 * dps)))
    return acc + 2 / a * (head + tail)
