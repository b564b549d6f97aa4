"""Estimators acting on indicator curves.

* travel time ``2ca``: raw ratio, log-corrected least squares, and a
  flux-normalised two-parameter fit;
* enclosure classification of levels ``s``;
* the noise schedule ``tau(delta) = (sigma/T)|log delta|`` and the noisy
  single-point estimate;
* recovery of the Robin coefficient from the first correction to the
  reflection.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import mpmath
import numpy as np

from .core import Kind, spectral_parameter, spectral_parameter_mp
from .indicator import IndicatorCurve, heat_indicator, wave_indicator
from .transform import BoundaryData

__all__ = [
    "TravelTimeEstimate",
    "NoiseSpec",
    "Classification",
    "travel_time_raw",
    "travel_time_corrected",
    "travel_time_normalized",
    "enclosure_classify",
    "noise_schedule",
    "make_noise",
    "trapezoid_l2",
    "noisy_estimate",
    "robin_ratios",
    "robin_extract_heat",
    "refine_length",
    "robin_extract_wave",
    "reflection_arrival",
    "estimate_report",
]


@dataclass(frozen=True)
class TravelTimeEstimate:
    """An estimate of ``2ca``.

    ``method`` is ``raw_ratio``, ``log_corrected`` or ``flux_normalized``.
    """

    value: float
    method: str
    residual: float
    j_fit: int | None = None
    tau_range: tuple = (math.nan, math.nan)
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if not math.isfinite(self.residual):
            raise ValueError("non-finite residual")


@dataclass(frozen=True)
class NoiseSpec:
    delta: float
    sigma: float
    seed: int = 0

    def __post_init__(self):
        # delta = 0 is allowed and means "no noise"
        if not 0 <= self.delta < 1:
            raise ValueError(f"delta must lie in [0,1[ (got {self.delta})")
        if not 0 < self.sigma < 1:
            raise ValueError(f"sigma must lie in ]0,1[ (got {self.sigma})")


def _need(curve: IndicatorCurve, n: int):
    if len(curve) < n:
        raise ValueError(f"need at least {n} samples (got {len(curve)})")
    la = curve.log_abs
    if np.all(np.isneginf(la)):
        raise ValueError("indicator vanishes identically (degenerate data)")
    if np.any(~np.isfinite(la)):
        raise ValueError("indicator has zero or non-finite samples")
    return curve.taus, la


# ---------------------------------------------------------------- travel time

def travel_time_raw(curve: IndicatorCurve) -> TravelTimeEstimate:
    """``-log|I(tau_max)| / tau_max``; the residual is the spread over the top three."""
    if curve.s != 0.0:
        raise ValueError("travel_time_raw expects a curve at s = 0")
    taus, la = _need(curve, 8)
    ratio = -la / taus
    top = ratio[-3:]
    return TravelTimeEstimate(float(ratio[-1]), "raw_ratio", float(top.max() - top.min()),
                              tau_range=(float(taus[0]), float(taus[-1])))


def _abs_z(taus, c, kind):
    if kind is Kind.WAVE:
        return c * taus
    return np.array([abs(spectral_parameter(t, c).z) for t in taus])


def travel_time_corrected(curve: IndicatorCurve, regressor: str = "log_tau") -> TravelTimeEstimate:
    """Least squares ``log|I| = -beta tau + p L(tau) + q``.

    ``L`` is ``log tau`` (default) or ``log|z(tau)|`` (``regressor="log_abs_z"``).
    The second form makes the power correction exact for polynomial fluxes,
    where ``|I| ~ 2|gamma_j| |z|^(-2(j+1)) exp(-2 c a tau)``.
    ``j_fit`` is ``|p|/2 - 1`` rounded to an integer.

    Raises
    ------
    ValueError
        Fewer than 8 samples, a span below a factor 4, or a rank-deficient fit.
    """
    if curve.s != 0.0:
        raise ValueError("travel_time_corrected expects a curve at s = 0")
    taus, la = _need(curve, 8)
    if taus[-1] < 4.0 * taus[0]:
        raise ValueError(f"tau grid spans only a factor {taus[-1] / taus[0]:.3g} (< 4)")
    if regressor == "log_tau":
        L = np.log(taus)
    elif regressor == "log_abs_z":
        L = np.log(_abs_z(taus, curve.c, curve.kind))
    else:
        raise ValueError(f"unknown regressor {regressor!r}")
    A = np.column_stack([-taus, L, np.ones_like(taus)])
    coef, _, rank, sv = np.linalg.lstsq(A, la, rcond=None)
    if rank < 3 or sv[-1] / sv[0] < 1e-13:
        raise ValueError("rank-deficient fit (tau grid too narrow)")
    beta, p, q = coef
    res = la - A @ coef
    jf = abs(p) / 2.0 - 1.0
    return TravelTimeEstimate(float(beta), "log_corrected", float(np.sqrt(np.mean(res**2))),
                              j_fit=int(round(jf)), tau_range=(float(taus[0]), float(taus[-1])),
                              details={"p": float(p), "q": float(q), "j_raw": float(jf), "regressor": regressor})


def _flux_normalised_log(curve: IndicatorCurve, wprime0):
    """``log|I / I_ref|`` with the infinite-rod reflection ``I_ref = 2 w'(0)`` (heat) or ``2 w'(0)/c`` (wave)."""
    if len(wprime0) != len(curve):
        raise ValueError("one flux transform per sample is required")
    out = []
    for p, w in zip(curve.samples, wprime0):
        if w.log_magnitude == -math.inf:
            raise ValueError("flux transform vanishes; the flux fails condition c on this range")
        ref = math.log(2.0) + w.log_magnitude - (math.log(curve.c) if curve.kind is Kind.WAVE else 0.0)
        out.append(p.log_magnitude - p.tau * p.s - ref)
    return np.array(out)


def travel_time_normalized(curve: IndicatorCurve, wprime0, top: int | None = None) -> TravelTimeEstimate:
    """Fit ``log|I/(2 w'(0))| = -beta tau + r / tau``.

    Dividing by the flux transform removes the flux-dependent power law, so
    only a ``1/tau`` correction from the far boundary stays (``r`` tracks the
    Robin coefficient). With sampled data, restrict to the range where the
    transforms are still resolved.
    """
    taus, _ = _need(curve, 3)
    y = _flux_normalised_log(curve, wprime0)
    if top:
        taus, y = taus[-top:], y[-top:]
    A = np.column_stack([-taus, 1.0 / taus])
    coef, _, rank, _ = np.linalg.lstsq(A, y, rcond=None)
    if rank < 2:
        raise ValueError("rank-deficient fit")
    res = y - A @ coef
    return TravelTimeEstimate(float(coef[0]), "flux_normalized", float(np.sqrt(np.mean(res**2))),
                              tau_range=(float(taus[0]), float(taus[-1])), details={"r": float(coef[1])})


# ---------------------------------------------------------------- classification

@dataclass(frozen=True)
class Classification:
    labels: dict
    slopes: dict
    dead_band: float
    estimate: float | None  # supremum of the decaying levels


def enclosure_classify(curves, decade: float = 10.0, dead_band: float | None = None) -> Classification:
    """Label each level ``s`` by the sign of the ``log|I|`` slope over the top decade.

    When the grid spans less than ``decade`` the whole grid is used. Slopes
    within ``dead_band`` of zero are labelled ``boundary``. The default band is
    ``2 log(tau_max)/tau_max``, the size of the logarithmic correction to the
    slope, so a level within that distance of ``2ca`` is not called either way.
    """
    curves = list(curves)
    if not curves:
        raise ValueError("no curves")
    taus = curves[0].taus
    for cv in curves[1:]:
        if cv.taus.shape != taus.shape or np.any(cv.taus != taus):
            raise ValueError("curves must share the tau grid")
    sel = taus >= taus[-1] / decade
    if sel.sum() < 2:
        raise ValueError("top decade holds fewer than two samples")
    band = 2.0 * math.log(taus[-1]) / taus[-1] if dead_band is None else float(dead_band)
    labels, slopes = {}, {}
    for cv in curves:
        la = cv.log_abs[sel]
        slope = float(np.polyfit(taus[sel], la, 1)[0])
        slopes[cv.s] = slope
        if abs(slope) <= band:
            labels[cv.s] = "boundary"
        else:
            labels[cv.s] = "decaying" if slope < 0 else "growing"
    dec = [s for s, lab in labels.items() if lab == "decaying"]
    return Classification(labels, slopes, band, max(dec) if dec else None)


# ---------------------------------------------------------------- noise

def noise_schedule(noise: NoiseSpec, T: float) -> float:
    """``tau(delta) = (sigma / T) |log delta|``."""
    if noise.delta == 0:
        raise ValueError("the schedule needs delta > 0")
    return noise.sigma / T * abs(math.log(noise.delta))


def trapezoid_l2(v, times) -> float:
    """Trapezoidal L2 norm. It bounds the norm of the piecewise-linear interpolant from above."""
    v = np.asarray(v, dtype=float)
    h = float(times[1] - times[0])
    w = np.full(v.size, h)
    w[0] = w[-1] = h / 2
    return math.sqrt(float(np.sum(w * v * v)))


def make_noise(noise: NoiseSpec, times) -> tuple[np.ndarray, np.ndarray]:
    """Seeded white noise ``(E1, E2)`` rescaled so that ``||E1|| + ||E2|| = delta``."""
    rng = np.random.default_rng(noise.seed)
    e1 = rng.standard_normal(len(times))
    e2 = rng.standard_normal(len(times))
    e1[0] = 0.0  # keeps observed u(0,0) = 0
    if noise.delta == 0:
        return np.zeros_like(e1), np.zeros_like(e2)
    n = trapezoid_l2(e1, times) + trapezoid_l2(e2, times)
    return e1 * (noise.delta / n), e2 * (noise.delta / n)


def noisy_estimate(data: BoundaryData, noise: NoiseSpec, c: float, *, kind: Kind = Kind.HEAT,
                   precision="plain", M: float | None = None) -> TravelTimeEstimate:
    """Single-point estimate ``-log|I(tau(delta); E1, E2)| / tau(delta)``.

    Raises
    ------
    ValueError
        If ``tau(delta) <= 1/c^2`` (``delta`` too large for this ``c``).
    """
    tau = noise_schedule(noise, data.T)
    if Kind(kind) is Kind.HEAT and tau <= 1.0 / c**2:
        raise ValueError(f"tau(delta) = {tau:.4g} does not exceed 1/c^2 = {1.0 / c**2:.4g}")
    noisy = BoundaryData(data.times, data.u0, data.g, make_noise(noise, data.times))
    if Kind(kind) is Kind.HEAT:
        smp = heat_indicator(noisy, c, tau, precision=precision, M=M)
    else:
        smp = wave_indicator(noisy, c, tau, precision=precision, M=M)
    return TravelTimeEstimate(-smp.log_magnitude / tau, "raw_ratio", 0.0, tau_range=(tau, tau),
                              details={"delta": noise.delta, "sigma": noise.sigma, "seed": noise.seed,
                                       "indicator": [smp.value.real, smp.value.imag]})


# ---------------------------------------------------------------- Robin

def _mp_value(sample):
    return sample.exact if sample.exact is not None else mpmath.mpc(sample.value)


def robin_ratios(curve: IndicatorCurve, wprime0, a_est: float) -> list:
    """First-correction ratios, one per sample.

    Heat: ``z (I exp(-2 a z) + 2 w'(0)) / (2 w'(0))``, tending to ``-2 rho``.
    Wave: ``c tau (I exp(2 c a tau) + (2/c) w'(0)) / (2 w'(0))``, tending to ``2 rho``.
    The indicator is taken at ``s = 0``.
    """
    if len(wprime0) != len(curve):
        raise ValueError("one flux transform per sample is required")
    out = []
    with mpmath.workdps(40):
        a = mpmath.mpf(a_est)
        for p, w in zip(curve.samples, wprime0):
            wv = w.exact if w.exact is not None else mpmath.mpc(w.value)
            if wv == 0 or w.log_magnitude < -700:
                raise ValueError("|w'(0)| is below the floor; the flux fails condition c here")
            I = _mp_value(p)
            if p.exact is None and p.s:
                I = I * mpmath.exp(-p.tau * mpmath.mpf(p.s))
            if curve.kind is Kind.WAVE:
                c = mpmath.mpf(curve.c)
                tau = mpmath.mpf(p.tau)
                r = c * tau * (I * mpmath.exp(2 * c * a * tau) + 2 / c * wv) / (2 * wv)
            else:
                z, _ = spectral_parameter_mp(p.tau, curve.c)
                r = z * (I * mpmath.exp(-2 * a * z) + 2 * wv) / (2 * wv)
            out.append(complex(r))
    return out


def _extrapolate(taus, vals):
    """Intercept of ``vals = A + B / tau`` (complex least squares)."""
    X = np.column_stack([np.ones_like(taus), 1.0 / taus]).astype(complex)
    coef = np.linalg.lstsq(X, np.asarray(vals, dtype=complex), rcond=None)[0]
    return coef[0]


def refine_length(curve: IndicatorCurve, wprime0, a_est: float, iters: int = 3) -> float:
    """Correct ``a_est`` from the imaginary parts of the heat ratios.

    An error ``da`` in ``a`` adds ``-2 da z^2`` to each ratio. The true ratio
    tends to a real limit with an ``O(1/tau)`` correction, while
    ``Im z^2 ~ 2 c^2 tau^2`` grows fast, so a real least-squares fit of
    ``Im r = u + v/tau + D Im z^2`` isolates ``D = -2 da``.
    """
    taus = curve.taus
    if taus.size < 4:
        raise ValueError("need at least 4 samples to refine a")
    imz2 = np.array([sp.z_squared.imag for sp in curve.spectral_points()])
    X = np.column_stack([np.ones_like(taus), 1.0 / taus, imz2])
    a = float(a_est)
    for _ in range(iters):
        r = np.array(robin_ratios(curve, wprime0, a))
        coef = np.linalg.lstsq(X, r.imag, rcond=None)[0]
        a -= coef[2] / 2.0
    return a


def robin_extract_heat(curve: IndicatorCurve, wprime0, a_est: float, top: int = 3, *,
                       refine: bool = True) -> float:
    """Robin coefficient from the heat indicator.

    The ratios over the ``top`` largest ``tau`` are extrapolated as ``A + B/tau``
    and ``rho = -Re(A)/2`` is returned. An error ``da`` in ``a_est`` shifts the
    real part by ``-2 da tau``, which is large even for ``da/a ~ 1e-4``; with
    ``refine`` (default) ``a_est`` is first corrected by :func:`refine_length`.
    """
    if curve.kind is not Kind.HEAT:
        raise ValueError("heat curve required")
    if refine and len(curve) >= 4:
        a_est = refine_length(curve, wprime0, a_est)
    r = robin_ratios(curve, wprime0, a_est)
    A = _extrapolate(curve.taus[-top:], r[-top:])
    return float(-A.real / 2.0)


def robin_extract_wave(curve: IndicatorCurve, wprime0, a_est: float, top: int = 3) -> float:
    """Robin coefficient from the wave indicator, ``rho = A/2`` after extrapolation."""
    if curve.kind is not Kind.WAVE:
        raise ValueError("wave curve required")
    r = robin_ratios(curve, wprime0, a_est)
    A = _extrapolate(curve.taus[-top:], r[-top:])
    return float(A.real / 2.0)


def _first_crossing(v, level, h):
    idx = np.nonzero(v >= level)[0]
    if idx.size == 0:
        raise ValueError("signal never reaches the detection level")
    k = int(idx[0])
    if k == 0:
        return 0.0
    # linear interpolation between the bracketing samples
    return (k - 1 + (level - v[k - 1]) / (v[k] - v[k - 1])) * h


def reflection_arrival(data: BoundaryData, c: float, level: float = 0.05) -> float:
    """Arrival time of the first reflection in a wave trace.

    For ``c^2 u_tt = u_xx`` the outgoing wave alone gives ``u(0,t) = -G(t)/c``
    with ``G`` the running integral of the flux. What is left,
    ``-(c/2) d/dt (u0 + G/c)``, begins as a delayed copy of the flux, because
    any reflection coefficient tends to 1 at high frequency. The delay is
    measured between the leading edges: the first crossings of
    ``level * max|g|`` by the flux and by that residual. A correlation peak
    would instead be pulled by the slow tail that a Robin end adds.
    """
    u0, g = data.observed_u0, data.observed_g
    h = data.dt
    G = np.concatenate(([0.0], np.cumsum(0.5 * (g[1:] + g[:-1]) * h)))
    resid = -0.5 * c * np.gradient(u0 + G / c, h)
    thr = level * float(np.max(np.abs(g)))
    if thr == 0:
        raise ValueError("zero flux")
    t_g = _first_crossing(g, thr, h)
    # skip the emission itself; np.gradient smears ~one sample
    lag_start = int(np.nonzero(g >= thr)[0][0])
    return _first_crossing(resid[lag_start + 2:], thr, h) + (lag_start + 2) * h - t_g


# ---------------------------------------------------------------- report

def estimate_report(est: TravelTimeEstimate, config: dict) -> dict:
    """JSON-ready record ``{method, value, residual, config, tau_range, ...}``."""
    rep = {
        "method": est.method,
        "value": est.value,
        "residual": est.residual,
        "config": config,
        "tau_range": list(est.tau_range),
    }
    if est.j_fit is not None:
        rep["j_fit"] = est.j_fit
    if est.details:
        rep["details"] = est.details
    json.dumps(rep)  # fail early on anything not serialisable
    return rep
