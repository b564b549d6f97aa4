"""Indicator functions built from boundary observations.

Heat (probe ``v = exp(-z^2 t + x z)``)::

    I(tau; s) = exp(tau s) * int_0^T (-z u(0,t) + u_x(0,t)) exp(-z^2 t) dt

Wave (probe ``v = exp(-tau (c x + t))``)::

    I(tau) = int_0^T (tau u(0,t) + u_x(0,t)/c) exp(-tau t) dt

Only :class:`~enclosure.transform.BoundaryData` or
:class:`~enclosure.transform.ContinuousData` enters here. The rod length never
does. :func:`ibp_crosscheck` is the exception: it is an oracle that reads the
interior field of a forward run and lives here for testing.
"""
from __future__ import annotations

import cmath
import csv
import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import mpmath
import numpy as np

from .core import Kind, SpectralPoint, spectral_parameter, spectral_parameter_mp, wave_spectral_point
from .transform import (
    DD_DPS,
    BoundaryData,
    ContinuousData,
    Precision,
    WeightedIntegral,
    _filon_mp,
    _filon_plain,
    check_ceiling,
    digits_needed,
    weighted_integral_callable,
)

__all__ = [
    "IndicatorSample",
    "IndicatorCurve",
    "heat_indicator",
    "wave_indicator",
    "heat_curve",
    "wave_curve",
    "wprime0_curve",
    "ibp_crosscheck",
]


@dataclass(frozen=True)
class IndicatorSample:
    """One indicator value.

    ``log_magnitude`` is authoritative; ``value`` may under- or overflow for
    extreme ``tau s`` and is then reported as 0 or inf with the right phase.
    ``exact`` keeps the mpmath value (without the ``exp(tau s)`` factor) in
    extended-precision runs.
    """

    tau: float
    s: float
    value: complex
    log_magnitude: float
    exact: object = None

    @property
    def phase(self) -> float:
        return cmath.phase(self.value) if self.value != 0 else 0.0


def _sample(tau: float, s: float, w) -> IndicatorSample:
    """Wrap an unscaled value ``w`` and apply ``exp(tau s)`` in log space."""
    if isinstance(w, (mpmath.mpc, mpmath.mpf)):
        if w == 0:
            return IndicatorSample(tau, s, 0j, -math.inf, w)
        lm = float(mpmath.log(abs(w))) + tau * s
        ph = float(mpmath.arg(w))
        return IndicatorSample(tau, s, _rect(lm, ph), lm, w)
    w = complex(w)
    if w == 0:
        return IndicatorSample(tau, s, 0j, -math.inf)
    lm = math.log(abs(w)) + tau * s
    return IndicatorSample(tau, s, _rect(lm, cmath.phase(w)), lm)


def _rect(lm: float, ph: float) -> complex:
    if lm > 709.0:
        return complex(math.inf, 0.0)
    if lm < -745.0:
        return 0j
    if ph == 0.0 or ph == math.pi:
        # keep real values real (rect leaves sin(pi) ~ 1e-16 behind)
        return complex(math.copysign(math.exp(lm), math.cos(ph)), 0.0)
    return cmath.rect(math.exp(lm), ph)


@dataclass
class IndicatorCurve:
    """Ascending-``tau`` samples sharing ``s``, ``c`` and the kind."""

    config: dict
    samples: list = field(default_factory=list)

    def __post_init__(self):
        taus = [p.tau for p in self.samples]
        if any(b <= a for a, b in zip(taus, taus[1:])):
            raise ValueError("tau must be strictly ascending")
        if len({p.s for p in self.samples}) > 1:
            raise ValueError("all samples must share s")

    @property
    def kind(self) -> Kind:
        return Kind(self.config.get("kind", "heat"))

    @property
    def c(self) -> float:
        return float(self.config["c"])

    @property
    def s(self) -> float:
        return self.samples[0].s if self.samples else 0.0

    @property
    def taus(self) -> np.ndarray:
        return np.array([p.tau for p in self.samples])

    @property
    def log_abs(self) -> np.ndarray:
        return np.array([p.log_magnitude for p in self.samples])

    @property
    def values(self) -> np.ndarray:
        return np.array([p.value for p in self.samples])

    def __len__(self):
        return len(self.samples)

    def shifted(self, s_new: float) -> "IndicatorCurve":
        """Same curve at another level: ``I(tau; s') = exp(tau (s' - s)) I(tau; s)``."""
        out = []
        for p in self.samples:
            lm = p.log_magnitude + p.tau * (s_new - p.s)
            out.append(IndicatorSample(p.tau, s_new, _rect(lm, p.phase), lm, p.exact))
        return IndicatorCurve(dict(self.config), out)

    def spectral_points(self) -> list[SpectralPoint]:
        mk = wave_spectral_point if self.kind is Kind.WAVE else spectral_parameter
        return [mk(t, self.c) for t in self.taus]

    # CSV contract: tau,s,re,im,log_abs
    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["tau", "s", "re", "im", "log_abs"])
        for p in self.samples:
            w.writerow([repr(float(p.tau)), repr(float(p.s)), repr(p.value.real), repr(p.value.imag),
                        repr(float(p.log_magnitude))])
        text = buf.getvalue()
        if path is not None:
            from .cli import atomic_write_text

            atomic_write_text(path, text)
        return text

    @classmethod
    def from_csv(cls, source, config: dict) -> "IndicatorCurve":
        """Read a curve back; ``source`` is a path or the CSV text itself."""
        text = source if "\n" in str(source) else open(source).read()
        rows = list(csv.DictReader(io.StringIO(text)))
        need = {"tau", "s", "re", "im", "log_abs"}
        if not rows or not need <= set(rows[0]):
            raise ValueError(f"indicator CSV needs columns {sorted(need)}")
        samples = [IndicatorSample(float(r["tau"]), float(r["s"]), complex(float(r["re"]), float(r["im"])),
                                   float(r["log_abs"])) for r in rows]
        return cls(dict(config), samples)


# ---------------------------------------------------------------- single values

def _check_tau(tau, c, M, precision, kind):
    p = Precision.parse(precision)
    if kind is Kind.HEAT and not tau > 1.0 / c**2:
        raise ValueError(f"tau must exceed 1/c^2 = {1.0 / c**2:.6g} (got {tau})")
    if kind is Kind.WAVE and not tau > 0:
        raise ValueError("tau must be positive")
    if not isinstance(p, Precision):
        raise ValueError(precision)
    check_ceiling(tau, c, M, p)
    return p


def _sampled_pair(data: BoundaryData, sp: SpectralPoint, p: Precision, dps: int | None):
    """Unscaled indicator and ``w'(0)`` from sampled data."""
    u0, g = data.observed_u0, data.observed_g
    h = data.dt
    if p is Precision.PLAIN:
        if sp.kind is Kind.WAVE:
            wu, wg = _filon_plain(u0.astype(complex), h, sp.z_squared), _filon_plain(g.astype(complex), h, sp.z_squared)
            return sp.tau * wu + wg / sp.c, wg
        wu, wg = _filon_plain(u0.astype(complex), h, sp.z_squared), _filon_plain(g.astype(complex), h, sp.z_squared)
        return -sp.z * wu + wg, wg
    digits = DD_DPS if p is Precision.DOUBLE_DOUBLE else int(dps or DD_DPS)
    wu = _filon_mp(u0, h, sp, digits)
    wg = _filon_mp(g, h, sp, digits)
    with mpmath.workdps(digits + 8):
        if sp.kind is Kind.WAVE:
            return mpmath.mpf(sp.tau) * wu + wg / mpmath.mpf(sp.c), wg
        z, _ = spectral_parameter_mp(sp.tau, sp.c)
        return -z * wu + wg, wg


def _continuous_pairs(data: ContinuousData, sps: Sequence[SpectralPoint], dps: int):
    wus, wgs = weighted_integral_callable([data.u0, data.g], data.T, sps, dps=dps,
                                          singular_start=data.singular_start)
    out = []
    with mpmath.workdps(dps + 10):
        for sp, wu, wg in zip(sps, wus, wgs):
            if sp.kind is Kind.WAVE:
                out.append((mpmath.mpf(sp.tau) * wu + wg / mpmath.mpf(sp.c), wg))
            else:
                z, _ = spectral_parameter_mp(sp.tau, sp.c)
                out.append((-z * wu + wg, wg))
    return out


def heat_indicator(data, c: float, tau: float, s: float = 0.0, *, precision="plain", M: float | None = None,
                   dps: int | None = None) -> IndicatorSample:
    """Heat indicator ``I(tau; s)`` from boundary observations.

    Parameters
    ----------
    data : BoundaryData or ContinuousData
        Noise fields of sampled data are added before integration.
    precision : {"plain", "double_double", "multiprecision"}
        ``ContinuousData`` always runs in multiprecision.
    M : float, optional
        Known bound ``M >= 2a``, used to reject ``tau`` beyond the
        cancellation ceiling of ``precision``.
    dps : int, optional
        Digits for multiprecision; defaults to what ``c M tau`` requires.
    """
    sp = spectral_parameter(tau, c)
    if isinstance(data, ContinuousData):
        return heat_curve(data, c, [tau], s, precision="multiprecision", M=M, dps=dps).samples[0]
    p = _check_tau(tau, c, M, precision, Kind.HEAT)
    val, _ = _sampled_pair(data, sp, p, dps)
    return _sample(sp.tau, s, val)


def wave_indicator(data, c: float, tau: float, *, precision="plain", M: float | None = None,
                   dps: int | None = None) -> IndicatorSample:
    """Wave indicator ``int (tau u0 + g/c) exp(-tau t) dt``."""
    sp = wave_spectral_point(tau, c)
    if isinstance(data, ContinuousData):
        return wave_curve(data, c, [tau], precision="multiprecision", M=M, dps=dps).samples[0]
    p = _check_tau(tau, c, M, precision, Kind.WAVE)
    val, _ = _sampled_pair(data, sp, p, dps)
    return _sample(sp.tau, 0.0, val)


# ---------------------------------------------------------------- curves

def _curve(data, c, taus, s, precision, M, dps, kind, config):
    taus = [float(t) for t in taus]
    if any(b <= a for a, b in zip(taus, taus[1:])):
        raise ValueError("tau grid must be strictly ascending")
    mk = wave_spectral_point if kind is Kind.WAVE else spectral_parameter
    sps = [mk(t, c) for t in taus]
    cfg = {"c": c, "kind": kind.value, "precision": Precision.parse(precision).value}
    if M is not None:
        cfg["M"] = M
    cfg.update(config or {})
    if isinstance(data, ContinuousData):
        if dps is None:
            if M is None:
                raise ValueError("multiprecision runs need M (or an explicit dps)")
            dps = digits_needed(c, M, max(taus))
        cfg["precision"] = "multiprecision"
        cfg["dps"] = dps
        pairs = _continuous_pairs(data, sps, dps)
    else:
        p = Precision.parse(precision)
        for t in taus:
            _check_tau(t, c, M, p, kind)
        pairs = [_sampled_pair(data, sp, p, dps) for sp in sps]
    samples = [_sample(sp.tau, s, v) for sp, (v, _) in zip(sps, pairs)]
    wp = [WeightedIntegral.make(w, sp.tau) for sp, (_, w) in zip(sps, pairs)]
    curve = IndicatorCurve(cfg, samples)
    curve.wprime0 = wp
    return curve


def heat_curve(data, c: float, taus, s: float = 0.0, *, precision="plain", M: float | None = None,
               dps: int | None = None, config: dict | None = None) -> IndicatorCurve:
    """Heat indicator over a grid. The flux transforms are kept as ``curve.wprime0``."""
    return _curve(data, c, taus, s, precision, M, dps, Kind.HEAT, config)


def wave_curve(data, c: float, taus, *, precision="plain", M: float | None = None, dps: int | None = None,
               config: dict | None = None) -> IndicatorCurve:
    """Wave indicator over a grid, with ``curve.wprime0`` as for :func:`heat_curve`."""
    return _curve(data, c, taus, 0.0, precision, M, dps, Kind.WAVE, config)


def wprime0_curve(curve: IndicatorCurve) -> list[WeightedIntegral]:
    """Flux transforms ``int g exp(-z^2 t) dt`` computed alongside ``curve``."""
    wp = getattr(curve, "wprime0", None)
    if wp is None:
        raise ValueError("curve carries no flux transforms (was it read from CSV?)")
    return wp


# ---------------------------------------------------------------- oracle

def ibp_crosscheck(fld, data: BoundaryData, sp: SpectralPoint, s: float = 0.0) -> float:
    """Relative residual of the integration-by-parts identity for a heat run.

    The right side is built from the interior solution::

        -z e^{tau s} e^{a z} int_0^T u(a,t) e^{-z^2 t} dt
          - e^{tau s} e^{-z^2 T} int_0^a u(x,T) e^{x z} dx

    and compared with :func:`heat_indicator`. Both time and space integrals
    use the exact piecewise-linear rule.

    Raises
    ------
    ValueError
        If the field and the data do not share the time grid.
    """
    if fld.kind is not Kind.HEAT:
        raise ValueError("ibp_crosscheck is defined for heat runs")
    t = fld.times
    if data.times.shape != t.shape or np.max(np.abs(data.times - t)) > 1e-12 * max(1.0, t[-1]):
        raise ValueError("field and boundary data use different time grids")
    a = fld.dx * fld.nx
    lhs = heat_indicator(data, sp.c, sp.tau, 0.0).value
    ua = np.asarray(fld.traceA, dtype=complex)
    if np.any(~np.isfinite(ua)):
        raise ValueError("field lacks the x = a trace")
    wa = _filon_plain(ua, fld.dt, sp.z_squared)
    uT = np.asarray(fld.values[-1], dtype=complex)
    # spatial weight exp(x z) = exp(-q x) with q = -z
    wx = _filon_plain(uT, fld.dx, -sp.z)
    rhs = -sp.z * cmath.exp(a * sp.z) * wa - cmath.exp(-sp.z_squared * t[-1]) * wx
    if lhs == 0 and rhs == 0:
        return 0.0
    # e^{tau s} multiplies both sides and cancels in the ratio
    return abs(lhs - rhs) / max(abs(lhs), abs(rhs))
