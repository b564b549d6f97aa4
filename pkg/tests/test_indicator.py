import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from enclosure.core import Kind, ProblemConfig, spectral_parameter, spectral_parameter_mp
from enclosure.forward import (
    PolyFlux,
    continuous_data,
    heat_fd_solve,
    sampled_data,
    sine_squared_pulse,
    wave_fd_solve,
)
from enclosure.indicator import (
    IndicatorCurve,
    IndicatorSample,
    heat_curve,
    heat_indicator,
    ibp_crosscheck,
    wave_curve,
    wave_indicator,
    wprime0_curve,
)
from enclosure.transform import BoundaryData, _filon_plain

CFG = ProblemConfig(a=0.5, T=0.5, T_prime=0.5, c=0.2, M=1.0)
FLUX = PolyFlux((1.0,))
DATA = sampled_data(CFG, FLUX, 4000)


def test_zero_data():
    t = np.linspace(0, 0.5, 101)
    z = BoundaryData(t, np.zeros_like(t), np.zeros_like(t))
    assert heat_indicator(z, 0.2, 50.0).value == 0
    assert heat_indicator(z, 0.2, 50.0).log_magnitude == -math.inf
    assert wave_indicator(z, 0.05, 50.0).value == 0


@given(st.floats(-100, 100).filter(lambda x: abs(x) > 1e-6))
def test_linearity(alpha):
    a = heat_indicator(DATA.scaled(alpha), 0.2, 60.0).value
    b = heat_indicator(DATA, 0.2, 60.0).value
    assert abs(a - alpha * b) <= 1e-10 * abs(alpha * b)


def test_shift_identity():
    curve = heat_curve(DATA, 0.2, np.linspace(30, 100, 8), s=0.0)
    for s_new in (0.05, 0.2, 0.3):
        direct = heat_curve(DATA, 0.2, curve.taus, s=s_new)
        moved = curve.shifted(s_new)
        assert np.allclose(direct.log_abs, moved.log_abs, rtol=0, atol=1e-12)
        assert np.allclose(direct.values, moved.values, rtol=1e-12, atol=0)


def test_heat_exact_laplace_form_multiprecision():
    taus = [100.0, 150.0]
    curve = heat_curve(continuous_data(CFG, FLUX), 0.2, taus, M=CFG.M)
    for tau, p, wp in zip(taus, curve.samples, curve.wprime0):
        with mpmath.workdps(60):
            z, _ = spectral_parameter_mp(tau, 0.2)
            g = wp.exact
            ref = -2 * g * mpmath.exp(2 * CFG.a * z) / (1 - mpmath.exp(2 * CFG.a * z))
            rel = abs(p.exact - ref) / abs(ref)
        # finite horizon: relative remainder of order exp(-tau (T - 2ca))
        assert float(rel) < 1e3 * math.exp(-tau * (CFG.T - 2 * CFG.c * CFG.a))


def test_precision_modes_agree_where_plain_is_adequate():
    tau = 60.0  # c M tau = 12, well under the plain ceiling
    plain = heat_indicator(DATA, 0.2, tau, precision="plain", M=1.0)
    dd = heat_indicator(DATA, 0.2, tau, precision="double_double", M=1.0)
    assert abs(plain.value - dd.value) <= 1e-9 * abs(dd.value)
    assert dd.exact is not None


def test_ceiling_and_domain_errors():
    with pytest.raises(ValueError, match="ceiling"):
        heat_indicator(DATA, 0.2, 200.0, precision="plain", M=1.0)
    heat_indicator(DATA, 0.2, 200.0, precision="double_double", M=1.0)
    with pytest.raises(ValueError, match="1/c"):
        heat_indicator(DATA, 0.2, 20.0)
    with pytest.raises(ValueError):
        heat_curve(DATA, 0.2, [60.0, 50.0])
    with pytest.raises(ValueError, match="M"):
        heat_curve(continuous_data(CFG, FLUX), 0.2, [50.0])


def test_curve_bookkeeping_and_csv(tmp_path):
    curve = heat_curve(DATA, 0.2, np.linspace(30, 60, 4), config={"a_true": 0.5})
    assert curve.kind is Kind.HEAT and curve.c == 0.2 and len(curve) == 4
    assert len(wprime0_curve(curve)) == 4
    p = tmp_path / "c.csv"
    text = curve.to_csv(p)
    assert p.read_text() == text
    back = IndicatorCurve.from_csv(p, curve.config)
    assert np.array_equal(back.log_abs, curve.log_abs)
    assert np.array_equal(back.values, curve.values)
    assert IndicatorCurve.from_csv(text, curve.config).taus.tolist() == curve.taus.tolist()
    with pytest.raises(ValueError, match="CSV"):
        IndicatorCurve.from_csv(tmp_path / "c.csv" if False else "a,b\n1,2\n", {})
    with pytest.raises(ValueError):
        wprime0_curve(back)
    with pytest.raises(ValueError):
        IndicatorCurve({"c": 1}, [IndicatorSample(2.0, 0, 1, 0), IndicatorSample(1.0, 0, 1, 0)])
    with pytest.raises(ValueError):
        IndicatorCurve({"c": 1}, [IndicatorSample(1.0, 0, 1, 0), IndicatorSample(2.0, 1, 1, 0)])


def test_log_magnitude_survives_underflow():
    curve = heat_curve(DATA, 0.2, [60.0])
    far = curve.shifted(-20.0)
    assert far.values[0] == 0 and np.isfinite(far.log_abs[0])
    assert far.log_abs[0] == pytest.approx(curve.log_abs[0] - 1200.0)


def test_ibp_crosscheck_zero_and_refinement():
    cfg = ProblemConfig(a=0.1, T=0.5, T_prime=0.5, c=0.15, M=0.2)
    sp = spectral_parameter(50.0, 0.15)
    zero = heat_fd_solve(cfg, np.zeros(101), 16, 100)
    assert ibp_crosscheck(zero, zero.boundary_data(), sp) == 0.0
    res = []
    for nx, nt in ((100, 1000), (200, 2000)):
        fld = heat_fd_solve(cfg, FLUX, nx, nt)
        res.append(ibp_crosscheck(fld, fld.boundary_data(), sp))
    assert res[1] < res[0] < 1e-2
    trace_only = heat_fd_solve(cfg, FLUX, 32, 100, store="traces")
    with pytest.raises(ValueError):
        ibp_crosscheck(trace_only, DATA, sp)


def test_wave_green_identity():
    # I e^{2ca tau} = (tau - rho) w(a) e^{ca tau} - c e^{-tau(T-2ca)} int (u_t + tau u)(x,T) e^{-c tau x} dx
    cfg = ProblemConfig(a=1.0, T=0.5, T_prime=0.5, c=0.05, M=2.0, rho=1.0, kind=Kind.WAVE)
    fld = wave_fd_solve(cfg, sine_squared_pulse(0.05), 1000)
    data = fld.boundary_data()
    c, a, T = cfg.c, cfg.a, cfg.T
    for tau in (20.0, 60.0):
        I = wave_indicator(data, c, tau).value.real
        wa = _filon_plain(fld.traceA.astype(complex), fld.dt, tau).real
        ut = (fld.values[-1] - fld.values[-2]) / fld.dt
        uT = fld.values[-1]
        wx = _filon_plain((ut + tau * uT).astype(complex), fld.dx, c * tau).real
        lhs = I * math.exp(2 * c * a * tau)
        rhs = (tau - cfg.rho) * wa * math.exp(c * a * tau) - c * math.exp(-tau * (T - 2 * c * a)) * wx
        assert abs(lhs - rhs) <= 2e-2 * abs(lhs)


def test_wave_indicator_curve():
    cfg = ProblemConfig(a=1.0, T=0.5, T_prime=0.5, c=0.05, M=2.0, kind=Kind.WAVE)
    fld = wave_fd_solve(cfg, sine_squared_pulse(0.05), 500)
    curve = wave_curve(fld.boundary_data(), 0.05, [20.0, 40.0, 80.0])
    assert curve.kind is Kind.WAVE
    assert np.all(np.abs(curve.values.imag) == 0)
    assert np.all(np.diff(curve.log_abs) < 0)


def _ibp_orders(gamma):
    cfg = ProblemConfig(a=0.1, T=0.5, T_prime=0.5, c=0.15, M=0.2)
    sp = spectral_parameter(50.0, 0.15)
    res = []
    for nx, nt in ((200, 2000), (400, 4000)):
        fld = heat_fd_solve(cfg, PolyFlux(gamma), nx, nt)
        res.append(ibp_crosscheck(fld, fld.boundary_data(), sp))
    return math.log2(res[0] / res[1])


def test_ibp_refinement_order_constant_flux():
    # observed order >= 1.5 over one refinement pair
    assert _ibp_orders((1.0,)) >= 1.5


def test_ibp_refinement_order_linear_flux():
    assert _ibp_orders((0.0, 1.0)) >= 1.5
