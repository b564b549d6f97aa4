import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from enclosure.core import Kind, ProblemConfig
from enclosure.forward import (
    PolyFlux,
    SeriesTruncation,
    boundary_trace_series,
    eigen_modes,
    heat_fd_solve,
    image_trace,
    image_trace_mp,
    sine_squared_pulse,
    sine_squared_pulse_laplace,
    wave_fd_solve,
)

REF = ProblemConfig(a=1.0, T=0.5, T_prime=0.3, c=0.05, M=2.0)
UNIT = PolyFlux((1.0,))


def test_polyflux():
    f = PolyFlux((0.0, 2.0, 6.0))
    assert f.j == 1
    assert f(np.array([0.5]))[0] == pytest.approx(2 * 0.5 + 3 * 0.25)
    assert PolyFlux((0.0,)).is_zero
    assert f.antiderivative().gamma == (0.0, 0.0, 2.0, 6.0)
    with pytest.raises(ValueError):
        PolyFlux(())


def test_eigen_modes():
    modes = eigen_modes(2.0, 5)
    lam = [m.lambda_k for m in modes]
    assert all(b > a for a, b in zip(lam, lam[1:]))
    assert modes[0].psiA == pytest.approx(-math.sqrt(1.0))
    # int_0^a psi^2 = 1
    x = np.linspace(0, 2.0, 20001)
    psi = math.sqrt(2 / 2.0) * np.cos(3 * math.pi * x / 2.0)
    assert np.trapezoid(psi**2, x) == pytest.approx(1.0, rel=1e-8)


@pytest.mark.parametrize("K", [10, 50, 500])
def test_series_initial_value_within_tail_bound(K):
    trunc = SeriesTruncation.for_modes(K, 1.0)
    _, uA = boundary_trace_series(REF, UNIT, 0.0, trunc, tail_correction=False)
    assert abs(uA) <= trunc.tail_bound
    exact_tail = (2 / 1.0) * (1 / math.pi**2) * float(mpmath.zeta(2, K + 1))
    assert trunc.tail_bound >= exact_tail


def test_series_reference_value():
    t = 0.2
    k = np.arange(1, 201)
    ref = 1 / 6 - t + 2 * math.fsum((-1.0) ** k * np.exp(-(k * math.pi) ** 2 * t) / (k * math.pi) ** 2)
    _, uA = boundary_trace_series(REF, UNIT, t, SeriesTruncation.for_modes(200, 1.0))
    assert uA == pytest.approx(ref, abs=1e-14)


def test_series_large_time_form():
    cfg = REF.with_(T=5.0, T_prime=5.0, M=2.0)
    t = 4.0
    _, uA = boundary_trace_series(cfg, UNIT, t)
    assert uA == pytest.approx(1 / 6 - t, abs=1e-15)


def test_series_matches_images():
    t = np.linspace(0.0, 0.29, 30)
    for flux in (UNIT, PolyFlux((0.0, 1.0)), PolyFlux((1.0, -2.0, 3.0))):
        u0, uA = boundary_trace_series(REF, flux, t)
        assert np.max(np.abs(uA - image_trace(1.0, flux, t, "a"))) < 1e-12
        assert np.max(np.abs(u0[1:] - image_trace(1.0, flux, t[1:], "0"))) < 1e-8


def test_series_rejects_outside_window():
    with pytest.raises(ValueError):
        boundary_trace_series(REF, UNIT, 0.3)
    with pytest.raises(ValueError):
        boundary_trace_series(REF.with_(rho=1.0), UNIT, 0.1)


def test_image_mp_agrees_with_float():
    for t in (1e-4, 0.01, 0.2, 0.45):
        with mpmath.workdps(30):
            for point in ("0", "a"):
                hi = image_trace_mp(1.0, PolyFlux((1.0, 1.0)), t, point)
                lo = image_trace(1.0, PolyFlux((1.0, 1.0)), t, point)
                assert abs(float(hi) - lo) < 1e-14


def test_half_line_short_time():
    # before the far end is felt u(0,t) = -2 sqrt(t/pi)
    t = 1e-3
    assert image_trace(1.0, UNIT, t, "0") == pytest.approx(-2 * math.sqrt(t / math.pi), rel=1e-12)


def test_fd_zero_flux():
    fld = heat_fd_solve(REF, np.zeros(201), 32, 200)
    assert np.all(fld.values == 0.0)
    w = wave_fd_solve(REF.with_(kind=Kind.WAVE), np.zeros(401), 32, 400)
    assert np.all(w.values == 0.0)


def test_fd_initial_row_and_grid_checks():
    fld = heat_fd_solve(REF, UNIT, 32, 100)
    assert np.all(fld.values[0] == 0.0)
    with pytest.raises(ValueError):
        heat_fd_solve(REF, np.ones(10), 32, 100)
    with pytest.raises(ValueError):
        heat_fd_solve(REF, UNIT, 8, 100)


def test_fd_traces_match_series():
    cfg = REF.with_(T_prime=0.5)
    fld = heat_fd_solve(cfg, UNIT, 200, 2000, store="traces")
    t = fld.times[:-1]
    u0, uA = boundary_trace_series(cfg, UNIT, t)
    assert np.max(np.abs(fld.traceA[:-1] - uA)) <= 1e-4
    # the sqrt(t) onset costs accuracy on the x=0 trace in the first steps
    assert np.max(np.abs(fld.trace0[:-1] - u0)) <= 2e-4


def test_fd_robin_delayed_influence():
    t_grid = 4000
    n = heat_fd_solve(REF, UNIT, 400, t_grid, store="traces")
    r = heat_fd_solve(REF.with_(rho=1.0), UNIT, 400, t_grid, store="traces")
    early = n.times < 0.01
    assert np.max(np.abs(n.traceA[early] - r.traceA[early])) < 1e-8
    assert np.max(np.abs(n.traceA - r.traceA)) > 1e-3


def test_fd_robin_boundary_residual():
    cfg = REF.with_(rho=1.0)
    fld = heat_fd_solve(cfg, UNIT, 200, 1000)
    u = fld.values[-1]
    dx = fld.dx
    ux = (3 * u[-1] - 4 * u[-2] + u[-3]) / (2 * dx)
    assert abs(ux + cfg.rho * u[-1]) < 20 * dx**2


@given(st.floats(-3, 3), st.floats(-3, 3))
def test_fd_linearity(alpha, beta):
    t = np.linspace(0, 0.5, 101)
    f1, f2 = np.ones_like(t), np.sin(7 * t)
    a = heat_fd_solve(REF, alpha * f1 + beta * f2, 20, 100, start_substeps=4)
    b = heat_fd_solve(REF, f1, 20, 100, start_substeps=4)
    c = heat_fd_solve(REF, f2, 20, 100, start_substeps=4)
    assert np.allclose(a.values, alpha * b.values + beta * c.values, atol=1e-13 * (1 + abs(alpha) + abs(beta)))


WAVE = ProblemConfig(a=1.0, T=0.5, T_prime=0.5, c=0.05, M=2.0, kind=Kind.WAVE)


def _pulse_run(nx, rho=0.0, w=0.05):
    cfg = WAVE.with_(rho=rho)
    g = sine_squared_pulse(w)
    return cfg, wave_fd_solve(cfg, g, nx)


def test_wave_pre_arrival_silence():
    cfg, fld = _pulse_run(2000)
    early = fld.times < cfg.c * cfg.a
    assert np.max(np.abs(fld.traceA[early])) < 1e-6
    assert np.max(np.abs(fld.traceA)) > 1e-2


def test_wave_arrival_and_return_times():
    w = 0.05
    cfg, fld = _pulse_run(2000, w=w)
    cell = cfg.c * fld.dx
    # at the far end du/dt is proportional to g(t - ca), peaking at ca + w/2
    first = fld.times < 1.5 * cfg.travel_time
    dA = np.gradient(fld.traceA, fld.dt)[first]
    t_peak = fld.times[first][np.argmax(np.abs(dA))]
    assert abs(t_peak - w / 2 - cfg.travel_time / 2) <= 2 * cell
    # the reflection reaches x=0: u0 + G/c departs from zero at 2ca
    G = np.concatenate(([0.0], np.cumsum(0.5 * (fld.flux[1:] + fld.flux[:-1]) * fld.dt)))
    resid = np.abs(fld.trace0 + G / cfg.c)
    onset = fld.times[np.argmax(resid > 1e-3 * resid.max())]
    assert abs(onset - cfg.travel_time) <= 2 * cell + 0.1 * w


def test_wave_cfl_rejected():
    with pytest.raises(ValueError, match="CFL"):
        wave_fd_solve(WAVE, sine_squared_pulse(0.05), 200, 100)


def test_wave_outgoing_trace():
    # before the reflection u(0,t) = -G(t)/c
    cfg, fld = _pulse_run(2000)
    G = np.concatenate(([0.0], np.cumsum(0.5 * (fld.flux[1:] + fld.flux[:-1]) * fld.dt)))
    pre = fld.times < 0.09
    assert np.max(np.abs(fld.trace0[pre] + G[pre] / cfg.c)) < 1e-3 * np.max(np.abs(G / cfg.c))


def test_pulse_laplace():
    from scipy.integrate import quad

    g = sine_squared_pulse(0.05)
    for tau in (0.0001, 10.0, 100.0):
        ref = quad(lambda t: float(g(t)) * math.exp(-tau * t), 0, 0.05, epsabs=1e-15)[0]
        assert sine_squared_pulse_laplace(0.05, tau) == pytest.approx(ref, rel=1e-9)
