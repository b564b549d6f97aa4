"""Why the heat Robin coefficient cannot be read from sampled data at 2ca = 0.1, a = 1.

With a = 1 and 2ca = 0.1 the probe slope is c = 0.05, so tau > 1/c^2 = 400
and the indicator is of size exp(-2ca tau)/|z|^2 < 1e-20. A sampled trace
carries a floor of order |z| h^1.5 from the sqrt(t) start of u(0,t) alone,
before any solver error. The script prints the signal against that floor for
the reference setting and for a setting with a large signal, and shows that
the estimator itself works on exact Laplace-domain Robin curves.

    python3 scripts/robin_limits.py
"""
import math

import mpmath
import numpy as np

from enclosure import PolyFlux, ProblemConfig
from enclosure.core import spectral_parameter, spectral_parameter_mp
from enclosure.extraction import robin_extract_heat, travel_time_normalized
from enclosure.forward import heat_fd_solve, sampled_data
from enclosure.indicator import IndicatorCurve, IndicatorSample, heat_curve
from enclosure.transform import WeightedIntegral


def exact_curve(rho, a, c, taus):
    samples, wps = [], []
    with mpmath.workdps(60):
        for t in taus:
            z, z2 = spectral_parameter_mp(float(t), c)
            g = 1 / z2
            e = mpmath.exp(2 * a * z)
            K = (z + rho) / (z - rho)
            v = -2 * g * e * K / (1 - e * K)
            samples.append(IndicatorSample(float(t), 0.0, complex(v), float(mpmath.log(abs(v))), v))
            wps.append(WeightedIntegral.make(g, float(t)))
    return IndicatorCurve({"c": c, "kind": "heat"}, samples), wps


def signal_vs_floor(cfg, taus, nt):
    h = cfg.T / nt
    print(f"a={cfg.a} c={cfg.c} T={cfg.T} nt={nt}")
    data = sampled_data(cfg.with_(rho=0.0), PolyFlux((1.0,)), nt)
    curve = heat_curve(data, cfg.c, taus, precision="double_double")
    for t, p, w in zip(taus, curve.samples, curve.wprime0):
        sp = spectral_parameter(t, cfg.c)
        sig = 2 * abs(w.value) * math.exp(-2 * cfg.c * cfg.a * t)
        floor = abs(sp.z) * h**1.5
        print(f"  tau {t:8.1f}  signal {sig:9.2e}  onset floor {floor:9.2e}  |I| from samples {abs(p.value):9.2e}")


def fd_attempt():
    taus = np.geomspace(401.0, 600.0, 8)
    for rho in (1.0, 0.0):
        cfg = ProblemConfig(a=1.0, T=0.5, T_prime=0.5, c=0.05, M=2.0, rho=rho)
        fld = heat_fd_solve(cfg, PolyFlux((1.0,)), 400, 4000, store="traces")
        cv = heat_curve(fld.boundary_data(), cfg.c, taus, precision="double_double", M=cfg.M)
        tt = travel_time_normalized(cv, cv.wprime0)
        print(f"  FD rho={rho}: travel time {tt.value:.4g}, rho_hat "
              f"{robin_extract_heat(cv, cv.wprime0, tt.value / (2 * cfg.c)):.4g}")


if __name__ == "__main__":
    signal_vs_floor(ProblemConfig(a=1.0, T=0.5, T_prime=0.5, c=0.05, M=2.0), [401.0, 500.0, 600.0], 4000)
    signal_vs_floor(ProblemConfig(a=1.0, T=3.0, T_prime=3.0, c=0.5, M=2.0), [6.0, 9.0, 12.0], 12000)
    fd_attempt()
    taus = np.geomspace(420.0, 1680.0, 8)
    for rho in (1.0, 0.0, -0.5):
        cv, wp = exact_curve(rho, 1.0, 0.05, taus)
        tt = travel_time_normalized(cv, wp)
        print(f"  exact curve rho={rho:+.1f}: travel time {tt.value:.6f}, "
              f"rho_hat {robin_extract_heat(cv, wp, tt.value / 0.1):+.4f}")
