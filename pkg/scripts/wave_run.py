"""Wave data with a Robin end: travel time, arrival time and rho.

    python3 scripts/wave_run.py [rho ...]
"""
import sys

import numpy as np

from enclosure import Kind, ProblemConfig, wave_fd_solve
from enclosure.extraction import reflection_arrival, robin_extract_wave, travel_time_normalized
from enclosure.forward import sine_squared_pulse
from enclosure.indicator import wave_curve


def run(rho, nx=4000):
    cfg = ProblemConfig(a=1.0, T=0.5, T_prime=0.5, c=0.05, M=2.0, rho=rho, kind=Kind.WAVE)
    fld = wave_fd_solve(cfg, sine_squared_pulse(0.05), nx, store="traces")
    data = fld.boundary_data()
    cv = wave_curve(data, cfg.c, np.geomspace(80.0, 130.0, 9))
    tt = travel_time_normalized(cv, cv.wprime0)
    arr = reflection_arrival(data, cfg.c)
    rh = robin_extract_wave(cv, cv.wprime0, tt.value / (2 * cfg.c))
    raw = -cv.log_abs[-1] / cv.taus[-1]
    print(f"rho={rho:+.2f}: normalized {tt.value:.6f}  raw {raw:.4f}  arrival {arr:.6f} "
          f"({abs(arr - 0.1) / (cfg.c * fld.dx):.2f} cells)  rho_hat {rh:+.4f}")


if __name__ == "__main__":
    for r in [float(x) for x in sys.argv[1:]] or [1.0, 0.0, -0.5]:
        run(r)
