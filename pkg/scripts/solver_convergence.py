"""Series against Crank-Nicolson on the boundary traces, over a refinement ladder.

    python3 scripts/solver_convergence.py
"""
import math

import numpy as np

from enclosure import PolyFlux, ProblemConfig, boundary_trace_series, heat_fd_solve
from enclosure.core import spectral_parameter
from enclosure.indicator import ibp_crosscheck


def main():
    cfg = ProblemConfig(a=1.0, T=0.5, T_prime=0.5, c=0.05, M=2.0)
    flux = PolyFlux((1.0,))
    t = np.arange(1000) * (cfg.T / 1000)
    u0, uA = boundary_trace_series(cfg, flux, t)
    prev = None
    for nx in (100, 200, 400, 800):
        nt = 10 * nx
        fld = heat_fd_solve(cfg, flux, nx, nt, store="traces")
        s = nt // 1000
        e = (np.max(np.abs(fld.trace0[:-1:s] - u0)), np.max(np.abs(fld.traceA[:-1:s] - uA)))
        orders = "" if prev is None else f"  orders {math.log2(prev[0] / e[0]):.3f} {math.log2(prev[1] / e[1]):.3f}"
        print(f"nx={nx:4d} nt={nt:5d}  u(0) {e[0]:.3e}  u(a) {e[1]:.3e}{orders}")
        prev = e
    small = ProblemConfig(a=0.1, T=0.5, T_prime=0.5, c=0.15, M=0.2)
    sp = spectral_parameter(50.0, small.c)
    for gamma in ((1.0,), (0.0, 1.0)):
        res = []
        for nx in (100, 200, 400, 800):
            fld = heat_fd_solve(small, PolyFlux(gamma), nx, 10 * nx)
            res.append(ibp_crosscheck(fld, fld.boundary_data(), sp))
        ords = [math.log2(res[i] / res[i + 1]) for i in range(3)]
        print(f"ibp gamma={gamma}: " + " ".join(f"{r:.2e}" for r in res) + "  orders " + " ".join(f"{o:.3f}" for o in ords))


if __name__ == "__main__":
    main()
