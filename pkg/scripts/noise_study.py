"""Mean estimate error against noise level.

For each delta the probe decay is tau = (sigma/T)|log delta| and five seeded
noise realisations are drawn. Two geometries are compared: the one used in
the acceptance suite, and a=0.1, c=0.5, T=0.5 where the noiseless bias is
not monotone in tau on the short schedule range.

    python3 scripts/noise_study.py
"""
import math

import numpy as np

from enclosure import PolyFlux, ProblemConfig
from enclosure.extraction import NoiseSpec, noise_schedule, noisy_estimate
from enclosure.forward import sampled_data
from enclosure.indicator import heat_indicator


def study(cfg, nt=20000, seeds=5):
    data = sampled_data(cfg, PolyFlux((1.0,)), nt)
    print(f"a={cfg.a} c={cfg.c} T={cfg.T}  target {cfg.travel_time:.4f}")
    print(f"{'delta':>8} {'tau':>8} {'mean err':>10} {'noiseless':>10}")
    for k in range(2, 7):
        d = 10.0**-k
        tau = noise_schedule(NoiseSpec(d, 0.5), cfg.T)
        errs = [abs(noisy_estimate(data, NoiseSpec(d, 0.5, s), cfg.c).value - cfg.travel_time) for s in range(seeds)]
        clean = abs(-heat_indicator(data, cfg.c, tau).log_magnitude / tau - cfg.travel_time)
        rate = math.log(abs(math.log(d))) / abs(math.log(d))
        print(f"{d:8.0e} {tau:8.3f} {np.mean(errs):10.5f} {clean:10.5f}   loglog rate {rate:.3f}")


if __name__ == "__main__":
    study(ProblemConfig(a=0.09, T=0.1, T_prime=0.1, c=0.5, M=0.18))
    study(ProblemConfig(a=0.1, T=0.5, T_prime=0.5, c=0.5, M=0.2))
