"""Forward models that synthesize boundary data.

Three independent routes are provided. They are cross-validated in the tests.

* Eigenfunction series for the Neumann heat problem with polynomial flux.
* Method of images for the same problem. Float64 and mpmath evaluators of
  the two boundary traces are provided. The mpmath evaluator is what the
  multiprecision pipelines consume.
* Finite differences: Crank-Nicolson for heat (Neumann or Robin at ``x=a``),
  explicit leapfrog for the wave equation.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import mpmath
import numpy as np
from scipy.linalg import solve_banded
from scipy.special import erfc

from .core import Kind, ProblemConfig

__all__ = [
    "PolyFlux",
    "EigenMode",
    "eigen_modes",
    "SeriesTruncation",
    "Field",
    "boundary_trace_series",
    "image_trace",
    "image_trace_mp",
    "ierfc_mp",
    "heat_fd_solve",
    "wave_fd_solve",
    "sample_flux",
    "sine_squared_pulse",
    "sine_squared_pulse_laplace",
    "WAVE_CFL",
    "continuous_data",
    "sampled_data",
]

WAVE_CFL = 0.9


# ---------------------------------------------------------------- fluxes

@dataclass(frozen=True)
class PolyFlux:
    """Flux ``u_x(0,t) = sum_m gamma_m t^m / m!``.

    The polynomial is used on the whole observation interval. Only the window
    ``[0, T')`` matters for the asymptotics; see the decisions ledger.
    """

    gamma: tuple

    def __post_init__(self):
        g = tuple(float(x) for x in self.gamma)
        if not g:
            raise ValueError("flux has no coefficients")
        object.__setattr__(self, "gamma", g)

    @property
    def j(self) -> int | None:
        """Index of the first nonzero coefficient (``None`` for zero flux)."""
        for m, g in enumerate(self.gamma):
            if g != 0.0:
                return m
        return None

    @property
    def is_zero(self) -> bool:
        return self.j is None

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for m, g in enumerate(self.gamma):
            if g:
                out = out + g * t**m / math.factorial(m)
        return out

    def value_mp(self, t):
        return mpmath.fsum(mpmath.mpf(g) * t**m / mpmath.factorial(m)
                           for m, g in enumerate(self.gamma) if g)

    def derivative(self) -> "PolyFlux":
        return PolyFlux(self.gamma[1:] or (0.0,))

    def antiderivative(self) -> "PolyFlux":
        return PolyFlux((0.0,) + self.gamma)


def sample_flux(flux, times) -> np.ndarray:
    """Sample a flux given as PolyFlux, callable or array on ``times``."""
    times = np.asarray(times, dtype=float)
    if callable(flux):
        return np.asarray(flux(times), dtype=float) * np.ones_like(times)
    arr = np.asarray(flux, dtype=float)
    if arr.shape != times.shape:
        raise ValueError(f"flux samples have shape {arr.shape}, time grid {times.shape}")
    return arr


def sine_squared_pulse(width: float, amplitude: float = 1.0):
    """Compactly supported C^1 flux ``A sin^2(pi t / w)`` on ``[0, w]``."""

    def g(t):
        t = np.asarray(t, dtype=float)
        inside = (t > 0) & (t < width)
        return np.where(inside, amplitude * np.sin(np.pi * t / width) ** 2, 0.0)

    g.width = width
    g.amplitude = amplitude
    return g


def sine_squared_pulse_laplace(width: float, tau: float, amplitude: float = 1.0) -> float:
    """``int_0^w A sin^2(pi t/w) e^{-tau t} dt`` in closed form."""
    k = 2.0 * math.pi / width
    one_minus = -math.expm1(-tau * width)
    return 0.5 * amplitude * (one_minus / tau - tau * one_minus / (tau * tau + k * k))


# ---------------------------------------------------------------- eigen-series

@dataclass(frozen=True)
class EigenMode:
    """Neumann mode ``sqrt(2/a) cos(k pi x / a)`` with eigenvalue ``(k pi/a)^2``."""

    k: int
    a: float

    @property
    def lambda_k(self) -> float:
        return (self.k * math.pi / self.a) ** 2

    @property
    def psi0(self) -> float:
        return math.sqrt(2.0 / self.a)

    @property
    def psiA(self) -> float:
        return math.sqrt(2.0 / self.a) * (-1.0) ** self.k


def eigen_modes(a: float, K: int) -> list[EigenMode]:
    return [EigenMode(k, a) for k in range(1, K + 1)]


@dataclass(frozen=True)
class SeriesTruncation:
    """Number of retained modes ``K`` and the bound on the neglected part.

    ``tail_bound = (2a/pi^2)/K`` dominates ``(2/a) sum_{k>K} 1/lambda_k``.
    """

    K: int = 500
    tail_bound: float = float("nan")

    @classmethod
    def for_modes(cls, K: int, a: float) -> "SeriesTruncation":
        if K < 1:
            raise ValueError("need at least one mode")
        return cls(K=K, tail_bound=2.0 * a / (math.pi**2 * K))


def _conv_poly_exp(lam: np.ndarray, t: float, n: int) -> np.ndarray:
    """``int_0^t exp(-lam (t-s)) s^n/n! ds`` for each ``lam``."""
    x = lam * t
    out = np.empty_like(lam)
    small = x < 1.0
    if np.any(small):
        # power series sum_i (-lam)^i t^(n+1+i)/(n+1+i)!
        ls = lam[small]
        acc = np.zeros_like(ls)
        term = np.full_like(ls, t ** (n + 1) / math.factorial(n + 1))
        for i in range(60):
            acc += term
            term = term * (-ls * t) / (n + 2 + i)
        out[small] = acc
    big = ~small
    if np.any(big):
        lb = lam[big]
        e = -np.expm1(-lb * t) / lb
        for m in range(1, n + 1):
            e = (t**m / math.factorial(m) - e) / lb
        out[big] = e
    return out


def _em_tail(beta: float, x0: float) -> float:
    # integral_{x0}^inf exp(-beta k^2)/k^2 dk (midpoint Euler-Maclaurin tail)
    if beta == 0.0:
        return 1.0 / x0
    sb = math.sqrt(beta)
    return math.exp(-beta * x0 * x0) / x0 - math.sqrt(math.pi * beta) * erfc(sb * x0)


def _alt_tail(beta: float, k0: int) -> float:
    """``sum_{k>=k0} (-1)^k exp(-beta k^2)/k^2`` by the first two Boole terms."""
    f = math.exp(-beta * k0 * k0) / (k0 * k0)
    df = f * (-2.0 * beta * k0 - 2.0 / k0)
    return (-1) ** k0 * (0.5 * f - 0.25 * df)


def boundary_trace_series(cfg: ProblemConfig, flux: PolyFlux, t, trunc: SeriesTruncation | None = None,
                          *, tail_correction: bool = True):
    """Boundary traces ``(u(0,t), u(a,t))`` from the truncated eigen-series.

    Parameters
    ----------
    cfg : ProblemConfig
        Neumann configuration (``rho == 0``).
    flux : PolyFlux
        Polynomial flux. Its series integrals are evaluated in closed form.
    t : float or array
        Times in ``[0, T')``.
    trunc : SeriesTruncation
        Retained modes (default ``K = 500``).
    tail_correction : bool
        Add estimates of the neglected modes: Euler-Maclaurin for the
        ``x = 0`` series, Boole summation for the alternating ``x = a`` one.
        They matter only near ``t = 0``.

    Returns
    -------
    (u0, uA) : arrays shaped like ``t``
    """
    if cfg.rho != 0.0:
        raise ValueError("the eigen-series route covers the Neumann case only")
    trunc = trunc or SeriesTruncation.for_modes(500, cfg.a)
    if math.isnan(trunc.tail_bound):
        trunc = SeriesTruncation.for_modes(trunc.K, cfg.a)
    a = cfg.a
    tt = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(tt < 0) or np.any(tt >= cfg.T_prime):
        raise ValueError(f"series traces are valid on [0, T') = [0, {cfg.T_prime})")
    k = np.arange(1, trunc.K + 1, dtype=float)
    lam = (k * math.pi / a) ** 2
    sgn = np.where(k % 2 == 0, 1.0, -1.0)
    g = flux(tt)
    G = flux.antiderivative()(tt)
    g0 = flux.gamma[0]
    dflux = flux.derivative()
    u0 = np.empty_like(tt)
    uA = np.empty_like(tt)
    for i, ti in enumerate(tt):
        inner = g0 * np.exp(-lam * ti)
        for n, gm in enumerate(dflux.gamma):
            if gm:
                inner = inner + gm * _conv_poly_exp(lam, ti, n)
        modes0 = inner / lam
        s0 = math.fsum(modes0)
        sA = math.fsum(sgn * modes0)
        if tail_correction and g0:
            beta = (math.pi / a) ** 2 * ti
            s0 += g0 * (a / math.pi) ** 2 * _em_tail(beta, trunc.K + 0.5)
            sA += g0 * (a / math.pi) ** 2 * _alt_tail(beta, trunc.K + 1)
        u0[i] = -(a / 3.0) * g[i] - G[i] / a + (2.0 / a) * s0
        uA[i] = (a / 6.0) * g[i] - G[i] / a + (2.0 / a) * sA
    if np.ndim(t) == 0:
        return float(u0[0]), float(uA[0])
    return u0, uA


# ---------------------------------------------------------------- images

def _ierfc_float(n: int, xi: np.ndarray) -> np.ndarray:
    """Repeated integrals ``i^n erfc(xi)`` by upward recurrence."""
    im1 = 2.0 / math.sqrt(math.pi) * np.exp(-xi * xi)
    i0 = erfc(xi)
    if n == -1:
        return im1
    prev2, prev1 = im1, i0
    for m in range(1, n + 1):
        cur = (prev2 - 2.0 * xi * prev1) / (2.0 * m)
        prev2, prev1 = prev1, cur
    return prev1


def ierfc_mp(n: int, xi):
    """``i^n erfc(xi)`` in mpmath (upward recurrence with guard digits)."""
    extra = int(n * max(1.0, math.log10(1.0 + 2.0 * float(xi) ** 2))) + 5
    with mpmath.extradps(extra):
        xi = mpmath.mpf(xi)
        im1 = 2 / mpmath.sqrt(mpmath.pi) * mpmath.exp(-xi * xi)
        prev2, prev1 = im1, mpmath.erfc(xi)
        if n == -1:
            return +im1
        for m in range(1, n + 1):
            prev2, prev1 = prev1, (prev2 - 2 * xi * prev1) / (2 * m)
        return +prev1


def _image_offsets(a: float, point: str, tmax: float, digits: float):
    """Distances ``|x - 2 n a|`` with multiplicity for the Neumann images."""
    # the image at distance d contributes ~ exp(-d^2/(4t)); keep d^2 < 4 t L
    L = digits * math.log(10.0) + 10.0
    dmax = math.sqrt(4.0 * tmax * L) + a
    out = []
    if point == "0":
        out.append((0.0, 1))
        n = 1
        while 2 * n * a <= dmax:
            out.append((2 * n * a, 2))
            n += 1
    elif point == "a":
        kk = 0
        while (2 * kk + 1) * a <= dmax:
            out.append(((2 * kk + 1) * a, 2))
            kk += 1
    else:
        raise ValueError("point must be '0' or 'a'")
    return out


def image_trace(a: float, flux: PolyFlux, t, point: str = "0") -> np.ndarray:
    """Neumann boundary trace via the method of images (float64).

    For flux ``t^m/m!`` the half-line solution is
    ``U_m(x,t) = -(4t)^{m+1/2} i^{2m+1}erfc(x/(2 sqrt t))``. The rod solution sums
    images at ``x - 2 n a``. This is exact for polynomial flux on all of ``[0, T]``.
    """
    tt = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.zeros_like(tt)
    pos = tt > 0
    tp = tt[pos]
    if tp.size:
        offs = _image_offsets(a, point, float(tp.max()), 17)
        st = np.sqrt(tp)
        for m, gm in enumerate(flux.gamma):
            if not gm:
                continue
            acc = np.zeros_like(tp)
            for d, mult in offs:
                acc += mult * _ierfc_float(2 * m + 1, d / (2.0 * st))
            out[pos] += -gm * (4.0 * tp) ** (m + 0.5) * acc
    return out if np.ndim(t) else out[0]


def image_trace_mp(a, flux: PolyFlux, t, point: str = "0"):
    """mpmath version of :func:`image_trace` at the current precision."""
    t = mpmath.mpf(t)
    if t <= 0:
        return mpmath.mpf(0)
    dps = mpmath.mp.dps
    offs = _image_offsets(float(a), point, float(t), dps + 5)
    a_m = mpmath.mpf(a)
    st = mpmath.sqrt(t)
    total = mpmath.mpf(0)
    for m, gm in enumerate(flux.gamma):
        if not gm:
            continue
        acc = mpmath.mpf(0)
        for d, mult in offs:
            dm = a_m * int(round(d / float(a))) if d else mpmath.mpf(0)
            # image n is damped by ~exp(-xi^2); it needs correspondingly fewer digits
            xi_f = d / (2.0 * math.sqrt(float(t)))
            local = max(20, int(dps - xi_f * xi_f / math.log(10.0)) + 8)
            with mpmath.workdps(local):
                term = ierfc_mp(2 * m + 1, dm / (2 * st))
            acc += mult * term
        total += -mpmath.mpf(gm) * (4 * t) ** (m + mpmath.mpf(1) / 2) * acc
    return total


def continuous_data(cfg: ProblemConfig, flux: PolyFlux):
    """Neumann observations as mpmath callables (images for ``u0``, exact flux)."""
    from .transform import ContinuousData

    if cfg.rho != 0 or cfg.kind is not Kind.HEAT:
        raise ValueError("continuous data exist for the Neumann heat problem only")
    a = cfg.a
    return ContinuousData(u0=lambda t: image_trace_mp(a, flux, t, "0"), g=flux.value_mp, T=cfg.T,
                          singular_start=True)


def sampled_data(cfg: ProblemConfig, flux: PolyFlux, nt: int):
    """Neumann observations sampled on ``nt`` uniform steps (float images)."""
    from .transform import BoundaryData

    t = np.linspace(0.0, cfg.T, nt + 1)
    u0 = image_trace(cfg.a, flux, t, "0")
    u0[0] = 0.0
    return BoundaryData(t, u0, flux(t))


# ---------------------------------------------------------------- FD field

@dataclass
class Field:
    """Space-time grid solution ``values[n, i] = u(x_i, t_n)``."""

    nx: int
    nt: int
    dx: float
    dt: float
    values: np.ndarray
    bc: str = "neumann"
    rho: float = 0.0
    kind: Kind = Kind.HEAT
    flux: np.ndarray | None = field(default=None, repr=False)

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.nt + 1) * self.dt

    @property
    def xs(self) -> np.ndarray:
        return np.arange(self.nx + 1) * self.dx

    @property
    def trace0(self) -> np.ndarray:
        return self.values[:, 0]

    @property
    def traceA(self) -> np.ndarray:
        return self.values[:, -1]

    def boundary_data(self):
        """Observation data ``(u(0,t), u_x(0,t))`` on the time grid."""
        from .transform import BoundaryData

        if self.flux is None:
            raise ValueError("field carries no flux samples")
        return BoundaryData(times=self.times, u0=self.trace0.copy(), g=self.flux.copy())

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + [f"x{i}" for i in range(self.nx + 1)])
            for n, row in enumerate(self.values):
                w.writerow([f"{n * self.dt:.17g}"] + [f"{v:.17g}" for v in row])

    @classmethod
    def from_csv(cls, path, dx: float, **kw) -> "Field":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        data = np.array([[float(v) for v in r] for r in rows[1:]])
        t, vals = data[:, 0], data[:, 1:]
        dt = t[1] - t[0] if len(t) > 1 else 0.0
        return cls(nx=vals.shape[1] - 1, nt=vals.shape[0] - 1, dx=dx, dt=dt, values=vals, **kw)


def _as_flux_fn(flux_samples, times):
    """Turn samples into a piecewise-linear callable (or pass a callable through)."""
    if callable(flux_samples):
        return flux_samples, np.asarray(flux_samples(times), dtype=float) * np.ones_like(times)
    arr = np.asarray(flux_samples, dtype=float)
    if arr.shape != times.shape:
        raise ValueError(f"flux samples ({arr.shape}) do not match the time grid ({times.shape})")
    return (lambda s: np.interp(s, times, arr)), arr


def heat_fd_solve(cfg: ProblemConfig, flux_samples, nx: int, nt: int, *,
                  start_substeps: int = 32, grading: float = 3.0, euler_steps: int = 2,
                  store: str = "full") -> Field:
    """Crank-Nicolson solution of ``u_t = u_xx`` with flux at ``x=0``.

    Ghost nodes give second-order flux and Robin conditions. The flux onset at
    ``t=0`` makes the trace ``u(0,t)`` behave like ``sqrt(t)``, and plain CN then
    loses its order on that trace. So each macro step ``n`` is split into
    ``ceil(m/n)`` substeps, and the first step is split into ``m`` substeps graded
    like ``(k/m)^q``. The first ``euler_steps`` of those are backward Euler to damp
    the start-up mode. Output is stored on the uniform macro grid.

    Parameters
    ----------
    flux_samples : array of length ``nt+1`` or callable
        ``u_x(0,t)``. Arrays are interpolated linearly inside macro steps.
    store : {"full", "traces"}
        ``traces`` keeps only the two boundary columns (interior filled with NaN).
    """
    if nx < 16:
        raise ValueError("nx must be at least 16")
    if nt < 1:
        raise ValueError("nt must be positive")
    a, T, rho = cfg.a, cfg.T, cfg.rho
    dx, dt = a / nx, T / nt
    N = nx + 1
    times = np.arange(nt + 1) * dt
    gfun, gs = _as_flux_fn(flux_samples, times)
    main = np.full(N, -2.0 / dx**2)
    up = np.full(N - 1, 1.0 / dx**2)
    lo = np.full(N - 1, 1.0 / dx**2)
    up[0] = 2.0 / dx**2
    lo[-1] = 2.0 / dx**2
    main[-1] -= 2.0 * rho / dx
    fvec0 = -2.0 / dx  # ghost u_{-1} = u_1 - 2 dx g

    def apply(u):
        r = main * u
        r[:-1] += up * u[1:]
        r[1:] += lo * u[:-1]
        return r

    bands = {}

    def step(u, t0, h, theta):
        key = (h, theta)
        ab = bands.get(key)
        if ab is None:
            ab = np.zeros((3, N))
            ab[0, 1:] = -theta * h * up
            ab[1] = 1.0 - theta * h * main
            ab[2, :-1] = -theta * h * lo
            if len(bands) < 64:
                bands[key] = ab
        rhs = u + (1.0 - theta) * h * apply(u)
        rhs[0] += h * fvec0 * ((1.0 - theta) * float(gfun(t0)) + theta * float(gfun(t0 + h)))
        return solve_banded((1, 1), ab, rhs, check_finite=False)

    vals = np.full((nt + 1, N), np.nan) if store == "traces" else np.empty((nt + 1, N))
    u = np.zeros(N)
    vals[0] = 0.0
    m = max(1, int(start_substeps))
    sub = dt * (np.arange(m + 1) / m) ** grading
    for k in range(m):
        u = step(u, sub[k], sub[k + 1] - sub[k], 1.0 if k < euler_steps else 0.5)
    _store(vals, 1, u, store)
    for n in range(1, nt):
        r = int(math.ceil(m / n))
        h = dt / r
        for k in range(r):
            u = step(u, n * dt + k * h, h, 0.5)
        _store(vals, n + 1, u, store)
    bc = "robin" if rho else "neumann"
    return Field(nx=nx, nt=nt, dx=dx, dt=dt, values=vals, bc=bc, rho=rho, kind=Kind.HEAT, flux=gs)


def _store(vals, n, u, mode):
    if mode == "traces":
        vals[n, 0] = u[0]
        vals[n, -1] = u[-1]
    else:
        vals[n] = u


def wave_fd_solve(cfg: ProblemConfig, flux_samples, nx: int, nt: int | None = None, *,
                  boundary_correction: bool = True, store: str = "full") -> Field:
    """Leapfrog solution of ``u_tt = u_xx / c^2`` with flux at ``x = 0``.

    The far end obeys ``u_x(a,t)/c + rho u(a,t) = 0``. ``nt`` defaults to the
    CFL number 0.9. The flux ghost node carries a modified-equation correction
    ``g + (3 + lam^2)/24 (c dx)^2 g''`` (``lam`` the CFL number). It cancels the
    leading boundary truncation and dispersion error of the emitted wave, so
    the pre-arrival trace becomes third-order accurate. With
    ``boundary_correction=False`` the plain second-order ghost node is used.

    Raises
    ------
    ValueError
        If the CFL number ``dt / (c dx)`` exceeds 1, or the samples do not match.
    """
    a, T, c, rho = cfg.a, cfg.T, cfg.c, cfg.rho
    dx = a / nx
    if nt is None:
        nt = int(math.ceil(T / (WAVE_CFL * c * dx)))
    dt = T / nt
    lam = dt / (c * dx)
    if lam > 1.0 + 1e-12:
        raise ValueError(f"CFL violation: dt/(c dx) = {lam:.4f} > 1")
    lam2 = lam * lam
    times = np.arange(nt + 1) * dt
    _, gs = _as_flux_fn(flux_samples, times)
    geff = gs.copy()
    if boundary_correction:
        ext = np.concatenate(([0.0], gs, [2 * gs[-1] - gs[-2]]))  # zero flux before t = 0
        gpp = (ext[2:] - 2.0 * ext[1:-1] + ext[:-2]) / dt**2
        geff = gs + (3.0 + lam2) / 24.0 * (c * dx) ** 2 * gpp
    N = nx + 1
    pad = np.zeros(N + 2)

    def lap(u, gv):
        pad[1:-1] = u
        pad[0] = u[1] - 2.0 * dx * gv
        pad[-1] = u[-2] - 2.0 * dx * c * rho * u[-1]
        return pad[2:] - 2.0 * u + pad[:-2]

    vals = np.full((nt + 1, N), np.nan) if store == "traces" else np.empty((nt + 1, N))
    u_prev = np.zeros(N)
    vals[0] = 0.0
    u = 0.5 * lam2 * lap(u_prev, geff[0])
    _store(vals, 1, u, store)
    for n in range(1, nt):
        u_new = 2.0 * u - u_prev + lam2 * lap(u, geff[n])
        u_prev, u = u, u_new
        _store(vals, n + 1, u, store)
    bc = "robin" if rho else "neumann"
    return Field(nx=nx, nt=nt, dx=dx, dt=dt, values=vals, bc=bc, rho=rho, kind=Kind.WAVE, flux=gs)
