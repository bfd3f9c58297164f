"""Per-axis evolution times that equalise signal weights under inhomogeneity.

With axis-dependent contrast delta_alpha_j and dephasing gamma_j, the
multi-frequency signal still depends on a single field component provided
every axis contributes the same weight

    DC:  tau_j(t)  = (delta_alpha_j / 2) exp(-2 gamma_j t) t
    AC:  tau'_j(t) = (delta_alpha_j / 2) exp(-2 gamma'_j t) f(omega t) / omega

The common target is what the worst axis (smallest contrast, fastest
dephasing) reaches at t_max = 1/(4 gamma_max); every other axis reaches it
earlier.  Solving is vectorised over many parameter draws at once so the
Monte Carlo studies run in numpy.
"""
from __future__ import annotations

import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dynamics import filter_factor
from .model import EnsembleParams, NVSenseError, PhysicalConstants, component_index
from .protocols import Kind, ProtocolPlan, optimize_theta, sign_pattern

GRID_POINTS = 64
REL_TOL_T = 1e-12
MC_CHUNK = 8192

_THETA_OPT = None


def _theta_opt() -> float:
    global _THETA_OPT
    if _THETA_OPT is None:
        _THETA_OPT = optimize_theta()
    return _THETA_OPT


class NoRootError(NVSenseError):
    """No evolution time in (0, t_max] reaches the target weight."""


def dc_weight(delta_alpha, gamma, t):
    """(delta_alpha / 2) exp(-2 gamma t) t."""
    if np.any(np.asarray(t) < 0):
        raise ValueError("t must be >= 0")
    return 0.5 * np.asarray(delta_alpha) * np.exp(-2.0 * np.asarray(gamma) * t) * t


def ac_weight(delta_alpha, gamma_prime, t, omega_ac):
    """(delta_alpha / 2) exp(-2 gamma' t) f(omega_ac t) / omega_ac."""
    if np.any(np.asarray(t) < 0):
        raise ValueError("t must be >= 0")
    if np.any(np.asarray(omega_ac) <= 0):
        raise ValueError("omega_ac must be > 0")
    return (0.5 * np.asarray(delta_alpha) * np.exp(-2.0 * np.asarray(gamma_prime) * t)
            * filter_factor(omega_ac * t) / omega_ac)


@dataclass(frozen=True)
class InhomogeneousDraw:
    """Per-sample contrast delta_alpha_j and dephasing rate gamma_j (gamma'_j for AC)."""

    delta_alpha: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        da = np.asarray(self.delta_alpha, dtype=float)
        g = np.asarray(self.gamma, dtype=float)
        if da.shape != g.shape or da.size == 0:
            raise ValueError("delta_alpha and gamma must be non-empty and of equal shape")
        if np.any(da <= 0) or np.any(g <= 0):
            raise ValueError("all draws must be strictly positive")
        object.__setattr__(self, "delta_alpha", da)
        object.__setattr__(self, "gamma", g)


def _positive_normal(rng: np.random.Generator, mean: float, std: float, shape) -> np.ndarray:
    """Gaussian draws conditioned on > 0 by redrawing."""
    x = rng.normal(mean, std, size=shape)
    bad = x <= 0
    while np.any(bad):
        x[bad] = rng.normal(mean, std, size=int(bad.sum()))
        bad = x <= 0
    return x


def draw_parameters(rng, n, mean_delta_alpha=0.01, std_delta_alpha=0.001,
                    mean_gamma=1e6, std_gamma=1e5) -> InhomogeneousDraw:
    """Independent truncated-Gaussian draws of (delta_alpha_j, gamma_j), j = 1..n."""
    rng = np.random.default_rng(rng)
    da = _positive_normal(rng, mean_delta_alpha, std_delta_alpha, n)
    g = _positive_normal(rng, mean_gamma, std_gamma, n)
    return InhomogeneousDraw(da, g)


def _targets(da, g, mode):
    """Row-wise target weight, t_max and drive frequency for (M, n) draws."""
    da_min = da.min(axis=-1)
    g_max = g.max(axis=-1)
    t_max = 1.0 / (4.0 * g_max)
    if mode == "dc":
        return 0.5 * da_min * np.exp(-0.5) * t_max, t_max, None
    theta = _theta_opt()
    omega = 4.0 * theta * g_max
    return 0.5 * da_min * np.exp(-0.5) * filter_factor(theta) / omega, t_max, omega


def _weight(mode, da, g, t, omega):
    if mode == "dc":
        return dc_weight(da, g, t)
    return ac_weight(da, g, t, omega)


def solve_batch(delta_alpha, gamma, mode: str = "dc"):
    """Solve tau_j(t_j) = target row by row for (M, n) arrays of draws.

    Returns ``(times, target, t_max, omega_ac, ok)``; ``times`` is NaN where no
    root exists and ``ok`` flags rows where every sample was solved.  When
    several roots lie in (0, t_max] the largest is taken.
    """
    if mode not in ("dc", "ac"):
        raise ValueError("mode must be 'dc' or 'ac'")
    da = np.atleast_2d(np.asarray(delta_alpha, dtype=float))
    g = np.atleast_2d(np.asarray(gamma, dtype=float))
    target, t_max, omega = _targets(da, g, mode)
    c = target[:, None]
    tm = np.broadcast_to(t_max[:, None], da.shape)
    om = None if omega is None else omega[:, None]

    reachable = _weight(mode, da, g, tm, om) >= c * (1.0 - REL_TOL_T)
    if mode == "dc":
        # tau_j increases on (0, t_max] because t_max <= 1/(4 gamma_j) < 1/(2 gamma_j)
        lo = np.zeros_like(da)
        hi = tm.copy()
    else:
        # scan downward from t_max for the last grid point still below target
        frac = np.arange(1, GRID_POINTS + 1) / GRID_POINTS
        grid = tm[..., None] * frac
        below = _weight(mode, da[..., None], g[..., None], grid, om[..., None]) < c[..., None]
        last = GRID_POINTS - 1 - np.argmax(below[..., ::-1], axis=-1)
        has_below = below.any(axis=-1)
        last = np.where(has_below, last, 0)
        lo = np.where(has_below, np.take_along_axis(grid, last[..., None], -1)[..., 0], 0.0)
        hi = np.take_along_axis(grid, np.minimum(last + 1, GRID_POINTS - 1)[..., None], -1)[..., 0]
        hi = np.where(last == GRID_POINTS - 1, tm, hi)

    for _ in range(200):
        if np.all(hi - lo <= REL_TOL_T * hi):
            break
        mid = 0.5 * (lo + hi)
        up = _weight(mode, da, g, mid, om) >= c
        hi = np.where(up, mid, hi)
        lo = np.where(up, lo, mid)

    times = np.where(reachable, hi, np.nan)
    return times, target, t_max, omega, reachable.all(axis=-1)


@dataclass(frozen=True)
class CompensationSchedule:
    mode: str
    times: np.ndarray
    target: float
    t_max: float
    omega_ac: float | None
    delta_alpha: np.ndarray
    gamma: np.ndarray

    @property
    def weights(self) -> np.ndarray:
        return _weight(self.mode, self.delta_alpha, self.gamma, self.times, self.omega_ac)

    def max_relative_error(self) -> float:
        return float(np.max(np.abs(self.weights / self.target - 1.0)))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("j,delta_alpha_j,gamma_j,t_j,weight_j\n")
        for j, row in enumerate(zip(self.delta_alpha, self.gamma, self.times, self.weights), 1):
            buf.write(f"{j}," + ",".join(f"{v:.17g}" for v in row) + "\n")
        return buf.getvalue()

    def curves_csv(self, points: int = 201, t_stop: float | None = None) -> str:
        """Long-format (j, t, weight) samples of every weight curve."""
        t_stop = 2.0 * self.t_max if t_stop is None else t_stop
        ts = np.linspace(0.0, t_stop, points)
        w = _weight(self.mode, self.delta_alpha[:, None], self.gamma[:, None], ts[None, :],
                    self.omega_ac)
        buf = io.StringIO()
        buf.write("j,t,weight\n")
        for j in range(w.shape[0]):
            for t, v in zip(ts, w[j]):
                buf.write(f"{j + 1},{t:.17g},{v:.17g}\n")
        return buf.getvalue()


def solve_schedule(draws: InhomogeneousDraw, mode: str = "dc") -> CompensationSchedule:
    """Equal-weight schedule for one set of draws; raises NoRootError on failure."""
    times, target, t_max, omega, ok = solve_batch(draws.delta_alpha, draws.gamma, mode)
    if not ok[0]:
        missing = np.flatnonzero(np.isnan(times[0])) + 1
        raise NoRootError(f"no root in (0, t_max] for samples {missing.tolist()}")
    return CompensationSchedule(mode, times[0], float(target[0]), float(t_max[0]),
                                None if omega is None else float(omega[0]),
                                draws.delta_alpha, draws.gamma)


def compensated_plan(params: EnsembleParams, component: str, mode: str = "dc") -> ProtocolPlan:
    """Multi-frequency plan whose per-axis times equalise the four signal weights.

    The repetition time is fixed to t_max = 1/(4 gamma_max).
    """
    component_index(component)
    rates = params.gamma if mode == "dc" else params.gamma_prime
    sched = solve_schedule(InhomogeneousDraw(params.contrast, np.asarray(rates)), mode)
    kind = Kind.MF_DC if mode == "dc" else Kind.MF_AC
    return ProtocolPlan(kind, component, tuple(sched.times), sched.omega_ac,
                        sign_pattern(component), cycle_time=sched.t_max)


def compensated_sensitivity(delta_alpha, gamma, mean_emission, mode: str = "dc",
                            constants: PhysicalConstants = PhysicalConstants()):
    """Normalised uncertainty delta_B sqrt(T) of compensated multi-frequency sensing.

    Vectorised over the leading axes of (M, 4) draws.  ``mean_emission`` is
    (alpha0 + alpha1) / 2 per axis (scalar or (M, 4)).  The slope is four axes
    at the common target weight; the repetition time is t_max.
    """
    da = np.atleast_2d(np.asarray(delta_alpha, dtype=float))
    g = np.atleast_2d(np.asarray(gamma, dtype=float))
    target, t_max, _ = _targets(da, g, mode)
    noise = np.sum(np.broadcast_to(mean_emission, da.shape), axis=-1)
    slope = da.shape[-1] * target * constants.gyromagnetic_ratio / np.sqrt(3.0)
    return np.sqrt(noise) / slope * np.sqrt(t_max)


@dataclass(frozen=True)
class MonteCarloReport:
    mode: str
    sigma: np.ndarray
    r_mean: np.ndarray
    r_stderr: np.ndarray
    n_success: np.ndarray
    n_failed: np.ndarray

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("sigma_prime,r_mean,r_stderr,n_success,n_failed\n")
        for row in zip(self.sigma, self.r_mean, self.r_stderr, self.n_success, self.n_failed):
            buf.write(f"{row[0]:.17g},{row[1]:.17g},{row[2]:.17g},{row[3]:d},{row[4]:d}\n")
        return buf.getvalue()


_MODE_CODE = {"dc": 0, "ac": 1}


def _mc_chunk(seed, mode, i_sigma, i_chunk, n, sigma, means, mean_emission, axes, constants):
    rng = np.random.default_rng([seed, _MODE_CODE[mode], i_sigma, i_chunk])
    mda, mg = means
    da = _positive_normal(rng, mda, mda * sigma, (n, axes))
    g = _positive_normal(rng, mg, mg * sigma, (n, axes))
    _, _, _, _, ok = solve_batch(da, g, mode)
    db = compensated_sensitivity(da[ok], g[ok], mean_emission, mode, constants)
    return db, int((~ok).sum())


def sensitivity_ratio_curve(sigmas=tuple(np.round(np.arange(0, 0.101, 0.01), 2)),
                            samples: int = 100_000, seed: int = 0, mode: str = "dc",
                            mean_delta_alpha: float = 0.01, mean_gamma: float = 1e6,
                            mean_emission: float = 0.02, axes: int = 4, workers: int = 1,
                            constants: PhysicalConstants = PhysicalConstants()) -> MonteCarloReport:
    """r(sigma') = <delta_B(sigma')> / delta_B(0) for compensated multi-frequency sensing.

    Each sample draws ``axes`` contrasts and dephasing rates with relative
    standard deviation sigma', solves the equal-weight schedule and evaluates
    the compensated uncertainty.  Failed solves are counted, not averaged.
    Draws are seeded per (seed, mode, sigma index, chunk), so the report does
    not depend on ``workers``.
    """
    sigmas = np.asarray(sigmas, dtype=float)
    if samples < 1:
        raise ValueError("samples must be >= 1")
    if not np.any(sigmas == 0):
        raise ValueError("the sigma grid must include 0")
    base = compensated_sensitivity(np.full((1, axes), mean_delta_alpha),
                                   np.full((1, axes), mean_gamma), mean_emission, mode,
                                   constants)[0]
    sizes = [min(MC_CHUNK, samples - s) for s in range(0, samples, MC_CHUNK)]
    tasks = [(i, c, n, s) for i, s in enumerate(sigmas) for c, n in enumerate(sizes)]

    def run(task):
        i, c, n, s = task
        return _mc_chunk(seed, mode, i, c, n, s, (mean_delta_alpha, mean_gamma),
                         mean_emission, axes, constants)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(run, tasks))
    else:
        results = [run(t) for t in tasks]

    r_mean, r_err, n_ok, n_bad = [], [], [], []
    per_sigma = len(sizes)
    for i in range(len(sigmas)):
        chunk = results[i * per_sigma:(i + 1) * per_sigma]
        r = np.concatenate([db for db, _ in chunk]) / base
        failed = sum(f for _, f in chunk)
        r_mean.append(r.mean() if r.size else np.nan)
        r_err.append(r.std(ddof=1) / np.sqrt(r.size) if r.size > 1 else 0.0)
        n_ok.append(r.size)
        n_bad.append(failed)
    return MonteCarloReport(mode, sigmas, np.array(r_mean), np.array(r_err),
                            np.array(n_ok), np.array(n_bad))
