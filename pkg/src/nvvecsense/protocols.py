"""Signal models, sensitivities and estimators for the four protocol variants.

CONV_DC / CONV_AC measure one Cartesian component with two sequential
single-axis experiments (axes c and 4).  MF_DC / MF_AC drive all four axes
at once at their own resonance frequencies and flip the final pulse (3pi/2
instead of pi/2) on the two axes whose direction has a positive c-component,
so that all four contributions to B_c add while the other components cancel.

All slopes are per repetition.  A conventional repetition is the axis pair
(two shots); a multi-frequency repetition is one shot.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, replace

import numpy as np

from .dynamics import filter_factor
from .model import (
    COMPONENTS,
    EnsembleParams,
    NVSenseError,
    PhysicalConstants,
    as_field,
    axis_directions,
    component_index,
)
from .readout import (
    ShotRecord,
    conventional_p0,
    effective_emission,
    params_hash,
    sample_count_totals,
    sample_shots,
    shot_variance,
)

SCHEMA_VERSION = "1"


class ZeroSlopeError(NVSenseError):
    """The plan's signal does not depend on the target component."""


class Kind(str, enum.Enum):
    CONV_DC = "CONV_DC"
    CONV_AC = "CONV_AC"
    MF_DC = "MF_DC"
    MF_AC = "MF_AC"

    @property
    def is_ac(self) -> bool:
        return self in (Kind.CONV_AC, Kind.MF_AC)

    @property
    def is_multifreq(self) -> bool:
        return self in (Kind.MF_DC, Kind.MF_AC)


def sign_pattern(component: str) -> tuple:
    """Final-pulse signs: -1 (3pi/2) on the axes with a positive ``component``."""
    c = component_index(component)
    return tuple(-1 if d[c] > 0 else 1 for d in axis_directions())


def axis_pair(component: str) -> tuple:
    return (component_index(component) + 1, 4)


@dataclass(frozen=True)
class ProtocolPlan:
    kind: Kind
    component: str
    times: tuple
    omega_ac: float | None = None
    signs: tuple = (1, 1, 1, 1)
    cycle_time: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        component_index(self.component)
        times = tuple(float(t) for t in np.broadcast_to(np.asarray(self.times, float), (4,)))
        object.__setattr__(self, "times", times)
        if any(not (t > 0) for t in times):
            raise ValueError("evolution times must be > 0")
        if self.kind.is_ac and not (self.omega_ac and self.omega_ac > 0):
            raise ValueError("AC plans need omega_ac > 0")
        if self.omega_ac is not None:
            object.__setattr__(self, "omega_ac", float(self.omega_ac))
        object.__setattr__(self, "signs", tuple(int(s) for s in self.signs))
        if self.kind.is_multifreq and tuple(self.signs) != sign_pattern(self.component):
            raise ValueError(f"sign pattern {self.signs} does not match component "
                             f"{self.component!r}; expected {sign_pattern(self.component)}")

    @property
    def active_axes(self) -> tuple:
        return (1, 2, 3, 4) if self.kind.is_multifreq else axis_pair(self.component)

    @property
    def repetition_time(self) -> float:
        """Duration of one repetition (T / N)."""
        if self.cycle_time is not None:
            return self.cycle_time
        if self.kind.is_multifreq:
            return max(self.times)
        return sum(self.times[k - 1] for k in self.active_axes)

    @property
    def protocol_id(self) -> str:
        return f"{self.kind.value}:{self.component}"


def _optimal_time(params: EnsembleParams, ac: bool) -> float:
    rates = params.gamma_prime if ac else params.gamma
    return 1.0 / (4.0 * max(rates))


def make_plan(kind, component: str, params: EnsembleParams, t="optimal",
              omega_ac: float | None = None, signs=None) -> ProtocolPlan:
    """Build a plan; ``t="optimal"`` picks 1/(4 gamma) (1/(4 gamma') for AC).

    For AC plans without ``omega_ac`` the drive frequency is theta_opt / t.
    """
    kind = Kind(kind)
    if isinstance(t, str):
        if t != "optimal":
            raise ValueError("t must be a number or 'optimal'")
        t = _optimal_time(params, kind.is_ac)
    if kind.is_ac and omega_ac is None:
        omega_ac = optimize_theta() / float(np.max(t))
    if signs is None:
        signs = sign_pattern(component) if kind.is_multifreq else (1, 1, 1, 1)
    return ProtocolPlan(kind, component, t, omega_ac if kind.is_ac else None, tuple(signs))


# -- signal models -------------------------------------------------------------

@dataclass(frozen=True)
class SignalModel:
    """Per-repetition mean count, its shot-noise variance and slope dB_c."""

    mean: float
    variance: float
    derivative: float
    gradient: np.ndarray


def _phase_weights(plan: ProtocolPlan, params: EnsembleParams):
    """Per axis: effective time (phase per unit gamma_gyro B.d) and decay factor."""
    t = np.asarray(plan.times)
    if plan.kind.is_ac:
        eff_time = filter_factor(plan.omega_ac * t) / plan.omega_ac
        decay = np.exp(-2.0 * np.asarray(params.gamma_prime) * t)
    else:
        eff_time = t
        decay = np.exp(-2.0 * np.asarray(params.gamma) * t)
    return eff_time, decay


def _signal(plan: ProtocolPlan, field, params: EnsembleParams,
            constants: PhysicalConstants, exact: bool) -> SignalModel:
    b = as_field(field)
    gg = constants.gyromagnetic_ratio
    dirs = axis_directions()
    eff_time, decay = _phase_weights(plan, params)
    phases = gg * eff_time * (dirs @ b)
    signs = np.asarray(plan.signs, dtype=float)
    contrast = params.contrast

    if plan.kind.is_multifreq:
        axes = np.arange(4)
        high = np.asarray(params.alpha0)
        low = np.asarray(params.alpha1)
    else:
        axes = np.array([k - 1 for k in plan.active_axes])
        eff = [effective_emission(params, k + 1) for k in range(4)]
        high = np.array([e.alpha_tilde0 for e in eff])
        low = np.array([e.alpha_tilde1 for e in eff])

    # fringe term s_k e^{-2 gamma t} sin(phi_k), or phi_k when linearised
    fringe = np.sin(phases) if exact else phases
    slope_factor = np.cos(phases) if exact else np.ones(4)
    mean = 0.0
    gradient = np.zeros(3)
    for k in axes:
        mean += 0.5 * (high[k] + low[k]) + 0.5 * contrast[k] * signs[k] * decay[k] * fringe[k]
        gradient += (0.5 * contrast[k] * signs[k] * decay[k] * slope_factor[k]
                     * gg * eff_time[k]) * dirs[k]
    c = component_index(plan.component)
    return SignalModel(float(mean), float(shot_variance(mean)), float(gradient[c]), gradient)


def conventional_signal(plan: ProtocolPlan, field, params: EnsembleParams,
                        constants: PhysicalConstants = PhysicalConstants(),
                        exact: bool = False) -> SignalModel:
    """Summed count of the two sequential single-axis experiments.

    Linearised (sin phi ~ phi) by default; ``exact=True`` keeps the sine.
    """
    if plan.kind.is_multifreq:
        raise ValueError("conventional_signal needs a CONV plan")
    return _signal(plan, field, params, constants, exact)


def multifreq_signal(plan: ProtocolPlan, field, params: EnsembleParams,
                     constants: PhysicalConstants = PhysicalConstants(),
                     exact: bool = False) -> SignalModel:
    """Total count of one shot with all four axes driven in parallel."""
    if not plan.kind.is_multifreq:
        raise ValueError("multifreq_signal needs an MF plan")
    return _signal(plan, field, params, constants, exact)


def signal(plan, field, params, constants=PhysicalConstants(), exact=False) -> SignalModel:
    return _signal(plan, field, params, constants, exact)


def shot_populations(plan: ProtocolPlan, field, params: EnsembleParams,
                     constants: PhysicalConstants = PhysicalConstants()) -> np.ndarray:
    """|0> populations of the four NVs for each shot of a repetition, shape (S, 4)."""
    b = as_field(field)
    eff_time, decay = _phase_weights(plan, params)
    phases = constants.gyromagnetic_ratio * eff_time * (axis_directions() @ b)
    p0_all = 0.5 * (1.0 + np.asarray(plan.signs) * decay * np.sin(phases))
    if plan.kind.is_multifreq:
        return p0_all[None, :]
    return np.array([conventional_p0(k, p0_all[k - 1]) for k in plan.active_axes])


def _slope_scale(plan: ProtocolPlan, params: EnsembleParams, constants) -> float:
    # slope magnitude the plan would have with unit filter and unit contrast
    return constants.gyromagnetic_ratio * max(plan.times) * max(params.alpha0)


def _check_slope(model: SignalModel, plan, params, constants):
    if not np.isfinite(model.derivative) or \
            abs(model.derivative) <= 1e-12 * _slope_scale(plan, params, constants):
        reason = "degenerate filter factor" if plan.kind.is_ac and _filter_degenerate(plan) \
            else "zero readout contrast" if np.all(params.contrast == 0) \
            else "zero signal slope"
        raise ZeroSlopeError(f"{plan.protocol_id}: {reason}")


def _filter_degenerate(plan) -> bool:
    return bool(np.all(np.abs(filter_factor(plan.omega_ac * np.asarray(plan.times))) < 1e-12))


# -- sensitivities -------------------------------------------------------------

@dataclass(frozen=True)
class SensitivityReport:
    """Field uncertainty after total time T.

    A degenerate plan (zero slope) is reported with ``delta_B = nan`` and the
    reason in ``error``.
    """

    kind: str
    component: str
    delta_B: float
    T: float
    t_used: float
    omega_ac_used: float | None
    normalized: float
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None

    def to_dict(self) -> dict:
        d = {"schema_version": SCHEMA_VERSION}
        d.update(self.__dict__)
        for key in ("delta_B", "normalized"):
            if not math.isfinite(d[key]):
                d[key] = None
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def sensitivity(plan: ProtocolPlan, params: EnsembleParams, T: float,
                constants: PhysicalConstants = PhysicalConstants()) -> SensitivityReport:
    """delta_B = sqrt(variance) / |slope| / sqrt(N), N = T / repetition_time.

    Evaluated with the linearised slope at B = 0.
    """
    if not T > 0:
        raise ValueError("T must be > 0")
    model = _signal(plan, np.zeros(3), params, constants, exact=False)
    t_used = max(plan.times)
    try:
        _check_slope(model, plan, params, constants)
    except ZeroSlopeError as exc:
        return SensitivityReport(plan.kind.value, plan.component, math.nan, T, t_used,
                                 plan.omega_ac, math.nan, str(exc))
    per_rep = math.sqrt(model.variance) / abs(model.derivative)
    normalized = per_rep * math.sqrt(plan.repetition_time)
    return SensitivityReport(plan.kind.value, plan.component, normalized / math.sqrt(T), T,
                             t_used, plan.omega_ac, normalized)


def dc_sensitivity(plan, params, T, constants=PhysicalConstants()) -> SensitivityReport:
    if plan.kind.is_ac:
        raise ValueError("dc_sensitivity needs a DC plan")
    return sensitivity(plan, params, T, constants)


def ac_sensitivity(plan, params, T, constants=PhysicalConstants()) -> SensitivityReport:
    if not plan.kind.is_ac:
        raise ValueError("ac_sensitivity needs an AC plan")
    return sensitivity(plan, params, T, constants)


def improvement_ratio(params: EnsembleParams, ac: bool = False, component: str = "x",
                      constants: PhysicalConstants = PhysicalConstants()) -> float:
    """delta_B(conventional) / delta_B(multi-frequency) at each protocol's optimum."""
    kinds = (Kind.CONV_AC, Kind.MF_AC) if ac else (Kind.CONV_DC, Kind.MF_DC)
    conv, mf = (sensitivity(make_plan(k, component, params), params, 1.0, constants)
                for k in kinds)
    return conv.delta_B / mf.delta_B


def optimize_theta(tol: float = 1e-10) -> float:
    """Phase omega_ac * t maximising |f(theta)| / theta on (0, 2pi).

    A grid scan brackets the maximum, then the stationarity condition
    theta f'(theta) - f(theta) = 0 is bisected.
    """
    grid = np.linspace(2 * np.pi / 512, 2 * np.pi, 512)
    vals = np.abs(filter_factor(grid)) / grid
    i = int(np.argmax(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]

    def stationarity(th):
        f = 1 + math.cos(th) - 2 * math.cos(th / 2)
        df = -math.sin(th) + math.sin(th / 2)
        return math.copysign(1.0, f) * (th * df - f)

    g_lo = stationarity(lo)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        g_mid = stationarity(mid)
        if (g_mid > 0) == (g_lo > 0):
            lo, g_lo = mid, g_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def sensitivity_sweep(plan: ProtocolPlan, params: EnsembleParams, parameter: str, values,
                      T: float = 1.0, constants: PhysicalConstants = PhysicalConstants()):
    """Rows (value, delta_B, normalized) with ``parameter`` ("t" or "omega_ac") swept."""
    rows = []
    for v in values:
        if parameter == "t":
            p = replace(plan, times=(float(v),) * 4, cycle_time=None)
        elif parameter == "omega_ac":
            p = replace(plan, omega_ac=float(v))
        else:
            raise ValueError("parameter must be 't' or 'omega_ac'")
        rep = sensitivity(p, params, T, constants)
        rows.append((float(v), rep.delta_B, rep.normalized))
    return rows


def joint_ac_scan(params: EnsembleParams, kind=Kind.MF_AC, component: str = "x",
                  t_values=None, theta_values=None,
                  constants: PhysicalConstants = PhysicalConstants()):
    """Diagnostic joint scan of (t, omega_ac) for an AC plan.

    Returns (t_best, omega_best, normalized_best).
    """
    gp = max(params.gamma_prime)
    if t_values is None:
        t_values = np.linspace(0.05, 1.0, 96) / gp
    if theta_values is None:
        theta_values = np.linspace(0.5, 2.0, 96) * np.pi
    best = (math.nan, math.nan, math.inf)
    for t in t_values:
        for th in theta_values:
            plan = make_plan(kind, component, params, t=float(t), omega_ac=float(th / t))
            rep = sensitivity(plan, params, 1.0, constants)
            if rep.ok and rep.normalized < best[2]:
                best = (float(t), float(th / t), rep.normalized)
    return best


# -- estimation ----------------------------------------------------------------

def simulate_record(plan: ProtocolPlan, field, params: EnsembleParams, repetitions: int,
                    seed: int, constants: PhysicalConstants = PhysicalConstants()) -> ShotRecord:
    """Shot-by-shot photon record of ``plan`` under the exact (non-linearised) populations."""
    p0 = shot_populations(plan, field, params, constants)
    return sample_shots(seed, params, p0, repetitions, protocol=plan.protocol_id)


def simulate_mean_counts(plan: ProtocolPlan, field, params: EnsembleParams, repetitions: int,
                         trials: int, seed: int,
                         constants: PhysicalConstants = PhysicalConstants()) -> np.ndarray:
    """Mean count per repetition for ``trials`` independent records (aggregated sampling)."""
    p0 = shot_populations(plan, field, params, constants)
    totals = sample_count_totals(seed, params, p0, repetitions, trials)
    return totals / repetitions


def invert_mean(mean_count, plan: ProtocolPlan, params: EnsembleParams,
                constants: PhysicalConstants = PhysicalConstants()):
    """Method-of-moments inversion of the linearised signal model."""
    model = _signal(plan, np.zeros(3), params, constants, exact=False)
    _check_slope(model, plan, params, constants)
    return (np.asarray(mean_count) - model.mean) / model.derivative


def estimate_component(record: ShotRecord, plan: ProtocolPlan, params: EnsembleParams,
                       constants: PhysicalConstants = PhysicalConstants()) -> float:
    """Estimate B_c (tesla) from a shot record of ``plan``."""
    if record.protocol and record.protocol != plan.protocol_id:
        raise ValueError(f"record protocol {record.protocol!r} does not match plan "
                         f"{plan.protocol_id!r}")
    if record.params_hash and record.params_hash != params_hash(params):
        raise ValueError("record was generated with different ensemble parameters")
    return float(invert_mean(record.mean(), plan, params, constants))


def estimate_vector(records: dict, plans: dict, params: EnsembleParams,
                    constants: PhysicalConstants = PhysicalConstants()) -> np.ndarray:
    """(B_x, B_y, B_z) from one record per component, keyed "x", "y", "z"."""
    kinds = {plans[c].kind for c in COMPONENTS}
    if len(kinds) != 1:
        raise ValueError("the three plans must be of the same kind")
    for c in COMPONENTS:
        if plans[c].component != c:
            raise ValueError(f"plan under key {c!r} targets {plans[c].component!r}")
    return np.array([estimate_component(records[c], plans[c], params, constants)
                     for c in COMPONENTS])
