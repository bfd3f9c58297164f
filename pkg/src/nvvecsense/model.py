"""Axis geometry, physical constants and ensemble parameters.

The four NV orientations of the diamond lattice are indexed 1..4.  All rates
and frequencies are angular (rad/s) and fields are in tesla.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

import numpy as np

AXIS_IDS = (1, 2, 3, 4)
COMPONENTS = ("x", "y", "z")

_AXES = np.array(
    [
        [1.0, -1.0, -1.0],
        [-1.0, 1.0, -1.0],
        [-1.0, -1.0, 1.0],
        [1.0, 1.0, 1.0],
    ]
) / np.sqrt(3.0)
_AXES.setflags(write=False)

GYROMAGNETIC_RATIO = 2 * np.pi * 28.024e9  # rad s^-1 T^-1
ZERO_FIELD_SPLITTING = 2 * np.pi * 2.87e9  # rad s^-1


class NVSenseError(Exception):
    """Base class for errors raised by this package."""


def axis_directions() -> np.ndarray:
    """Return the (4, 3) array of unit NV-axis directions, row k-1 is axis k."""
    return _AXES


def axis_direction(axis: int) -> np.ndarray:
    return _AXES[axis_index(axis)]


def axis_index(axis: int) -> int:
    """Zero-based row of a 1-based axis id."""
    if axis not in AXIS_IDS:
        raise ValueError(f"axis must be one of {AXIS_IDS}, got {axis!r}")
    return axis - 1


def component_index(component: str) -> int:
    try:
        return COMPONENTS.index(component)
    except ValueError:
        raise ValueError(f"component must be one of {COMPONENTS}, got {component!r}") from None


def as_field(b) -> np.ndarray:
    """Validate and return a field 3-vector (tesla) as a float array."""
    arr = np.asarray(b, dtype=float)
    if arr.shape != (3,):
        raise ValueError(f"field must be a 3-vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("field components must be finite")
    return arr


def projections(b) -> np.ndarray:
    """B . d_k for k = 1..4."""
    return _AXES @ as_field(b)


@dataclass(frozen=True)
class PhysicalConstants:
    """Conversion constants.

    ``gyromagnetic_ratio`` is g*mu_B/hbar in rad/s/T and ``zero_field_splitting``
    is the |0> <-> |1> splitting at zero field in rad/s.  Defaults are the usual
    NV values.
    """

    gyromagnetic_ratio: float = GYROMAGNETIC_RATIO
    zero_field_splitting: float = ZERO_FIELD_SPLITTING
    selectivity_factor: float = 10.0

    def __post_init__(self):
        errors = []
        for name in ("gyromagnetic_ratio", "zero_field_splitting", "selectivity_factor"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                errors.append(f"{name} must be finite and > 0 (got {value!r})")
        if errors:
            raise ValueError("; ".join(errors))


def _four(values, name) -> tuple:
    arr = np.broadcast_to(np.asarray(values, dtype=float), (4,))
    return tuple(float(v) for v in arr)


@dataclass(frozen=True)
class EnsembleParams:
    """Per-axis readout probabilities and dephasing rates.

    ``alpha0[k-1]`` / ``alpha1[k-1]`` are the single-shot photon emission
    probabilities of an axis-k center in |0> / |1>.  ``gamma`` is the Ramsey
    dephasing rate 1/(2 T2*) and ``gamma_prime`` the echo rate 1/(2 T2).

    Zero contrast (alpha1 == alpha0) is admitted so that a degenerate
    configuration surfaces as a zero signal slope rather than a construction
    error.
    """

    alpha0: tuple
    alpha1: tuple
    gamma: tuple
    gamma_prime: tuple

    def __post_init__(self):
        for name in ("alpha0", "alpha1", "gamma", "gamma_prime"):
            object.__setattr__(self, name, _four(getattr(self, name), name))
        errors = self.violations()
        if errors:
            raise ValueError("; ".join(errors))

    @classmethod
    def homogeneous(cls, alpha0: float, alpha1: float, gamma: float,
                    gamma_prime: float | None = None) -> "EnsembleParams":
        if gamma_prime is None:
            gamma_prime = gamma
        return cls((alpha0,) * 4, (alpha1,) * 4, (gamma,) * 4, (gamma_prime,) * 4)

    def violations(self) -> list[str]:
        errors = []
        for k in range(4):
            a0, a1 = self.alpha0[k], self.alpha1[k]
            g, gp = self.gamma[k], self.gamma_prime[k]
            if not (0 < a1 <= a0 < 1):
                errors.append(f"axis {k + 1}: need 0 < alpha1 <= alpha0 < 1 (got {a1!r}, {a0!r})")
            if not (np.isfinite(gp) and gp > 0):
                errors.append(f"axis {k + 1}: gamma_prime must be > 0 (got {gp!r})")
            if not (np.isfinite(g) and g >= gp):
                errors.append(f"axis {k + 1}: need gamma >= gamma_prime (got {g!r} < {gp!r})")
        return errors

    @property
    def contrast(self) -> np.ndarray:
        """alpha0 - alpha1 per axis."""
        return np.asarray(self.alpha0) - np.asarray(self.alpha1)

    @property
    def is_homogeneous(self) -> bool:
        return all(len(set(getattr(self, n))) == 1
                   for n in ("alpha0", "alpha1", "gamma", "gamma_prime"))


def resonance_frequencies(bias, constants: PhysicalConstants = PhysicalConstants()) -> np.ndarray:
    """omega_k = omega_0 + gamma_gyro (B_bias . d_k), k = 1..4, in rad/s."""
    return constants.zero_field_splitting + constants.gyromagnetic_ratio * projections(bias)


@dataclass(frozen=True)
class SelectivityVerdict:
    selective: bool
    min_gap: float
    threshold: float
    offending_pairs: tuple = field(default=())

    @property
    def label(self) -> str:
        return "SELECTIVE" if self.selective else "DEGENERATE"


def check_selectivity(frequencies: Sequence[float], rabi: float,
                      factor: float = 10.0) -> SelectivityVerdict:
    """Can the four resonances be driven independently?

    Selective iff every pairwise gap strictly exceeds ``factor * rabi``.
    Otherwise the offending 1-based axis pairs are listed.
    """
    if not rabi > 0:
        raise ValueError("rabi must be > 0")
    freqs = np.asarray(frequencies, dtype=float)
    threshold = factor * rabi
    gaps = {(i + 1, j + 1): abs(freqs[i] - freqs[j])
            for i, j in combinations(range(len(freqs)), 2)}
    bad = tuple(pair for pair, gap in gaps.items() if not gap > threshold)
    return SelectivityVerdict(
        selective=not bad,
        min_gap=min(gaps.values()),
        threshold=threshold,
        offending_pairs=bad,
    )
