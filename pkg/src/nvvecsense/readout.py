"""Photon readout statistics of the four-axis ensemble.

Every NV emits at most one photon per shot: a center in |0> with probability
alpha0, in |1> with alpha1.  Centers that are not being manipulated sit in |0>
and contribute background.  Counts are sums of independent two-outcome
trials.

Shot sampling uses a counter-based generator: the four uniforms used for shot
``i`` come from one Philox block whose counter is ``i``, keyed by the seed.  A
record is therefore bit-identical however the repetitions are split across
chunks or workers.
"""
from __future__ import annotations

import hashlib
import io
import json
from dataclasses import dataclass, field

import numpy as np
from numpy.random import Philox

from .model import EnsembleParams, axis_index

# repetitions processed per Philox chunk; bounds memory to ~8 * 4 * CHUNK bytes
CHUNK = 1 << 18


@dataclass(frozen=True)
class EffectiveEmission:
    alpha_tilde0: float
    alpha_tilde1: float


def effective_emission(params: EnsembleParams, controlled_axis: int) -> EffectiveEmission:
    """Emission probabilities of the whole ensemble when only one axis is driven.

    The idle axes stay in |0>, so both outcomes carry their alpha0 background.
    """
    k = axis_index(controlled_axis)
    a0 = np.asarray(params.alpha0)
    idle = float(np.sum(np.delete(a0, k)))
    return EffectiveEmission(idle + params.alpha0[k], idle + params.alpha1[k])


def expected_photons_single(params: EnsembleParams, axis: int, p0, p1):
    """Mean photon count of one conventional shot (only ``axis`` driven)."""
    eff = effective_emission(params, axis)
    return p0 * eff.alpha_tilde0 + p1 * eff.alpha_tilde1


def expected_photons_parallel(params: EnsembleParams, populations) -> float:
    """Mean total count of one shot with all four axes driven.

    ``populations`` is a (4, 2) sequence of (p0, p1) pairs in axis order.
    """
    pops = np.asarray(populations, dtype=float)
    if pops.shape != (4, 2):
        raise ValueError("populations must have shape (4, 2)")
    return float(pops[:, 0] @ np.asarray(params.alpha0) + pops[:, 1] @ np.asarray(params.alpha1))


def emission_probabilities(params: EnsembleParams, p0) -> np.ndarray:
    """Per-NV single-shot emission probabilities for |0> populations ``p0``.

    ``p0`` has shape (4,) or (S, 4); an idle center is simply p0 = 1.
    """
    p0 = np.asarray(p0, dtype=float)
    a0 = np.asarray(params.alpha0)
    a1 = np.asarray(params.alpha1)
    return p0 * a0 + (1.0 - p0) * a1


def conventional_p0(axis: int, p0_active: float) -> np.ndarray:
    """|0> populations of the four NVs when only ``axis`` is driven."""
    out = np.ones(4)
    out[axis_index(axis)] = p0_active
    return out


def shot_variance(expected_count, probabilities=None, exact: bool = False):
    """Shot-noise variance of a count.

    By default the small-probability approximation variance = mean is used.
    With ``exact=True`` the Bernoulli-sum variance sum p(1-p) over the supplied
    per-NV ``probabilities`` is returned instead.
    """
    if exact:
        if probabilities is None:
            raise ValueError("exact variance needs the per-NV probabilities")
        p = np.asarray(probabilities, dtype=float)
        return float(np.sum(p * (1.0 - p)))
    if np.any(np.asarray(expected_count) < 0):
        raise ValueError("expected_count must be >= 0")
    return expected_count


def params_hash(params: EnsembleParams) -> str:
    blob = json.dumps([params.alpha0, params.alpha1, params.gamma, params.gamma_prime])
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class ShotRecord:
    """Photon counts of ``repetitions`` repetitions.

    ``shot_counts`` has shape (N, S): S shots per repetition (1 for the
    parallel protocol, 2 for the conventional axis pair), each at most 4.
    """

    shot_counts: np.ndarray
    protocol: str
    seed: int
    params_hash: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def counts(self) -> np.ndarray:
        """Total count per repetition."""
        return self.shot_counts.sum(axis=1)

    @property
    def repetitions(self) -> int:
        return self.shot_counts.shape[0]

    def mean(self) -> float:
        return float(self.counts.mean())

    def to_csv(self) -> str:
        """CSV with a one-line JSON comment header and (repetition, count) rows."""
        header = {"protocol": self.protocol, "params_hash": self.params_hash,
                  "seed": self.seed, "shots_per_repetition": int(self.shot_counts.shape[1])}
        buf = io.StringIO()
        buf.write("# " + json.dumps(header, sort_keys=True) + "\n")
        buf.write("repetition,count\n")
        np.savetxt(buf, np.column_stack([np.arange(self.repetitions), self.counts]),
                   fmt="%d", delimiter=",")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "ShotRecord":
        lines = text.splitlines()
        header = json.loads(lines[0][1:].strip())
        data = np.loadtxt(io.StringIO("\n".join(lines[2:])), delimiter=",", dtype=np.int64, ndmin=2)
        # per-shot detail is not serialised; totals are kept as a single column
        return cls(data[:, 1:2], header["protocol"], header["seed"], header["params_hash"])


def _uniforms(seed: int, first_block: int, n_blocks: int) -> np.ndarray:
    """(n_blocks, 4) uniforms; row b is Philox block ``first_block + b``."""
    gen = Philox(key=seed, counter=first_block)
    raw = gen.random_raw(4 * n_blocks).reshape(n_blocks, 4)
    return (raw >> np.uint64(11)) * (1.0 / 9007199254740992.0)


def sample_shots(seed: int, params: EnsembleParams, p0, repetitions: int,
                 protocol: str = "") -> ShotRecord:
    """Simulate photon counts.

    ``p0`` gives the |0> population of each NV for every shot of a repetition,
    shape (4,) or (S, 4).  Shot ``s`` of repetition ``i`` uses Philox block
    ``i * S + s``, one uniform per NV.
    """
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    probs = np.atleast_2d(emission_probabilities(params, p0))
    n_shots = probs.shape[0]
    out = np.empty((repetitions, n_shots), dtype=np.int8)
    for start in range(0, repetitions, CHUNK):
        stop = min(start + CHUNK, repetitions)
        u = _uniforms(seed, start * n_shots, (stop - start) * n_shots)
        u = u.reshape(stop - start, n_shots, 4)
        out[start:stop] = (u < probs).sum(axis=2)
    return ShotRecord(out, protocol, seed, params_hash(params))


def sample_count_totals(seed: int, params: EnsembleParams, p0, repetitions: int,
                        trials: int) -> np.ndarray:
    """Summed counts of ``trials`` independent records of ``repetitions`` repetitions.

    Each NV's count over N repetitions is Binomial(N, p), so totals are drawn
    directly; this has the same distribution as ``sample_shots(...).counts.sum()``
    at O(1) cost per record.
    """
    probs = np.atleast_2d(emission_probabilities(params, p0)).ravel()
    rng = np.random.default_rng(seed)
    return rng.binomial(repetitions, probs, size=(trials, probs.size)).sum(axis=1)
