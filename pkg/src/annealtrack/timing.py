"""Hardware run-time model: reset + anneal + readout composed over shots.

Passive reset waits out qubit relaxation (milliseconds); active reset is a
measurement followed by a conditional single-qubit gate, so it costs one
readout phase plus one gate time.  Readout is 1 us per measurement, either
parallel over the register or serialized per qubit.  With active reset and
parallel readout the anneal phase dominates; with passive reset the reset
phase does.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError

T_RESET_PASSIVE_DEFAULT = 5e-3       # seconds (measured range 5-10 ms)
T_READOUT_SINGLE_DEFAULT = 1e-6      # seconds per measurement
T_SINGLE_QUBIT_GATE_DEFAULT = 100e-9  # active-reset feedback gate
T_ANNEAL_DEFAULT = 100e-6            # middle of the optimized 50-150 us band
SHOTS_DEFAULT = 1000


@dataclass(frozen=True)
class TimingModel:
    reset_mode: str = "active"          # 'passive' | 'active'
    t_reset_passive: float = T_RESET_PASSIVE_DEFAULT
    t_readout_single: float = T_READOUT_SINGLE_DEFAULT
    t_gate: float = T_SINGLE_QUBIT_GATE_DEFAULT
    parallel_readout: bool = True
    n_qubits: int = 10
    t_anneal: float = T_ANNEAL_DEFAULT
    shots: int = SHOTS_DEFAULT

    def __post_init__(self):
        if self.reset_mode not in ("passive", "active"):
            raise InputError(f"unknown reset mode '{self.reset_mode}'")
        if min(self.t_reset_passive, self.t_readout_single, self.t_gate,
               self.t_anneal) <= 0:
            raise InputError("all durations must be positive")
        if self.shots < 1 or self.n_qubits < 1:
            raise InputError("shots and qubit count must be >= 1")

    def to_json(self) -> str:
        return json.dumps({
            "reset_mode": self.reset_mode, "t_reset_passive": self.t_reset_passive,
            "t_readout_single": self.t_readout_single, "t_gate": self.t_gate,
            "parallel_readout": self.parallel_readout, "n_qubits": self.n_qubits,
            "t_anneal": self.t_anneal, "shots": self.shots}, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "TimingModel":
        try:
            return cls(**json.loads(text))
        except json.JSONDecodeError as exc:
            raise InputError(f"line {exc.lineno}: invalid timing JSON: {exc.msg}") from exc
        except TypeError as exc:
            raise InputError(f"malformed timing model: {exc}") from exc


@dataclass(frozen=True)
class ShotBreakdown:
    reset: float
    anneal: float
    readout: float

    @property
    def total(self) -> float:
        return self.reset + self.anneal + self.readout


def per_shot_time(m: TimingModel) -> ShotBreakdown:
    """Reset + anneal + readout for a single shot."""
    readout = (m.t_readout_single if m.parallel_readout
               else m.n_qubits * m.t_readout_single)
    if m.reset_mode == "passive":
        reset = m.t_reset_passive
    else:
        reset = readout + m.t_gate
    return ShotBreakdown(reset=reset, anneal=m.t_anneal, readout=readout)


@dataclass(frozen=True)
class RuntimeEstimate:
    total: float
    per_shot: ShotBreakdown
    shots: int
    shares: dict
    dominant_phase: str

    def as_dict(self) -> dict:
        return {"total_s": self.total, "shots": self.shots,
                "per_shot_s": {"reset": self.per_shot.reset,
                               "anneal": self.per_shot.anneal,
                               "readout": self.per_shot.readout,
                               "total": self.per_shot.total},
                "shares": self.shares, "dominant_phase": self.dominant_phase}


def total_runtime(m: TimingModel) -> RuntimeEstimate:
    """shots x per-shot time, with the dominant-phase report."""
    shot = per_shot_time(m)
    total = m.shots * shot.total
    shares = {"reset": shot.reset / shot.total,
              "anneal": shot.anneal / shot.total,
              "readout": shot.readout / shot.total}
    dominant = max(shares, key=shares.get)
    return RuntimeEstimate(total=total, per_shot=shot, shots=m.shots,
                           shares=shares, dominant_phase=dominant)


def runtime_histogram(totals, bins: int = 20) -> tuple[np.ndarray, np.ndarray]:
    """Bin a series of total runtimes; edges cover [min, max] inclusively."""
    totals = np.asarray(list(totals), dtype=float)
    if totals.size == 0:
        raise InputError("runtime histogram needs at least one entry")
    lo, hi = float(totals.min()), float(totals.max())
    if lo == hi:
        edges = np.array([lo, math.nextafter(hi, math.inf)])
        return edges, np.array([totals.size])
    counts, edges = np.histogram(totals, bins=bins, range=(lo, hi))
    return edges, counts


def histogram_to_csv(edges: np.ndarray, counts: np.ndarray, path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin_low_s", "bin_high_s", "count"])
        for i in range(len(counts)):
            writer.writerow([repr(float(edges[i])), repr(float(edges[i + 1])),
                             int(counts[i])])
