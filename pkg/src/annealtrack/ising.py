"""Ising encodings of MWIS instances, annealing schedules and spin decoding.

The selection variable x_i in {0, 1} maps to a spin s_i in {-1, +1} via
x_i = (1 + s_i) / 2.  Minimizing

    -sum_i w_i x_i + M sum_{(i,j) in E} x_i x_j        (penalty M > max_i w_i)

then becomes an Ising problem with pair coupling J_ij = M/4, local field
Omega_i = -w_i/2 + (M/4) deg(i) and a constant offset; its ground states
decode exactly to the maximum-weight independent sets.

Fields and couplings produced here are dimensionless; the dynamics layer
multiplies by a configurable problem energy scale.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import CapacityError, InputError
from .graph import WeightedGraph

EXHAUSTIVE_SPIN_LIMIT = 24


@dataclass(frozen=True)
class IsingProblem:
    """Target-Hamiltonian data: fields Omega_k, symmetric couplings J_kj, offset."""

    n_spins: int
    fields: np.ndarray
    couplings: np.ndarray
    offset: float = 0.0

    def __post_init__(self):
        f = np.asarray(self.fields, dtype=float).copy()
        j = np.asarray(self.couplings, dtype=float).copy()
        if f.shape != (self.n_spins,):
            raise InputError(f"fields must have shape ({self.n_spins},), got {f.shape}")
        if j.shape != (self.n_spins, self.n_spins):
            raise InputError(f"couplings must be a {self.n_spins}x{self.n_spins} matrix")
        if not (np.all(np.isfinite(f)) and np.all(np.isfinite(j)) and math.isfinite(self.offset)):
            raise InputError("Ising problem entries must be finite")
        if np.any(np.diag(j) != 0.0):
            raise InputError("coupling diagonal must be exactly zero")
        if not np.array_equal(j, j.T):
            raise InputError("coupling matrix must be symmetric")
        f.setflags(write=False)
        j.setflags(write=False)
        object.__setattr__(self, "fields", f)
        object.__setattr__(self, "couplings", j)
        object.__setattr__(self, "offset", float(self.offset))

    def to_json(self) -> str:
        triplets = []
        for i in range(self.n_spins):
            for j in range(i + 1, self.n_spins):
                if self.couplings[i, j] != 0.0:
                    triplets.append([i, j, self.couplings[i, j]])
        return json.dumps({"n": self.n_spins, "fields": list(self.fields),
                           "couplings": triplets, "offset": self.offset}, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "IsingProblem":
        try:
            payload = json.loads(text)
            n = int(payload["n"])
            fields = np.asarray(payload["fields"], dtype=float)
            couplings = np.zeros((n, n))
            for i, j, v in payload["couplings"]:
                couplings[int(i), int(j)] = float(v)
                couplings[int(j), int(i)] = float(v)
            return cls(n_spins=n, fields=fields, couplings=couplings,
                       offset=float(payload.get("offset", 0.0)))
        except json.JSONDecodeError as exc:
            raise InputError(f"line {exc.lineno}: invalid JSON Ising file: {exc.msg}") from exc
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed Ising JSON: {exc}") from exc


@dataclass(frozen=True)
class DecodeMap:
    """Spin-to-vertex correspondence and the spin value meaning 'selected'."""

    vertex_of_spin: tuple[int, ...]
    selected_value: int = 1

    def __post_init__(self):
        if len(set(self.vertex_of_spin)) != len(self.vertex_of_spin):
            raise InputError("spin-to-vertex map must be a bijection")
        if self.selected_value not in (-1, 1):
            raise InputError("selected spin value must be +1 or -1")


def encode_mwis(g: WeightedGraph, penalty: float | None = None,
                vertex_ids: Sequence[int] | None = None) -> tuple[IsingProblem, DecodeMap]:
    """Encode a positive-weight MWIS instance as an Ising minimization.

    ``penalty`` defaults to twice the maximum vertex weight.  ``vertex_ids``
    optionally relabels spin k to an original-graph vertex id (used after
    pruning non-positive vertices).
    """
    if g.n == 0:
        return IsingProblem(0, np.zeros(0), np.zeros((0, 0)), 0.0), DecodeMap(())
    if any(w <= 0.0 for w in g.weights):
        raise InputError("encode_mwis requires strictly positive weights")
    max_w = max(g.weights)
    if penalty is None:
        penalty = 2.0 * max_w
    if penalty <= max_w:
        raise InputError(f"penalty {penalty} must exceed the largest weight {max_w}")

    n = g.n
    couplings = np.zeros((n, n))
    deg = np.zeros(n)
    for i, j in g.edges:
        couplings[i, j] = couplings[j, i] = penalty / 4.0
        deg[i] += 1
        deg[j] += 1
    fields = -np.asarray(g.weights) / 2.0 + (penalty / 4.0) * deg
    offset = -sum(g.weights) / 2.0 + penalty * len(g.edges) / 4.0
    ids = tuple(range(n)) if vertex_ids is None else tuple(int(v) for v in vertex_ids)
    if len(ids) != n:
        raise InputError("vertex_ids length must match the graph size")
    return IsingProblem(n, fields, couplings, offset), DecodeMap(ids)


def decode_spins(spins: Sequence[int], dmap: DecodeMap) -> frozenset:
    """Vertices whose spin equals the 'selected' convention value."""
    spins = np.asarray(spins)
    if spins.shape != (len(dmap.vertex_of_spin),):
        raise InputError(f"expected {len(dmap.vertex_of_spin)} spins, got {spins.shape}")
    return frozenset(dmap.vertex_of_spin[k] for k in range(len(spins))
                     if spins[k] == dmap.selected_value)


def ising_energy(p: IsingProblem, spins: Sequence[int]) -> float:
    """Classical energy sum_{k<j} J_kj s_k s_j + sum_k Omega_k s_k + offset."""
    s = np.asarray(spins, dtype=float)
    if s.shape != (p.n_spins,):
        raise InputError(f"expected {p.n_spins} spins, got {s.shape}")
    return float(0.5 * s @ p.couplings @ s + p.fields @ s + p.offset)


def all_spin_configurations(n: int, indices: np.ndarray | None = None) -> np.ndarray:
    """Spin rows for binary indices (bit k of the index 0 -> spin +1)."""
    if indices is None:
        indices = np.arange(1 << n, dtype=np.int64)
    bits = (indices[:, None] >> np.arange(n)[None, :]) & 1
    return (1 - 2 * bits).astype(np.int8)


def ground_state_exhaustive(p: IsingProblem) -> tuple[np.ndarray, float]:
    """Global minimizer by enumeration; ties break toward the lowest binary index."""
    n = p.n_spins
    if n > EXHAUSTIVE_SPIN_LIMIT:
        raise CapacityError(f"exhaustive ground state capped at {EXHAUSTIVE_SPIN_LIMIT} spins, got {n}")
    if n == 0:
        return np.zeros(0, dtype=np.int8), float(p.offset)
    best_energy = math.inf
    best_spins = None
    chunk = 1 << 16
    for start in range(0, 1 << n, chunk):
        idx = np.arange(start, min(start + chunk, 1 << n), dtype=np.int64)
        s = all_spin_configurations(n, idx).astype(float)
        energies = 0.5 * np.einsum("ij,ij->i", s @ p.couplings, s) + s @ p.fields + p.offset
        k = int(np.argmin(energies))
        if energies[k] < best_energy:
            best_energy = float(energies[k])
            best_spins = s[k].astype(np.int8)
    return best_spins, best_energy


@dataclass(frozen=True)
class Schedule:
    """Annealing envelopes f (driver) and h (target) over [0, t_f].

    Shapes: ``linear`` has f = 1 - t/t_f, h = t/t_f; ``smooth`` has
    f = cos^2(pi t / 2 t_f), h = sin^2(pi t / 2 t_f).  ``driver_scale`` is
    the driver angular frequency omega_0.
    """

    t_f: float
    shape: str = "smooth"
    driver_scale: float = 2 * math.pi * 100e6

    def __post_init__(self):
        if self.t_f <= 0:
            raise InputError("t_f must be positive")
        if self.shape not in ("linear", "smooth"):
            raise InputError(f"unknown schedule shape '{self.shape}'")

    @classmethod
    def linear(cls, t_f: float, driver_scale: float = 2 * math.pi * 100e6) -> "Schedule":
        return cls(t_f=t_f, shape="linear", driver_scale=driver_scale)

    @classmethod
    def smooth(cls, t_f: float, driver_scale: float = 2 * math.pi * 100e6) -> "Schedule":
        return cls(t_f=t_f, shape="smooth", driver_scale=driver_scale)

    def evaluate(self, t):
        t_arr = np.asarray(t, dtype=float)
        if np.any(t_arr < 0) or np.any(t_arr > self.t_f):
            raise InputError(f"t must lie in [0, {self.t_f}]")
        x = t_arr / self.t_f
        if self.shape == "linear":
            f, h = 1.0 - x, x
        else:
            f = np.cos(np.pi * x / 2.0) ** 2
            h = np.sin(np.pi * x / 2.0) ** 2
        if np.isscalar(t) or t_arr.ndim == 0:
            return float(f), float(h)
        return f, h


def schedule_eval(s: Schedule, t: float) -> tuple[float, float]:
    """Envelope pair (f, h) at time t; errors outside [0, t_f]."""
    return s.evaluate(t)


# Default problem energy scale applied to the dimensionless encoding (rad/s).
PROBLEM_SCALE_DEFAULT = 2 * math.pi * 10e6
