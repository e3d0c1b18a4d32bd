"""Path-integral Monte Carlo annealing for registers beyond exact dynamics.

The transverse-field Ising evolution is Trotterized into P coupled replicas
("slices") of the classical problem at inverse temperature beta.  At
schedule point t, slice spins feel the target couplings and fields scaled
by h(t)/P plus a ferromagnetic coupling along imaginary time,

    J_perp(t) = -(1 / 2 beta) ln tanh(beta f(t) w0 / P),

which diverges (slices lock) as the driver envelope f goes to zero; f is
clamped below at 1e-6 of its initial value to keep the logarithm finite.
Updates are single-spin Metropolis sweeps plus one imaginary-time cluster
update (a spin flipped across all slices) per sweep, which fights the
slice-locking slowdown near the end of the schedule.

Energies here are dimensionless (problem units): beta and the driver scale
are expressed relative to the problem energy scale.  Each restart is an
independent "shot" driven by the counter-based stream keyed by
(seed, restart index), so results are reproducible and order-independent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._backend import kernels
from .dynamics import AnnealResult, decoded_weight_table
from .errors import CapacityError, InputError
from .graph import WeightedGraph, is_independent, mwis_exact, total_weight
from .ising import (DecodeMap, IsingProblem, Schedule, decode_spins,
                    encode_mwis, ground_state_exhaustive, ising_energy)

SQA_SPIN_LIMIT = 256

# Driver envelope clamp: below this fraction of f(0) the slices are treated
# as fully locked (the log-divergence of J_perp is cut off).
F_CLAMP_FRACTION = 1e-6


@dataclass(frozen=True)
class QmcConfig:
    """Path-integral Monte Carlo parameters (dimensionless energy units)."""

    trotter_slices: int = 32
    beta: float = 10.0                 # inverse temperature * problem scale
    sweeps_per_point: int = 50
    schedule_points: int = 64
    restarts: int = 20
    seed: int = 0
    driver_scale: float = 10.0         # w0 / problem scale
    schedule_shape: str = "linear"
    readout_policy: str = "best-energy-slice"

    def __post_init__(self):
        if self.trotter_slices < 2:
            raise InputError("need at least 2 Trotter slices")
        if self.beta <= 0:
            raise InputError("inverse temperature must be positive")
        if self.sweeps_per_point < 1 or self.schedule_points < 2 or self.restarts < 1:
            raise InputError("sweeps, schedule points and restarts must be positive")
        if self.readout_policy not in ("final-slice", "best-energy-slice"):
            raise InputError(f"unknown readout policy '{self.readout_policy}'")
        if self.schedule_shape not in ("linear", "smooth"):
            raise InputError(f"unknown schedule shape '{self.schedule_shape}'")


def classical_energy(p: IsingProblem, slice_spins: Sequence[int]) -> float:
    """Classical energy of one replica slice (delegates to the encoding)."""
    return ising_energy(p, slice_spins)


def j_perp(f_value: float, beta: float, driver_scale: float, slices: int) -> float:
    """Inter-slice ferromagnetic coupling at driver envelope f (clamped)."""
    f_eff = max(f_value, F_CLAMP_FRACTION)
    arg = beta * f_eff * driver_scale / slices
    return -math.log(math.tanh(arg)) / (2.0 * beta)


def _schedule_envelopes(cfg: QmcConfig) -> tuple[np.ndarray, np.ndarray]:
    x = np.linspace(0.0, 1.0, cfg.schedule_points)
    if cfg.schedule_shape == "linear":
        return 1.0 - x, x
    f = np.cos(np.pi * x / 2.0) ** 2
    return f, np.sin(np.pi * x / 2.0) ** 2


def _run_restart(p: IsingProblem, cfg: QmcConfig, restart: int,
                 f_env: np.ndarray, h_env: np.ndarray,
                 j_mat: np.ndarray, fields: np.ndarray) -> np.ndarray:
    """One independent annealing restart; returns the final replica (P, n)."""
    n = p.n_spins
    gen = np.random.Generator(np.random.Philox(
        key=[int(cfg.seed) & ((1 << 64) - 1), restart]))
    spins = gen.choice(np.array([-1, 1], dtype=np.int8),
                       size=(cfg.trotter_slices, n))
    spins = np.ascontiguousarray(spins)
    for f_val, h_val in zip(f_env, h_env):
        jp = j_perp(float(f_val), cfg.beta, cfg.driver_scale, cfg.trotter_slices)
        u_metro = gen.random((cfg.sweeps_per_point, cfg.trotter_slices, n))
        u_cluster = gen.random((cfg.sweeps_per_point, n))
        kernels.sqa_run_point(spins, j_mat, fields,
                              float(h_val) / cfg.trotter_slices, jp,
                              cfg.beta, u_metro, u_cluster)
    return spins


def _read_slice(p: IsingProblem, cfg: QmcConfig, replica: np.ndarray) -> np.ndarray:
    if cfg.readout_policy == "final-slice":
        return replica[-1]
    energies = [ising_energy(p, replica[s]) for s in range(replica.shape[0])]
    return replica[int(np.argmin(energies))]


def _repair(g: WeightedGraph, selection: frozenset) -> frozenset:
    """Greedy feasibility repair: remove the lighter endpoint per violated edge."""
    sel = set(selection)
    for i, j in sorted(g.edges):
        if i in sel and j in sel:
            drop = i if g.weights[i] <= g.weights[j] else j
            sel.discard(drop)
    return frozenset(sel)


def sqa_anneal(g: WeightedGraph, cfg: QmcConfig,
               penalty: float | None = None) -> AnnealResult:
    """Path-integral Monte Carlo anneal of the MWIS encoding of ``g``.

    One decoded configuration per restart.  Decoded sets violating the
    penalty are recorded raw but repaired to a feasible set before entering
    the best-of-restarts selection; the repair count lands in ``info``.
    """
    if any(w <= 0.0 for w in g.weights):
        raise InputError("sqa_anneal requires a positive-weight graph; "
                         "apply drop_nonpositive first")
    if g.n > SQA_SPIN_LIMIT:
        raise CapacityError(f"sqa budget is {SQA_SPIN_LIMIT} spins, got {g.n}")
    p, dmap = encode_mwis(g, penalty=penalty)
    return sqa_anneal_problem(p, cfg, graph=g, dmap=dmap)


def sqa_anneal_problem(p: IsingProblem, cfg: QmcConfig,
                       graph: WeightedGraph | None = None,
                       dmap: DecodeMap | None = None) -> AnnealResult:
    """Anneal an arbitrary Ising problem; decoding requires ``graph``+``dmap``."""
    if p.n_spins > SQA_SPIN_LIMIT:
        raise CapacityError(f"sqa budget is {SQA_SPIN_LIMIT} spins, got {p.n_spins}")
    f_env, h_env = _schedule_envelopes(cfg)
    n = p.n_spins
    j_mat = np.ascontiguousarray(p.couplings).copy()
    fields = np.ascontiguousarray(p.fields).copy()
    spins_out = np.empty((cfg.restarts, n), dtype=np.int8)
    for r in range(cfg.restarts):
        replica = _run_restart(p, cfg, r, f_env, h_env, j_mat, fields)
        spins_out[r] = _read_slice(p, cfg, replica)
    energies = np.array([ising_energy(p, spins_out[r]) for r in range(cfg.restarts)])

    if graph is None:
        order = int(np.argmin(energies))
        return AnnealResult(
            spins=spins_out, energies=energies, decoded_sets=(),
            shot_weights=np.zeros(cfg.restarts), shot_feasible=np.ones(cfg.restarts, bool),
            best_set=frozenset(), best_weight=float("nan"), p_ground=None,
            success_fraction=None, t_f=float("nan"), shots=cfg.restarts,
            mode="sqa", backend="sqa", seed=cfg.seed,
            info={"best_energy": float(energies[order]), "config": cfg.__dict__.copy()})

    assert dmap is not None
    decoded_raw = tuple(decode_spins(spins_out[r], dmap) for r in range(cfg.restarts))
    repaired = []
    n_repaired = 0
    for sel in decoded_raw:
        if is_independent(graph, sel):
            repaired.append(sel)
        else:
            repaired.append(_repair(graph, sel))
            n_repaired += 1
    shot_weights = np.array([total_weight(graph, sel) for sel in repaired])
    shot_feasible = np.ones(cfg.restarts, dtype=bool)

    best_set, best_weight = frozenset(), 0.0
    for sel, w in zip(repaired, shot_weights):
        if w > best_weight + 1e-12:
            best_set, best_weight = sel, float(w)

    success = None
    if graph.n <= 20:
        _, opt_w = mwis_exact(graph)
        success = float(np.mean(np.abs(shot_weights - opt_w) <= 1e-9))

    return AnnealResult(
        spins=spins_out, energies=energies,
        decoded_sets=tuple(repaired), shot_weights=shot_weights,
        shot_feasible=shot_feasible, best_set=best_set, best_weight=best_weight,
        p_ground=None, success_fraction=success, t_f=float("nan"),
        shots=cfg.restarts, mode="sqa", backend="sqa", seed=cfg.seed,
        info={"raw_decoded_sets": decoded_raw, "n_repaired": n_repaired,
              "config": cfg.__dict__.copy()})


@dataclass(frozen=True)
class AgreementReport:
    """How a Monte Carlo run compares against an exhaustive oracle."""

    success_rate: float
    mean_residual_energy: float
    restarts_to_solution: float
    n_restarts: int

    def as_dict(self) -> dict:
        return {"success_rate": self.success_rate,
                "mean_residual_energy": self.mean_residual_energy,
                "restarts_to_solution": self.restarts_to_solution,
                "n_restarts": self.n_restarts}


def agreement_report(p: IsingProblem, cfg: QmcConfig,
                     oracle: tuple[np.ndarray, float] | None = None) -> AgreementReport:
    """Success rate, residual energy and restarts-to-solution vs the oracle.

    ``oracle`` defaults to :func:`ground_state_exhaustive` (n <= 24).
    """
    if oracle is None:
        oracle = ground_state_exhaustive(p)
    _, e0 = oracle
    res = sqa_anneal_problem(p, cfg)
    hits = np.abs(res.energies - e0) <= 1e-9
    success = float(np.mean(hits))
    residual = float(np.mean(res.energies - e0))
    if success >= 1.0:
        rts = 1.0
    elif success <= 0.0:
        rts = math.inf
    else:
        rts = math.log(1.0 - 0.99) / math.log(1.0 - success)
    return AgreementReport(success_rate=success,
                           mean_residual_energy=max(residual, 0.0),
                           restarts_to_solution=rts,
                           n_restarts=cfg.restarts)
