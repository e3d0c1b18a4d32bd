"""Open-system annealing simulator for small qubit registers.

The register Hamiltonian interpolates driver and target,

    H(t) = f(t) (omega_0 / 2) sum_k sigma_z^k
         + h(t) E_p [ sum_{k<j} J_kj sigma_x^k sigma_x^j + sum_k Omega_k sigma_x^k ]
         + sum_k (Theta_k(t) / 2) sigma_y^k,

with the dimensionless (J, Omega) from the MWIS encoding scaled by a
configurable problem energy E_p.  The diabatic drive Theta and the
time-dependent relaxation/dephasing rates come from a device trajectory in
``device`` mode and are zero/constant in ``ideal`` mode.  Decoherence enters
through a Lindblad master equation: per-qubit relaxation in the
instantaneous single-qubit eigenbasis and per-qubit sigma_z dephasing.

Two fixed-step integrators are provided (adaptive schemes are avoided for
reproducibility):

* ``split`` (default): symmetric Strang composition of exact factors; the
  driver phases are applied in the computational basis, the target phases
  in the sigma_x product basis (fast Walsh-Hadamard transform) and the
  per-qubit channel maps as exact local superoperator exponentials.  Every
  factor is completely positive and trace preserving, so trace and
  positivity hold to rounding for any step size; steps are chosen from a
  phase guard on the geometric mean of the driver and target scales.
* ``rk4``: classical 4th-order stepping of the full master equation with a
  step guard of 0.01 rad on the spectral-spread scale; used to cross-check
  the split integrator on short windows and for frozen-Hamiltonian
  conservation tests.

Registers up to the dense limit evolve the full density matrix; above it a
stochastic pure-state jump unraveling is used.  Measurement is a global
rotation into the target product basis followed by computational-basis
sampling with a counter-based RNG keyed by (seed, shot index).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import expm

from ._backend import kernels
from .device import (BiasTrajectory, DeviceTrajectory, NoiseParams,
                     QubitParams, ResonatorParams, build_device_trajectory)
from .errors import CapacityError, InputError, NumericalFailure
from .graph import WeightedGraph, is_independent, mwis_exact
from .ising import (PROBLEM_SCALE_DEFAULT, DecodeMap, IsingProblem, Schedule,
                    all_spin_configurations, decode_spins, encode_mwis,
                    ising_energy)

OMEGA0_DEFAULT = 2 * math.pi * 100e6

# Ideal-mode constant noise rates (1/s), mimicking the device-derived
# magnitudes at the coupling point: Purcell-like relaxation plus a dominant
# charge-noise dephasing that caps the useful anneal time.
RELAX_RATE_DEFAULT = 600.0
DEPH_RATE_DEFAULT = 5e3

DENSE_QUBIT_LIMIT = 8
TRAJECTORY_QUBIT_LIMIT = 16
STATEVECTOR_DENSE_LIMIT = 10


@dataclass(frozen=True)
class AnnealConfig:
    """Run parameters for one annealing simulation."""

    schedule: Schedule
    shots: int = 200
    seed: int = 0
    noise_enabled: bool = True
    problem_scale: float = PROBLEM_SCALE_DEFAULT
    relax_rate: float = RELAX_RATE_DEFAULT
    deph_rate: float = DEPH_RATE_DEFAULT
    backend_limit: int = DENSE_QUBIT_LIMIT
    n_trajectories: int = 512
    integrator: str = "split"
    split_guard: float = 0.05
    step_guard: float = 0.01
    n_nodes: int = 512
    store_spins: bool = True

    def __post_init__(self):
        if self.shots < 1:
            raise InputError("shots must be >= 1")
        if self.integrator not in ("split", "rk4"):
            raise InputError(f"unknown integrator '{self.integrator}'")
        if not (0 < self.step_guard <= 0.5 and 0 < self.split_guard <= 0.5):
            raise InputError("step guards must lie in (0, 0.5] rad")
        if self.n_nodes < 2:
            raise InputError("need at least 2 schedule nodes")


@dataclass(frozen=True)
class DensityState:
    """Dense register density matrix with physicality checks."""

    matrix: np.ndarray

    @property
    def n_qubits(self) -> int:
        return int(round(math.log2(self.matrix.shape[0])))

    def trace(self) -> float:
        return float(np.real(np.trace(self.matrix)))

    def hermiticity_defect(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T)))

    def min_eigenvalue(self) -> float:
        return float(np.min(np.linalg.eigvalsh(self.matrix)))

    def validate(self, trace_tol: float = 1e-9, herm_tol: float = 1e-12,
                 eig_floor: float = -1e-9) -> None:
        if abs(self.trace() - 1.0) > trace_tol:
            raise NumericalFailure(f"trace deviates by {self.trace() - 1.0:.3e}")
        if self.hermiticity_defect() > herm_tol:
            raise NumericalFailure("state is not Hermitian")
        if self.min_eigenvalue() < eig_floor:
            raise NumericalFailure("state has a significantly negative eigenvalue")


# ---------------------------------------------------------------------------
# Operator construction (qubit k is bit k of the basis index; bit 0 <-> up,
# and in the target basis bit 0 <-> sigma_x eigenvalue +1)
# ---------------------------------------------------------------------------

def driver_diagonal(n: int) -> np.ndarray:
    """Diagonal of (1/2) sum_k sigma_z^k in the computational basis."""
    idx = np.arange(1 << n)
    bits = (idx[:, None] >> np.arange(n)[None, :]) & 1
    return 0.5 * np.sum(1 - 2 * bits, axis=1).astype(float)


def target_diagonal(p: IsingProblem) -> np.ndarray:
    """Dimensionless target energies over x-basis indices (offset excluded)."""
    s = all_spin_configurations(p.n_spins).astype(float)
    return 0.5 * np.einsum("ij,ij->i", s @ p.couplings, s) + s @ p.fields


def target_dense(p: IsingProblem) -> np.ndarray:
    """Dense dimensionless target operator (no constant offset term)."""
    n, d = p.n_spins, 1 << p.n_spins
    h = np.zeros((d, d), dtype=complex)
    idx = np.arange(d)
    for k in range(n):
        if p.fields[k] != 0.0:
            np.add.at(h, (idx ^ (1 << k), idx), p.fields[k])
    for k in range(n):
        for j in range(k + 1, n):
            if p.couplings[k, j] != 0.0:
                np.add.at(h, (idx ^ (1 << k) ^ (1 << j), idx), p.couplings[k, j])
    return h


def embed_local(op2: np.ndarray, k: int, n: int) -> np.ndarray:
    """Embed a single-qubit operator acting on bit k into the register."""
    return np.kron(np.kron(np.eye(1 << (n - 1 - k)), op2), np.eye(1 << k))


_SX2 = np.array([[0, 1], [1, 0]], dtype=complex)
_SY2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
_SZ2 = np.diag([1.0, -1.0]).astype(complex)
_I2 = np.eye(2, dtype=complex)


def build_hamiltonian(p: IsingProblem, s: Schedule, t: float,
                      theta: Sequence[float] | None = None,
                      problem_scale: float = PROBLEM_SCALE_DEFAULT) -> np.ndarray:
    """Dense H(t) (rad/s), excluding the constant encoding offset."""
    n = p.n_spins
    if n > STATEVECTOR_DENSE_LIMIT:
        raise CapacityError(f"dense Hamiltonian capped at {STATEVECTOR_DENSE_LIMIT} qubits")
    f, h = s.evaluate(t)
    out = h * problem_scale * target_dense(p)
    out[np.diag_indices_from(out)] += f * s.driver_scale * driver_diagonal(n)
    if theta is not None:
        for k, th in enumerate(theta):
            if th != 0.0:
                out += 0.5 * th * embed_local(_SY2, k, n)
    return out


# ---------------------------------------------------------------------------
# Node tables (envelopes, diabatic drive, rates resolved per node)
# ---------------------------------------------------------------------------

def _interp_rows(t_src: np.ndarray, table: np.ndarray, t_query: np.ndarray) -> np.ndarray:
    out = np.empty((table.shape[0], t_query.size))
    for k in range(table.shape[0]):
        out[k] = np.interp(t_query, t_src, table[k])
    return out


@dataclass
class _RunTables:
    t_edges: np.ndarray          # (N+1,)
    f_edges: np.ndarray          # (N+1,) driver envelope, already * omega_0
    h_edges: np.ndarray          # (N+1,) target envelope, already * E_p
    theta_edges: np.ndarray      # (n, N+1)
    relax_mid: np.ndarray        # (n, N)
    deph_mid: np.ndarray         # (n, N)


def _prepare_tables(p: IsingProblem, cfg: AnnealConfig, mode: str,
                    device: DeviceTrajectory | None,
                    frozen_at: float | None, t0: float, t1: float) -> _RunTables:
    n = p.n_spins
    sched = cfg.schedule
    t_edges = np.linspace(t0, t1, cfg.n_nodes + 1)
    t_mid = 0.5 * (t_edges[:-1] + t_edges[1:])
    t_eval_edges = np.full_like(t_edges, frozen_at) if frozen_at is not None else t_edges
    t_eval_mid = np.full_like(t_mid, frozen_at) if frozen_at is not None else t_mid

    f_e, h_e = sched.evaluate(t_eval_edges)
    f_edges = np.asarray(f_e) * sched.driver_scale
    h_edges = np.asarray(h_e) * cfg.problem_scale

    if mode == "device":
        if device is None:
            raise InputError("device mode requires a DeviceTrajectory")
        theta_edges = _interp_rows(device.t, device.theta, t_eval_edges)
        relax_mid = _interp_rows(device.t, device.gamma_relax, t_eval_mid)
        deph_mid = _interp_rows(device.t, device.gamma_deph, t_eval_mid)
    else:
        theta_edges = np.zeros((n, t_edges.size))
        relax_mid = np.full((n, t_mid.size), cfg.relax_rate)
        deph_mid = np.full((n, t_mid.size), cfg.deph_rate)
    if not cfg.noise_enabled:
        relax_mid = np.zeros_like(relax_mid)
        deph_mid = np.zeros_like(deph_mid)
    return _RunTables(t_edges, f_edges, h_edges, theta_edges, relax_mid, deph_mid)


def _spectral_bound(p: IsingProblem) -> float:
    return float(np.sum(np.abs(p.fields)) + 0.5 * np.sum(np.abs(p.couplings)))


def _node_scales(p: IsingProblem, tab: _RunTables, i: int, spread: float):
    n = p.n_spins
    f_max = max(abs(tab.f_edges[i]), abs(tab.f_edges[i + 1]))
    h_max = max(abs(tab.h_edges[i]), abs(tab.h_edges[i + 1]))
    th_max = float(np.max(np.abs(tab.theta_edges[:, i:i + 2]))) if n else 0.0
    g_max = float(np.max(tab.relax_mid[:, i])) + float(np.max(tab.deph_mid[:, i])) \
        if tab.relax_mid.size else 0.0
    omega_a = n * f_max + n * th_max
    omega_b = h_max * spread
    return omega_a, omega_b, g_max


def _steps_split(cfg: AnnealConfig, node_len: float, omega_a: float,
                 omega_b: float, g_max: float) -> tuple[float, int]:
    geo = math.sqrt((omega_a + g_max) * (omega_b + g_max))
    if geo <= 0.0:
        return node_len, 1
    steps = max(1, int(math.ceil(node_len * geo / cfg.split_guard)))
    return node_len / steps, steps


def _steps_rk4(cfg: AnnealConfig, node_len: float, omega_a: float,
               omega_b: float) -> tuple[float, int]:
    scale = 0.5 * omega_a + omega_b
    if scale <= 0.0:
        return node_len, 1
    steps = max(1, int(math.ceil(node_len * scale / cfg.step_guard)))
    return node_len / steps, steps


def _local_hamiltonian(p: IsingProblem, tab: _RunTables, i: int, k: int) -> np.ndarray:
    f_mid = 0.5 * (tab.f_edges[i] + tab.f_edges[i + 1])
    h_mid = 0.5 * (tab.h_edges[i] + tab.h_edges[i + 1])
    th_mid = 0.5 * (tab.theta_edges[k, i] + tab.theta_edges[k, i + 1])
    return (0.5 * f_mid * _SZ2 + h_mid * p.fields[k] * _SX2 + 0.5 * th_mid * _SY2)


def _lowering_operator(h2: np.ndarray) -> np.ndarray:
    _, vecs = np.linalg.eigh(h2)
    return np.outer(vecs[:, 0], vecs[:, 1].conj())


def _node_channels(p: IsingProblem, tab: _RunTables, i: int):
    """Channel list for the rk4 path: relaxation lowering operators in the
    instantaneous single-qubit eigenbasis plus sigma_z dephasing."""
    n = p.n_spins
    l_ops, l_qubits, l_rates = [], [], []
    for k in range(n):
        g_r = tab.relax_mid[k, i]
        if g_r > 0.0:
            l_ops.append(_lowering_operator(_local_hamiltonian(p, tab, i, k)))
            l_qubits.append(k)
            l_rates.append(g_r)
        g_d = tab.deph_mid[k, i]
        if g_d > 0.0:
            l_ops.append(_SZ2.copy())
            l_qubits.append(k)
            l_rates.append(g_d)
    if not l_ops:
        return (np.zeros((0, 2, 2), dtype=complex), np.zeros(0, dtype=np.int32),
                np.zeros(0), np.zeros((1 << n, 1 << n), dtype=complex))
    l_ops = np.ascontiguousarray(np.stack(l_ops))
    l_qubits = np.asarray(l_qubits, dtype=np.int32)
    l_rates = np.asarray(l_rates, dtype=float)
    d = 1 << n
    kmat = np.zeros((d, d), dtype=complex)
    for op, q, rate in zip(l_ops, l_qubits, l_rates):
        kmat += 0.5 * rate * embed_local(op.conj().T @ op, int(q), n)
    return l_ops, l_qubits, l_rates, kmat


def _dissipator_4x4(op: np.ndarray) -> np.ndarray:
    ll = op.conj().T @ op
    return (np.kron(op, op.conj())
            - 0.5 * np.kron(ll, _I2) - 0.5 * np.kron(_I2, ll.T))


def _node_superops(p: IsingProblem, tab: _RunTables, i: int, dt: float) -> np.ndarray:
    """Exact per-qubit local channel maps exp(dt L_k) for the split path.

    L_k collects the qubit's diabatic sigma_y drive and its relaxation and
    dephasing dissipators; the local coherent driver/target fields are
    already handled by the phase stages.
    """
    n = p.n_spins
    out = np.empty((n, 4, 4), dtype=complex)
    for k in range(n):
        th_mid = 0.5 * (tab.theta_edges[k, i] + tab.theta_edges[k, i + 1])
        liou = np.zeros((4, 4), dtype=complex)
        if th_mid != 0.0:
            hy = 0.5 * th_mid * _SY2
            liou += -1j * (np.kron(hy, _I2) - np.kron(_I2, hy.T))
        g_r = tab.relax_mid[k, i]
        if g_r > 0.0:
            liou += g_r * _dissipator_4x4(
                _lowering_operator(_local_hamiltonian(p, tab, i, k)))
        g_d = tab.deph_mid[k, i]
        if g_d > 0.0:
            liou += g_d * _dissipator_4x4(_SZ2)
        if np.any(liou):
            out[k] = expm(dt * liou)
        else:
            out[k] = np.eye(4)
    return np.ascontiguousarray(out)


# ---------------------------------------------------------------------------
# Dense evolution
# ---------------------------------------------------------------------------

def evolve_window(p: IsingProblem, cfg: AnnealConfig, t0: float, t1: float,
                  rho0: np.ndarray, mode: str = "ideal",
                  device: DeviceTrajectory | None = None,
                  frozen_at: float | None = None) -> tuple[DensityState, dict]:
    """Integrate the master equation over [t0, t1] starting from ``rho0``.

    With ``frozen_at`` set, every time-dependent quantity is pinned to its
    value at that time (used for static decay and conservation checks).
    """
    n = p.n_spins
    if n > cfg.backend_limit or n > DENSE_QUBIT_LIMIT:
        raise CapacityError(
            f"dense density-matrix evolution capped at "
            f"{min(cfg.backend_limit, DENSE_QUBIT_LIMIT)} qubits, got {n}")
    d = 1 << n
    rho = np.ascontiguousarray(rho0, dtype=complex).copy()
    if rho.shape != (d, d):
        raise InputError(f"rho0 must be {d}x{d}")
    tab = _prepare_tables(p, cfg, mode, device, frozen_at, t0, t1)
    hd = driver_diagonal(n)
    spread = _spectral_bound(p)
    trace0 = float(np.real(np.trace(rho)))
    total_steps = 0
    if cfg.integrator == "split":
        ex = target_diagonal(p)
        for i in range(cfg.n_nodes):
            oa, ob, gm = _node_scales(p, tab, i, spread)
            dt, steps = _steps_split(cfg, tab.t_edges[i + 1] - tab.t_edges[i], oa, ob, gm)
            superops = _node_superops(p, tab, i, dt)
            kernels.lindblad_split_node(
                rho, hd, ex, superops,
                float(tab.f_edges[i]), float(tab.f_edges[i + 1]),
                float(tab.h_edges[i]), float(tab.h_edges[i + 1]),
                float(dt), int(steps), n)
            total_steps += steps
            rho = np.ascontiguousarray(0.5 * (rho + rho.conj().T))
            if not np.all(np.isfinite(rho.view(float))):
                raise NumericalFailure("master-equation integration diverged")
    else:
        ht = np.ascontiguousarray(target_dense(p))
        for i in range(cfg.n_nodes):
            oa, ob, _ = _node_scales(p, tab, i, spread)
            l_ops, l_qubits, l_rates, kmat = _node_channels(p, tab, i)
            dt, steps = _steps_rk4(cfg, tab.t_edges[i + 1] - tab.t_edges[i], oa, ob)
            kernels.lindblad_rk4_node(
                rho, hd, ht, np.ascontiguousarray(tab.theta_edges[:, i]),
                np.ascontiguousarray(tab.theta_edges[:, i + 1]),
                l_ops, l_qubits, l_rates, np.ascontiguousarray(kmat),
                float(tab.f_edges[i]), float(tab.f_edges[i + 1]),
                float(tab.h_edges[i]), float(tab.h_edges[i + 1]),
                float(tab.t_edges[i]), float(dt), int(steps), n)
            total_steps += steps
            rho = np.ascontiguousarray(0.5 * (rho + rho.conj().T))
            if not np.all(np.isfinite(rho.view(float))):
                raise NumericalFailure("master-equation integration diverged; "
                                       "reduce step_guard or increase n_nodes")
    trace_drift = float(np.real(np.trace(rho))) - trace0
    min_eig = float(np.min(np.linalg.eigvalsh(rho)))
    if min_eig < -1e-6:
        raise NumericalFailure(
            f"density matrix lost positivity (min eigenvalue {min_eig:.2e}); "
            "reduce the step guard")
    info = {"trace_drift": trace_drift, "min_eigenvalue": min_eig,
            "steps": total_steps, "integrator": cfg.integrator}
    return DensityState(rho), info


def evolve_lindblad(p: IsingProblem, cfg: AnnealConfig, mode: str = "ideal",
                    device: DeviceTrajectory | None = None,
                    rho0: np.ndarray | None = None) -> tuple[DensityState, dict]:
    """Master-equation anneal over the full schedule window [0, t_f]."""
    d = 1 << p.n_spins
    if rho0 is None:
        rho0 = np.zeros((d, d), dtype=complex)
        rho0[d - 1, d - 1] = 1.0          # driver ground state: all spins down
    return evolve_window(p, cfg, 0.0, cfg.schedule.t_f, rho0, mode, device)


def evolve_statevector(p: IsingProblem, cfg: AnnealConfig, mode: str = "ideal",
                       device: DeviceTrajectory | None = None,
                       psi0: np.ndarray | None = None,
                       frozen_at: float | None = None,
                       t0: float = 0.0, t1: float | None = None) -> tuple[np.ndarray, dict]:
    """Noiseless pure-state anneal (dense path)."""
    n = p.n_spins
    if n > STATEVECTOR_DENSE_LIMIT:
        raise CapacityError(f"dense state evolution capped at {STATEVECTOR_DENSE_LIMIT} qubits")
    d = 1 << n
    if psi0 is None:
        psi0 = np.zeros(d, dtype=complex)
        psi0[d - 1] = 1.0
    psi = np.ascontiguousarray(psi0, dtype=complex).copy()
    t1 = cfg.schedule.t_f if t1 is None else t1
    tab = _prepare_tables(p, cfg, mode, device, frozen_at, t0, t1)
    hd = driver_diagonal(n)
    spread = _spectral_bound(p)
    total_steps = 0
    if cfg.integrator == "split":
        ex = target_diagonal(p)
        for i in range(cfg.n_nodes):
            oa, ob, _ = _node_scales(p, tab, i, spread)
            dt, steps = _steps_split(cfg, tab.t_edges[i + 1] - tab.t_edges[i], oa, ob, 0.0)
            kernels.schrodinger_split_node(
                psi, hd, ex, np.ascontiguousarray(tab.theta_edges[:, i]),
                np.ascontiguousarray(tab.theta_edges[:, i + 1]),
                float(tab.f_edges[i]), float(tab.f_edges[i + 1]),
                float(tab.h_edges[i]), float(tab.h_edges[i + 1]),
                float(dt), int(steps), n)
            total_steps += steps
    else:
        ht = np.ascontiguousarray(target_dense(p))
        for i in range(cfg.n_nodes):
            oa, ob, _ = _node_scales(p, tab, i, spread)
            dt, steps = _steps_rk4(cfg, tab.t_edges[i + 1] - tab.t_edges[i], oa, ob)
            kernels.schrodinger_rk4_node(
                psi, hd, ht, np.ascontiguousarray(tab.theta_edges[:, i]),
                np.ascontiguousarray(tab.theta_edges[:, i + 1]),
                float(tab.f_edges[i]), float(tab.f_edges[i + 1]),
                float(tab.h_edges[i]), float(tab.h_edges[i + 1]),
                float(tab.t_edges[i]), float(dt), int(steps), n)
            total_steps += steps
    norm = float(np.linalg.norm(psi))
    if not (0.9 < norm < 1.1):
        raise NumericalFailure("state norm drifted; reduce the step guard")
    psi /= norm
    return psi, {"steps": total_steps, "norm_drift": norm - 1.0}


# ---------------------------------------------------------------------------
# Stochastic pure-state unraveling (registers above the dense limit)
# ---------------------------------------------------------------------------

def _fwht_batch(a: np.ndarray) -> np.ndarray:
    """Unnormalized Walsh-Hadamard transform along the last axis."""
    d = a.shape[-1]
    h = 1
    out = a.copy()
    while h < d:
        out = out.reshape(-1, d // (2 * h), 2, h)
        x = out[:, :, 0, :].copy()
        y = out[:, :, 1, :].copy()
        out[:, :, 0, :] = x + y
        out[:, :, 1, :] = x - y
        h *= 2
    return out.reshape(a.shape)


def _apply_local_state(psi: np.ndarray, op2: np.ndarray, k: int, n: int) -> np.ndarray:
    shape = psi.shape
    b = psi.reshape(-1, 1 << (n - 1 - k), 2, 1 << k)
    out = np.einsum("ab,ixbj->ixaj", op2, b)
    return out.reshape(shape)


def evolve_trajectories(p: IsingProblem, cfg: AnnealConfig, n_traj: int,
                        mode: str = "ideal",
                        device: DeviceTrajectory | None = None,
                        max_jumps: int = 128) -> tuple[np.ndarray, dict]:
    """Jump-unraveled ensemble evolution; returns final states (n_traj, d).

    Between jumps the non-Hermitian no-jump propagator is split-stepped with
    the same phase stages as the dense path plus exact per-qubit 2x2
    no-jump factors.  Trajectory r consumes the counter-based stream keyed
    by (cfg.seed, r): reproducible and order-independent.
    """
    n = p.n_spins
    if n > TRAJECTORY_QUBIT_LIMIT:
        raise CapacityError(
            f"trajectory unraveling capped at {TRAJECTORY_QUBIT_LIMIT} qubits, got {n}; "
            "route the instance to the sqa backend")
    d = 1 << n
    tab = _prepare_tables(p, cfg, mode, device, None, 0.0, cfg.schedule.t_f)
    spread = _spectral_bound(p)
    hd = driver_diagonal(n)
    ex = target_diagonal(p)

    psi = np.zeros((n_traj, d), dtype=complex)
    psi[:, d - 1] = 1.0
    draws = np.empty((n_traj, max_jumps, 2))
    mask64 = (1 << 64) - 1
    for r in range(n_traj):
        gen = np.random.Generator(np.random.Philox(key=[int(cfg.seed) & mask64, r]))
        draws[r] = gen.random((max_jumps, 2))
    jump_count = np.zeros(n_traj, dtype=int)
    thresholds = draws[:, 0, 0].copy()

    for i in range(cfg.n_nodes):
        oa, ob, gm = _node_scales(p, tab, i, spread)
        dt, steps = _steps_split(cfg, tab.t_edges[i + 1] - tab.t_edges[i], oa, ob, gm)
        # Per-qubit exact no-jump factors and the jump channel list.
        factors = []
        chans = []
        for k in range(n):
            gen2 = -0.5j * dt * (0.5 * (tab.theta_edges[k, i] + tab.theta_edges[k, i + 1])) * _SY2
            decay = np.zeros((2, 2), dtype=complex)
            g_r = tab.relax_mid[k, i]
            if g_r > 0.0:
                lop = _lowering_operator(_local_hamiltonian(p, tab, i, k))
                chans.append((lop, k, float(g_r)))
                decay += 0.5 * g_r * (lop.conj().T @ lop)
            g_d = tab.deph_mid[k, i]
            if g_d > 0.0:
                chans.append((_SZ2.copy(), k, float(g_d)))
                decay += 0.5 * g_d * _I2
            mat = gen2 - dt * decay
            factors.append(expm(mat) if np.any(mat) else None)
        f0, f1 = tab.f_edges[i], tab.f_edges[i + 1]
        h0, h1 = tab.h_edges[i], tab.h_edges[i + 1]
        for s in range(steps):
            x = (s + 0.5) / steps
            za = np.exp(-0.5j * dt * (f0 + (f1 - f0) * x) * hd)
            zb = np.exp(-0.5j * dt * (h0 + (h1 - h0) * x) * ex)
            psi = psi * za
            psi = _fwht_batch(psi) * zb
            psi = _fwht_batch(psi) / d
            for k, fac in enumerate(factors):
                if fac is not None:
                    psi = _apply_local_state(psi, fac, k, n)
            psi = _fwht_batch(psi) * zb
            psi = (_fwht_batch(psi) / d) * za
            if chans:
                norms = np.einsum("rd,rd->r", psi.conj(), psi).real
                hit = np.flatnonzero(norms < thresholds)
                for r in hit:
                    if jump_count[r] + 1 >= max_jumps:
                        raise NumericalFailure("trajectory exceeded the jump budget")
                    weights = np.array([rate * np.linalg.norm(
                        _apply_local_state(psi[r], op, q, n)) ** 2
                        for op, q, rate in chans])
                    cdf = np.cumsum(weights)
                    pick = int(np.searchsorted(cdf / cdf[-1],
                                               draws[r, jump_count[r], 1], side="right"))
                    pick = min(pick, len(chans) - 1)
                    op, q, _ = chans[pick]
                    jumped = _apply_local_state(psi[r], op, q, n)
                    psi[r] = jumped / np.linalg.norm(jumped)
                    jump_count[r] += 1
                    thresholds[r] = draws[r, jump_count[r], 0]
    norms = np.linalg.norm(psi, axis=1)
    psi /= norms[:, None]
    return psi, {"jumps": jump_count, "integrator": "split"}


# ---------------------------------------------------------------------------
# Measurement
# ---------------------------------------------------------------------------

def target_basis_probabilities(state) -> np.ndarray:
    """Outcome distribution in the target (sigma_x product) basis.

    Accepts a DensityState, a state vector or an (R, d) trajectory batch
    (averaged).  Basis index bit k = 0 corresponds to spin +1 on qubit k.
    """
    if isinstance(state, DensityState):
        d = state.matrix.shape[0]
        m = _fwht_batch(state.matrix)
        m = _fwht_batch(np.ascontiguousarray(m.T))
        probs = np.real(np.diag(m)) / d
    else:
        psi = np.atleast_2d(np.asarray(state))
        d = psi.shape[1]
        amps = _fwht_batch(psi) / math.sqrt(d)
        probs = np.mean(np.abs(amps) ** 2, axis=0)
    probs = np.clip(probs, 0.0, None)
    return probs / probs.sum()


def sample_measurements(state, shots: int, seed: int) -> np.ndarray:
    """Independent target-basis shots; row s comes from the stream keyed by
    (seed, s), so shot sequences are reproducible and order-independent."""
    probs = target_basis_probabilities(state)
    d = probs.size
    n = int(round(math.log2(d)))
    cdf = np.cumsum(probs)
    cdf[-1] = 1.0
    spins = np.empty((shots, n), dtype=np.int8)
    mask = (1 << 64) - 1
    for s in range(shots):
        gen = np.random.Generator(np.random.Philox(key=[int(seed) & mask, s]))
        b = int(np.searchsorted(cdf, gen.random(), side="right"))
        b = min(b, d - 1)
        bits = (b >> np.arange(n)) & 1
        spins[s] = (1 - 2 * bits).astype(np.int8)
    return spins


# ---------------------------------------------------------------------------
# End-to-end anneal
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AnnealResult:
    """Shot batch from one annealing run, decoded against the source graph."""

    spins: np.ndarray | None          # (shots, n) target-basis measurements
    energies: np.ndarray              # per-shot classical energy
    decoded_sets: tuple               # per-shot vertex sets (original ids)
    shot_weights: np.ndarray          # per-shot selected weight
    shot_feasible: np.ndarray         # per-shot independence flag
    best_set: frozenset
    best_weight: float
    p_ground: float | None
    success_fraction: float | None
    t_f: float
    shots: int
    mode: str
    backend: str
    seed: int
    info: dict = field(default_factory=dict)

    def to_json(self, include_spins: bool = False) -> str:
        payload = {
            "t_f": self.t_f, "shots": self.shots, "mode": self.mode,
            "backend": self.backend, "seed": self.seed,
            "best_set": sorted(self.best_set), "best_weight": self.best_weight,
            "p_ground": self.p_ground, "success_fraction": self.success_fraction,
            "mean_energy": float(np.mean(self.energies)) if self.energies.size else None,
            "info": {k: v for k, v in self.info.items()
                     if isinstance(v, (int, float, str, bool))},
        }
        if include_spins and self.spins is not None:
            payload["spins"] = self.spins.tolist()
        return json.dumps(payload, sort_keys=True)

    def summary_row(self) -> dict:
        return {"t_f": self.t_f, "shots": self.shots,
                "success_probability": self.success_fraction,
                "best_weight": self.best_weight}


def decoded_weight_table(g: WeightedGraph, dmap: DecodeMap) -> tuple[np.ndarray, np.ndarray]:
    """Per-basis-index decoded weight and feasibility for a positive graph."""
    n = len(dmap.vertex_of_spin)
    d = 1 << n
    idx = np.arange(d)
    bits = (idx[:, None] >> np.arange(n)[None, :]) & 1
    selected = bits == 0                      # spin +1 <-> selected
    w = np.array([g.weights[v] for v in dmap.vertex_of_spin])
    weights = selected @ w
    feasible = np.ones(d, dtype=bool)
    vert_to_spin = {v: k for k, v in enumerate(dmap.vertex_of_spin)}
    for i, j in g.edges:
        if i in vert_to_spin and j in vert_to_spin:
            feasible &= ~(selected[:, vert_to_spin[i]] & selected[:, vert_to_spin[j]])
    return weights, feasible


def success_probability(res: AnnealResult, oracle: tuple[frozenset, float]) -> float:
    """Fraction of shots decoding to an independent set of optimal weight."""
    _, opt_w = oracle
    ok = res.shot_feasible & (np.abs(res.shot_weights - opt_w) <= 1e-9)
    return float(np.mean(ok)) if len(res.shot_weights) else 0.0


def default_device_for(g: WeightedGraph, t_f: float,
                       qubits: QubitParams | None = None,
                       resonator: ResonatorParams | None = None,
                       noise: NoiseParams | None = None,
                       n_points: int = 1024) -> DeviceTrajectory:
    """Device trajectory for a register of len(g) qubits: a smooth bias ramp
    from deep detuning (memory) to the coupling point over [0, t_f]."""
    q = qubits or QubitParams()
    r = resonator or ResonatorParams()
    nz = noise or NoiseParams()
    bias = BiasTrajectory.cosine_ramp(g.n, t_f, eps_start=10.0 * q.gamma,
                                      eps_end=0.0, n_points=n_points)
    return build_device_trajectory(q, r, nz, bias)


def anneal(g: WeightedGraph, cfg: AnnealConfig, mode: str = "ideal",
           device: DeviceTrajectory | None = None) -> AnnealResult:
    """Encode an MWIS instance, run the annealing dynamics, sample and decode.

    ``mode`` is ``ideal`` (schedule-driven, constant noise rates) or
    ``device`` (diabatic drive and rates from a device trajectory, built
    with defaults when not supplied).
    """
    if mode not in ("ideal", "device"):
        raise InputError(f"unknown anneal mode '{mode}'")
    if any(w <= 0.0 for w in g.weights):
        raise InputError("anneal requires a positive-weight graph; "
                         "apply drop_nonpositive first")
    n = g.n
    if n == 0:
        raise InputError("empty graph")
    p, dmap = encode_mwis(g)
    if mode == "device" and device is None:
        device = default_device_for(g, cfg.schedule.t_f)

    if cfg.noise_enabled:
        if n <= cfg.backend_limit and n <= DENSE_QUBIT_LIMIT:
            state, info = evolve_lindblad(p, cfg, mode, device)
            backend = "dense"
        elif n <= TRAJECTORY_QUBIT_LIMIT:
            state, info = evolve_trajectories(p, cfg, cfg.n_trajectories, mode, device)
            backend = "trajectory"
        else:
            raise CapacityError(
                f"{n} qubits exceeds the exact-dynamics limit "
                f"({TRAJECTORY_QUBIT_LIMIT}); use the sqa backend")
    else:
        if n <= STATEVECTOR_DENSE_LIMIT:
            state, info = evolve_statevector(p, cfg, mode, device)
            backend = "state"
        elif n <= TRAJECTORY_QUBIT_LIMIT:
            state, info = evolve_trajectories(p, cfg, 1, mode, device)
            backend = "state-structured"
        else:
            raise CapacityError(
                f"{n} qubits exceeds the exact-dynamics limit "
                f"({TRAJECTORY_QUBIT_LIMIT}); use the sqa backend")

    spins = sample_measurements(state, cfg.shots, cfg.seed)
    weights_tab, feas_tab = decoded_weight_table(g, dmap)
    bits = (spins == -1).astype(np.int64)
    basis_idx = bits @ (1 << np.arange(n))
    shot_weights = weights_tab[basis_idx]
    shot_feasible = feas_tab[basis_idx]
    decoded = tuple(decode_spins(spins[s], dmap) for s in range(cfg.shots))
    energies = np.array([ising_energy(p, spins[s]) for s in range(cfg.shots)])

    best_set, best_weight = frozenset(), 0.0
    for s in range(cfg.shots):
        if shot_feasible[s] and shot_weights[s] > best_weight + 1e-12:
            best_set, best_weight = decoded[s], float(shot_weights[s])

    p_ground = None
    success = None
    if n <= 20:
        _, opt_w = mwis_exact(g)
        probs = target_basis_probabilities(state)
        optimal = feas_tab & (np.abs(weights_tab - opt_w) <= 1e-9)
        p_ground = float(np.sum(probs[optimal]))
        success = float(np.mean(shot_feasible & (np.abs(shot_weights - opt_w) <= 1e-9)))

    return AnnealResult(
        spins=spins if cfg.store_spins else None,
        energies=energies, decoded_sets=decoded, shot_weights=shot_weights,
        shot_feasible=shot_feasible, best_set=best_set, best_weight=best_weight,
        p_ground=p_ground, success_fraction=success, t_f=cfg.schedule.t_f,
        shots=cfg.shots, mode=mode, backend=backend, seed=cfg.seed, info=info)


# ---------------------------------------------------------------------------
# Two-level sweep utility (calibration/validation of the integrator)
# ---------------------------------------------------------------------------

def two_level_sweep(g_coupling: float, rate: float, span_factor: float = 25.0,
                    step_guard: float = 0.01) -> float:
    """Sweep H(t) = (rate * t / 2) sigma_z + g sigma_x through its avoided
    crossing and return the diabatic transition probability.

    Asymptotically this is exp(-2 pi g^2 / rate) for an infinite sweep.
    """
    if g_coupling <= 0 or rate <= 0:
        raise InputError("coupling and sweep rate must be positive")
    t_half = 2.0 * span_factor * g_coupling / rate
    omega_max = math.hypot(rate * t_half, g_coupling)
    steps = max(1, int(math.ceil(2.0 * t_half * omega_max / step_guard)))
    dt = 2.0 * t_half / steps
    # Start in the ground state of H(-T).
    h0 = np.array([[-0.5 * rate * t_half, g_coupling],
                   [g_coupling, 0.5 * rate * t_half]], dtype=complex)
    _, v = np.linalg.eigh(h0)
    psi = np.ascontiguousarray(v[:, 0])
    hd = np.array([0.5, -0.5])
    ht = np.ascontiguousarray(g_coupling * _SX2)
    zeros = np.zeros(1)
    kernels.schrodinger_rk4_node(psi, hd, ht, zeros, zeros,
                                 -rate * t_half, rate * t_half, 1.0, 1.0,
                                 0.0, dt, steps, 1)
    hf = np.array([[0.5 * rate * t_half, g_coupling],
                   [g_coupling, -0.5 * rate * t_half]], dtype=complex)
    _, vf = np.linalg.eigh(hf)
    excited = vf[:, 1]
    return float(np.abs(excited.conj() @ psi) ** 2)
