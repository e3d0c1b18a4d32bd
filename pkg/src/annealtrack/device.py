"""Spin-qubit cQED device physics.

A flopping-mode spin qubit is a single electron in a double quantum dot
(bias eps, tunnel energy gamma) in an inhomogeneous magnetic field
(symmetric part alpha_s along z, antisymmetric part alpha_as along x), with
one dot coupled to a microwave resonator.  The single-qubit model is the
4x4 Hamiltonian

    H_q = (eps/2) tau_z + gamma tau_x + (alpha_s/2) sigma_z
          + (alpha_as/2) tau_z sigma_x

and the resonator couples through the charge dipole g0 (a + a^dag) tau_z.
This module maps gate-level parameters onto qubit frequency and dipole
couplings, integrates the time-dependent Schrieffer-Wolff generator
coefficients that eliminate the resonator, and derives the resulting
dispersive qubit-qubit couplings, the diabatic drive amplitude Theta(t)
produced by sweeping the bias, and time-dependent relaxation/dephasing
rates.  All energies are angular frequencies (rad/s, hbar = 1).

Closed forms adopted for the couplings (orbital splitting
Omega_orb = sqrt(eps^2 + 4 gamma^2), orbital mixing sin_phi = 2 gamma /
Omega_orb, cos_phi = eps / Omega_orb, spin tilt sin_xi = alpha_as /
sqrt(alpha_s^2 + alpha_as^2)):

    g_sigma   = (g0/2) sin_phi sin_xi            (transverse, peak at eps=0)
    lam_sigma = (g0/2) sin_phi cos_phi sin_xi    (longitudinal, zero at eps=0
                                                  and at large |eps|)
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from ._backend import kernels
from .errors import ConfigurationError, InputError, NumericalFailure

TWO_PI = 2.0 * math.pi

# Dispersive-regime warning threshold for the generator coefficient norm.
SW_WEIGHT_WARN = 0.3

# Integration guard: resonator phase advance per internal ODE substep.
SW_PHASE_GUARD = 0.1


@dataclass(frozen=True)
class QubitParams:
    """Gate-level qubit parameters (angular frequencies)."""

    gamma: float = TWO_PI * 10e9        # DQD tunnel energy
    alpha_s: float = TWO_PI * 5.5e9     # symmetric magnetic energy
    alpha_as: float = TWO_PI * 1.1e9    # anti-symmetric magnetic energy
    g0: float = TWO_PI * 50e6           # bare electron-photon coupling

    def __post_init__(self):
        if self.gamma <= 0:
            raise InputError("tunnel energy gamma must be positive")
        if self.g0 < 0:
            raise InputError("bare coupling g0 must be non-negative")


@dataclass(frozen=True)
class ResonatorParams:
    omega_c: float = TWO_PI * 5e9       # resonator frequency
    kappa: float = TWO_PI * 1e6         # resonator linewidth

    def __post_init__(self):
        if self.omega_c <= 0:
            raise InputError("resonator frequency must be positive")
        if self.kappa < 0:
            raise InputError("resonator linewidth must be non-negative")


@dataclass(frozen=True)
class NoiseParams:
    """Parameterized incoherent channels.

    ``charge_noise`` multiplies (d omega_q / d eps)^2 to give the pure
    dephasing rate; ``relaxation_scale`` is the additive phonon/contact
    relaxation rate; ``temperature`` (angular-frequency units, k_B T / hbar)
    optionally applies a thermal occupation factor to relaxation.
    """

    charge_noise: float = 1e9
    relaxation_scale: float = 100.0
    temperature: float = 0.0

    def __post_init__(self):
        if min(self.charge_noise, self.relaxation_scale, self.temperature) < 0:
            raise InputError("noise parameters must be non-negative")


@dataclass(frozen=True)
class BiasTrajectory:
    """Per-qubit bias sweep eps_k(t) on a shared uniform time grid."""

    t: np.ndarray                        # (T,) uniform grid covering [0, t_f]
    eps: np.ndarray                      # (n_qubits, T)

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        eps = np.atleast_2d(np.asarray(self.eps, dtype=float))
        if t.ndim != 1 or t.size < 2:
            raise InputError("time grid needs at least two points")
        dt = np.diff(t)
        if not np.allclose(dt, dt[0], rtol=1e-9, atol=0.0):
            raise InputError("time grid must be uniform")
        if eps.shape[1] != t.size:
            raise InputError("eps grid does not match the time grid")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(eps))):
            raise InputError("bias trajectory must be finite")
        t.setflags(write=False)
        eps.setflags(write=False)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "eps", eps)

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    @property
    def n_qubits(self) -> int:
        return self.eps.shape[0]

    @classmethod
    def from_callable(cls, funcs, t_f: float, n_points: int = 2048) -> "BiasTrajectory":
        t = np.linspace(0.0, t_f, n_points)
        eps = np.stack([np.asarray([f(ti) for ti in t], dtype=float) for f in funcs])
        return cls(t=t, eps=eps)

    @classmethod
    def cosine_ramp(cls, n_qubits: int, t_f: float, eps_start: float,
                    eps_end: float = 0.0, n_points: int = 2048) -> "BiasTrajectory":
        """Smooth bias ramp (zero slope at both ends), same for all qubits."""
        t = np.linspace(0.0, t_f, n_points)
        x = np.sin(np.pi * t / (2 * t_f)) ** 2
        eps = eps_start + (eps_end - eps_start) * x
        return cls(t=t, eps=np.tile(eps, (n_qubits, 1)))

    def index_of(self, t_query: float) -> int:
        pos = (t_query - self.t[0]) / self.dt
        idx = int(round(pos))
        if idx < 0 or idx >= self.t.size or abs(pos - idx) > 1e-6:
            raise InputError(f"t={t_query} is not on the trajectory grid")
        return idx


@dataclass(frozen=True)
class SwCoefficients:
    """Generator coefficients (alpha, beta, gamma) per qubit on the grid.

    ``alpha``/``beta``/``gamma`` are the sigma_x/sigma_y/sigma_z components
    of the photon-mode generator; the co-rotating transverse weight
    alpha + i beta equals g_sigma / (omega_q - omega_c) at the static fixed
    point and sets the Purcell dressing.
    """

    alpha: np.ndarray                    # (n_qubits, T) complex
    beta: np.ndarray
    gamma: np.ndarray

    def transverse_weight(self) -> np.ndarray:
        return self.alpha + 1j * self.beta

    def max_weight(self) -> float:
        return float(np.max(np.abs(self.transverse_weight())))


@dataclass(frozen=True)
class DeviceTrajectory:
    """All per-qubit time-dependent quantities on a shared grid."""

    t: np.ndarray                        # (T,)
    omega_q: np.ndarray                  # (n_qubits, T)
    theta: np.ndarray                    # (n_qubits, T)
    g_sigma: np.ndarray                  # (n_qubits, T)
    lam_sigma: np.ndarray                # (n_qubits, T)
    sw: SwCoefficients
    j_matrix: np.ndarray                 # (T, n, n), symmetric, zero diagonal
    gamma_relax: np.ndarray              # (n_qubits, T), >= 0
    gamma_deph: np.ndarray               # (n_qubits, T), >= 0

    @property
    def n_qubits(self) -> int:
        return self.omega_q.shape[0]


# ---------------------------------------------------------------------------
# Single-qubit closed forms
# ---------------------------------------------------------------------------

_SX = np.array([[0.0, 1.0], [1.0, 0.0]])
_SZ = np.diag([1.0, -1.0])
_I2 = np.eye(2)


def single_qubit_matrix(eps: float, q: QubitParams) -> np.ndarray:
    """The 4x4 orbit (x) spin Hamiltonian at bias eps."""
    return (0.5 * eps * np.kron(_SZ, _I2)
            + q.gamma * np.kron(_SX, _I2)
            + 0.5 * q.alpha_s * np.kron(_I2, _SZ)
            + 0.5 * q.alpha_as * np.kron(_SZ, _SX))


def _batched_matrices(eps: np.ndarray, q: QubitParams) -> np.ndarray:
    eps = np.asarray(eps, dtype=float)
    base = (q.gamma * np.kron(_SX, _I2)
            + 0.5 * q.alpha_s * np.kron(_I2, _SZ)
            + 0.5 * q.alpha_as * np.kron(_SZ, _SX))
    return base + 0.5 * eps[..., None, None] * np.kron(_SZ, _I2)


def qubit_frequency(eps, q: QubitParams):
    """Qubit splitting: gap between the two lowest levels of the 4x4 model.

    Even in eps; tends to sqrt(alpha_s^2 + alpha_as^2) (the local-field
    splitting) for |eps| >> gamma, which is alpha_s to first order in
    (alpha_as / alpha_s)^2.
    """
    evals = np.linalg.eigvalsh(_batched_matrices(eps, q))
    out = evals[..., 1] - evals[..., 0]
    return float(out) if np.isscalar(eps) else out


def dipole_couplings(eps, q: QubitParams):
    """Transverse and longitudinal spin-photon couplings (g_sigma, lam_sigma)."""
    eps = np.asarray(eps, dtype=float)
    omega_orb = np.hypot(eps, 2.0 * q.gamma)
    sin_phi = 2.0 * q.gamma / omega_orb
    cos_phi = eps / omega_orb
    sin_xi = q.alpha_as / math.hypot(q.alpha_s, q.alpha_as)
    g_sigma = 0.5 * q.g0 * sin_phi * sin_xi
    lam_sigma = 0.5 * q.g0 * sin_phi * cos_phi * sin_xi
    if eps.ndim == 0:
        return float(g_sigma), float(lam_sigma)
    return g_sigma, lam_sigma


def qubit_frequency_derivative(eps, q: QubitParams):
    """d omega_q / d eps (dimensionless), via the Hellmann-Feynman identity.

    Antisymmetrized over +/- eps so the sweet-spot value at eps = 0 is an
    exact floating-point zero (omega_q is even in eps).
    """
    def hf(e):
        evals, evecs = np.linalg.eigh(_batched_matrices(e, q))
        tz = np.kron(_SZ, _I2)
        v0 = evecs[..., :, 0]
        v1 = evecs[..., :, 1]
        d0 = 0.5 * np.einsum("...i,ij,...j->...", v0, tz, v0)
        d1 = 0.5 * np.einsum("...i,ij,...j->...", v1, tz, v1)
        return d1 - d0

    eps = np.asarray(eps, dtype=float)
    out = 0.5 * (hf(eps) - hf(-eps))
    return float(out) if eps.ndim == 0 else out


def spin_mixing_angle(eps, q: QubitParams):
    """Mixing angle of the projected two-level spin Hamiltonian.

    Projecting the gradient term onto the lower orbital branch leaves the
    spin in effective fields (alpha_s along z, -alpha_as cos_phi along x);
    the diagonalizing rotation angle about sigma_y is atan2 of their ratio.
    Its time derivative is the diabatic drive amplitude Theta.
    """
    eps = np.asarray(eps, dtype=float)
    cos_phi = eps / np.hypot(eps, 2.0 * q.gamma)
    ang = np.arctan2(-q.alpha_as * cos_phi, q.alpha_s)
    return float(ang) if eps.ndim == 0 else ang


def spin_mixing_angle_derivative(eps, q: QubitParams):
    """d(spin mixing angle)/d eps, closed form."""
    eps = np.asarray(eps, dtype=float)
    omega_orb = np.hypot(eps, 2.0 * q.gamma)
    cos_phi = eps / omega_orb
    dcos = (2.0 * q.gamma) ** 2 / omega_orb ** 3
    out = -q.alpha_s * q.alpha_as * dcos / (q.alpha_s ** 2 + (q.alpha_as * cos_phi) ** 2)
    return float(out) if eps.ndim == 0 else out


def _bias_rate(traj: BiasTrajectory) -> np.ndarray:
    """d eps / dt on the grid (second-order differences)."""
    return np.gradient(traj.eps, traj.dt, axis=1)


def diabatic_theta(traj: BiasTrajectory, q: QubitParams, t: float,
                   qubit: int = 0) -> float:
    """Diabatic drive amplitude Theta(t) = d(mixing angle)/dt at a grid time.

    Zero for frozen bias; scales linearly with the sweep rate along a fixed
    bias path (chain rule through d eps/dt).
    """
    idx = traj.index_of(t)
    rate = _bias_rate(traj)[qubit, idx]
    return float(spin_mixing_angle_derivative(traj.eps[qubit, idx], q) * rate)


def theta_profile(traj: BiasTrajectory, qubits) -> np.ndarray:
    """Theta_k(t) for every qubit on the full grid; shape (n_qubits, T)."""
    if isinstance(qubits, QubitParams):
        qubits = [qubits] * traj.n_qubits
    rate = _bias_rate(traj)
    out = np.empty_like(traj.eps)
    for k, qp in enumerate(qubits):
        out[k] = spin_mixing_angle_derivative(traj.eps[k], qp) * rate[k]
    return out


# ---------------------------------------------------------------------------
# Schrieffer-Wolff coefficients
# ---------------------------------------------------------------------------

def sw_fixed_point(omega_q, g_sigma, lam_sigma, r: ResonatorParams):
    """Algebraic stationary point of the generator ODEs for frozen parameters."""
    omega_q = np.asarray(omega_q, dtype=float)
    alpha = g_sigma * r.omega_c / (omega_q ** 2 - r.omega_c ** 2)
    beta = -1j * omega_q * alpha / r.omega_c
    gamma = -np.asarray(lam_sigma, dtype=float) / r.omega_c + 0j
    return alpha + 0j, beta, gamma


def solve_sw_ode(omega_q: np.ndarray, g_sigma: np.ndarray, lam_sigma: np.ndarray,
                 theta: np.ndarray, t: np.ndarray, r: ResonatorParams,
                 substeps: int | None = None, init: str = "fixed_point") -> SwCoefficients:
    """Integrate the three coupled generator-coefficient ODEs per qubit.

    Inputs are (n_qubits, T) parameter tables on the uniform grid ``t``.
    The equations are integrated in the phase-free variables (the written
    d/dt (x e^{-i omega_c t}) form is substituted away), with an explicit
    4th-order fixed-step scheme; ``substeps`` internal steps are taken per
    grid interval.  When given explicitly it must satisfy the accuracy
    guard omega_c * dt_internal < 0.1; by default it is chosen from the
    guard (with the qubit frequency included in the rate bound).
    """
    omega_q = np.ascontiguousarray(omega_q, dtype=float)
    g_sigma = np.ascontiguousarray(g_sigma, dtype=float)
    lam_sigma = np.ascontiguousarray(lam_sigma, dtype=float)
    theta = np.ascontiguousarray(theta, dtype=float)
    dt_grid = float(t[1] - t[0])
    rate_scale = max(r.omega_c, float(np.max(np.abs(omega_q))))
    if substeps is None:
        substeps = max(1, int(math.ceil(dt_grid * rate_scale / SW_PHASE_GUARD)))
    elif r.omega_c * (dt_grid / substeps) >= SW_PHASE_GUARD:
        raise ConfigurationError(
            f"step-size guard violated: omega_c * dt = "
            f"{r.omega_c * dt_grid / substeps:.3g} >= {SW_PHASE_GUARD}")
    if init == "fixed_point":
        a0, b0, c0 = sw_fixed_point(omega_q[:, 0], g_sigma[:, 0], lam_sigma[:, 0], r)
        y0 = np.stack([a0, b0, c0], axis=1).astype(complex)
    elif init == "zero":
        y0 = np.zeros((omega_q.shape[0], 3), dtype=complex)
    else:
        raise InputError(f"unknown init '{init}'")
    out = kernels.sw_rk4_grid(omega_q, g_sigma, lam_sigma, theta,
                              r.omega_c, dt_grid, int(substeps), y0)
    if not np.all(np.isfinite(out.view(float))):
        raise NumericalFailure("Schrieffer-Wolff integration diverged")
    sw = SwCoefficients(alpha=out[:, :, 0], beta=out[:, :, 1], gamma=out[:, :, 2])
    if sw.max_weight() > SW_WEIGHT_WARN:
        warnings.warn(f"generator weight {sw.max_weight():.2f} exceeds the "
                      f"dispersive guard {SW_WEIGHT_WARN}; results are perturbative")
    return sw


def ising_couplings(sw: SwCoefficients, g_sigma: np.ndarray,
                    index: int | None = None) -> np.ndarray:
    """Dispersive qubit-qubit coupling matrix J_kj from the generator weights.

    Second-order form J_kj = Re[A_k] g_j / 2 + Re[A_j] g_k / 2 with
    A = alpha + i beta; reduces to g_k g_j (1/Delta_k + 1/Delta_j)/2 at the
    static fixed point.  Returns (n, n) for one grid index or (T, n, n).
    """
    re_a = np.real(sw.transverse_weight())      # (n, T)
    if index is not None:
        re_a = re_a[:, index][:, None]
        g = np.asarray(g_sigma, dtype=float)[:, index][:, None]
    else:
        g = np.asarray(g_sigma, dtype=float)
    # (T, n, n) outer combination per time column.
    j = 0.5 * (re_a.T[:, :, None] * g.T[:, None, :] + g.T[:, :, None] * re_a.T[:, None, :])
    for m in j:
        np.fill_diagonal(m, 0.0)
    return j[0] if index is not None else j


def lindblad_rates(sw: SwCoefficients, noise: NoiseParams, r: ResonatorParams,
                   omega_q: np.ndarray, domega_deps: np.ndarray):
    """Time-dependent relaxation and dephasing rates per qubit.

    Relaxation: Purcell loss kappa |alpha + i beta|^2 (transverse photon
    dressing weight) plus the parameterized phonon/contact scale, with an
    optional thermal occupation factor.  Dephasing: charge-noise scale times
    (d omega_q / d eps)^2 plus the longitudinal dressing kappa |gamma|^2.
    """
    a_perp = sw.transverse_weight()
    purcell = r.kappa * np.abs(a_perp) ** 2
    if noise.temperature > 0:
        with np.errstate(over="ignore"):
            n_th = 1.0 / np.expm1(np.asarray(omega_q) / noise.temperature)
        purcell = purcell * (1.0 + n_th)
    gamma_relax = purcell + noise.relaxation_scale
    gamma_deph = (noise.charge_noise * np.asarray(domega_deps) ** 2
                  + r.kappa * np.abs(sw.gamma) ** 2)
    return gamma_relax, gamma_deph


def build_device_trajectory(qubits, r: ResonatorParams, noise: NoiseParams,
                            bias: BiasTrajectory,
                            substeps: int | None = None) -> DeviceTrajectory:
    """Precompute every per-qubit table needed by the annealing simulator."""
    if isinstance(qubits, QubitParams):
        qubits = [qubits] * bias.n_qubits
    if len(qubits) != bias.n_qubits:
        raise InputError("qubit list does not match the bias trajectory")
    n, T = bias.eps.shape
    omega_q = np.empty((n, T))
    g_sig = np.empty((n, T))
    lam_sig = np.empty((n, T))
    dw = np.empty((n, T))
    for k, qp in enumerate(qubits):
        omega_q[k] = qubit_frequency(bias.eps[k], qp)
        g_sig[k], lam_sig[k] = dipole_couplings(bias.eps[k], qp)
        dw[k] = qubit_frequency_derivative(bias.eps[k], qp)
    theta = theta_profile(bias, qubits)
    sw = solve_sw_ode(omega_q, g_sig, lam_sig, theta, bias.t, r, substeps=substeps)
    j = ising_couplings(sw, g_sig)
    gr, gd = lindblad_rates(sw, noise, r, omega_q, dw)
    return DeviceTrajectory(t=bias.t, omega_q=omega_q, theta=theta,
                            g_sigma=g_sig, lam_sigma=lam_sig, sw=sw,
                            j_matrix=j, gamma_relax=gr, gamma_deph=gd)


def coupling_discrepancy(traj: DeviceTrajectory, target_j: np.ndarray,
                         index: int = -1) -> float:
    """Relative Frobenius distance between device-constrained couplings and a
    target coupling matrix, both normalized to unit Frobenius norm.

    A single shared resonator factorizes J through per-qubit quantities, so
    arbitrary conflict graphs are generally not reachable; this reports how
    far the realizable matrix is from the requested one in shape.
    """
    dev = traj.j_matrix[index]
    tgt = np.asarray(target_j, dtype=float)
    norm_dev = np.linalg.norm(dev)
    norm_tgt = np.linalg.norm(tgt)
    if norm_tgt == 0.0:
        return 0.0 if norm_dev == 0.0 else 1.0
    if norm_dev == 0.0:
        return 1.0
    return float(np.linalg.norm(dev / norm_dev - tgt / norm_tgt))


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def device_from_json(text: str):
    """Parse a device configuration file.

    Schema: {"qubits": [{gamma, alpha_s, alpha_as, g0}, ...],
             "resonator": {omega_c, kappa}, "noise": {...},
             "grid": {"t_f": ..., "dt": ...}}.
    Returns (qubit list, ResonatorParams, NoiseParams, (t_f, dt)).
    """
    try:
        payload = json.loads(text)
        qubits = [QubitParams(**qp) for qp in payload["qubits"]]
        resonator = ResonatorParams(**payload.get("resonator", {}))
        noise = NoiseParams(**payload.get("noise", {}))
        grid = payload["grid"]
        return qubits, resonator, noise, (float(grid["t_f"]), float(grid["dt"]))
    except json.JSONDecodeError as exc:
        raise InputError(f"line {exc.lineno}: invalid device JSON: {exc.msg}") from exc
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed device configuration: {exc}") from exc


def trajectory_to_csv(traj: DeviceTrajectory, path: str) -> None:
    """Export the trajectory tables: one row per grid time."""
    n = traj.n_qubits
    header = ["t"]
    for name in ("omega_q", "theta", "g_sigma", "lam_sigma", "gamma_relax", "gamma_deph"):
        header += [f"{name}_{k}" for k in range(n)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(traj.t.size):
            row = [repr(float(traj.t[i]))]
            for table in (traj.omega_q, traj.theta, traj.g_sigma,
                          traj.lam_sigma, traj.gamma_relax, traj.gamma_deph):
                row += [repr(float(table[k, i])) for k in range(n)]
            writer.writerow(row)
