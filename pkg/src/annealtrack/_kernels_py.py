"""Pure-Python fallbacks for the compiled hot-loop kernels.

Selected automatically when the Cython extension is unavailable (see
``_backend``).  The Monte Carlo sweep mirrors the compiled loop statement by
statement so both consume the pre-drawn uniforms identically and produce the
same spin trajectories; the integrator fallbacks use vectorized numpy and
agree with the compiled versions to rounding.
"""

from __future__ import annotations

import math

import numpy as np

BACKEND_NAME = "python"


# ---------------------------------------------------------------------------
# Path-integral Monte Carlo sweeps
# ---------------------------------------------------------------------------

def sqa_run_point(spins, j_mat, fields, h_over_p, jperp, beta, u_metro, u_cluster):
    """Metropolis sweeps at one schedule point, modifying ``spins`` in place.

    ``spins`` has shape (P, n); ``u_metro`` (sweeps, P, n) and ``u_cluster``
    (sweeps, n) are pre-drawn uniforms, consumed in loop order.
    """
    n_slices, n_spins = spins.shape
    sweeps = u_metro.shape[0]
    for s in range(sweeps):
        for p in range(n_slices):
            up = (p + 1) % n_slices
            down = (p - 1) % n_slices
            for k in range(n_spins):
                local = fields[k]
                for j in range(n_spins):
                    local += j_mat[k, j] * spins[p, j]
                de = -2.0 * spins[p, k] * (
                    h_over_p * local - jperp * (spins[down, k] + spins[up, k]))
                if de <= 0.0 or u_metro[s, p, k] < math.exp(-beta * de):
                    spins[p, k] = -spins[p, k]
        for k in range(n_spins):
            acc = 0.0
            for p in range(n_slices):
                local = fields[k]
                for j in range(n_spins):
                    local += j_mat[k, j] * spins[p, j]
                acc += spins[p, k] * local
            de = -2.0 * h_over_p * acc
            if de <= 0.0 or u_cluster[s, k] < math.exp(-beta * de):
                for p in range(n_slices):
                    spins[p, k] = -spins[p, k]


# ---------------------------------------------------------------------------
# Dense Lindblad / Schrodinger propagation over one node interval
# ---------------------------------------------------------------------------

def _assemble_hamiltonian(out, hd_diag, ht, theta, f, h, n_qubits):
    np.multiply(ht, h, out=out)
    out[np.diag_indices_from(out)] += f * hd_diag
    dim = out.shape[0]
    for k in range(n_qubits):
        th = theta[k]
        if th == 0.0:
            continue
        mask = 1 << k
        idx = np.arange(dim)
        lower = idx[(idx & mask) == 0]
        out[lower | mask, lower] += 0.5j * th
        out[lower, lower | mask] += -0.5j * th


def _apply_local_left(loc, rho, qubit):
    dim = rho.shape[0]
    idx = np.arange(dim)
    lo = idx[(idx & (1 << qubit)) == 0]
    hi = lo | (1 << qubit)
    out = np.empty_like(rho)
    out[lo, :] = loc[0, 0] * rho[lo, :] + loc[0, 1] * rho[hi, :]
    out[hi, :] = loc[1, 0] * rho[lo, :] + loc[1, 1] * rho[hi, :]
    return out


def _apply_local_right(rho, loc_dag, qubit):
    dim = rho.shape[0]
    idx = np.arange(dim)
    lo = idx[(idx & (1 << qubit)) == 0]
    hi = lo | (1 << qubit)
    out = np.empty_like(rho)
    out[:, lo] = rho[:, lo] * loc_dag[0, 0] + rho[:, hi] * loc_dag[1, 0]
    out[:, hi] = rho[:, lo] * loc_dag[0, 1] + rho[:, hi] * loc_dag[1, 1]
    return out


def _lindblad_rhs(rho, hmat, l_ops, l_qubits, l_rates, kmat):
    rhs = -1j * (hmat @ rho - rho @ hmat)
    for c in range(len(l_rates)):
        tmp = _apply_local_left(l_ops[c], rho, int(l_qubits[c]))
        tmp = _apply_local_right(tmp, l_ops[c].conj().T, int(l_qubits[c]))
        rhs += l_rates[c] * tmp
    rhs -= kmat @ rho + rho @ kmat
    return rhs


def lindblad_rk4_node(rho, hd_diag, ht, theta0, theta1, l_ops, l_qubits,
                      l_rates, kmat, f0, f1, h0, h1, t_node, dt, steps, n_qubits):
    """Fixed-step RK4 over one node interval with linearly interpolated
    envelopes; channels are held constant.  Modifies ``rho`` in place."""
    dim = rho.shape[0]
    hmat = np.empty((dim, dim), dtype=complex)
    span = steps * dt

    def h_at(local_t):
        x = local_t / span if span > 0 else 0.0
        _assemble_hamiltonian(hmat, hd_diag, ht,
                              theta0 + (theta1 - theta0) * x,
                              f0 + (f1 - f0) * x, h0 + (h1 - h0) * x, n_qubits)
        return hmat

    for s in range(steps):
        t0 = s * dt
        k1 = _lindblad_rhs(rho, h_at(t0), l_ops, l_qubits, l_rates, kmat)
        k2 = _lindblad_rhs(rho + 0.5 * dt * k1, h_at(t0 + 0.5 * dt), l_ops, l_qubits, l_rates, kmat)
        k3 = _lindblad_rhs(rho + 0.5 * dt * k2, h_at(t0 + 0.5 * dt), l_ops, l_qubits, l_rates, kmat)
        k4 = _lindblad_rhs(rho + dt * k3, h_at(t0 + dt), l_ops, l_qubits, l_rates, kmat)
        rho += (dt / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)


def schrodinger_rk4_node(psi, hd_diag, ht, theta0, theta1, f0, f1, h0, h1,
                         t_node, dt, steps, n_qubits):
    """Noiseless pure-state version of :func:`lindblad_rk4_node`."""
    dim = psi.shape[0]
    hmat = np.empty((dim, dim), dtype=complex)
    span = steps * dt

    def h_at(local_t):
        x = local_t / span if span > 0 else 0.0
        _assemble_hamiltonian(hmat, hd_diag, ht,
                              theta0 + (theta1 - theta0) * x,
                              f0 + (f1 - f0) * x, h0 + (h1 - h0) * x, n_qubits)
        return hmat

    for s in range(steps):
        t0 = s * dt
        k1 = -1j * (h_at(t0) @ psi)
        k2 = -1j * (h_at(t0 + 0.5 * dt) @ (psi + 0.5 * dt * k1))
        k3 = -1j * (h_at(t0 + 0.5 * dt) @ (psi + 0.5 * dt * k2))
        k4 = -1j * (h_at(t0 + dt) @ (psi + dt * k3))
        psi += (dt / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)


# ---------------------------------------------------------------------------
# Split-step propagation (Strang composition of exact factors)
# ---------------------------------------------------------------------------

_WALSH_CACHE: dict = {}


def _walsh_matrix(d):
    w = _WALSH_CACHE.get(d)
    if w is None:
        i = np.arange(d)
        anded = i[:, None] & i[None, :]
        pop = np.zeros((d, d), dtype=np.int64)
        while anded.any():
            pop += anded & 1
            anded = anded >> 1
        w = np.where(pop % 2 == 0, 1.0, -1.0)
        _WALSH_CACHE[d] = w
    return w


def _phase_vectors(hd_diag, ex_diag, f0, f1, h0, h1, dt, steps):
    fmid0 = f0 + (f1 - f0) * (0.5 / steps)
    hmid0 = h0 + (h1 - h0) * (0.5 / steps)
    dfa = (f1 - f0) / steps
    dhb = (h1 - h0) / steps
    za = np.exp(-0.5j * dt * fmid0 * hd_diag)
    ua = np.exp(-0.5j * dt * dfa * hd_diag)
    zb = np.exp(-0.5j * dt * hmid0 * ex_diag)
    ub = np.exp(-0.5j * dt * dhb * ex_diag)
    return za, ua, zb, ub


def _apply_superops(rho, superops, n_qubits):
    d = rho.shape[0]
    for q in range(n_qubits):
        s4 = superops[q].reshape(2, 2, 2, 2)
        h2 = d >> (q + 1)
        l2 = 1 << q
        r6 = rho.reshape(h2, 2, l2, h2, 2, l2)
        rho = np.einsum("pqab,xayubv->xpyuqv", s4, r6).reshape(d, d)
    return rho


def lindblad_split_node(rho, hd_diag, ex_diag, superops, f0, f1, h0, h1,
                        dt, steps, n_qubits):
    """Strang-split master-equation propagation over one node interval."""
    d = rho.shape[0]
    w = _walsh_matrix(d)
    za, ua, zb, ub = _phase_vectors(hd_diag, ex_diag, f0, f1, h0, h1, dt, steps)
    out = rho
    for s in range(steps):
        if s > 0:
            za = za * ua
            zb = zb * ub
        pa = np.outer(za, za.conj())
        pb = np.outer(zb, zb.conj())
        out *= pa
        out = (w @ ((w @ out @ w) * pb) @ w) / (d * d)
        out = _apply_superops(out, superops, n_qubits)
        out = (w @ ((w @ out @ w) * pb) @ w) / (d * d)
        out *= pa
    rho[...] = out


def schrodinger_split_node(psi, hd_diag, ex_diag, theta0, theta1,
                           f0, f1, h0, h1, dt, steps, n_qubits):
    """Pure-state split-step propagation (noiseless registers)."""
    d = psi.shape[0]
    w = _walsh_matrix(d)
    za, ua, zb, ub = _phase_vectors(hd_diag, ex_diag, f0, f1, h0, h1, dt, steps)
    out = psi
    for s in range(steps):
        if s > 0:
            za = za * ua
            zb = zb * ub
        x = (s + 0.5) / steps
        out = out * za
        out = (w @ out) * zb
        out = (w @ out) / d
        for k in range(n_qubits):
            th = theta0[k] + (theta1[k] - theta0[k]) * x
            if th == 0.0:
                continue
            c = math.cos(0.5 * th * dt)
            sn = math.sin(0.5 * th * dt)
            rot = np.array([[c, -sn], [sn, c]], dtype=complex)
            out = _apply_local_state_vec(out, rot, k, n_qubits)
        out = (w @ out) * zb
        out = ((w @ out) / d) * za
    psi[...] = out


def _apply_local_state_vec(psi, op2, k, n):
    b = psi.reshape(1 << (n - 1 - k), 2, 1 << k)
    return np.einsum("ab,xbz->xaz", op2, b).reshape(psi.shape)


# ---------------------------------------------------------------------------
# Schrieffer-Wolff coefficient ODEs
# ---------------------------------------------------------------------------

def sw_rk4_grid(omega_q, g_sigma, lam_sigma, theta, omega_c, dt_grid, substeps,
                y0):
    """Integrate the generator-coefficient ODEs over the parameter grid.

    State per qubit is (alpha, beta, gamma); equations (autonomous for
    frozen parameters, so the static fixed point is preserved exactly):

        alpha' = i w_c alpha + i g    - Theta gamma + w_q beta
        beta'  = i w_c beta  - w_q alpha
        gamma' = i w_c gamma + i lam  + Theta alpha

    Inputs have shape (n_qubits, T); returns (n_qubits, T, 3) complex with
    the state recorded at every grid node.  Parameters are linearly
    interpolated inside each grid interval.
    """
    n_q, n_t = omega_q.shape
    out = np.empty((n_q, n_t, 3), dtype=complex)
    y = np.array(y0, dtype=complex)          # (n_q, 3)
    out[:, 0, :] = y
    h = dt_grid / substeps

    def rhs(yv, wq, g, lam, th):
        a, b, c = yv[:, 0], yv[:, 1], yv[:, 2]
        da = 1j * omega_c * a + 1j * g - th * c + wq * b
        db = 1j * omega_c * b - wq * a
        dc = 1j * omega_c * c + 1j * lam + th * a
        return np.stack([da, db, dc], axis=1)

    for i in range(n_t - 1):
        for s in range(substeps):
            x0 = s / substeps
            xm = (s + 0.5) / substeps
            x1 = (s + 1) / substeps

            def park(x, arr, i=i):
                return arr[:, i] + (arr[:, i + 1] - arr[:, i]) * x

            p0 = (park(x0, omega_q), park(x0, g_sigma), park(x0, lam_sigma), park(x0, theta))
            pm = (park(xm, omega_q), park(xm, g_sigma), park(xm, lam_sigma), park(xm, theta))
            p1 = (park(x1, omega_q), park(x1, g_sigma), park(x1, lam_sigma), park(x1, theta))
            k1 = rhs(y, *p0)
            k2 = rhs(y + 0.5 * h * k1, *pm)
            k3 = rhs(y + 0.5 * h * k2, *pm)
            k4 = rhs(y + h * k3, *p1)
            y = y + (h / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
        out[:, i + 1, :] = y
    return out
