# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot-loop kernels: path-integral Monte Carlo sweeps, dense
Lindblad/Schrodinger RK4 propagation and the Schrieffer-Wolff coefficient
integrator.  Interfaces mirror ``_kernels_py`` exactly."""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp
from scipy.linalg.cython_blas cimport zgemm, zgemv

cnp.import_array()

BACKEND_NAME = "compiled"

ctypedef double complex zdouble


# ---------------------------------------------------------------------------
# Path-integral Monte Carlo sweeps
# ---------------------------------------------------------------------------

def sqa_run_point(signed char[:, ::1] spins, double[:, ::1] j_mat,
                  double[::1] fields, double h_over_p, double jperp,
                  double beta, double[:, :, ::1] u_metro,
                  double[:, ::1] u_cluster):
    """Metropolis sweeps at one schedule point, modifying ``spins`` in place."""
    cdef int n_slices = spins.shape[0]
    cdef int n_spins = spins.shape[1]
    cdef int sweeps = u_metro.shape[0]
    cdef int s, p, k, j, up, down
    cdef double local, de, acc
    with nogil:
        for s in range(sweeps):
            for p in range(n_slices):
                up = (p + 1) % n_slices
                down = (p - 1 + n_slices) % n_slices
                for k in range(n_spins):
                    local = fields[k]
                    for j in range(n_spins):
                        local += j_mat[k, j] * spins[p, j]
                    de = -2.0 * spins[p, k] * (
                        h_over_p * local - jperp * (spins[down, k] + spins[up, k]))
                    if de <= 0.0 or u_metro[s, p, k] < exp(-beta * de):
                        spins[p, k] = -spins[p, k]
            for k in range(n_spins):
                acc = 0.0
                for p in range(n_slices):
                    local = fields[k]
                    for j in range(n_spins):
                        local += j_mat[k, j] * spins[p, j]
                    acc += spins[p, k] * local
                de = -2.0 * h_over_p * acc
                if de <= 0.0 or u_cluster[s, k] < exp(-beta * de):
                    for p in range(n_slices):
                        spins[p, k] = -spins[p, k]


# ---------------------------------------------------------------------------
# Dense master-equation propagation
# ---------------------------------------------------------------------------

cdef void _zmm(int d, zdouble* a, zdouble* b, zdouble* c) noexcept nogil:
    # c = a @ b for d x d row-major arrays (BLAS sees transposes).
    cdef char no = b'N'
    cdef zdouble one = 1.0, zero = 0.0
    zgemm(&no, &no, &d, &d, &d, &one, b, &d, a, &d, &zero, c, &d)


cdef void _assemble_h(int d, int n_qubits, zdouble* hmat, double* hd_diag,
                      zdouble* ht, double* theta0, double* theta1,
                      double f, double h, double x) noexcept nogil:
    cdef int i, k, mask, hi
    cdef double th
    cdef zdouble ith
    for i in range(d * d):
        hmat[i] = h * ht[i]
    for i in range(d):
        hmat[i * d + i] = hmat[i * d + i] + f * hd_diag[i]
    for k in range(n_qubits):
        th = theta0[k] + (theta1[k] - theta0[k]) * x
        if th == 0.0:
            continue
        mask = 1 << k
        ith = 0.5j * th
        for i in range(d):
            if not (i & mask):
                hi = i | mask
                hmat[hi * d + i] = hmat[hi * d + i] + ith
                hmat[i * d + hi] = hmat[i * d + hi] - ith


cdef void _rhs(int d, zdouble* hmat, zdouble* rho, zdouble* kmat,
               zdouble* lops, int* lq, double* lrate, int n_ch,
               zdouble* out, zdouble* t1, zdouble* t2) noexcept nogil:
    cdef int i, j, c, mask, lo, hi
    cdef zdouble l00, l01, l10, l11
    cdef double rate
    _zmm(d, hmat, rho, t1)
    _zmm(d, rho, hmat, t2)
    for i in range(d * d):
        out[i] = -1j * (t1[i] - t2[i])
    _zmm(d, kmat, rho, t1)
    _zmm(d, rho, kmat, t2)
    for i in range(d * d):
        out[i] = out[i] - t1[i] - t2[i]
    for c in range(n_ch):
        mask = 1 << lq[c]
        rate = lrate[c]
        l00 = lops[4 * c + 0]
        l01 = lops[4 * c + 1]
        l10 = lops[4 * c + 2]
        l11 = lops[4 * c + 3]
        # t1 = L rho (acting on the row index of qubit lq[c])
        for i in range(d):
            if not (i & mask):
                hi = i | mask
                for j in range(d):
                    t1[i * d + j] = l00 * rho[i * d + j] + l01 * rho[hi * d + j]
                    t1[hi * d + j] = l10 * rho[i * d + j] + l11 * rho[hi * d + j]
        # out += rate * (L rho) L^dag  (column transform with conj(L))
        for j in range(d):
            if not (j & mask):
                hi = j | mask
                for i in range(d):
                    out[i * d + j] = out[i * d + j] + rate * (
                        t1[i * d + j] * l00.conjugate() + t1[i * d + hi] * l01.conjugate())
                    out[i * d + hi] = out[i * d + hi] + rate * (
                        t1[i * d + j] * l10.conjugate() + t1[i * d + hi] * l11.conjugate())


def lindblad_rk4_node(cnp.ndarray[zdouble, ndim=2] rho,
                      cnp.ndarray[double, ndim=1] hd_diag,
                      cnp.ndarray[zdouble, ndim=2] ht,
                      cnp.ndarray[double, ndim=1] theta0,
                      cnp.ndarray[double, ndim=1] theta1,
                      cnp.ndarray[zdouble, ndim=3] l_ops,
                      cnp.ndarray[int, ndim=1] l_qubits,
                      cnp.ndarray[double, ndim=1] l_rates,
                      cnp.ndarray[zdouble, ndim=2] kmat,
                      double f0, double f1, double h0, double h1,
                      double t_node, double dt, int steps, int n_qubits):
    cdef int d = rho.shape[0]
    cdef int n_ch = l_rates.shape[0]
    cdef cnp.ndarray[zdouble, ndim=1] work = np.empty(8 * d * d, dtype=complex)
    cdef zdouble* w = &work[0]
    cdef zdouble* hmat = w
    cdef zdouble* k1 = w + d * d
    cdef zdouble* k2 = w + 2 * d * d
    cdef zdouble* k3 = w + 3 * d * d
    cdef zdouble* k4 = w + 4 * d * d
    cdef zdouble* stage = w + 5 * d * d
    cdef zdouble* t1 = w + 6 * d * d
    cdef zdouble* t2 = w + 7 * d * d
    cdef zdouble* rp = &rho[0, 0]
    cdef zdouble* htp = &ht[0, 0]
    cdef zdouble* kp = &kmat[0, 0]
    cdef zdouble* lp = &l_ops[0, 0, 0] if n_ch else NULL
    cdef int* lqp = <int*> (&l_qubits[0]) if n_ch else NULL
    cdef double* lrp = &l_rates[0] if n_ch else NULL
    cdef double* hdp = &hd_diag[0]
    cdef double* th0 = &theta0[0]
    cdef double* th1 = &theta1[0]
    cdef double span = steps * dt
    cdef double x0, xm, x1, fm, hm
    cdef int s, i
    with nogil:
        for s in range(steps):
            x0 = (s * dt) / span
            xm = ((s + 0.5) * dt) / span
            x1 = ((s + 1.0) * dt) / span
            _assemble_h(d, n_qubits, hmat, hdp, htp, th0, th1,
                        f0 + (f1 - f0) * x0, h0 + (h1 - h0) * x0, x0)
            _rhs(d, hmat, rp, kp, lp, lqp, lrp, n_ch, k1, t1, t2)
            for i in range(d * d):
                stage[i] = rp[i] + 0.5 * dt * k1[i]
            fm = f0 + (f1 - f0) * xm
            hm = h0 + (h1 - h0) * xm
            _assemble_h(d, n_qubits, hmat, hdp, htp, th0, th1, fm, hm, xm)
            _rhs(d, hmat, stage, kp, lp, lqp, lrp, n_ch, k2, t1, t2)
            for i in range(d * d):
                stage[i] = rp[i] + 0.5 * dt * k2[i]
            _rhs(d, hmat, stage, kp, lp, lqp, lrp, n_ch, k3, t1, t2)
            for i in range(d * d):
                stage[i] = rp[i] + dt * k3[i]
            _assemble_h(d, n_qubits, hmat, hdp, htp, th0, th1,
                        f0 + (f1 - f0) * x1, h0 + (h1 - h0) * x1, x1)
            _rhs(d, hmat, stage, kp, lp, lqp, lrp, n_ch, k4, t1, t2)
            for i in range(d * d):
                rp[i] = rp[i] + (dt / 6.0) * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i])


def schrodinger_rk4_node(cnp.ndarray[zdouble, ndim=1] psi,
                         cnp.ndarray[double, ndim=1] hd_diag,
                         cnp.ndarray[zdouble, ndim=2] ht,
                         cnp.ndarray[double, ndim=1] theta0,
                         cnp.ndarray[double, ndim=1] theta1,
                         double f0, double f1, double h0, double h1,
                         double t_node, double dt, int steps, int n_qubits):
    cdef int d = psi.shape[0]
    cdef cnp.ndarray[zdouble, ndim=1] work = np.empty(d * d + 6 * d, dtype=complex)
    cdef zdouble* hmat = &work[0]
    cdef zdouble* k1 = &work[d * d]
    cdef zdouble* k2 = &work[d * d + d]
    cdef zdouble* k3 = &work[d * d + 2 * d]
    cdef zdouble* k4 = &work[d * d + 3 * d]
    cdef zdouble* stage = &work[d * d + 4 * d]
    cdef zdouble* pp = &psi[0]
    cdef zdouble* htp = &ht[0, 0]
    cdef double* hdp = &hd_diag[0]
    cdef double* th0 = &theta0[0]
    cdef double* th1 = &theta1[0]
    cdef double span = steps * dt
    cdef double x0, xm, x1
    cdef zdouble mi = -1j, zero = 0.0
    cdef char tr = b'T'
    cdef int one = 1
    cdef int s, i
    with nogil:
        for s in range(steps):
            x0 = (s * dt) / span
            xm = ((s + 0.5) * dt) / span
            x1 = ((s + 1.0) * dt) / span
            _assemble_h(d, n_qubits, hmat, hdp, htp, th0, th1,
                        f0 + (f1 - f0) * x0, h0 + (h1 - h0) * x0, x0)
            zgemv(&tr, &d, &d, &mi, hmat, &d, pp, &one, &zero, k1, &one)
            for i in range(d):
                stage[i] = pp[i] + 0.5 * dt * k1[i]
            _assemble_h(d, n_qubits, hmat, hdp, htp, th0, th1,
                        f0 + (f1 - f0) * xm, h0 + (h1 - h0) * xm, xm)
            zgemv(&tr, &d, &d, &mi, hmat, &d, stage, &one, &zero, k2, &one)
            for i in range(d):
                stage[i] = pp[i] + 0.5 * dt * k2[i]
            zgemv(&tr, &d, &d, &mi, hmat, &d, stage, &one, &zero, k3, &one)
            for i in range(d):
                stage[i] = pp[i] + dt * k3[i]
            _assemble_h(d, n_qubits, hmat, hdp, htp, th0, th1,
                        f0 + (f1 - f0) * x1, h0 + (h1 - h0) * x1, x1)
            zgemv(&tr, &d, &d, &mi, hmat, &d, stage, &one, &zero, k4, &one)
            for i in range(d):
                pp[i] = pp[i] + (dt / 6.0) * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i])


# ---------------------------------------------------------------------------
# Split-step propagation: driver phases exact in the z basis, target phases
# exact in the x basis (Walsh-Hadamard transform), per-qubit channel
# exponentials exact; symmetric (Strang) composition.
# ---------------------------------------------------------------------------

from libc.math cimport cos, sin

cdef void _fwht_rows(int d, zdouble* m) noexcept nogil:
    cdef int h, r, i0, j
    cdef zdouble x, y
    cdef zdouble* row
    for r in range(d):
        row = m + r * d
        h = 1
        while h < d:
            i0 = 0
            while i0 < d:
                for j in range(i0, i0 + h):
                    x = row[j]
                    y = row[j + h]
                    row[j] = x + y
                    row[j + h] = x - y
                i0 += 2 * h
            h <<= 1


cdef void _fwht_cols(int d, zdouble* m) noexcept nogil:
    cdef int h, c, i0, j
    cdef zdouble x, y
    for c in range(d):
        h = 1
        while h < d:
            i0 = 0
            while i0 < d:
                for j in range(i0, i0 + h):
                    x = m[j * d + c]
                    y = m[(j + h) * d + c]
                    m[j * d + c] = x + y
                    m[(j + h) * d + c] = x - y
                i0 += 2 * h
            h <<= 1


cdef void _fwht_vec(int d, zdouble* v) noexcept nogil:
    cdef int h = 1, i0, j
    cdef zdouble x, y
    while h < d:
        i0 = 0
        while i0 < d:
            for j in range(i0, i0 + h):
                x = v[j]
                y = v[j + h]
                v[j] = x + y
                v[j + h] = x - y
            i0 += 2 * h
        h <<= 1


cdef void _pair_phase(int d, zdouble* m, zdouble* z) noexcept nogil:
    # m[a, b] *= z[a] * conj(z[b])
    cdef int a, b
    cdef zdouble za
    for a in range(d):
        za = z[a]
        for b in range(d):
            m[a * d + b] = m[a * d + b] * (za * z[b].conjugate())


def lindblad_split_node(cnp.ndarray[zdouble, ndim=2] rho,
                        cnp.ndarray[double, ndim=1] hd_diag,
                        cnp.ndarray[double, ndim=1] ex_diag,
                        cnp.ndarray[zdouble, ndim=3] superops,
                        double f0, double f1, double h0, double h1,
                        double dt, int steps, int n_qubits):
    """Strang-split master-equation propagation over one node interval.

    Per step: A(dt/2) B(dt/2) D(dt) B(dt/2) A(dt/2), with A the driver
    phases, B the target phases and D the per-qubit local channel maps
    (4x4 superoperators, exact for the node's step size)."""
    cdef int d = rho.shape[0]
    cdef cnp.ndarray[zdouble, ndim=1] work = np.empty(4 * d + 16, dtype=complex)
    cdef zdouble* za = &work[0]
    cdef zdouble* zb = &work[d]
    cdef zdouble* ua = &work[2 * d]
    cdef zdouble* ub = &work[3 * d]
    cdef zdouble* vloc = &work[4 * d]
    cdef zdouble* rp = &rho[0, 0]
    cdef zdouble* sp = &superops[0, 0, 0] if n_qubits else NULL
    cdef double* hd = &hd_diag[0]
    cdef double* ex = &ex_diag[0]
    cdef double fmid0 = f0 + (f1 - f0) * (0.5 / steps)
    cdef double hmid0 = h0 + (h1 - h0) * (0.5 / steps)
    cdef double dfa = (f1 - f0) / steps
    cdef double dhb = (h1 - h0) / steps
    cdef double ph
    cdef int s, a, b, k, q, i, j, mask, a1, b1
    cdef zdouble v0, v1, v2, v3
    cdef zdouble* sq
    with nogil:
        for a in range(d):
            ph = -0.5 * dt * fmid0 * hd[a]
            za[a] = cos(ph) + 1j * sin(ph)
            ph = -0.5 * dt * dfa * hd[a]
            ua[a] = cos(ph) + 1j * sin(ph)
            ph = -0.5 * dt * hmid0 * ex[a]
            zb[a] = cos(ph) + 1j * sin(ph)
            ph = -0.5 * dt * dhb * ex[a]
            ub[a] = cos(ph) + 1j * sin(ph)
        for s in range(steps):
            if s > 0:
                for a in range(d):
                    za[a] = za[a] * ua[a]
                    zb[a] = zb[a] * ub[a]
            _pair_phase(d, rp, za)
            _fwht_rows(d, rp)
            _fwht_cols(d, rp)
            _pair_phase(d, rp, zb)
            # channel maps act in the z basis: transform back first
            _fwht_rows(d, rp)
            _fwht_cols(d, rp)
            for i in range(d * d):
                rp[i] = rp[i] / (d * d)
            for q in range(n_qubits):
                sq = sp + 16 * q
                mask = 1 << q
                for a in range(d):
                    if a & mask:
                        continue
                    a1 = a | mask
                    for b in range(d):
                        if b & mask:
                            continue
                        b1 = b | mask
                        v0 = rp[a * d + b]
                        v1 = rp[a * d + b1]
                        v2 = rp[a1 * d + b]
                        v3 = rp[a1 * d + b1]
                        rp[a * d + b] = sq[0] * v0 + sq[1] * v1 + sq[2] * v2 + sq[3] * v3
                        rp[a * d + b1] = sq[4] * v0 + sq[5] * v1 + sq[6] * v2 + sq[7] * v3
                        rp[a1 * d + b] = sq[8] * v0 + sq[9] * v1 + sq[10] * v2 + sq[11] * v3
                        rp[a1 * d + b1] = sq[12] * v0 + sq[13] * v1 + sq[14] * v2 + sq[15] * v3
            _fwht_rows(d, rp)
            _fwht_cols(d, rp)
            _pair_phase(d, rp, zb)
            _fwht_rows(d, rp)
            _fwht_cols(d, rp)
            for i in range(d * d):
                rp[i] = rp[i] / (d * d)
            _pair_phase(d, rp, za)


def schrodinger_split_node(cnp.ndarray[zdouble, ndim=1] psi,
                           cnp.ndarray[double, ndim=1] hd_diag,
                           cnp.ndarray[double, ndim=1] ex_diag,
                           cnp.ndarray[double, ndim=1] theta0,
                           cnp.ndarray[double, ndim=1] theta1,
                           double f0, double f1, double h0, double h1,
                           double dt, int steps, int n_qubits):
    """Pure-state split-step propagation (noiseless registers)."""
    cdef int d = psi.shape[0]
    cdef cnp.ndarray[zdouble, ndim=1] work = np.empty(4 * d, dtype=complex)
    cdef zdouble* za = &work[0]
    cdef zdouble* zb = &work[d]
    cdef zdouble* ua = &work[2 * d]
    cdef zdouble* ub = &work[3 * d]
    cdef zdouble* pp = &psi[0]
    cdef double* hd = &hd_diag[0]
    cdef double* ex = &ex_diag[0]
    cdef double* th0 = &theta0[0]
    cdef double* th1 = &theta1[0]
    cdef double fmid0 = f0 + (f1 - f0) * (0.5 / steps)
    cdef double hmid0 = h0 + (h1 - h0) * (0.5 / steps)
    cdef double dfa = (f1 - f0) / steps
    cdef double dhb = (h1 - h0) / steps
    cdef double ph, th, cth, sth, x
    cdef int s, a, k, mask, a1
    cdef zdouble y0, y1
    with nogil:
        for a in range(d):
            ph = -0.5 * dt * fmid0 * hd[a]
            za[a] = cos(ph) + 1j * sin(ph)
            ph = -0.5 * dt * dfa * hd[a]
            ua[a] = cos(ph) + 1j * sin(ph)
            ph = -0.5 * dt * hmid0 * ex[a]
            zb[a] = cos(ph) + 1j * sin(ph)
            ph = -0.5 * dt * dhb * ex[a]
            ub[a] = cos(ph) + 1j * sin(ph)
        for s in range(steps):
            if s > 0:
                for a in range(d):
                    za[a] = za[a] * ua[a]
                    zb[a] = zb[a] * ub[a]
            x = (s + 0.5) / steps
            for a in range(d):
                pp[a] = pp[a] * za[a]
            _fwht_vec(d, pp)
            for a in range(d):
                pp[a] = pp[a] * zb[a]
            _fwht_vec(d, pp)
            for a in range(d):
                pp[a] = pp[a] / d
            # per-qubit sigma_y rotations (diabatic drive), full step
            for k in range(n_qubits):
                th = th0[k] + (th1[k] - th0[k]) * x
                if th == 0.0:
                    continue
                cth = cos(0.5 * th * dt)
                sth = sin(0.5 * th * dt)
                mask = 1 << k
                for a in range(d):
                    if not (a & mask):
                        a1 = a | mask
                        y0 = pp[a]
                        y1 = pp[a1]
                        pp[a] = cth * y0 - sth * y1
                        pp[a1] = sth * y0 + cth * y1
            _fwht_vec(d, pp)
            for a in range(d):
                pp[a] = pp[a] * zb[a]
            _fwht_vec(d, pp)
            for a in range(d):
                pp[a] = (pp[a] / d) * za[a]


# ---------------------------------------------------------------------------
# Schrieffer-Wolff coefficient ODEs
# ---------------------------------------------------------------------------

def sw_rk4_grid(double[:, ::1] omega_q, double[:, ::1] g_sigma,
                double[:, ::1] lam_sigma, double[:, ::1] theta,
                double omega_c, double dt_grid, int substeps,
                cnp.ndarray[zdouble, ndim=2] y0):
    cdef int n_q = omega_q.shape[0]
    cdef int n_t = omega_q.shape[1]
    cdef cnp.ndarray[zdouble, ndim=3] out = np.empty((n_q, n_t, 3), dtype=complex)
    cdef double h = dt_grid / substeps
    cdef zdouble a, b, c, ka1, kb1, kc1, ka2, kb2, kc2
    cdef zdouble ka3, kb3, kc3, ka4, kb4, kc4, sa, sb, sc
    cdef double wq0, g0v, l0v, t0v, dwq, dg, dl, dth
    cdef double x0, xm, x1, wq, g, lam, th
    cdef int q, i, s
    with nogil:
        for q in range(n_q):
            a = y0[q, 0]
            b = y0[q, 1]
            c = y0[q, 2]
            out[q, 0, 0] = a
            out[q, 0, 1] = b
            out[q, 0, 2] = c
            for i in range(n_t - 1):
                wq0 = omega_q[q, i]
                dwq = omega_q[q, i + 1] - wq0
                g0v = g_sigma[q, i]
                dg = g_sigma[q, i + 1] - g0v
                l0v = lam_sigma[q, i]
                dl = lam_sigma[q, i + 1] - l0v
                t0v = theta[q, i]
                dth = theta[q, i + 1] - t0v
                for s in range(substeps):
                    x0 = s / <double> substeps
                    xm = (s + 0.5) / <double> substeps
                    x1 = (s + 1.0) / <double> substeps
                    wq = wq0 + dwq * x0
                    g = g0v + dg * x0
                    lam = l0v + dl * x0
                    th = t0v + dth * x0
                    ka1 = 1j * omega_c * a + 1j * g - th * c + wq * b
                    kb1 = 1j * omega_c * b - wq * a
                    kc1 = 1j * omega_c * c + 1j * lam + th * a
                    wq = wq0 + dwq * xm
                    g = g0v + dg * xm
                    lam = l0v + dl * xm
                    th = t0v + dth * xm
                    sa = a + 0.5 * h * ka1
                    sb = b + 0.5 * h * kb1
                    sc = c + 0.5 * h * kc1
                    ka2 = 1j * omega_c * sa + 1j * g - th * sc + wq * sb
                    kb2 = 1j * omega_c * sb - wq * sa
                    kc2 = 1j * omega_c * sc + 1j * lam + th * sa
                    sa = a + 0.5 * h * ka2
                    sb = b + 0.5 * h * kb2
                    sc = c + 0.5 * h * kc2
                    ka3 = 1j * omega_c * sa + 1j * g - th * sc + wq * sb
                    kb3 = 1j * omega_c * sb - wq * sa
                    kc3 = 1j * omega_c * sc + 1j * lam + th * sa
                    wq = wq0 + dwq * x1
                    g = g0v + dg * x1
                    lam = l0v + dl * x1
                    th = t0v + dth * x1
                    sa = a + h * ka3
                    sb = b + h * kb3
                    sc = c + h * kc3
                    ka4 = 1j * omega_c * sa + 1j * g - th * sc + wq * sb
                    kb4 = 1j * omega_c * sb - wq * sa
                    kc4 = 1j * omega_c * sc + 1j * lam + th * sa
                    a = a + (h / 6.0) * (ka1 + 2.0 * (ka2 + ka3) + ka4)
                    b = b + (h / 6.0) * (kb1 + 2.0 * (kb2 + kb3) + kb4)
                    c = c + (h / 6.0) * (kc1 + 2.0 * (kc2 + kc3) + kc4)
                out[q, i + 1, 0] = a
                out[q, i + 1, 1] = b
                out[q, i + 1, 2] = c
    return out
