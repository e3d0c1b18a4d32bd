import math

import numpy as np
import pytest

from annealtrack.device import (BiasTrajectory, NoiseParams, QubitParams,
                                ResonatorParams, build_device_trajectory,
                                coupling_discrepancy, device_from_json,
                                diabatic_theta, dipole_couplings,
                                ising_couplings, lindblad_rates,
                                qubit_frequency, qubit_frequency_derivative,
                                single_qubit_matrix, solve_sw_ode,
                                spin_mixing_angle, spin_mixing_angle_derivative,
                                sw_fixed_point, theta_profile,
                                trajectory_to_csv)
from annealtrack.errors import ConfigurationError, InputError

TWO_PI = 2 * math.pi


def reference_4x4(eps, q):
    """Independent dense construction of the single-qubit model (oracle)."""
    g, a_s, a_as = q.gamma, q.alpha_s, q.alpha_as
    return np.array([
        [eps / 2 + a_s / 2, a_as / 2, g, 0],
        [a_as / 2, eps / 2 - a_s / 2, 0, g],
        [g, 0, -eps / 2 + a_s / 2, -a_as / 2],
        [0, g, -a_as / 2, -eps / 2 - a_s / 2],
    ])


class TestQubitFrequency:
    def test_matches_dense_diagonalization(self):
        q = QubitParams()
        for eps in [0.0, 0.3 * q.gamma, 5.0 * q.gamma]:
            ref = np.linalg.eigvalsh(reference_4x4(eps, q))
            expected = ref[1] - ref[0]
            got = qubit_frequency(eps, q)
            assert abs(got - expected) / expected < 1e-10

    def test_even_in_eps(self):
        q = QubitParams()
        eps = np.linspace(-8 * q.gamma, 8 * q.gamma, 41)
        w = qubit_frequency(eps, q)
        assert np.allclose(w, w[::-1], rtol=1e-12)

    def test_large_bias_limit(self):
        q = QubitParams()
        w_inf = qubit_frequency(500 * q.gamma, q)
        # exact limit: the local-field splitting
        assert abs(w_inf - math.hypot(q.alpha_s, q.alpha_as)) / w_inf < 1e-4
        # which is the bare spin splitting up to the small admixture factor
        assert abs(w_inf - q.alpha_s) / q.alpha_s < 0.05

    def test_positive(self):
        q = QubitParams()
        eps = np.linspace(-20 * q.gamma, 20 * q.gamma, 101)
        assert np.all(qubit_frequency(eps, q) > 0)


class TestDipoleCouplings:
    def test_longitudinal_zero_at_zero_bias(self):
        _, lam = dipole_couplings(0.0, QubitParams())
        assert lam == 0.0

    def test_transverse_max_at_zero_bias(self):
        q = QubitParams()
        eps = np.linspace(-10 * q.gamma, 10 * q.gamma, 201)
        g, _ = dipole_couplings(eps, q)
        assert eps[np.argmax(np.abs(g))] == 0.0

    def test_transverse_monotone_in_abs_bias(self):
        q = QubitParams()
        eps = np.linspace(0.0, 10 * q.gamma, 200)
        g, _ = dipole_couplings(eps, q)
        assert np.all(np.diff(np.abs(g)) <= 1e-18)

    def test_longitudinal_vanishes_at_large_bias(self):
        q = QubitParams()
        eps = np.linspace(0.0, 100 * q.gamma, 800)
        g0, lam = dipole_couplings(eps, q)
        assert abs(lam[-1]) < 0.05 * np.max(np.abs(lam))
        # interior extremum
        k = int(np.argmax(np.abs(lam)))
        assert 0 < k < len(eps) - 1

    def test_zero_bare_coupling(self):
        q = QubitParams(g0=0.0)
        assert dipole_couplings(0.5 * q.gamma, q) == (0.0, 0.0)

    def test_proportional_to_g0(self):
        q1 = QubitParams(g0=TWO_PI * 50e6)
        q2 = QubitParams(g0=TWO_PI * 100e6)
        g1, l1 = dipole_couplings(0.7 * q1.gamma, q1)
        g2, l2 = dipole_couplings(0.7 * q1.gamma, q2)
        assert abs(g2 - 2 * g1) < 1e-9 * abs(g1)
        assert abs(l2 - 2 * l1) < 1e-9 * abs(l1)


class TestFrequencyDerivative:
    def test_sweet_spot_is_exact_zero(self):
        assert qubit_frequency_derivative(0.0, QubitParams()) == 0.0

    def test_matches_finite_difference(self):
        q = QubitParams()
        for eps in [0.5 * q.gamma, 2.0 * q.gamma]:
            d = qubit_frequency_derivative(eps, q)
            h = 1e-6 * q.gamma
            fd = (qubit_frequency(eps + h, q) - qubit_frequency(eps - h, q)) / (2 * h)
            assert abs(d - fd) < 1e-5 * max(abs(fd), 1e-12)


class TestDiabaticTheta:
    def test_zero_for_frozen_bias(self):
        q = QubitParams()
        t = np.linspace(0, 1e-6, 101)
        traj = BiasTrajectory(t=t, eps=np.full((1, t.size), 3.0 * q.gamma))
        theta = theta_profile(traj, q)
        assert np.all(theta == 0.0)
        assert diabatic_theta(traj, q, t[50]) == 0.0

    def test_linear_in_sweep_rate(self):
        q = QubitParams()
        t_f = 1e-6
        t1 = np.linspace(0, t_f, 201)
        eps_path = 5 * q.gamma * (1 - t1 / t_f)
        slow = BiasTrajectory(t=t1, eps=eps_path[None, :])
        fast = BiasTrajectory(t=t1 / 2, eps=eps_path[None, :])
        th_slow = theta_profile(slow, q)
        th_fast = theta_profile(fast, q)
        assert np.allclose(th_fast, 2.0 * th_slow, rtol=1e-9, atol=0.0)

    def test_peak_at_anticrossing_and_matches_closed_form(self):
        q = QubitParams()
        t_f = 1e-6
        t = np.linspace(0, t_f, 4001)
        eps = 6 * q.gamma * (1 - 2 * t / t_f)   # crosses eps = 0 mid-sweep
        traj = BiasTrajectory(t=t, eps=eps[None, :])
        theta = theta_profile(traj, q)[0]
        k = int(np.argmax(np.abs(theta)))
        assert abs(eps[k]) <= abs(eps[1] - eps[0])
        assert np.all(np.isfinite(theta))
        # finite differences of the mixing angle reproduce the closed form
        dchi = spin_mixing_angle_derivative(eps, q)
        h = 1e-7 * q.gamma
        fd = (spin_mixing_angle(eps + h, q) - spin_mixing_angle(eps - h, q)) / (2 * h)
        assert np.max(np.abs(dchi - fd)) < 1e-6 * np.max(np.abs(dchi))


class TestSwOde:
    def brief_tables(self, q, r, n_t=64, window=50e-9, eps_value=None):
        eps = np.full((1, n_t), eps_value if eps_value is not None else 3 * q.gamma)
        t = np.linspace(0, window, n_t)
        omega = qubit_frequency(eps[0], q)[None, :]
        g, lam = dipole_couplings(eps[0], q)
        return t, omega, g[None, :], lam[None, :], np.zeros((1, n_t))

    def test_fixed_point_is_stationary(self):
        q, r = QubitParams(), ResonatorParams()
        t, w, g, lam, th = self.brief_tables(q, r)
        sw = solve_sw_ode(w, g, lam, th, t, r)
        a0, b0, c0 = sw_fixed_point(w[:, 0], g[:, 0], lam[:, 0], r)
        scale = abs(a0[0])
        assert np.max(np.abs(sw.alpha - a0[0])) / scale < 1e-8
        assert np.max(np.abs(sw.beta - b0[0])) / scale < 1e-8
        assert np.max(np.abs(sw.gamma - c0[0])) / scale < 1e-8

    def test_zero_drive_stays_zero(self):
        q = QubitParams(g0=0.0)
        r = ResonatorParams()
        t, w, g, lam, th = self.brief_tables(q, r)
        sw = solve_sw_ode(w, g, lam, th, t, r, init="zero")
        assert np.max(np.abs(sw.alpha)) == 0.0
        assert np.max(np.abs(sw.beta)) == 0.0
        assert np.max(np.abs(sw.gamma)) == 0.0

    def test_rk4_order_via_matrix_exponential(self):
        # constant parameters from a zero start: compare against the exact
        # linear-system solution, halving the internal step
        q, r = QubitParams(), ResonatorParams()
        n_t = 8
        window = 2e-10
        t = np.linspace(0, window, n_t)
        eps = np.full((1, n_t), 3 * q.gamma)
        w = qubit_frequency(eps[0], q)[None, :]
        g, lam = dipole_couplings(eps[0], q)
        g, lam = g[None, :], lam[None, :]
        th = np.zeros((1, n_t))
        wq, gv, lv = w[0, 0], g[0, 0], lam[0, 0]
        mat = np.array([[1j * r.omega_c, wq, 0.0],
                        [-wq, 1j * r.omega_c, 0.0],
                        [0.0, 0.0, 1j * r.omega_c]], dtype=complex)
        inhom = np.array([1j * gv, 0.0, 1j * lv], dtype=complex)
        from scipy.linalg import expm
        y_exact = np.zeros(3, dtype=complex)
        # integrate exactly: y(t) = int_0^t e^{M(t-s)} b ds
        m_inv_b = np.linalg.solve(mat, inhom)
        y_exact = expm(mat * window) @ m_inv_b - m_inv_b

        errs = []
        for factor in (1, 2):
            base = max(1, int(math.ceil((t[1] - t[0]) * r.omega_c / 0.1)))
            sw = solve_sw_ode(w, g, lam, th, t, r, substeps=base * factor,
                              init="zero")
            y_num = np.array([sw.alpha[0, -1], sw.beta[0, -1], sw.gamma[0, -1]])
            errs.append(np.linalg.norm(y_num - y_exact))
        ratio = errs[0] / errs[1]
        assert 10.0 < ratio < 25.0     # 4th order: halving dt gives ~16x

    def test_substep_guard(self):
        q, r = QubitParams(), ResonatorParams()
        t, w, g, lam, th = self.brief_tables(q, r, n_t=4, window=1e-8)
        with pytest.raises(ConfigurationError):
            solve_sw_ode(w, g, lam, th, t, r, substeps=1)

    def test_transverse_weight_is_g_over_delta(self):
        q, r = QubitParams(), ResonatorParams()
        t, w, g, lam, th = self.brief_tables(q, r, eps_value=0.0)
        sw = solve_sw_ode(w, g, lam, th, t, r)
        delta = w[0, 0] - r.omega_c
        a_perp = sw.transverse_weight()[0, -1]
        assert abs(a_perp - g[0, 0] / delta) < 1e-6 * abs(g[0, 0] / delta)


class TestIsingCouplings:
    def static_sw(self, qubits, eps, r):
        n = len(qubits)
        n_t = 16
        t = np.linspace(0, 10e-9, n_t)
        w = np.stack([np.full(n_t, qubit_frequency(e, q)) for q, e in zip(qubits, eps)])
        g = np.empty((n, n_t))
        lam = np.empty((n, n_t))
        for k, (q, e) in enumerate(zip(qubits, eps)):
            gv, lv = dipole_couplings(e, q)
            g[k], lam[k] = gv, lv
        sw = solve_sw_ode(w, g, lam, np.zeros((n, n_t)), t, r)
        return sw, w, g

    def test_static_two_qubit_matches_dispersive_formula(self):
        r = ResonatorParams()
        qubits = [QubitParams(), QubitParams(alpha_s=TWO_PI * 5.6e9)]
        sw, w, g = self.static_sw(qubits, [0.0, 0.0], r)
        j = ising_couplings(sw, g, index=-1)
        d1 = w[0, 0] - r.omega_c
        d2 = w[1, 0] - r.omega_c
        expected = 0.5 * g[0, 0] * g[1, 0] * (1 / d1 + 1 / d2)
        assert abs(j[0, 1] - expected) / abs(expected) < 1e-6
        assert j[0, 1] == j[1, 0] and j[0, 0] == 0.0

    def test_against_truncated_resonator_diagonalization(self):
        # two identical qubits + resonator, dispersive splitting oracle
        wq = TWO_PI * 50.5e9
        wc = TWO_PI * 50.0e9
        g = TWO_PI * 5e6
        n_ph = 5
        sx = np.array([[0, 1], [1, 0]], dtype=complex)
        sz = np.diag([1.0, -1.0]).astype(complex)
        i2 = np.eye(2, dtype=complex)
        a = np.diag(np.sqrt(np.arange(1, n_ph)), 1).astype(complex)
        iph = np.eye(n_ph, dtype=complex)
        num = a.conj().T @ a

        def k3(x, y, z):
            return np.kron(np.kron(x, y), z)

        h = (wq / 2 * (k3(sz, i2, iph) + k3(i2, sz, iph)) + wc * k3(i2, i2, num)
             + g * (k3(sx, i2, a + a.conj().T) + k3(i2, sx, a + a.conj().T)))
        evals, evecs = np.linalg.eigh(h)

        def idx(b1, b2, ph):
            return (b1 * 2 + b2) * n_ph + ph

        v_eg = np.zeros(4 * n_ph)
        v_eg[idx(0, 1, 0)] = 1.0
        v_ge = np.zeros(4 * n_ph)
        v_ge[idx(1, 0, 0)] = 1.0
        plus = (v_eg + v_ge) / math.sqrt(2)
        minus = (v_eg - v_ge) / math.sqrt(2)
        e_plus = evals[np.argmax((evecs.T @ plus) ** 2)]
        e_minus = evals[np.argmax((evecs.T @ minus) ** 2)]
        j_oracle = (e_plus - e_minus) / 2
        j_formula = g * g / (wq - wc)
        assert abs(j_oracle - j_formula) / abs(j_formula) < 0.02

    def test_zero_coupling_row(self):
        r = ResonatorParams()
        qubits = [QubitParams(), QubitParams(g0=0.0), QubitParams()]
        sw, w, g = self.static_sw(qubits, [0.0, 0.0, 0.0], r)
        j = ising_couplings(sw, g, index=0)
        assert np.all(j[1, :] == 0.0) and np.all(j[:, 1] == 0.0)
        assert j[0, 2] != 0.0

    def test_symmetric_under_relabeling(self):
        r = ResonatorParams()
        qubits = [QubitParams(), QubitParams()]
        sw, w, g = self.static_sw(qubits, [0.0, 0.0], r)
        j = ising_couplings(sw, g)
        assert np.allclose(j, np.transpose(j, (0, 2, 1)))


class TestLindbladRates:
    def test_all_zero_when_quiet(self):
        q = QubitParams()
        r = ResonatorParams(kappa=0.0)
        noise = NoiseParams(charge_noise=0.0, relaxation_scale=0.0)
        n_t = 16
        t = np.linspace(0, 10e-9, n_t)
        w = np.full((1, n_t), qubit_frequency(0.0, q))
        g, lam = dipole_couplings(0.0, q)
        sw = solve_sw_ode(w, np.full((1, n_t), g), np.full((1, n_t), lam),
                          np.zeros((1, n_t)), t, r)
        gr, gd = lindblad_rates(sw, noise, r, w, np.zeros((1, n_t)))
        assert np.all(gr == 0.0) and np.all(gd == 0.0)

    def test_purcell_rate_matches_g_over_delta(self):
        q, r = QubitParams(), ResonatorParams()
        noise = NoiseParams(charge_noise=0.0, relaxation_scale=0.0)
        n_t = 16
        t = np.linspace(0, 10e-9, n_t)
        w = np.full((1, n_t), qubit_frequency(0.0, q))
        g, lam = dipole_couplings(0.0, q)
        sw = solve_sw_ode(w, np.full((1, n_t), g), np.full((1, n_t), lam),
                          np.zeros((1, n_t)), t, r)
        gr, _ = lindblad_rates(sw, noise, r, w, np.zeros((1, n_t)))
        delta = w[0, 0] - r.omega_c
        expected = r.kappa * (g / delta) ** 2
        assert abs(gr[0, -1] - expected) / expected < 0.05

    def test_sweet_spot_dephasing_vanishes(self):
        q, r = QubitParams(), ResonatorParams(kappa=0.0)
        noise = NoiseParams(charge_noise=1e9, relaxation_scale=0.0)
        n_t = 8
        t = np.linspace(0, 5e-9, n_t)
        w = np.full((1, n_t), qubit_frequency(0.0, q))
        g, lam = dipole_couplings(0.0, q)
        sw = solve_sw_ode(w, np.full((1, n_t), g), np.full((1, n_t), lam),
                          np.zeros((1, n_t)), t, r)
        dw = np.full((1, n_t), qubit_frequency_derivative(0.0, q))
        _, gd = lindblad_rates(sw, noise, r, w, dw)
        assert np.all(np.abs(gd) < 1e-20)


class TestDeviceTrajectory:
    def build(self, n_qubits=2, t_f=200e-9, n_points=48):
        q = QubitParams()
        bias = BiasTrajectory.cosine_ramp(n_qubits, t_f, eps_start=8 * q.gamma,
                                          n_points=n_points)
        return build_device_trajectory(q, ResonatorParams(), NoiseParams(), bias)

    def test_symmetry_and_nonnegativity(self):
        traj = self.build()
        assert np.allclose(traj.j_matrix, np.transpose(traj.j_matrix, (0, 2, 1)))
        assert np.all(traj.gamma_relax >= 0.0)
        assert np.all(traj.gamma_deph >= 0.0)
        for m in traj.j_matrix:
            assert np.all(np.diag(m) == 0.0)

    def test_coupling_discrepancy_bounds(self):
        traj = self.build()
        same = coupling_discrepancy(traj, traj.j_matrix[-1])
        assert same < 1e-12
        anti = coupling_discrepancy(traj, -traj.j_matrix[-1])
        assert anti > 1.0

    def test_csv_export(self, tmp_path):
        traj = self.build(n_qubits=1, n_points=16)
        path = tmp_path / "traj.csv"
        trajectory_to_csv(traj, str(path))
        lines = path.read_text().strip().splitlines()
        assert lines[0].split(",")[:2] == ["t", "omega_q_0"]
        assert len(lines) == 17


class TestDeviceJson:
    def test_parse(self):
        text = """
        {"qubits": [{"gamma": 6.0e10, "alpha_s": 3.5e10, "alpha_as": 7e9, "g0": 3e8}],
         "resonator": {"omega_c": 3.1e10, "kappa": 6e6},
         "noise": {"charge_noise": 1e9, "relaxation_scale": 50.0},
         "grid": {"t_f": 1e-4, "dt": 1e-7}}
        """
        qubits, r, noise, (t_f, dt) = device_from_json(text)
        assert len(qubits) == 1 and r.kappa == 6e6
        assert noise.relaxation_scale == 50.0 and t_f == 1e-4

    def test_bad_json(self):
        with pytest.raises(InputError):
            device_from_json("{not json")
