import math

import numpy as np
import pytest

from annealtrack.errors import InputError
from annealtrack.timing import (RuntimeEstimate, TimingModel, histogram_to_csv,
                                per_shot_time, runtime_histogram, total_runtime)


class TestPerShot:
    def test_passive_reset_arithmetic(self):
        m = TimingModel(reset_mode="passive", t_reset_passive=5e-3,
                        t_anneal=50e-6, parallel_readout=True, n_qubits=10)
        assert per_shot_time(m).total == pytest.approx(5.051e-3, rel=1e-12)

    def test_active_reset_arithmetic(self):
        m = TimingModel(reset_mode="active", t_anneal=50e-6,
                        parallel_readout=True, n_qubits=10)
        # 1 us (reset readout) + 0.1 us (gate) + 50 us + 1 us
        assert per_shot_time(m).total == pytest.approx(52.1e-6, rel=1e-12)

    def test_serial_readout_multiplies(self):
        m = TimingModel(reset_mode="active", t_anneal=50e-6,
                        parallel_readout=False, n_qubits=10)
        assert per_shot_time(m).readout == pytest.approx(10e-6)
        assert per_shot_time(m).reset == pytest.approx(10e-6 + 100e-9)


class TestTotalRuntime:
    def test_active_thousand_shots_near_50ms(self):
        m = TimingModel(reset_mode="active", t_anneal=50e-6,
                        parallel_readout=True, n_qubits=10, shots=1000)
        est = total_runtime(m)
        assert 50e-3 <= est.total <= 60e-3
        assert est.dominant_phase == "anneal"
        assert est.shares["anneal"] > 0.9

    def test_passive_thousand_shots_near_5s(self):
        m = TimingModel(reset_mode="passive", t_reset_passive=5e-3,
                        t_anneal=50e-6, parallel_readout=True, n_qubits=10,
                        shots=1000)
        est = total_runtime(m)
        assert 5.0 <= est.total <= 5.2
        assert est.dominant_phase == "reset"
        assert est.shares["reset"] > 0.9

    def test_single_shot_equals_per_shot(self):
        m = TimingModel(shots=1)
        assert total_runtime(m).total == per_shot_time(m).total

    def test_strictly_increasing_in_every_field(self):
        base = TimingModel(reset_mode="passive", shots=100)
        t0 = total_runtime(base).total
        longer = {
            "t_reset_passive": base.t_reset_passive * 1.5,
            "t_readout_single": base.t_readout_single * 1.5,
            "t_anneal": base.t_anneal * 1.5,
            "shots": base.shots + 50,
        }
        for key, value in longer.items():
            m = TimingModel(**{**base.__dict__, key: value})
            assert total_runtime(m).total > t0


class TestHistogram:
    def test_identical_configs_single_bin(self):
        edges, counts = runtime_histogram([0.05] * 12)
        assert counts.sum() == 12
        assert np.count_nonzero(counts) == 1

    def test_edges_cover_min_max(self):
        totals = [0.01, 0.02, 0.08]
        edges, counts = runtime_histogram(totals, bins=5)
        assert edges[0] <= min(totals) and edges[-1] >= max(totals)

    def test_counts_conserved(self, rng):
        totals = rng.uniform(0.01, 0.2, size=137)
        _, counts = runtime_histogram(totals)
        assert counts.sum() == 137

    def test_empty_rejected(self):
        with pytest.raises(InputError):
            runtime_histogram([])

    def test_csv(self, tmp_path):
        edges, counts = runtime_histogram([0.01, 0.02, 0.05], bins=4)
        path = tmp_path / "hist.csv"
        histogram_to_csv(edges, counts, str(path))
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "bin_low_s,bin_high_s,count"
        assert len(lines) == len(counts) + 1


class TestSerialization:
    def test_roundtrip(self):
        m = TimingModel(reset_mode="passive", shots=77)
        assert TimingModel.from_json(m.to_json()) == m

    def test_validation(self):
        with pytest.raises(InputError):
            TimingModel(reset_mode="warm")
        with pytest.raises(InputError):
            TimingModel(shots=0)
