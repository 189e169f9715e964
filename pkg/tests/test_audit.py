import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qthermo.audit import (
    ShiftUnitary,
    cyclic_second_law_check,
    decohere,
    entropy_audit,
    offset_spread,
    simulate_weight_work,
    strict_deficit,
    strict_deficit_protocol_check,
    weight_entropy_sweep,
    work_independence_check,
)
from qthermo.errors import AuditUnavailable, NotEnergyConserving, RankDeficientTarget
from qthermo.protocol import run_extraction, run_population_path
from qthermo.qcore import random_density, random_unitary, vn_entropy
from qthermo.thermo import BathSpec, thermal_state
from qthermo.weight import GaussianWavepacket

T1 = BathSpec(1.0)
W = GaussianWavepacket(sigma=0.05)


class TestDecoherence:
    def test_energy_diagonal_fixed(self):
        rho = np.diag([0.6, 0.3, 0.1])
        np.testing.assert_allclose(decohere(rho, np.diag([0.0, 1.0, 2.0])).omega, rho)

    def test_plus_becomes_mixed(self, plus):
        np.testing.assert_allclose(decohere(plus, np.diag([0.0, 1.3])).omega, np.eye(2) / 2, atol=1e-15)

    def test_degenerate_block_kept(self, rng):
        rho = random_density(3, rng)
        om = decohere(rho, np.diag([0.0, 0.0, 1.0])).omega
        np.testing.assert_allclose(om[:2, :2], rho[:2, :2], atol=1e-15)
        assert abs(om[0, 2]) < 1e-15 and abs(om[1, 2]) < 1e-15

    def test_strict_deficit_examples(self, plus):
        assert strict_deficit(np.diag([0.7, 0.3]), np.diag([0.0, 1.0]), T1) == 0.0
        for T in (0.5, 2.0):
            assert strict_deficit(plus, np.diag([0.0, 1.7]), BathSpec(T)) == pytest.approx(T * np.log(2), abs=1e-12)

    def test_strict_deficit_is_entropy_gap(self, rng):
        h = np.diag([0.0, 0.4, 1.0])
        rho = random_density(3, rng)
        om = decohere(rho, h).omega
        assert strict_deficit(rho, h, BathSpec(0.8)) == pytest.approx(0.8 * (vn_entropy(om) - vn_entropy(rho)), abs=1e-12)

    def test_protocol_check(self, plus):
        chk = strict_deficit_protocol_check(plus, np.diag([0.0, 1.0]), T1, N=2000)
        assert chk.passed


class TestEntropyAudit:
    def test_population_mode_unavailable(self, qubit_h):
        with pytest.raises(AuditUnavailable):
            entropy_audit(run_extraction(np.diag([0.9, 0.1]), qubit_h, T1, 4))

    def test_empty_run(self):
        led = run_population_path([0.6, 0.4], [], [0.0, 1.0], T1, "exact", W)
        a = entropy_audit(led)
        assert (a.dS_sys, a.dS_bath, a.dS_weight) == (0.0, 0.0, 0.0)

    def test_broad_packet(self, rng, qubit_h):
        led = run_extraction(random_density(2, rng), qubit_h, T1, 8, "exact", W)
        spread = offset_spread(led.weight)
        a = entropy_audit(led, GaussianWavepacket(sigma=100 * spread))
        assert a.passed
        assert a.dS_weight <= 1e-3

    def test_narrow_packet(self, rng, qubit_h):
        led = run_extraction(random_density(2, rng), qubit_h, T1, 8, "exact", W)
        spread = offset_spread(led.weight)
        vals = weight_entropy_sweep(led, [spread * f for f in (1e-3, 1e-2, 1.0, 10.0)])
        assert all(a >= b - 1e-12 for a, b in zip(vals, vals[1:]))
        assert entropy_audit(led, GaussianWavepacket(sigma=1e-3 * spread)).passed

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**31), st.integers(2, 3), st.integers(2, 8), st.floats(0.3, 3.0), st.floats(0.01, 10.0))
    def test_slack_non_negative(self, seed, d, N, T, sigma):
        rng = np.random.default_rng(seed)
        h = np.diag(np.sort(rng.uniform(0, 2, d)))
        led = run_extraction(random_density(d, rng), h, BathSpec(T), N, "exact", GaussianWavepacket(sigma=sigma))
        assert entropy_audit(led).slack >= -1e-9

    def test_mixed_initial_weight(self, qubit_h):
        from qthermo.weight import OffsetMixture
        led = run_extraction(np.diag([0.8, 0.2]), qubit_h, T1, 4, "exact", W)
        w0 = OffsetMixture.single(W)
        assert entropy_audit(led, initial_weight=w0).dS_weight == entropy_audit(led).dS_weight


class TestWorkIndependence:
    PACKETS = [GaussianWavepacket(sigma=s) for s in (0.1, 1.0, 10.0)]

    def test_identity_plan(self, rng):
        rep = work_independence_check(ShiftUnitary.identity(3), random_density(3, rng), self.PACKETS)
        assert rep.closed_form == 0.0
        assert max(abs(v) for v in rep.simulated) < 1e-12

    def test_stage1_on_plus(self, plus):
        E = 1.4
        h = np.diag([0.0, E])
        rep = work_independence_check(ShiftUnitary.from_stage1(plus, h), plus, self.PACKETS, h=h)
        assert rep.closed_form == pytest.approx(E / 2, abs=1e-12)
        assert rep.max_spread <= 1e-10

    def test_random_admissible_plan(self, rng):
        h = np.diag([0.0, 0.5, 1.3])
        u_in, u_out = random_unitary(3, rng), random_unitary(3, rng)
        plan = ShiftUnitary.energy_conserving(u_in, u_out, h)
        rho = np.diag(rng.dirichlet(np.ones(3)))
        packets = [GaussianWavepacket(sigma=s, p0=0.7) for s in (0.05, 0.5, 5.0)]
        rep = work_independence_check(plan, rho, packets, h=h)
        assert rep.max_spread <= 1e-10

    def test_entangled_input_uses_in_basis(self, rng):
        h = np.diag([0.0, 0.8])
        u_in = random_unitary(2, rng)
        plan = ShiftUnitary.energy_conserving(u_in, np.eye(2), h)
        rho = random_density(2, rng)
        ref = sum(plan.shifts[i] * (u_in[:, i].conj() @ rho @ u_in[:, i]).real for i in range(2))
        assert plan.closed_form_work(rho) == pytest.approx(ref, abs=1e-14)
        assert simulate_weight_work(plan, rho, GaussianWavepacket(sigma=0.3)) == pytest.approx(ref, abs=1e-10)

    def test_rejects_bad_shifts(self, plus):
        h = np.diag([0.0, 1.0])
        bad = ShiftUnitary(np.eye(2), np.eye(2), np.array([0.0, 0.1]))
        with pytest.raises(NotEnergyConserving):
            work_independence_check(bad, plus, self.PACKETS, h=h)


class TestCyclicSecondLaw:
    def test_thermal(self, qubit_h):
        tau, _ = thermal_state(qubit_h, T1)
        assert cyclic_second_law_check(tau, qubit_h, T1, 100) == 0.0

    def test_random_qubit(self, rng, qubit_h):
        rho = random_density(2, rng)
        ext = run_extraction(rho, qubit_h, T1, 1000)
        net = cyclic_second_law_check(rho, qubit_h, T1, 1000)
        assert net < 0
        from qthermo.protocol import run_formation
        form = run_formation(rho, qubit_h, T1, 1000)
        form_deficit = -form.W - (-form.free_energy_change)
        assert abs(net) == pytest.approx(ext.deficit + form_deficit, rel=1e-9)

    def test_approaches_zero_from_below(self, rng, qubit_h):
        rho = random_density(2, rng)
        nets = [cyclic_second_law_check(rho, qubit_h, T1, N) for N in (10, 100, 1000)]
        assert nets[0] < nets[1] < nets[2] < 0

    def test_rank_deficient(self, plus, qubit_h):
        with pytest.raises(RankDeficientTarget):
            cyclic_second_law_check(plus, qubit_h, T1, 10)
