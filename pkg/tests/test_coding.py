from fractions import Fraction

import numpy as np
import pytest

from oneshot_qit.coding import (POVM, CodingReport, amplitude_damping_channel,
                                apply_channel, channel_rate_cap,
                                dephasing_channel, depolarizing_channel,
                                ea_channel_code, entanglement_budget,
                                hayashi_nagaoka_povm, hn_inequality_gap,
                                identity_channel, neyman_pearson_operator,
                                position_based_decode_classical,
                                position_based_decode_flat,
                                redistribution_bounds)
from oneshot_qit.convexsplit import PrimeRegister
from oneshot_qit.entropy import dh_eps
from oneshot_qit.registers import (DensityOperator, PureState, RegisterSystem,
                                   basis_state, maximally_entangled,
                                   maximally_mixed, partial_trace,
                                   random_density, tensor, tensor_pure)


def sysof(*pairs):
    return RegisterSystem(list(pairs))


class TestChannels:
    def test_identity(self):
        rho = random_density(0, sysof(("A", 2)))
        out = apply_channel(identity_channel(2), rho, ["A"])
        assert np.allclose(out.matrix, rho.matrix)

    def test_fully_depolarizing(self):
        k0 = basis_state(sysof(("A", 2)), 0).density()
        out = apply_channel(depolarizing_channel(1.0), k0, ["A"])
        assert np.allclose(out.matrix, np.eye(2) / 2)

    def test_depolarizing_kraus_sum_oracle(self):
        p = 0.1
        rho = basis_state(sysof(("A", 2)), 0).density()
        out = apply_channel(depolarizing_channel(p), rho, ["A"])
        expect = (1 - p) * rho.matrix + p * np.eye(2) / 2
        assert np.max(np.abs(out.matrix - expect)) <= 1e-12

    def test_trace_preserved_on_subsystem(self):
        rho = random_density(4, sysof(("A", 2), ("B", 3)))
        for ch in (depolarizing_channel(0.3), dephasing_channel(0.4),
                   amplitude_damping_channel(0.2)):
            out = apply_channel(ch, rho, ["A"])
            assert abs(out.trace() - 1.0) <= 1e-9
            assert out.system.labels == rho.system.labels

    def test_dimension_mismatch(self):
        rho = random_density(0, sysof(("A", 3)))
        with pytest.raises(ValueError):
            apply_channel(identity_channel(2), rho, ["A"])


class TestNeymanPearsonOperator:
    def test_equal_states_eps_zero(self):
        rho = random_density(1, sysof(("A", 3)))
        pi, t2 = neyman_pearson_operator(rho, rho, 0.0)
        assert abs(t2 - 1.0) <= 1e-9
        # Pi is the support projector
        assert np.allclose(pi @ pi, pi, atol=1e-8)

    def test_commuting_lp_vertex(self):
        a = DensityOperator(sysof(("A", 2)), np.diag([0.5, 0.5]))
        b = DensityOperator(sysof(("A", 2)), np.diag([0.9, 0.1]))
        pi, t2 = neyman_pearson_operator(a, b, 0.5)
        assert np.allclose(pi, np.diag([0.0, 1.0]), atol=1e-9)
        assert abs(t2 - 0.1) <= 1e-10

    def test_matches_dh(self):
        for seed in range(10):
            rho = random_density(seed, sysof(("A", 3)))
            sig = random_density(seed + 400, sysof(("A", 3)))
            for eps in (0.1, 0.4):
                pi, t2 = neyman_pearson_operator(rho, sig, eps)
                got = -np.log2(t2)
                assert abs(got - dh_eps(rho, sig, eps).value) <= 1e-8
                mass = float(np.real(np.trace(pi @ rho.matrix)))
                assert mass >= 1 - eps - 1e-10
                assert abs(mass - (1 - eps)) <= 1e-9

    def test_eps_near_one(self):
        rho = random_density(3, sysof(("A", 2)))
        sig = random_density(5, sysof(("A", 2)))
        pi, t2 = neyman_pearson_operator(rho, sig, 0.999)
        assert t2 <= 1.0
        vals = np.linalg.eigvalsh(pi)
        assert vals[0] >= -1e-10 and vals[-1] <= 1 + 1e-10


class TestHayashiNagaoka:
    def test_single_projector(self):
        p = np.diag([1.0, 1.0, 0.0]).astype(complex)
        povm = hayashi_nagaoka_povm([p])
        assert np.allclose(povm.elements[0], p)
        assert np.allclose(povm.elements[-1], np.eye(3) - p)

    def test_orthogonal_projectors(self):
        p1 = np.diag([1.0, 0, 0]).astype(complex)
        p2 = np.diag([0, 1.0, 0]).astype(complex)
        povm = hayashi_nagaoka_povm([p1, p2])
        assert np.allclose(povm.elements[0], p1)
        assert np.allclose(povm.elements[1], p2)

    def test_random_families_form_povm(self):
        rng = np.random.default_rng(8)
        for _ in range(10):
            ops = []
            for _ in range(3):
                g = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
                h = g @ g.conj().T
                ops.append(h / (np.linalg.eigvalsh(h)[-1] * 1.001))
            povm = hayashi_nagaoka_povm(ops)
            total = sum(povm.elements.values())
            assert np.max(np.abs(total - np.eye(4))) <= 1e-8

    def test_operator_inequality_seeded(self):
        rng = np.random.default_rng(21)
        for trial in range(50):
            ops = []
            for _ in range(3):
                g = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
                h = g @ g.conj().T
                ops.append(h / (np.linalg.eigvalsh(h)[-1] * 1.001))
            for c in (0.5, 1.0, 2.0):
                assert hn_inequality_gap(ops, trial % 3, c) >= -1e-8

    def test_non_psd_rejected(self):
        with pytest.raises(ValueError):
            hayashi_nagaoka_povm([np.diag([1.0, -0.5])])

    def test_povm_validation(self):
        with pytest.raises(ValueError):
            POVM({0: np.diag([0.5, 0.5]), 1: np.diag([0.2, 0.2])})


class TestPositionDecodeClassical:
    def setup_method(self):
        self.phi = maximally_entangled("B", "C", 2)
        self.reg = PrimeRegister(2, 5)

    def test_single_position(self):
        rep = position_based_decode_classical(self.phi, self.reg, [0],
                                              0.01, 0.1)
        assert rep.min_success >= rep.paper_bound - 1e-9
        assert rep.min_success >= 0.9

    def test_grid_bound(self):
        for eps, delta, size in ((0.01, 0.1, 1), (0.005, 0.15, 2),
                                 (0.005, 0.15, 4)):
            rep = position_based_decode_classical(self.phi, self.reg,
                                                  range(size), eps, delta)
            assert len(rep.successes) == size
            assert rep.min_success >= rep.paper_bound - 1e-9

    def test_cap_refusal(self):
        with pytest.raises(ValueError):
            position_based_decode_classical(self.phi, self.reg, [0, 1],
                                            0.1, 0.1)

    def test_product_state_tiny_cap(self):
        prod = tensor(random_density(1, sysof(("B", 2))),
                      maximally_mixed(sysof(("C", 2))))
        # dh ~ 0 so even one position busts the cap at small delta
        with pytest.raises(ValueError):
            position_based_decode_classical(prod, self.reg, [0], 0.1, 0.1)

    def test_success_degrades_with_size(self):
        vals = []
        for size in (1, 2, 4):
            rep = position_based_decode_classical(self.phi, self.reg,
                                                  range(size), 0.005, 0.15)
            vals.append(rep.min_success)
        assert vals[0] >= vals[1] - 1e-9 >= vals[2] - 2e-9


class TestPositionDecodeFlat:
    def test_single_position_nonvacuous(self):
        phi = maximally_entangled("B", "C", 2)
        mu_c = maximally_mixed(sysof(("C", 2)))
        rep = position_based_decode_flat(phi, mu_c, Fraction(2, 3), [0],
                                         0.01, 0.1, a=2, n=3, d_size=8)
        assert rep.exact_bound > 0.5
        assert rep.min_success >= rep.exact_bound - 1e-9

    def test_bracket_refusal(self):
        phi = maximally_entangled("B", "C", 2)
        mu_c = maximally_mixed(sysof(("C", 2)))
        with pytest.raises(ValueError):
            position_based_decode_flat(phi, mu_c, Fraction(2, 3), [0],
                                       0.01, 0.1, a=2, n=3, d_size=5)

    def test_cap_refusal(self):
        phi = maximally_entangled("B", "C", 2)
        mu_c = maximally_mixed(sysof(("C", 2)))
        with pytest.raises(ValueError):
            position_based_decode_flat(phi, mu_c, Fraction(2, 3),
                                       range(4), 0.1, 0.1, a=2, n=3, d_size=8)


class TestChannelCode:
    def setup_method(self):
        self.mu_a = maximally_mixed(sysof(("A", 2)))

    def test_rate_zero_runs_and_bound_holds(self):
        rep = ea_channel_code(identity_channel(2), self.mu_a, 0, 0.05, 0.5,
                              0.5, a=4, n=8)
        assert isinstance(rep, CodingReport)
        assert rep.bound_satisfied()
        assert rep.empirical_max_error < 0.5

    def test_refusal_above_cap(self):
        cap = channel_rate_cap(identity_channel(2), self.mu_a, 0.05, 0.5, 0.5)
        assert cap < 1
        with pytest.raises(ValueError):
            ea_channel_code(identity_channel(2), self.mu_a, 1, 0.05, 0.5,
                            0.5, a=4, n=8)

    def test_fully_depolarizing_cap_negative(self):
        cap = channel_rate_cap(depolarizing_channel(1.0), self.mu_a, 0.05,
                               0.5, 0.5)
        assert cap < 0
        with pytest.raises(ValueError):
            ea_channel_code(depolarizing_channel(1.0), self.mu_a, 1, 0.05,
                            0.5, 0.5, a=4, n=8)

    def test_error_monotone_in_rate(self):
        errs = []
        for rate in (0, 1):
            rep = ea_channel_code(identity_channel(2), self.mu_a, rate, 0.05,
                                  0.5, 0.5, a=4, n=8, enforce_cap=False)
            errs.append(rep.empirical_max_error)
        assert errs[0] <= errs[1] + 1e-9

    def test_transpose_trick_exact_on_maximally_entangled(self):
        # with an exact flat resource (mu marginals), Alice-side transposed
        # rotations equal Bob-side rotations on the shared pure state
        from oneshot_qit.convexsplit import hw_family
        m = 4
        hw = hw_family(m)
        phi = np.eye(m).reshape(-1) / np.sqrt(m)
        for y in (1, 5, 9):
            lhs = np.kron(hw[y].matrix.T, np.eye(m)) @ phi
            rhs = np.kron(np.eye(m), hw[y].matrix) @ phi
            assert np.max(np.abs(lhs - rhs)) <= 1e-9

    def test_nonuniform_input_state(self):
        rng = np.random.default_rng(5)
        g = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        h = g @ g.conj().T
        h /= np.real(np.trace(h))
        psi_a = DensityOperator(sysof(("A", 2)), h)
        rep = ea_channel_code(identity_channel(2), psi_a, 0, 0.05, 0.5, 0.5,
                              a=4, n=8)
        assert rep.bound_satisfied()
        assert rep.empirical_max_error < 0.5

    def test_entanglement_budget(self):
        rep = ea_channel_code(identity_channel(2), self.mu_a, 0, 0.05, 0.5,
                              0.5, a=4, n=16)
        budget = entanglement_budget(2, 0.5, rep.delta_surrogate)
        assert rep.entanglement_qubits <= budget + 1e-9


class TestRedistributionBounds:
    def test_product_state(self):
        sys4 = sysof(("R", 2), ("A", 2), ("B", 2), ("C", 2))
        vec = np.zeros(16)
        vec[0] = 1.0
        res = redistribution_bounds(PureState(sys4, vec), ["R"], ["A"],
                                    ["B"], ["C"], eps=0.1, delta=0.1)
        assert abs(res.merge_comm - (2 + 2 * np.log2(10))) <= 1e-6

    def test_entangled_rc(self):
        phi_rc = maximally_entangled("R", "C", 2)
        ab = basis_state(sysof(("A", 2), ("B", 2)), 0)
        joint = tensor_pure(phi_rc, ab)
        res = redistribution_bounds(joint, ["R"], ["A"], ["B"], ["C"],
                                    eps=0.1, delta=0.1)
        # I_max(R:C) = 2 log|C| = 2, so merging costs 1 + 2 + 2 log(1/delta)
        assert abs(res.merge_comm - (1 + 2 + 2 * np.log2(10))) <= 1e-6
        assert np.isfinite(res.redistribution_comm)

    def test_grid_minimum_dominates_marginal_point(self):
        from oneshot_qit.entropy import dmax
        for seed in range(5):
            rng = np.random.default_rng(seed)
            vec = rng.standard_normal(16) + 1j * rng.standard_normal(16)
            psi = PureState(sysof(("R", 2), ("A", 2), ("B", 2), ("C", 2)),
                            vec / np.linalg.norm(vec))
            res = redistribution_bounds(psi, ["R"], ["A"], ["B"], ["C"],
                                        eps=0.1, delta=0.1)
            psi_rbc = partial_trace(psi, ["A"])
            psi_rb = partial_trace(psi_rbc, ["C"])
            psi_bc = partial_trace(psi, ["R", "A"])
            psi_b = partial_trace(psi_bc, ["C"])
            psi_c = partial_trace(psi_bc, ["B"])
            at_marginal = 0.5 * (
                dmax(psi_rbc, tensor(psi_rb, psi_c)).value
                - dh_eps(psi_bc, tensor(psi_b, psi_c), 0.1).value
                + np.log2(32 / (0.1 ** 2 * 0.1 ** 6)))
            assert res.redistribution_comm <= at_marginal + 1e-9

    def test_mixed_input_rejected(self):
        rho = random_density(0, sysof(("R", 2), ("A", 2), ("B", 2), ("C", 2)))
        with pytest.raises(ValueError):
            redistribution_bounds(rho, ["R"], ["A"], ["B"], ["C"], 0.1, 0.1)
