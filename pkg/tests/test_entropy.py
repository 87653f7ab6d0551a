import itertools

import numpy as np
import pytest

from oneshot_qit.entropy import (check_mixture_identity, dh_eps, dmax, hmin,
                                 imax, relative_entropy, transpose_unitary)
from oneshot_qit.registers import (DensityOperator, RegisterSystem,
                                   basis_state, fidelity, maximally_entangled,
                                   maximally_mixed, partial_trace,
                                   purified_distance, random_density,
                                   sqrtm_psd, tensor)


def sysof(*pairs):
    return RegisterSystem(list(pairs))


def diag_state(label, probs):
    return DensityOperator(sysof((label, len(probs))), np.diag(probs))


def classical_np_lp(p, q, eps):
    """Exhaustive-vertex Neyman-Pearson LP oracle for diagonal states.

    minimize sum q_i pi_i subject to sum p_i pi_i >= 1 - eps, 0 <= pi <= 1.
    At a vertex at most one coordinate is fractional; enumerate all of them.
    """
    d = len(p)
    best = None
    for bits in itertools.product([0, 1], repeat=d):
        mass = sum(p[i] for i in range(d) if bits[i])
        cost = sum(q[i] for i in range(d) if bits[i])
        if mass >= 1 - eps - 1e-13:
            best = cost if best is None else min(best, cost)
        for j in range(d):
            if bits[j]:
                continue
            need = (1 - eps) - mass
            if 0 <= need <= p[j] + 1e-15 and p[j] > 0:
                frac_cost = cost + q[j] * need / p[j]
                best = frac_cost if best is None else min(best, frac_cost)
    return best


class TestRelativeEntropy:
    def test_self_zero(self):
        mu = maximally_mixed(sysof(("A", 2)))
        assert abs(relative_entropy(mu, mu).value) <= 1e-10

    def test_pure_vs_mixed_one_bit(self):
        k0 = basis_state(sysof(("A", 2)), 0)
        mu = maximally_mixed(sysof(("A", 2)))
        assert abs(relative_entropy(k0, mu).value - 1.0) <= 1e-10

    def test_commuting_closed_form(self):
        r = diag_state("A", [0.75, 0.25])
        mu = maximally_mixed(sysof(("A", 2)))
        expect = 0.75 * np.log2(1.5) + 0.25 * np.log2(0.5)
        assert abs(relative_entropy(r, mu).value - expect) <= 1e-10

    def test_support_violation_infinite(self):
        mu = maximally_mixed(sysof(("A", 2)))
        k0 = basis_state(sysof(("A", 2)), 0)
        val = relative_entropy(mu, k0)
        assert not val.finite

    def test_dominates_dmax_lower(self):
        for seed in range(30):
            s = sysof(("A", 4))
            rho = random_density(seed, s)
            sig = random_density(seed + 500, s)
            assert dmax(rho, sig).value >= relative_entropy(rho, sig).value - 1e-8


class TestDmax:
    def test_self_zero(self):
        rho = random_density(3, sysof(("A", 3)))
        assert abs(dmax(rho, rho).value) <= 1e-7

    def test_maximally_entangled(self):
        phi = maximally_entangled("R", "C", 2)
        mu_r = maximally_mixed(sysof(("R", 2)))
        mu_c = maximally_mixed(sysof(("C", 2)))
        assert abs(dmax(phi, tensor(mu_r, mu_c)).value - 2.0) <= 1e-9

    def test_diagonal_ratio(self):
        r = diag_state("A", [0.75, 0.25])
        mu = maximally_mixed(sysof(("A", 2)))
        assert abs(dmax(r, mu).value - np.log2(1.5)) <= 1e-10

    def test_support_violation(self):
        k0 = basis_state(sysof(("A", 2)), 0)
        k1 = basis_state(sysof(("A", 2)), 1)
        assert not dmax(k0.density(), k1.density()).finite


class TestDhEps:
    def test_self_zero(self):
        rho = random_density(5, sysof(("A", 3)))
        assert abs(dh_eps(rho, rho, 0.0).value) <= 1e-9

    def test_commuting_example(self):
        a = diag_state("A", [0.5, 0.5])
        b = diag_state("A", [0.9, 0.1])
        assert abs(dh_eps(a, b, 0.5).value - np.log2(10)) <= 1e-9

    def test_eps_monotone(self):
        for seed in range(10):
            s = sysof(("A", 3))
            rho = random_density(seed, s)
            sig = random_density(seed + 900, s)
            vals = [dh_eps(rho, sig, e).value for e in (0.0, 0.1, 0.3, 0.6, 0.9)]
            for lo, hi in zip(vals, vals[1:]):
                assert hi >= lo - 1e-8

    def test_bad_eps(self):
        rho = random_density(1, sysof(("A", 2)))
        with pytest.raises(ValueError):
            dh_eps(rho, rho, 1.0)
        with pytest.raises(ValueError):
            dh_eps(rho, rho, -0.1)

    def test_matches_lp_oracle_on_commuting_pairs(self):
        rng = np.random.default_rng(20240601)
        for trial in range(30):
            d = int(rng.integers(2, 5))
            p = rng.dirichlet(np.ones(d))
            q = rng.dirichlet(np.ones(d))
            eps = float(rng.uniform(0.0, 0.9))
            got = dh_eps(diag_state("A", p), diag_state("A", q), eps)
            expect = classical_np_lp(p, q, eps)
            assert got.finite
            assert abs(2.0 ** (-got.value) - expect) <= 1e-8

    def test_eps_zero_commuting_matches_lp(self):
        rng = np.random.default_rng(7)
        for trial in range(10):
            d = int(rng.integers(2, 5))
            p = rng.dirichlet(np.ones(d))
            q = rng.dirichlet(np.ones(d))
            got = dh_eps(diag_state("A", p), diag_state("A", q), 0.0)
            expect = classical_np_lp(p, q, 0.0)
            assert abs(2.0 ** (-got.value) - expect) <= 1e-8

    def test_maximally_entangled_closed_form(self):
        phi = maximally_entangled("B", "C", 2)
        ref = tensor(maximally_mixed(sysof(("B", 2))),
                     maximally_mixed(sysof(("C", 2))))
        for eps in (0.05, 0.1, 0.5):
            expect = 2.0 - np.log2(1.0 - eps)
            assert abs(dh_eps(phi, ref, eps).value - expect) <= 1e-8


class TestHmin:
    def test_uniform_a_product(self):
        mu_a = maximally_mixed(sysof(("A", 2)))
        sig_b = random_density(4, sysof(("B", 3)))
        val = hmin(tensor(mu_a, sig_b), (["A"], ["B"]))
        assert abs(val.value - 1.0) <= 1e-5

    def test_maximally_entangled(self):
        phi = maximally_entangled("A", "B", 2)
        val = hmin(phi, (["A"], ["B"]))
        assert abs(val.value - (-1.0)) <= 1e-5

    def test_product_closed_form(self):
        for seed in range(20):
            rho_a = random_density(seed, sysof(("A", 3)))
            sig_b = random_density(seed + 300, sysof(("B", 3)))
            val = hmin(tensor(rho_a, sig_b), (["A"], ["B"]))
            expect = -np.log2(np.linalg.eigvalsh(rho_a.matrix)[-1])
            assert abs(val.value - expect) <= 1e-5

    def test_witness_feasible(self):
        for seed in range(5):
            rho = random_density(seed, sysof(("A", 2), ("B", 3)))
            val, xb = hmin(rho, (["A"], ["B"]), return_witness=True)
            slack = np.kron(np.eye(2), xb) - rho.matrix
            assert np.linalg.eigvalsh(slack)[0] >= -1e-7
            assert abs(-np.log2(np.real(np.trace(xb))) - val.value) <= 1e-9

    def test_bad_partition(self):
        rho = random_density(0, sysof(("A", 2), ("B", 2)))
        with pytest.raises(ValueError):
            hmin(rho, (["A"], ["C"]))


class TestImax:
    def test_product_zero(self):
        rho = tensor(random_density(1, sysof(("A", 2))),
                     random_density(2, sysof(("B", 3))))
        assert abs(imax(rho, (["A"], ["B"])).value) <= 1e-7

    def test_maximally_entangled(self):
        phi = maximally_entangled("A", "B", 2)
        assert abs(imax(phi, (["A"], ["B"])).value - 2.0) <= 1e-9

    def test_definitional_composition(self):
        rho = random_density(77, sysof(("A", 2), ("B", 2)))
        got = imax(rho, (["A"], ["B"]))
        ref = tensor(partial_trace(rho, ["B"]), partial_trace(rho, ["A"]))
        assert got.value == dmax(rho, ref).value


class TestMixtureIdentity:
    def test_single_state(self):
        rho = random_density(0, sysof(("A", 2)))
        theta = random_density(1, sysof(("A", 2)))
        assert check_mixture_identity([rho], [1.0], theta) <= 1e-10

    def test_commuting_diagonal(self):
        a = diag_state("A", [0.3, 0.7])
        b = diag_state("A", [0.6, 0.4])
        theta = diag_state("A", [0.5, 0.5])
        assert check_mixture_identity([a, b], [0.25, 0.75], theta) <= 1e-8

    def test_random_qubit_mixture(self):
        states = [random_density(seed, sysof(("A", 2))) for seed in range(4)]
        theta = random_density(99, sysof(("A", 2)))
        res = check_mixture_identity(states, [0.25] * 4, theta)
        assert res <= 1e-7


class TestTransposeUnitary:
    def test_identity(self):
        assert np.allclose(transpose_unitary(np.eye(3), 3), np.eye(3))

    def test_permutation(self):
        p = np.zeros((3, 3))
        p[0, 1] = p[1, 2] = p[2, 0] = 1.0
        pt = transpose_unitary(p, 3)
        assert np.allclose(pt, p.T)
        assert np.allclose(pt @ p, np.eye(3))

    def test_random_unitary_defining_equation(self):
        for seed in range(50):
            rng = np.random.default_rng(seed)
            d = int(rng.integers(2, 5))
            g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
            u, _ = np.linalg.qr(g)
            ut = transpose_unitary(u, d)
            phi = np.eye(d).reshape(-1) / np.sqrt(d)
            lhs = np.kron(u, np.eye(d)) @ phi
            rhs = np.kron(np.eye(d), ut) @ phi
            assert np.max(np.abs(lhs - rhs)) <= 1e-9

    def test_non_unitary_rejected(self):
        with pytest.raises(ValueError):
            transpose_unitary(np.ones((2, 2)), 2)


class TestFacts:
    def test_pinsker_bound(self):
        # F(rho, sigma) >= 2^(-D(rho||sigma)/2) on seeded pairs with common support
        count = 0
        for seed in range(200):
            s = sysof(("A", 3))
            rho = random_density(seed, s)
            sig = random_density(seed + 10_000, s)
            d = relative_entropy(rho, sig)
            assert d.finite
            assert fidelity(rho, sig) >= 2.0 ** (-d.value / 2) - 1e-8
            count += 1
        assert count == 200

    def test_gentle_measurement(self):
        rng = np.random.default_rng(5)
        for seed in range(50):
            s = sysof(("A", 3))
            rho = random_density(seed, s)
            g = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
            h = g @ g.conj().T
            h = h / (np.linalg.eigvalsh(h)[-1] * 1.01) + 1e-3 * np.eye(3)
            h = h / max(1.0, np.linalg.eigvalsh(h)[-1] * 1.001)  # 0 < A < I
            w = float(np.real(np.trace(h @ h @ rho.matrix)))
            post = DensityOperator(s, h @ rho.matrix @ h / w, validate=False)
            assert fidelity(rho, post) >= np.sqrt(w) - 1e-8

    def test_measurement_continuity(self):
        rng = np.random.default_rng(17)
        for seed in range(50):
            s = sysof(("A", 3))
            rho = random_density(seed, s)
            sig = random_density(seed + 777, s)
            g = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
            lam = g @ g.conj().T
            lam /= np.linalg.eigvalsh(lam)[-1] * 1.0001
            a = float(np.real(np.trace(lam @ rho.matrix)))
            b = float(np.real(np.trace(lam @ sig.matrix)))
            assert abs(np.sqrt(a) - np.sqrt(b)) <= purified_distance(rho, sig) + 1e-8

    def test_canonical_purification_fidelity(self):
        from oneshot_qit.registers import canonical_purification
        for seed in range(50):
            s = sysof(("A", 3))
            rho = random_density(seed, s)
            sig = random_density(seed + 31, s)
            pr = canonical_purification(rho, "M")
            ps = canonical_purification(sig, "M")
            overlap = float(np.real(np.trace(sqrtm_psd(rho.matrix)
                                             @ sqrtm_psd(sig.matrix))))
            assert abs(fidelity(pr, ps) - overlap) <= 1e-8
            assert fidelity(pr, ps) >= 1 - purified_distance(rho, sig) - 1e-8
