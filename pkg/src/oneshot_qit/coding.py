"""Position-based decoding and entanglement-assisted channel coding.

The decoders build square-root (Hayashi-Nagaoka) measurements over rotated
copies of a hypothesis test and report per-position success probabilities.
The channel code runs the full protocol exactly: shared flattened-purification
and embezzling resources, transpose-trick encoding on Alice's side, a channel
application, and square-root decoding on Bob's side, with error probabilities
computed by dense propagation over every message and shared-randomness branch
(no sampling).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .convexsplit import (PrimeRegister, _lift_classical_input,
                          _u_ell_host_permutation, hw_family,
                          pairwise_family)
from .entropy import _threshold_test, dh_eps, dmax, imax
from .flatten import (PrimeEnsemble, _w_permutation_matrix, check_unembezzle,
                      embezzling_state, harmonic_sum,
                      purified_embezzle_fidelity, round_spectrum,
                      w_b_permutation)
from .registers import (DensityOperator, PureState, RegisterSystem,
                        _as_density, maximally_mixed, partial_trace,
                        permute_registers, tensor)


@dataclass(frozen=True)
class QuantumChannel:
    """CPTP map given by Kraus operators; square input/output registers."""

    kraus: tuple
    input_dim: int
    output_dim: int
    name: str = "channel"

    def __post_init__(self):
        acc = np.zeros((self.input_dim, self.input_dim), dtype=complex)
        for k in self.kraus:
            if k.shape != (self.output_dim, self.input_dim):
                raise ValueError("Kraus operator shape mismatch")
            acc += k.conj().T @ k
        if float(np.max(np.abs(acc - np.eye(self.input_dim)))) > 1e-9:
            raise ValueError("Kraus operators are not trace preserving")

    def apply_matrix(self, mat):
        return sum(k @ mat @ k.conj().T for k in self.kraus)


def identity_channel(dim=2):
    return QuantumChannel((np.eye(dim, dtype=complex),), dim, dim, "identity")


def depolarizing_channel(p, dim=2):
    """rho -> (1 - p) rho + p mu, via the uniform Pauli Kraus set."""
    if dim != 2:
        raise ValueError("depolarizing channel implemented for qubits")
    paulis = [np.eye(2), np.array([[0, 1], [1, 0]]),
              np.array([[0, -1j], [1j, 0]]), np.diag([1.0, -1.0])]
    weights = [1 - 3 * p / 4, p / 4, p / 4, p / 4]
    kraus = tuple(np.sqrt(w) * m.astype(complex) for w, m in zip(weights, paulis))
    return QuantumChannel(kraus, 2, 2, f"depolarizing({p})")


def dephasing_channel(p):
    kraus = (np.sqrt(1 - p / 2) * np.eye(2, dtype=complex),
             np.sqrt(p / 2) * np.diag([1.0, -1.0]).astype(complex))
    return QuantumChannel(kraus, 2, 2, f"dephasing({p})")


def amplitude_damping_channel(gamma):
    k0 = np.array([[1, 0], [0, np.sqrt(1 - gamma)]], dtype=complex)
    k1 = np.array([[0, np.sqrt(gamma)], [0, 0]], dtype=complex)
    return QuantumChannel((k0, k1), 2, 2, f"amplitude_damping({gamma})")


def apply_channel(channel, state, labels):
    """Apply the channel to the named registers (Kraus sum, trace preserved)."""
    state = _as_density(state)
    labels = list(labels)
    d_act = 1
    for lab in labels:
        d_act *= state.system.dim_of(lab)
    if d_act != channel.input_dim:
        raise ValueError(f"registers {labels} have dim {d_act}, "
                         f"channel expects {channel.input_dim}")
    if channel.output_dim != channel.input_dim:
        raise ValueError("register-relabeling channels need equal dimensions")
    rest = [lab for lab in state.system.labels if lab not in labels]
    moved = permute_registers(state, labels + rest)
    d_rest = moved.system.total_dim // d_act
    acc = np.zeros_like(moved.matrix)
    for k in channel.kraus:
        big = np.kron(k, np.eye(d_rest))
        acc += big @ moved.matrix @ big.conj().T
    out = DensityOperator(moved.system, acc, subnormalized=state.subnormalized,
                          validate=False)
    return permute_registers(out, state.system.labels)


def neyman_pearson_operator(rho, sigma, eps):
    """Optimal test 0 <= Pi <= I with Tr(Pi rho) >= 1 - eps minimizing Tr(Pi sigma).

    Returns (Pi, type2); -log2(type2) equals dh_eps(rho, sigma, eps).
    """
    rho, sigma = _as_density(rho), _as_density(sigma)
    if rho.system.dims != sigma.system.dims:
        raise ValueError("dimension mismatch")
    if not 0.0 <= eps < 1.0:
        raise ValueError(f"eps {eps} outside [0, 1)")
    type2, pi = _threshold_test(rho.matrix, sigma.matrix, float(eps))
    return pi, type2


@dataclass(frozen=True)
class POVM:
    """Outcome-labeled PSD elements summing to the identity; -1 is failure."""

    elements: dict

    def __post_init__(self):
        mats = list(self.elements.values())
        dim = mats[0].shape[0]
        total = np.zeros((dim, dim), dtype=complex)
        for m in mats:
            if float(np.linalg.eigvalsh(m)[0]) < -1e-9:
                raise ValueError("POVM element is not PSD")
            total += m
        if float(np.max(np.abs(total - np.eye(dim)))) > 1e-8:
            raise ValueError("POVM elements do not sum to the identity")


def hayashi_nagaoka_povm(operators, labels=None):
    """Square-root measurement of a family of 0 <= Omega_i <= I operators.

    Lambda_i = S^{-1/2} Omega_i S^{-1/2} with S = sum Omega (pseudo-inverse on
    the support); the -1 outcome projects onto the complement of supp(S).
    """
    operators = list(operators)
    if labels is None:
        labels = list(range(len(operators)))
    dim = operators[0].shape[0]
    for om in operators:
        vals = np.linalg.eigvalsh(om)
        if vals[0] < -1e-9:
            raise ValueError("input operator is not PSD")
        if vals[-1] > 1 + 1e-8:
            raise ValueError("input operator exceeds the identity")
    total = sum(operators)
    vals, vecs = np.linalg.eigh(total)
    pos = vals > 1e-12
    inv_half = (vecs[:, pos] * (1.0 / np.sqrt(vals[pos]))) @ vecs[:, pos].conj().T
    elements = {}
    for lab, om in zip(labels, operators):
        lam = inv_half @ om @ inv_half
        elements[lab] = (lam + lam.conj().T) / 2
    supp = vecs[:, pos] @ vecs[:, pos].conj().T
    elements[-1] = np.eye(dim) - supp
    return POVM(elements)


def hn_inequality_gap(operators, index, c):
    """Min eig of (1+c)(I - Omega_i) + (2+c+1/c) sum_{j != i} Omega_j - (I - Lambda_i)."""
    povm = hayashi_nagaoka_povm(operators)
    dim = operators[0].shape[0]
    rhs = (1 + c) * (np.eye(dim) - operators[index])
    for j, om in enumerate(operators):
        if j != index:
            rhs = rhs + (2 + c + 1 / c) * om
    gap = np.linalg.eigvalsh(rhs - (np.eye(dim) - povm.elements[index]))
    return float(gap[0])


@dataclass(frozen=True)
class PositionDecodeReport:
    """Per-position success probabilities with coarse and exact-ratio bounds."""

    successes: dict
    min_success: float
    paper_bound: float
    exact_bound: float
    size_cap: float


def _decode_cap(dh_value, eps, delta):
    return (delta ** 2 / (4.0 * eps)) * (2.0 ** dh_value)


def position_based_decode_classical(psi, prime_reg, subset, eps, delta):
    """Identify which cyclic rotation U_l carries the signal state.

    psi lives on (B..., C) with C last; the test family is the rotated optimal
    hypothesis test between psi and psi_B (x) mu_C.  The subset size must
    respect the cap (delta^2 / 4 eps) 2^dh, else the call refuses.
    """
    psi = _as_density(psi)
    subset = sorted(set(int(x) for x in subset))
    if not subset:
        raise ValueError("subset must be nonempty")
    if not (0 < eps < 1 and 0 < delta < 1):
        raise ValueError("eps and delta must lie in (0, 1)")
    c_label = psi.system.labels[-1]
    c_dim = psi.system.dim_of(c_label)
    if isinstance(prime_reg, int):
        prime_reg = PrimeRegister(c_dim, prime_reg)
    g = prime_reg.prime
    if subset[-1] >= g or subset[0] < 0:
        raise ValueError(f"subset members outside [0, {g})")

    psi_b = partial_trace(psi, [c_label])
    ref = tensor(psi_b, maximally_mixed(RegisterSystem([(c_label, c_dim)])))
    dh = dh_eps(psi, ref, eps)
    cap = _decode_cap(dh.value, eps, delta) if dh.finite else float("inf")
    if len(subset) > cap:
        raise ValueError(f"subset size {len(subset)} exceeds the cap {cap:.6g}")

    omega, _ = neyman_pearson_operator(psi, ref, eps)
    d_b = psi.system.total_dim // c_dim

    state, _ = _lift_classical_input(psi, prime_reg)
    # Omega on (B, C0) lifted to the state's order (B, Q, C0, C1, G2)
    om_t = omega.reshape(d_b, c_dim, d_b, c_dim)
    om_bqc = np.einsum("bcde,qr->bqcdre", om_t, np.eye(2)).reshape(
        d_b * 2 * c_dim, d_b * 2 * c_dim)
    omega_lift = np.kron(om_bqc, np.eye(c_dim * g))

    rotated_tests, taus = [], []
    for ell in subset:
        perm = _u_ell_host_permutation(ell, prime_reg, g)
        big = np.kron(np.eye(d_b), perm)
        rotated_tests.append(big @ omega_lift @ big.conj().T)
        taus.append(big @ state.matrix @ big.conj().T)
    povm = hayashi_nagaoka_povm(rotated_tests, labels=subset)
    successes = {ell: float(np.real(np.trace(povm.elements[ell] @ tau)))
                 for ell, tau in zip(subset, taus)}
    c = delta / eps
    cross = (2.0 * c_dim * c_dim / g) * 2.0 ** (-dh.value)
    exact = 1.0 - eps - delta - (2 + c + 1 / c) * (len(subset) - 1) * cross
    return PositionDecodeReport(successes, min(successes.values()),
                                1.0 - eps - 4 * delta, exact, cap)


def position_based_decode_flat(psi, omega_c, gamma, subset, eps, delta, a, n,
                               d_size):
    """Position decoding through the flattened/embezzled prime-register family.

    The test family is {U_l W Omega W^dag U_l^dag} on (B, F1, D, F2); the
    report carries the exact-ratio analogue of the coarse success bound.
    Success probabilities are computed from the spectral factorization of the
    signal states, avoiding cubic-cost products at full dimension.
    """
    psi = _as_density(psi)
    subset = sorted(set(int(x) for x in subset))
    if not subset:
        raise ValueError("subset must be nonempty")
    if not (0 < eps < 1 and 0 < delta < 1):
        raise ValueError("eps and delta must lie in (0, 1)")
    c_label = psi.system.labels[-1]
    c_dim = psi.system.dim_of(c_label)

    flat = round_spectrum(omega_c, gamma, "down")
    if a != flat.e_dim:
        raise ValueError(f"a = {a} must equal |E| = {flat.e_dim}")
    if n < a:
        raise ValueError(f"n = {n} below a = {a}")
    b_max = flat.e_dim
    if not (n + 1) * b_max <= d_size <= n * n:
        raise ValueError(f"d_size {d_size} outside [{(n + 1) * b_max}, {n * n}]")

    psi_b = partial_trace(psi, [c_label])
    ref = tensor(psi_b, _as_density(omega_c))
    dh = dh_eps(psi, ref, eps)
    cap = _decode_cap(dh.value, eps, delta) if dh.finite else float("inf")
    if len(subset) > cap:
        raise ValueError(f"subset size {len(subset)} exceeds the cap {cap:.6g}")

    ens = PrimeEnsemble(psi, flat, a, n, d_dim=d_size + 1)
    f_prime, d_dim, s_dim, r_dim = ens.f_prime, ens.d_dim, ens.s_dim, ens.r_dim
    if subset[-1] >= f_prime:
        raise ValueError(f"subset members outside [0, {f_prime})")

    # Omega in the sigma eigenbasis, moved by W, compressed to supp (x) D
    omega, _ = neyman_pearson_operator(psi, ref, eps)
    rot = np.kron(np.eye(r_dim), flat.basis)
    omega_rot = rot.conj().T @ omega @ rot
    e_dim = flat.e_dim
    om_ced = np.kron(omega_rot, np.eye(e_dim * d_dim))  # order (B, C, E, D)
    w_big = np.kron(np.eye(r_dim), _w_permutation_matrix(flat, a, n, d_dim=d_dim))
    om_moved = w_big @ om_ced @ w_big.T
    pairs = flat.support_pairs()
    sel = np.zeros((c_dim * e_dim, s_dim))
    for s, (ci, ei) in enumerate(pairs):
        sel[ci * e_dim + ei, s] = 1.0
    sel_big = np.kron(np.eye(r_dim), np.kron(sel, np.eye(d_dim)))
    om_supp = sel_big.T @ om_moved @ sel_big    # on (B, S, D)

    # embed into (B, F1, D), the q = 1 tail of F1 included, then add F2
    def f1_triple(i):
        if i < s_dim * s_dim:
            return 0, i // s_dim, i % s_dim
        t = i - s_dim * s_dim
        return 1, t // s_dim, t % s_dim

    om_supp_r = om_supp.reshape(r_dim, s_dim, d_dim, r_dim, s_dim, d_dim)
    dim_bfd = r_dim * f_prime * d_dim
    om_f1 = np.zeros((dim_bfd, dim_bfd), dtype=complex)
    for i in range(f_prime):
        qi, x0i, x1i = f1_triple(i)
        for i2 in range(f_prime):
            qj, x0j, x1j = f1_triple(i2)
            if qi != qj or x1i != x1j:
                continue
            blk = om_supp_r[:, x0i, :, :, x0j, :].reshape(r_dim * d_dim,
                                                          r_dim * d_dim)
            rows = ((np.arange(r_dim) * f_prime + i)[:, None] * d_dim
                    + np.arange(d_dim)[None, :]).reshape(-1)
            cols = ((np.arange(r_dim) * f_prime + i2)[:, None] * d_dim
                    + np.arange(d_dim)[None, :]).reshape(-1)
            om_f1[np.ix_(rows, cols)] += blk
    om_full = np.kron(om_f1, np.eye(f_prime))

    s_sum = np.zeros_like(om_full)
    perms = {}
    for ell in subset:
        perm = ens.permutation(ell)
        perms[ell] = perm
        inv = np.empty_like(perm)
        inv[perm] = np.arange(ens.dim_full)
        s_sum += om_full[np.ix_(inv, inv)]
    vals, vecs = np.linalg.eigh(s_sum)
    pos = vals > 1e-12
    u_pos = vecs[:, pos]
    f_vals = 1.0 / np.sqrt(vals[pos])

    # spectral factorization of the base signal state
    t_vals, t_vecs = np.linalg.eigh(ens.theta)
    keep = t_vals > 1e-13
    t_vals, t_vecs = t_vals[keep], t_vecs[:, keep]

    successes = {}
    for ell in subset:
        perm = perms[ell]
        total = 0.0
        for t in range(len(t_vals)):
            u_t = t_vecs[:, t].reshape(r_dim, s_dim, d_dim)
            for x1 in range(s_dim):
                for f2 in range(f_prime):
                    vec = np.zeros(ens.dim_full, dtype=complex)
                    for r in range(r_dim):
                        for s in range(s_dim):
                            idx0 = ens.full_index(r, s * s_dim + x1, 0, f2)
                            vec[idx0 + np.arange(d_dim) * f_prime] = u_t[r, s, :]
                    rotated = np.zeros_like(vec)
                    rotated[perm] = vec
                    half = u_pos @ (f_vals * (u_pos.conj().T @ rotated))
                    back = half[perm]
                    val = float(np.real(back.conj() @ (om_full @ back)))
                    total += t_vals[t] / (s_dim * f_prime) * val
        successes[ell] = float(total)

    ratio_emb = harmonic_sum(1, n) / harmonic_sum(a, n)
    f1_factor = 2.0 * s_dim * s_dim / f_prime
    r2 = max(check_unembezzle(a, b, n, d_size)[0]
             for b in set(flat.counts) if b >= 1)
    x_exact = ratio_emb * f1_factor * r2 / (1.0 - float(flat.gamma)) \
        * 2.0 ** (-dh.value)
    c = delta / eps
    exact = 1.0 - eps - delta - (2 + c + 1 / c) * (len(subset) - 1) * x_exact
    return PositionDecodeReport(successes, min(successes.values()),
                                1.0 - eps - 64 * delta, exact, cap)

@dataclass(frozen=True)
class CodingReport:
    """Exact error statistics of one entanglement-assisted code evaluation."""

    rate: int
    eps: float
    delta_surrogate: float
    delta_prime: float
    gamma: float
    analytic_error_bound: float
    empirical_max_error: float
    entanglement_qubits: float
    trials: int

    def bound_satisfied(self):
        return self.empirical_max_error <= self.analytic_error_bound + 1e-9

    def as_record(self):
        return {
            "rate": self.rate, "eps": self.eps,
            "delta_surrogate": self.delta_surrogate,
            "delta_prime": self.delta_prime, "gamma": self.gamma,
            "analytic_error_bound": self.analytic_error_bound,
            "empirical_max_error": self.empirical_max_error,
            "entanglement_qubits": self.entanglement_qubits,
            "trials": self.trials,
        }


def _marginal_input(psi):
    """Channel-input marginal from either a marginal or a bipartite pure state."""
    psi = _as_density(psi)
    if len(psi.system) == 1:
        return psi
    if len(psi.system) == 2:
        return partial_trace(psi, [psi.system.labels[1]])
    raise ValueError("expected a single-register state or a bipartite purification")


def channel_rate_cap(channel, psi_a, eps, gamma, delta_prime):
    """Rate ceiling dh - 5 - log2(4 (eps + 4 gamma^(1/4)) / delta_prime).

    dh is the hypothesis-testing divergence between the channel output of the
    canonical purification of psi_a and the product of its marginals.
    """
    psi_a = _marginal_input(psi_a)
    d_a = psi_a.system.total_dim
    amp = np.linalg.eigh(psi_a.matrix)
    sqrt_a = (amp[1] * np.sqrt(np.clip(amp[0], 0, None))) @ amp[1].conj().T
    sys_ac = RegisterSystem([("A", d_a), ("C", d_a)])
    vec = sqrt_a.reshape(-1)
    purif = PureState(sys_ac, vec / np.linalg.norm(vec), validate=False)
    psi_bc = apply_channel(channel, purif, ["A"])
    psi_b = partial_trace(psi_bc, ["C"])
    psi_c = partial_trace(psi_bc, ["A"])
    dh = dh_eps(psi_bc, tensor(psi_b, psi_c), eps)
    if not dh.finite:
        return float("inf")
    penalty = 5.0 + math.log2(4.0 * (eps + 4.0 * gamma ** 0.25) / delta_prime)
    return dh.value - penalty


def _perm_matrix_from_pairs(table, dim_a, dim_b):
    """Dense permutation on A (x) B from a dict (a, b) -> (a2, b2)."""
    mat = np.zeros((dim_a * dim_b, dim_a * dim_b))
    for (ai, bi), (aj, bj) in table.items():
        mat[aj * dim_b + bj, ai * dim_b + bi] = 1.0
    return mat


def ea_channel_code(channel, psi_a, rate, eps, gamma, delta_prime, a, n,
                    trials=None, seed=0, enforce_cap=True):
    """Exact simulation of the flattened entanglement-assisted channel code.

    ``psi_a`` is Alice's channel-input state: either the single-register
    marginal or a two-register pure state whose first register is the channel
    input (only the marginal matters; the code runs on its canonical
    purification on registers (A, C)).  Down-rounding the C marginal onto the
    gamma/|C| grid gives the shared resource |sigma>_AC, flattened into block
    registers E'/E with an embezzling pair D'/D of size n(M+1).  Message m is
    encoded by conjugating Alice's side with the transposed selected rotation
    through the flattening isometry; register A passes through the channel;
    Bob decodes with the square-root measurement over the rotated hypothesis
    tests.  Every message and shared-randomness branch is propagated exactly;
    no sampling.

    ``rate`` = 0 (one message) is always admissible; rate >= 1 above the rate
    cap refuses with the computed ceiling unless ``enforce_cap`` is off (used
    to exercise error growth along a rate ladder).
    """
    psi_a = _marginal_input(psi_a)
    d_a = psi_a.system.total_dim
    if not 0 <= rate <= 6:
        raise ValueError("rate must lie in [0, 6] (message set capped at 64)")
    gamma_f = Fraction(gamma).limit_denominator(10 ** 6)
    cap = channel_rate_cap(channel, psi_a, eps, float(gamma_f), delta_prime)
    if enforce_cap and rate >= 1 and rate > cap:
        raise ValueError(f"rate {rate} exceeds the admissible cap {cap:.6g}")
    if channel.input_dim != d_a or channel.output_dim != d_a:
        raise ValueError("channel dimensions must match the A register")

    # spectral data of psi_A; the C marginal of the purification is the
    # transpose, so C carries the conjugate eigenbasis throughout
    lam, v_basis = np.linalg.eigh(psi_a.matrix)
    lam = np.clip(lam, 0.0, None)
    spec_op = DensityOperator(RegisterSystem([("spec", d_a)]),
                              np.diag(lam / lam.sum()), validate=False)
    flat = round_spectrum(spec_op, gamma_f, "down")
    counts = flat.counts
    m_big = flat.grid_total
    q = np.array(counts, dtype=float) / m_big
    e_dim = max(flat.e_dim, 1)
    b_max = flat.e_dim
    if a < max(b_max, 2):
        raise ValueError(f"a = {a} below the max block size {max(b_max, 2)}")
    if n < a:
        raise ValueError(f"n = {n} below a = {a}")
    d_size = n * (m_big + 1)
    if not (n + 1) * b_max <= d_size <= n * n:
        raise ValueError(f"|D| = {d_size} outside the unembezzling bracket; "
                         f"increase n to at least {m_big + 1}")
    d_dim = d_size + 1

    # shared resource |sigma>_AC (x) |xi^{a:n}>_{D'D} (x) |00>_{E'E}
    sigma_tilde = (v_basis * q) @ v_basis.conj().T      # A-side grid state
    sigma_amp = (v_basis * np.sqrt(q)) @ v_basis.conj().T
    xi = embezzling_state(a, n)
    xi_pairs = xi.purification_vector(d_dim).reshape(d_dim, d_dim)
    shape = (d_a, e_dim, d_dim, d_a, e_dim, d_dim)      # (A, E', D', C, E, D)
    init = np.zeros(shape, dtype=complex)
    init[:, 0, :, :, 0, :] = np.einsum("ac,pq->apcq", sigma_amp, xi_pairs)

    # controlled flattening permutations; A controls in v, C in conj(v)
    def controlled_w(basis):
        out = np.zeros((d_a * e_dim * d_dim,) * 2, dtype=complex)
        for c in range(d_a):
            b = counts[c]
            if b >= 1:
                table = w_b_permutation(b, d_dim, e_dim)
                perm = _perm_matrix_from_pairs(
                    {(e, j): (e2, j2) for (j, e), (j2, e2) in table.items()},
                    e_dim, d_dim)
            else:
                perm = np.eye(e_dim * d_dim)
            proj = np.outer(basis[:, c], basis[:, c].conj())
            out += np.kron(proj, perm)
        return out

    w_alice = controlled_w(v_basis)
    w_bob = controlled_w(v_basis.conj())

    # support isometries on (A, E') and (C, E); conjugate-paired bases make
    # the flattened purification maximally entangled in these coordinates
    s_cols_a = np.zeros((d_a * e_dim, m_big), dtype=complex)
    s_cols_c = np.zeros((d_a * e_dim, m_big), dtype=complex)
    for s, (c, e) in enumerate(flat.support_pairs()):
        e_vec = np.eye(e_dim)[:, e]
        s_cols_a[:, s] = np.kron(v_basis[:, c], e_vec)
        s_cols_c[:, s] = np.kron(v_basis[:, c].conj(), e_vec)
    hw = hw_family(m_big)

    def lift_side(cols, mat):
        inner = cols @ mat @ cols.conj().T
        return inner + np.eye(d_a * e_dim) - cols @ cols.conj().T

    # hypothesis test between the channel output and the product reference
    sys_ac = RegisterSystem([("A", d_a), ("C", d_a)])
    amp = (v_basis * np.sqrt(lam)) @ v_basis.conj().T
    psi_vec = amp.reshape(-1)
    psi_ac = PureState(sys_ac, psi_vec / np.linalg.norm(psi_vec),
                       validate=False)
    psi_bc = apply_channel(channel, psi_ac, ["A"])
    psi_b = partial_trace(psi_bc, ["C"])
    psi_c = partial_trace(psi_bc, ["A"])
    omega_test, _ = neyman_pearson_operator(psi_bc, tensor(psi_b, psi_c), eps)

    # Bob's rotated tests on (B, C, E, D)
    om_lift = np.kron(omega_test, np.eye(e_dim * d_dim))   # (B, C, E, D)
    w_bob_big = np.kron(np.eye(d_a), w_bob)
    om_moved = w_bob_big @ om_lift @ w_bob_big.conj().T

    test_cache = {}

    def bob_test(y):
        if y not in test_cache:
            lift = np.kron(np.eye(d_a),
                           np.kron(lift_side(s_cols_c, hw[y].matrix),
                                   np.eye(d_dim)))
            test_cache[y] = lift @ om_moved @ lift.conj().T
        return test_cache[y]

    # Alice-side encodings and the resulting Bob-side column blocks
    q_field = m_big * m_big
    fam = pairwise_family(q_field)
    n_messages = 2 ** rate
    if n_messages > q_field:
        raise ValueError("message set larger than the unitary family")

    bob_dim = d_a * d_a * e_dim * d_dim
    enc_cache = {}

    def bob_columns(y):
        """Channel-output column block for encoding rotation y."""
        if y not in enc_cache:
            u_enc = (w_alice.conj().T
                     @ np.kron(lift_side(s_cols_a, hw[y].matrix.T),
                               np.eye(d_dim))
                     @ w_alice)
            mat = init.reshape(d_a * e_dim * d_dim, -1)
            enc = (u_enc @ mat).reshape(shape)
            cols = []
            for k in channel.kraus:
                after = np.einsum("ba,aedcfg->bedcfg", k, enc)
                reord = after.transpose(0, 3, 4, 5, 1, 2).reshape(
                    bob_dim, e_dim * d_dim)
                cols.append(reord)
            enc_cache[y] = np.concatenate(cols, axis=1)
        return enc_cache[y]

    success_cache = {}

    def branch_success(ys, y_m):
        key = (ys, y_m)
        if key not in success_cache:
            s_total = np.zeros((bob_dim, bob_dim), dtype=complex)
            for y in ys:
                s_total += bob_test(y)
            vals, vecs = np.linalg.eigh(s_total)
            pos = vals > 1e-12
            inv_half = (vecs[:, pos] * (1.0 / np.sqrt(vals[pos]))) \
                @ vecs[:, pos].conj().T
            lam_m = inv_half @ bob_test(y_m) @ inv_half
            cols = bob_columns(y_m)
            success_cache[key] = float(np.real(
                np.sum(cols.conj() * (lam_m @ cols))))
        return success_cache[key]

    branch_count = 0
    errors = []
    for m in range(n_messages):
        success = 0.0
        for x1 in range(q_field):
            for x2 in range(q_field):
                ys = tuple(fam.evaluate(mm, x1, x2)
                           for mm in range(n_messages))
                success += branch_success(ys, ys[m])
                branch_count += 1
        errors.append(1.0 - success / (q_field * q_field))

    # closed-form error budget with the embezzlement distortion replaced by
    # the computed purified overlap
    f_exact = sum(q[c] * purified_embezzle_fidelity(a, counts[c], n)
                  for c in range(d_a) if counts[c] >= 1)
    p_exact = math.sqrt(max(0.0, 1.0 - min(f_exact, 1.0) ** 2))
    bound = eps + 4.0 * float(gamma_f) ** 0.25 + delta_prime + 4.0 * p_exact
    delta_surrogate = max(math.log2(max(a, 2)) / math.log2(max(n, 2)),
                          b_max / a if a else 1.0)
    ent_qubits = math.log2(d_a) + math.log2(d_size)
    return CodingReport(rate, eps, delta_surrogate, delta_prime,
                        float(gamma_f), bound, max(errors), ent_qubits,
                        branch_count if trials is None else trials)


def entanglement_budget(d_a, gamma, delta_surrogate):
    """Closed-form shared-entanglement ceiling for the channel code."""
    return (1.0 / delta_surrogate) * math.log2(d_a / (gamma * delta_surrogate)) \
        + 2.0 * math.log2(d_a / gamma)


@dataclass(frozen=True)
class RedistributionBounds:
    """Communication/entanglement budgets for redistribution and merging."""

    redistribution_comm: float
    redistribution_ent: float
    merge_comm: float
    merge_ent: float


def redistribution_bounds(psi, r_labels, a_labels, b_labels, c_labels, eps,
                          delta):
    """Bound evaluation only (no protocol): redistribution and merging budgets.

    The redistribution communication minimizes over a fixed grid of reference
    states omega_C: the C marginal, the uniform state, and grid-rounded
    variants; entropic terms are evaluated unsmoothed (conservative).
    """
    psi = _as_density(psi)
    if psi.purity() < 1.0 - 1e-8:
        raise ValueError("redistribution bounds require a pure input state")
    labels = list(r_labels) + list(a_labels) + list(b_labels) + list(c_labels)
    if sorted(labels) != sorted(psi.system.labels):
        raise ValueError("partition labels do not cover the system")
    if not (0 < eps < 1 and 0 < delta < 1):
        raise ValueError("eps and delta must lie in (0, 1)")
    psi = permute_registers(psi, labels)   # align marginals positionally

    c_dim = 1
    for lab in c_labels:
        c_dim *= psi.system.dim_of(lab)
    psi_c = partial_trace(psi, [lab for lab in psi.system.labels
                                if lab not in c_labels])
    mu_c = maximally_mixed(psi_c.system)

    candidates = [psi_c.matrix, mu_c.matrix]
    for g in (Fraction(1, 2), Fraction(1, 4)):
        if (Fraction(c_dim) / g).denominator == 1:
            for direction in ("up", "down"):
                try:
                    candidates.append(
                        round_spectrum(psi_c, g, direction).sigma_matrix())
                except (ValueError, AssertionError):
                    pass

    psi_rbc = partial_trace(psi, a_labels)
    psi_rb = partial_trace(psi_rbc, c_labels)
    psi_bc = partial_trace(psi, list(r_labels) + list(a_labels))
    psi_b = partial_trace(psi_bc, c_labels)

    const = math.log2(32.0 / (eps ** 2 * delta ** 6))
    best = float("inf")
    for om_mat in candidates:
        om = DensityOperator(psi_c.system, om_mat, validate=False)
        d_top = dmax(psi_rbc, tensor(psi_rb, om))
        d_bot = dh_eps(psi_bc, tensor(psi_b, om), eps)
        if not d_top.finite:
            continue
        val = 0.5 * (d_top.value - d_bot.value + const)
        best = min(best, val)

    ent = (4.0 + 1.0 / delta) * math.log2(c_dim / delta)
    i_rc = imax(partial_trace(psi, list(a_labels) + list(b_labels)),
                (list(r_labels), list(c_labels)))
    merge_comm = 0.5 * i_rc.value + 2.0 + 2.0 * math.log2(1.0 / delta)
    return RedistributionBounds(best, ent, merge_comm, ent)
