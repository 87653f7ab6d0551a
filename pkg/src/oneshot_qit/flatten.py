"""Spectrum flattening via embezzling states and the flattened convex splits.

An embezzling state carries harmonic weights 1/j on basis labels a..n.  The
block-relabeling permutation W_b carves a uniform register of size b out of it
with distortion controlled by the harmonic-sum ratio S(1,n)/S(a,n).  Rounding
a spectrum onto the grid gamma/|C| (exact rational arithmetic) makes a state
flattenable: extended by a block register E it becomes uniform on its support,
after which the convex splits from :mod:`convexsplit` apply with the
max-information-sized k instead of the conditional-min-entropy-sized one.

All embezzlement inequalities here are checked in exact-ratio form; the
coarser closed-form constants must dominate whenever their hypotheses hold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .convexsplit import (ConvexSplitReport, hw_family, next_prime_in,
                          pairwise_family, u_ell, _factor_prime_power)
from .entropy import dmax
from .registers import (DensityOperator, RegisterSystem, _as_density,
                        partial_trace, permute_registers, tensor)


def harmonic_sum(a, n):
    """S(a, n) = sum_{j=a}^{n} 1/j."""
    if not 1 <= a <= n:
        raise ValueError(f"need 1 <= a <= n, got a={a}, n={n}")
    return math.fsum(1.0 / j for j in range(a, n + 1))


@dataclass(frozen=True)
class EmbezzleState:
    """Harmonic-weight state: weight 1/(S(a,n) j) on basis label j, a <= j <= n."""

    a: int
    n: int
    norm: float

    @property
    def weights(self):
        return {j: 1.0 / (self.norm * j) for j in range(self.a, self.n + 1)}

    def weight_vector(self, dim):
        """Diagonal weights over labels 0..dim-1 (zero off the a..n band)."""
        if dim < self.n + 1:
            raise ValueError(f"register of dim {dim} cannot hold labels up to {self.n}")
        vec = np.zeros(dim)
        for j in range(self.a, self.n + 1):
            vec[j] = 1.0 / (self.norm * j)
        return vec

    def purification_vector(self, dim):
        """Canonical purification amplitudes over pairs (j, j)."""
        vec = np.zeros((dim, dim))
        for j in range(self.a, self.n + 1):
            vec[j, j] = 1.0 / np.sqrt(self.norm * j)
        return vec.reshape(-1)


def embezzling_state(a, n):
    if not 1 <= a <= n:
        raise ValueError(f"need 1 <= a <= n, got a={a}, n={n}")
    return EmbezzleState(a, n, harmonic_sum(a, n))


def w_b_permutation(b, d_size, e_size):
    """Total bijection on {0..d_size-1} x {0..e_size-1} extending
    (j, 0) -> (j // b, j mod b); leftover states fill lexicographically.

    Returns a dict (j, e) -> (j', e').
    """
    if not 1 <= b <= e_size:
        raise ValueError(f"b = {b} outside [1, {e_size}]")
    table = {}
    used = set()
    for j in range(d_size):
        img = (j // b, j % b)
        table[(j, 0)] = img
        used.add(img)
    free = [(j, e) for j in range(d_size) for e in range(e_size)
            if (j, e) not in used]
    it = iter(free)
    for j in range(d_size):
        for e in range(1, e_size):
            table[(j, e)] = next(it)
    return table


def check_embezzle_upper(a, b, n):
    """Exact minimal ratio r with W_b (xi^{a:n} (x) |0><0|) W_b^dag <= r * xi^{1:n} (x) unif_b.

    Returns (ratio, holds) where holds compares against S(1,n)/S(a,n).
    """
    if not (n >= a >= b >= 1):
        raise ValueError(f"need n >= a >= b >= 1, got ({a}, {b}, {n})")
    s_an = harmonic_sum(a, n)
    s_1n = harmonic_sum(1, n)
    ratio = max((s_1n / s_an) * (b * (j // b)) / j for j in range(a, n + 1))
    return ratio, ratio <= s_1n / s_an + 1e-12


def check_unembezzle(a, b, n, d_size):
    """Exact minimal ratio r with W_b^dag (xi^{1:n} (x) unif_b) W_b <= r * xi^{1:|D|} (x) |0><0|.

    Requires (n+1) b <= d_size <= n^2; holds compares against the constant 4.
    """
    if not (n >= a >= b >= 1):
        raise ValueError(f"need n >= a >= b >= 1, got ({a}, {b}, {n})")
    if not (n + 1) * b <= d_size <= n * n:
        raise ValueError(f"d_size {d_size} outside [{(n + 1) * b}, {n * n}]")
    s_1n = harmonic_sum(1, n)
    s_1d = harmonic_sum(1, d_size)
    ratio = max((s_1d / s_1n) * (j * b + e) / (j * b)
                for j in range(1, n + 1) for e in range(b))
    return ratio, ratio <= 4.0 + 1e-12


def purified_embezzle_fidelity(a, b, n):
    """Exact overlap of (W_b (x) W_b) |xi^{a:n}>|00> with |xi^{1:n}>|unif_b>."""
    if not 1 <= b <= a <= n:
        raise ValueError(f"need 1 <= b <= a <= n, got ({a}, {b}, {n})")
    s_an = harmonic_sum(a, n)
    s_1n = harmonic_sum(1, n)
    return math.fsum(1.0 / math.sqrt(s_an * j * s_1n * (j // b) * b)
                     for j in range(a, n + 1))


def _rationalize_gamma(gamma, c_dim):
    g = Fraction(gamma).limit_denominator(10 ** 6)
    if not 0 < g < 1:
        raise ValueError(f"gamma = {g} outside (0, 1)")
    m_big = Fraction(c_dim) / g
    if m_big.denominator != 1:
        raise ValueError(f"|C|/gamma = {m_big} is not an integer")
    return g, int(m_big)


@dataclass(frozen=True)
class FlatSpectrum:
    """Grid spectrum: eigenvalue counts m_c with q(c) = m_c * gamma / |C|.

    ``basis`` columns are the eigenvectors the counts refer to; the grid unit
    gamma/|C| equals 1/grid_total.
    """

    gamma: Fraction
    counts: tuple
    basis: np.ndarray

    @property
    def c_dim(self):
        return len(self.counts)

    @property
    def grid_total(self):
        return int(sum(self.counts))

    @property
    def e_dim(self):
        return max(self.counts)

    def sigma_matrix(self):
        q = np.array(self.counts, dtype=float) / self.grid_total
        return (self.basis * q) @ self.basis.conj().T

    def sigma_operator(self, label="C"):
        return DensityOperator(RegisterSystem([(label, self.c_dim)]),
                               self.sigma_matrix(), validate=False)

    def support_pairs(self):
        """Enumeration of the flattened support: (c, e) with e < m_c."""
        return [(c, e) for c in range(self.c_dim) for e in range(self.counts[c])]


def round_spectrum(omega, gamma, direction):
    """Round a state's spectrum onto the grid gamma/|C| (exact rationals).

    ``up`` produces sigma with omega <= sigma/(1-gamma); ``down`` produces
    sigma <= omega/(1-gamma).  Both keep sigma diagonal in omega's eigenbasis
    with eigenvalues that are exact integer multiples of gamma/|C|.
    """
    omega = _as_density(omega)
    if direction not in ("up", "down"):
        raise ValueError(f"direction must be 'up' or 'down', not {direction!r}")
    c_dim = omega.system.total_dim
    gamma_frac, m_big = _rationalize_gamma(gamma, c_dim)
    vals, vecs = np.linalg.eigh(omega.matrix)
    fracs = [Fraction(max(float(v), 0.0)) for v in vals]

    if direction == "up":
        lo = (1 - gamma_frac) * m_big
        candidates = {Fraction(m_big), lo}
        for w in fracs:
            if w > 0:
                for m in range(1, m_big + 1):
                    s = Fraction(m) / w
                    if lo <= s <= m_big:
                        candidates.add(s)
        counts = None
        for s in sorted(candidates, reverse=True):
            cand = [int(-((-w * s) // 1)) for w in fracs]      # ceil
            if sum(cand) <= m_big:
                counts = cand
                break
        deficit = m_big - sum(counts)
        order = sorted(range(c_dim), key=lambda i: (-fracs[i], i))
        pos = 0
        while deficit > 0:
            counts[order[pos % c_dim]] += 1
            deficit -= 1
            pos += 1
    else:
        hi = Fraction(m_big) / (1 - gamma_frac)
        candidates = {Fraction(m_big), hi}
        for w in fracs:
            if w > 0:
                for m in range(1, int(hi * w) + 2):
                    s = Fraction(m) / w
                    if m_big <= s <= hi:
                        candidates.add(s)
        counts = None
        for s in sorted(candidates):
            cand = [int(w * s // 1) for w in fracs]     # floor
            if sum(cand) >= m_big:
                counts = cand
                break
        surplus = sum(counts) - m_big
        order = sorted(range(c_dim), key=lambda i: (-fracs[i], i))
        pos = 0
        while surplus > 0:
            idx = order[pos % c_dim]
            if counts[idx] > 0:
                counts[idx] -= 1
                surplus -= 1
            pos += 1

    flat = FlatSpectrum(gamma_frac, tuple(counts), vecs)
    # verify the stated operator inequality
    sigma = flat.sigma_matrix()
    scale = 1.0 / (1.0 - float(gamma_frac))
    if direction == "up":
        gap = np.linalg.eigvalsh(scale * sigma - omega.matrix)[0]
    else:
        gap = np.linalg.eigvalsh(scale * omega.matrix - sigma)[0]
    if gap < -1e-10:
        raise AssertionError(f"rounding inequality violated: min eig {gap}")
    return flat


def flatten(sigma, gamma, e_label="E"):
    """Extend a grid state sigma_C to sigma_CE, uniform on its support."""
    sigma = _as_density(sigma)
    c_dim = sigma.system.total_dim
    gamma_frac, m_big = _rationalize_gamma(gamma, c_dim)
    vals, vecs = np.linalg.eigh(sigma.matrix)
    counts = []
    for v in vals:
        m = round(float(v) * m_big)
        if abs(float(v) - m / m_big) > 1e-12:
            raise ValueError(f"eigenvalue {v} is off the gamma/|C| grid")
        counts.append(int(m))
    flat = FlatSpectrum(gamma_frac, tuple(counts), vecs)
    e_dim = flat.e_dim
    c_label = sigma.system.registers[0][0]
    system = RegisterSystem([(c_label, c_dim), (e_label, e_dim)])
    mat = np.zeros((c_dim * e_dim, c_dim * e_dim), dtype=complex)
    unit = 1.0 / m_big
    for c in range(c_dim):
        proj = np.outer(vecs[:, c], vecs[:, c].conj())
        e_diag = np.zeros(e_dim)
        e_diag[:counts[c]] = unit
        mat += np.kron(proj, np.diag(e_diag))
    return DensityOperator(system, mat, validate=False)


def unitary_flatten_W(flat, a, n, d_dim=None):
    """Controlled permutation W = sum_c |c><c| (x) W_{b(c)} on (C, E, D) labels.

    Acts on triples (c, e, j) with j a D label and e in 0..e_dim-1.  ``a``
    must equal the flattened support height max_c b(c) for the upper bound
    ratio to be the harmonic one; the table itself works for any a <= n.
    """
    e_dim = flat.e_dim
    if a < e_dim:
        raise ValueError(f"a = {a} below |E| = {e_dim}")
    if n < a:
        raise ValueError(f"n = {n} below a = {a}")
    d_dim = n + 1 if d_dim is None else d_dim
    table = {}
    for c in range(flat.c_dim):
        b = flat.counts[c]
        sub = w_b_permutation(b, d_dim, e_dim) if b >= 1 else \
            {(j, e): (j, e) for j in range(d_dim) for e in range(e_dim)}
        for (j, e), (j2, e2) in sub.items():
            table[(c, e, j)] = (c, e2, j2)
    return table


def _w_permutation_matrix(flat, a, n, d_dim=None):
    """Dense permutation matrix of unitary_flatten_W on (C, E, D) kron order."""
    d_dim = n + 1 if d_dim is None else d_dim
    e_dim, c_dim = flat.e_dim, flat.c_dim
    dim = c_dim * e_dim * d_dim
    table = unitary_flatten_W(flat, a, n, d_dim=d_dim)
    mat = np.zeros((dim, dim))
    for (c, e, j), (c2, e2, j2) in table.items():
        mat[(c2 * e_dim + e2) * d_dim + j2, (c * e_dim + e) * d_dim + j] = 1.0
    return mat


def _moved_state(psi, flat, a, n, d_dim=None):
    """W (psi'_{RC} (x) |0><0|_E (x) xi^{a:n}) W^dag compressed to supp(sigma_CE) (x) D.

    psi is rotated into the sigma eigenbasis on C first.  Returns
    (matrix on R (x) S (x) D, psi_R operator, support pair list).  ``d_dim``
    sets the D register dimension (default n + 1, labels 0..n).
    """
    psi = _as_density(psi)
    labels = psi.system.labels
    c_label = labels[-1]
    rest = [lab for lab in labels if lab != c_label]
    c_dim = psi.system.dim_of(c_label)
    if c_dim != flat.c_dim:
        raise ValueError("C dimension mismatch with the flattened spectrum")
    moved = permute_registers(psi, rest + [c_label])
    d_rest = moved.system.total_dim // c_dim
    rot = np.kron(np.eye(d_rest), flat.basis.conj().T)
    psi_rot = rot @ moved.matrix @ rot.conj().T

    e_dim = flat.e_dim
    d_dim = n + 1 if d_dim is None else d_dim
    if d_dim < n + 1:
        raise ValueError(f"D register of dim {d_dim} cannot hold labels up to {n}")
    xi = embezzling_state(a, n)
    xi_diag = xi.weight_vector(d_dim)

    pairs = flat.support_pairs()
    s_index = {pair: s for s, pair in enumerate(pairs)}
    table = unitary_flatten_W(flat, a, n, d_dim=d_dim)
    big = len(pairs) * d_dim
    out = np.zeros((d_rest * big, d_rest * big), dtype=complex)
    psi_blocks = psi_rot.reshape(d_rest, c_dim, d_rest, c_dim)
    # psi_rot (x) |0><0|_E (x) xi has support on (c, 0, j); W maps basis states.
    # out is (rest-major, SD-minor): row rest*big + s*d_dim + j.
    for c in range(c_dim):
        if flat.counts[c] == 0:
            mass = float(np.linalg.norm(psi_blocks[:, c, :, c]))
            if mass > 1e-9:
                raise ValueError("state has support outside the flattened spectrum")
            continue
        for c2 in range(c_dim):
            if flat.counts[c2] == 0:
                continue
            blk = psi_blocks[:, c, :, c2]
            for j in range(a, n + 1):
                (_, e_a, j_a) = table[(c, 0, j)]
                (_, e_b, j_b) = table[(c2, 0, j)]
                ia = s_index[(c, e_a)] * d_dim + j_a
                ib = s_index[(c2, e_b)] * d_dim + j_b
                out[ia::big, ib::big] += blk * xi_diag[j]
    psi_r = partial_trace(psi, [c_label]) if rest else None
    return out, psi_r, pairs


class _KronDiagRef:
    """Reference state kron(A, diag(w)): cheap log-trace, entropy and fidelity."""

    def __init__(self, a_mat, w):
        self.a_mat = a_mat
        self.w = np.asarray(w, dtype=float)
        vals, vecs = np.linalg.eigh(a_mat)
        self.a_vals, self.a_vecs = vals, vecs
        self.a_dim = a_mat.shape[0]
        self.w_dim = len(self.w)

    def rel_entropy_of(self, rho):
        """D(rho || kron(A, diag(w))) in bits; inf on support violation."""
        d = self.a_dim * self.w_dim
        rho_r = rho.reshape(self.a_dim, self.w_dim, self.a_dim, self.w_dim)
        # mass outside supp(w)
        wa = self.w > 1e-14
        if not wa.all():
            mass = float(np.real(np.einsum("axax->", rho_r[:, ~wa][:, :, :, ~wa])))
            if mass > 1e-8:
                return float("inf")
        pos_a = self.a_vals > 1e-12
        if not pos_a.all():
            ker = self.a_vecs[:, ~pos_a]
            m1 = np.einsum("axbx->ab", rho_r)
            mass = float(np.real(np.trace(ker.conj().T @ m1 @ ker)))
            if mass > 1e-8:
                return float("inf")
        vals = np.linalg.eigvalsh(rho)
        pos = vals > 1e-12
        s_rho = float(np.sum(vals[pos] * np.log2(vals[pos])))
        # Tr rho (log A (x) P_w)
        la = (self.a_vecs[:, pos_a] * np.log2(self.a_vals[pos_a])) \
            @ self.a_vecs[:, pos_a].conj().T
        m_w = np.einsum("axbx,x->ab", rho_r, wa.astype(float))
        t1 = float(np.real(np.trace(m_w @ la)))
        # Tr rho (P_A (x) diag(log w))
        pa = self.a_vecs[:, pos_a] @ self.a_vecs[:, pos_a].conj().T
        logw = np.where(wa, np.log2(np.where(wa, self.w, 1.0)), 0.0)
        m_a = np.einsum("axbx,x->ab", rho_r, logw)
        t2 = float(np.real(np.trace(m_a @ pa)))
        return s_rho - t1 - t2

    def fidelity_of(self, rho):
        sqrt_a = (self.a_vecs * np.sqrt(np.clip(self.a_vals, 0, None))) \
            @ self.a_vecs.conj().T
        sw = np.sqrt(self.w)
        rho_w = rho * np.kron(np.ones(self.a_dim), sw)[None, :] \
            * np.kron(np.ones(self.a_dim), sw)[:, None]
        rho_r = rho_w.reshape(self.a_dim, self.w_dim, self.a_dim, self.w_dim)
        mid = np.einsum("ab,bxcy,cd->axdy", sqrt_a, rho_r, sqrt_a).reshape(
            rho.shape)
        vals = np.linalg.eigvalsh(mid)
        floor = max(vals[-1], 0.0) * 1e-13
        vals = np.where(vals > floor, vals, 0.0)
        return min(float(np.sum(np.sqrt(vals))), 1.0)


def _flat_bound(k, a, n, n_mixed):
    ratio = harmonic_sum(1, n) / harmonic_sum(a, n)
    return float(np.log2(ratio) + np.log2(1.0 + (2.0 ** (k + 2.0) - 1.0) / n_mixed))


def convex_split_flat_1design(psi, omega, gamma, n_mixed, a=None, n=None, seed=0):
    """Flattened 1-design split: mix HW rotations on supp(sigma_CE).

    omega is the reference C-state defining k = Dmax(psi || psi_R (x) omega);
    its up-rounding sigma is flattened, psi rides along, and the selected
    pairwise-independent HW subfamily is mixed.  The achieved relative entropy
    against psi_R (x) sigma_CE (x) xi^{1:n} (x) mu_X1X2 is compared to the
    exact-ratio bound log(S(1,n)/S(a,n)) + log(1 + (2^{k+2}-1)/N).
    """
    psi = _as_density(psi)
    c_label = psi.system.labels[-1]
    c_dim = psi.system.dim_of(c_label)
    flat = round_spectrum(omega, gamma, "up")
    m_big = flat.grid_total
    try:
        _factor_prime_power(m_big)
    except ValueError:
        raise ValueError(f"|C|/gamma = {m_big} is not a prime power")
    e_dim = flat.e_dim
    if a is None:
        a = e_dim
    if a != e_dim:
        raise ValueError(f"a = {a} must equal |E| = {e_dim}")
    if n is None:
        n = max(a, 4)
    if n < a:
        raise ValueError(f"n = {n} below a = {a}")
    q = m_big * m_big
    if not 1 <= n_mixed <= q:
        raise ValueError(f"N = {n_mixed} outside [1, {q}]")

    k = dmax(psi, tensor(partial_trace(psi, [c_label]),
                         _as_density(omega)))
    if not k.finite:
        raise ValueError("Dmax against psi_R (x) omega is infinite")
    bound = _flat_bound(k.value, a, n, n_mixed)

    theta, psi_r, pairs = _moved_state(psi, flat, a, n)
    d_dim = n + 1
    s_dim = len(pairs)
    r_dim = theta.shape[0] // (s_dim * d_dim)

    fam = pairwise_family(q)
    members = [int(j) for j in np.random.default_rng(seed).permutation(q)[:n_mixed]]
    hw = hw_family(s_dim)
    conj_cache = {}

    def conjugated(y):
        if y not in conj_cache:
            big = np.kron(np.eye(r_dim), np.kron(hw[y].matrix, np.eye(d_dim)))
            conj_cache[y] = big @ theta @ big.conj().T
        return conj_cache[y]

    xi_target = embezzling_state(1, n).weight_vector(d_dim)
    w_sd = np.kron(np.full(s_dim, 1.0 / m_big), xi_target)
    a_mat = psi_r.matrix if psi_r is not None else np.eye(1)
    ref = _KronDiagRef(a_mat, w_sd)

    d_total, f_total = 0.0, 0.0
    memo = {}
    for x1 in range(q):
        for x2 in range(q):
            ys = tuple(sorted(fam.evaluate(j, x1, x2) for j in members))
            if ys not in memo:
                block = np.zeros_like(theta)
                for y in ys:
                    block += conjugated(y)
                block /= n_mixed
                d_val = ref.rel_entropy_of(block)
                if not np.isfinite(d_val):
                    memo[ys] = (float("inf"), 0.0)
                else:
                    memo[ys] = (d_val, ref.fidelity_of(block))
            dv, fv = memo[ys]
            if not np.isfinite(dv):
                return ConvexSplitReport(k.value, n_mixed, bound, float("inf"), 0.0)
            d_total += dv
            f_total += fv
    return ConvexSplitReport(k.value, n_mixed, bound,
                             d_total / (q * q), min(f_total / (q * q), 1.0))


class PrimeEnsemble:
    """States and operators on (R, F1, D, F2) for the prime-register method.

    F1 carries the flattened support pair (x0, x1) as index x0*M + x1 < M^2
    inside a prime-dimensional register; the tail stays unpopulated.  The base
    state is W(psi (x) |0>_E (x) xi^{a:n})W^dag (x) sigma_CE (x) mu_F2, and
    mixed terms are its images under the cyclic basis permutations U_l.
    """

    def __init__(self, psi, flat, a, n, d_dim=None):
        theta, psi_r, pairs = _moved_state(psi, flat, a, n, d_dim=d_dim)
        self.flat, self.a, self.n = flat, a, n
        self.d_dim = n + 1 if d_dim is None else d_dim
        self.s_dim = len(pairs)
        self.r_dim = theta.shape[0] // (self.s_dim * self.d_dim)
        self.f_prime = next_prime_in(self.s_dim * self.s_dim)
        self.psi_r = psi_r
        self.theta = theta
        self.dim_full = self.r_dim * self.f_prime * self.d_dim * self.f_prime
        self.base = self._assemble(theta)

    def full_index(self, r, f1, d, f2):
        return ((r * self.f_prime + f1) * self.d_dim + d) * self.f_prime + f2

    def _assemble(self, theta):
        s_dim, d_dim, f_prime, r_dim = (self.s_dim, self.d_dim, self.f_prime,
                                        self.r_dim)
        base = np.zeros((self.dim_full, self.dim_full), dtype=complex)
        theta_r = theta.reshape(r_dim, s_dim, d_dim, r_dim, s_dim, d_dim)
        wgt = (1.0 / s_dim) * (1.0 / f_prime)
        for x1 in range(s_dim):
            for f2 in range(f_prime):
                for r1 in range(r_dim):
                    for s1 in range(s_dim):
                        rows = self.full_index(r1, s1 * s_dim + x1, 0, f2) + \
                            np.arange(d_dim) * f_prime
                        for r2 in range(r_dim):
                            for s2 in range(s_dim):
                                cols = self.full_index(
                                    r2, s2 * s_dim + x1, 0, f2) + \
                                    np.arange(d_dim) * f_prime
                                base[np.ix_(rows, cols)] += \
                                    theta_r[r1, s1, :, r2, s2, :] * wgt
        return base

    def permutation(self, ell):
        """Index map of U_l on the full space (new index per old index)."""
        table = u_ell(ell, self.f_prime)
        perm = np.arange(self.dim_full)
        for r in range(self.r_dim):
            for i in range(self.f_prime):
                for d in range(self.d_dim):
                    for f2 in range(self.f_prime):
                        i2, f22 = table[(i, f2)]
                        perm[self.full_index(r, i, d, f2)] = \
                            self.full_index(r, i2, d, f22)
        return perm

    def rotated_term(self, ell):
        perm = self.permutation(ell)
        inv = np.empty_like(perm)
        inv[perm] = np.arange(self.dim_full)
        return self.base[np.ix_(inv, inv)]

    def psi_r_matrix(self):
        return self.psi_r.matrix if self.psi_r is not None else np.eye(1)

    def trace_out_f2(self, mat):
        d_keep = self.r_dim * self.f_prime * self.d_dim
        return np.einsum("afbf->ab", mat.reshape(d_keep, self.f_prime,
                                                 d_keep, self.f_prime))

    def marginal_domination_gap(self, ell, ratio):
        """Min eigenvalue of ratio * psi_R (x) mu_F1 (x) xi^{1:n} - Tr_F2(tau_l)."""
        xi_target = embezzling_state(1, self.n).weight_vector(self.d_dim)
        marg_ref = np.kron(self.psi_r_matrix(),
                           np.kron(np.eye(self.f_prime) / self.f_prime,
                                   np.diag(xi_target)))
        marg = self.trace_out_f2(self.rotated_term(ell))
        return float(np.linalg.eigvalsh(ratio * marg_ref - marg)[0])


def convex_split_flat_classical(psi, omega, gamma, subset, a=None, n=None):
    """Flattened classical split over the prime register F built on supp(sigma_CE).

    Mixes U_l over l in ``subset`` acting on (F1, F2); checks the exact-ratio
    bound and the per-term marginal domination Tr_F2(tau_l) <= ratio *
    psi_R (x) mu_F1 (x) xi^{1:n} by an eigenvalue test (nonzero l only: the
    sweep argument behind the domination needs a nontrivial rotation).
    """
    psi = _as_density(psi)
    subset = sorted(set(int(x) for x in subset))
    if not subset:
        raise ValueError("subset of unitaries must be nonempty")
    c_label = psi.system.labels[-1]
    flat = round_spectrum(omega, gamma, "up")
    e_dim = flat.e_dim
    if a is None:
        a = e_dim
    if a != e_dim:
        raise ValueError(f"a = {a} must equal |E| = {e_dim}")
    if n is None:
        n = max(a, 4)
    if n < a:
        raise ValueError(f"n = {n} below a = {a}")

    k = dmax(psi, tensor(partial_trace(psi, [c_label]), _as_density(omega)))
    if not k.finite:
        raise ValueError("Dmax against psi_R (x) omega is infinite")
    n_mixed = len(subset)
    bound = _flat_bound(k.value, a, n, n_mixed)

    ens = PrimeEnsemble(psi, flat, a, n)
    if subset[0] < 0 or subset[-1] >= ens.f_prime:
        raise ValueError(f"subset members outside [0, {ens.f_prime})")

    tau = np.zeros_like(ens.base)
    for ell in subset:
        tau += ens.rotated_term(ell)
    tau /= n_mixed

    xi_target = embezzling_state(1, n).weight_vector(ens.d_dim)
    w_fdf = np.kron(np.full(ens.f_prime, 1.0 / ens.f_prime),
                    np.kron(xi_target, np.full(ens.f_prime, 1.0 / ens.f_prime)))
    ref = _KronDiagRef(ens.psi_r_matrix(), w_fdf)
    achieved = ref.rel_entropy_of(tau)
    fid = ref.fidelity_of(tau) if np.isfinite(achieved) else 0.0

    ratio = harmonic_sum(1, n) / harmonic_sum(a, n)
    for ell in sorted(set(m for m in subset if m != 0) | {1}):
        gap = ens.marginal_domination_gap(ell, ratio)
        if gap < -1e-10:
            raise AssertionError(
                f"marginal domination failed for l={ell}: min eig {gap}")
    return ConvexSplitReport(k.value, n_mixed, bound, achieved, min(fid, 1.0))
