"""One-shot information measures, base-2 throughout.

Covers relative entropy, max-relative entropy, hypothesis-testing relative
entropy (exact quantum Neyman-Pearson test via threshold bisection),
conditional min-entropy (small SDP solved by a log-barrier Newton method),
max-information, and the identity/inequality facts the bounds lean on.
Smoothed variants are exposed at epsilon = 0 only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .registers import (DensityOperator, _as_density, partial_trace,
                        permute_registers, tensor)

SUPPORT_TOL = 1e-10
_SUPPORT_MASS_TOL = 1e-8


@dataclass(frozen=True)
class EntropyValue:
    """Real value in bits; finite=False encodes +infinity (support violation)."""

    value: float
    finite: bool = True

    @staticmethod
    def infinite():
        return EntropyValue(float("inf"), finite=False)

    def __float__(self):
        return self.value if self.finite else float("inf")


def _check_same_system(rho, sigma):
    if rho.system.dims != sigma.system.dims:
        raise ValueError("dimension mismatch between states")


def _spectral(mat):
    vals, vecs = np.linalg.eigh(mat)
    return vals, vecs


def relative_entropy(rho, sigma):
    """Umegaki relative entropy D(rho||sigma) in bits; +inf on support violation."""
    rho, sigma = _as_density(rho), _as_density(sigma)
    _check_same_system(rho, sigma)
    rvals, rvecs = _spectral(rho.matrix)
    svals, svecs = _spectral(sigma.matrix)
    # mass of rho outside supp(sigma)
    ker = svecs[:, svals <= SUPPORT_TOL]
    if ker.shape[1]:
        mass_out = float(np.real(np.sum((ker.conj().T @ rho.matrix @ ker).diagonal())))
        if mass_out > _SUPPORT_MASS_TOL:
            return EntropyValue.infinite()
    pos_r = rvals > SUPPORT_TOL
    term1 = float(np.sum(rvals[pos_r] * np.log2(rvals[pos_r])))
    pos_s = svals > SUPPORT_TOL
    # <v_j| rho |v_j> for sigma eigenvectors on the support
    vs = svecs[:, pos_s]
    diag = np.real(np.einsum("ij,ik,kj->j", vs.conj(), rho.matrix, vs))
    term2 = float(np.sum(diag * np.log2(svals[pos_s])))
    return EntropyValue(term1 - term2)


def dmax(rho, sigma):
    """Max-relative entropy: log of the largest eigenvalue of the relative operator."""
    rho, sigma = _as_density(rho), _as_density(sigma)
    _check_same_system(rho, sigma)
    svals, svecs = _spectral(sigma.matrix)
    pos = svals > SUPPORT_TOL
    ker = svecs[:, ~pos]
    if ker.shape[1]:
        mass_out = float(np.real(np.sum((ker.conj().T @ rho.matrix @ ker).diagonal())))
        if mass_out > _SUPPORT_MASS_TOL:
            return EntropyValue.infinite()
    vs = svecs[:, pos]
    inv_half = vs * (1.0 / np.sqrt(svals[pos]))
    rel = inv_half.conj().T @ rho.matrix @ inv_half
    lam = float(np.linalg.eigvalsh(rel)[-1])
    return EntropyValue(float(np.log2(max(lam, 1e-300))))


def _threshold_test(rho_mat, sigma_mat, eps):
    """Exact Neyman-Pearson test: minimize Tr(Pi sigma) s.t. Tr(Pi rho) >= 1-eps.

    Returns (type2_weight, Pi).  The optimal test is a threshold test on
    rho - t*sigma: full weight on the strictly positive eigenspace, fractional
    weight on the kernel eigenspace to meet the constraint with equality.
    Kernel fill order follows ascending eigenvalue index.
    """
    d = rho_mat.shape[0]
    svals, svecs = _spectral(sigma_mat)
    pos = svals > SUPPORT_TOL
    ker_vecs = svecs[:, ~pos]
    pi = np.zeros((d, d), dtype=complex)

    r0 = 0.0
    if ker_vecs.shape[1]:
        r0 = float(np.real(np.sum((ker_vecs.conj().T @ rho_mat @ ker_vecs).diagonal())))
        r0 = max(r0, 0.0)
        # sigma-kernel weight is free: include the whole kernel projector
        pi += ker_vecs @ ker_vecs.conj().T

    if eps == 0.0:
        # Tr(Pi rho) = 1 forces Pi >= supp(rho); optimum is exactly that projector
        rvals, rvecs = _spectral(rho_mat)
        supp = rvecs[:, rvals > SUPPORT_TOL]
        pi = supp @ supp.conj().T
        type2 = float(np.real(np.trace(pi @ sigma_mat)))
        return max(type2, 0.0), pi

    target = 1.0 - eps - r0
    if target <= 1e-12:
        # enough free mass in the sigma-kernel: scale it to hit 1-eps exactly
        if r0 > 0:
            pi *= (1.0 - eps) / r0
        return 0.0, pi

    vs = svecs[:, pos]
    sv = svals[pos]
    rho_c = vs.conj().T @ rho_mat @ vs          # compressed to supp(sigma)
    rho_c = (rho_c + rho_c.conj().T) / 2
    sig_c = np.diag(sv)

    inv_half = 1.0 / np.sqrt(sv)
    rel = (rho_c * inv_half[None, :]) * inv_half[:, None]
    t_hi = float(np.linalg.eigvalsh(rel)[-1]) * (1 + 1e-9) + 1e-12
    t_lo = 0.0

    def pos_mass(t):
        vals, vecs = _spectral(rho_c - t * sig_c)
        ktol = 1e-10 * (1.0 + t)
        sel = vals > ktol
        if not np.any(sel):
            return 0.0
        w = vecs[:, sel]
        return float(np.real(np.sum((w.conj().T @ rho_c @ w).diagonal())))

    for _ in range(200):
        if t_hi - t_lo < 1e-12 * max(1.0, t_hi):
            break
        t_mid = (t_lo + t_hi) / 2
        if pos_mass(t_mid) <= target:
            t_hi = t_mid
        else:
            t_lo = t_mid

    t = t_hi
    vals, vecs = _spectral(rho_c - t * sig_c)
    ktol = 1e-10 * (1.0 + t)
    type2 = 0.0
    taken = 0.0
    pi_c = np.zeros_like(rho_c)
    for idx in range(len(vals)):   # ascending eigenvalue index
        v = vecs[:, idx]
        if vals[idx] > ktol:
            pi_c += np.outer(v, v.conj())
            taken += float(np.real(v.conj() @ rho_c @ v))
            type2 += float(np.real(v.conj() @ sig_c @ v))
    deficit = target - taken
    if deficit > 0:
        for idx in range(len(vals)):
            if abs(vals[idx]) <= ktol:
                v = vecs[:, idx]
                rw = float(np.real(v.conj() @ rho_c @ v))
                if rw <= 1e-15:
                    continue
                w = min(1.0, deficit / rw)
                pi_c += w * np.outer(v, v.conj())
                type2 += w * float(np.real(v.conj() @ sig_c @ v))
                deficit -= w * rw
                if deficit <= 1e-14:
                    break
    pi += vs @ pi_c @ vs.conj().T
    return max(type2, 0.0), pi


def dh_eps(rho, sigma, eps):
    """Hypothesis-testing relative entropy at type-I error eps (exact optimum)."""
    rho, sigma = _as_density(rho), _as_density(sigma)
    _check_same_system(rho, sigma)
    if not 0.0 <= eps < 1.0:
        raise ValueError(f"eps {eps} outside [0, 1)")
    type2, _ = _threshold_test(rho.matrix, sigma.matrix, float(eps))
    if type2 <= 1e-300:
        return EntropyValue.infinite()
    return EntropyValue(float(-np.log2(type2)))


def _hermitian_basis(d):
    """Orthonormal real basis of d x d Hermitian matrices under Tr(AB)."""
    basis = []
    for i in range(d):
        m = np.zeros((d, d), dtype=complex)
        m[i, i] = 1.0
        basis.append(m)
    inv_sqrt2 = 1.0 / np.sqrt(2.0)
    for i in range(d):
        for j in range(i + 1, d):
            m = np.zeros((d, d), dtype=complex)
            m[i, j] = inv_sqrt2
            m[j, i] = inv_sqrt2
            basis.append(m)
            m = np.zeros((d, d), dtype=complex)
            m[i, j] = 1j * inv_sqrt2
            m[j, i] = -1j * inv_sqrt2
            basis.append(m)
    return basis


def _hmin_sdp(rho_mat, d_a, d_b, gap_tol=1e-9):
    """Solve min Tr(X_B) s.t. I_A (x) X_B >= rho via a log-barrier Newton method.

    Returns (optimal trace, X_B).  The barrier parameter follows a x5 schedule
    (gap shrinks x0.2 per outer step) from an interior multiple-of-identity
    start; the duality gap at exit is (d_a*d_b)/t <= gap_tol.
    """
    d = d_a * d_b
    basis = _hermitian_basis(d_b)
    m = len(basis)
    tr_vec = np.array([float(np.real(np.trace(b))) for b in basis])
    eye_a = np.eye(d_a)

    def assemble(x):
        xb = np.zeros((d_b, d_b), dtype=complex)
        for c, b in zip(x, basis):
            xb += c * b
        return xb

    def slack(xb):
        return np.kron(eye_a, xb) - rho_mat

    lam_max = float(np.linalg.eigvalsh(rho_mat)[-1])
    x = np.zeros(m)
    x[:d_b] = lam_max * 1.001 + 1e-9   # strictly interior identity start
    t = 1.0

    def is_pd(mat):
        try:
            np.linalg.cholesky(mat + 0j)
            return True
        except np.linalg.LinAlgError:
            return False

    while d / t > gap_tol:
        for _ in range(100):
            xb = assemble(x)
            s = slack(xb)
            s_inv = np.linalg.inv(s)
            s_inv = (s_inv + s_inv.conj().T) / 2
            # Tr_A of S^{-1}
            g_mat = np.trace(s_inv.reshape(d_a, d_b, d_a, d_b), axis1=0, axis2=2)
            grad = t * tr_vec - np.array(
                [float(np.real(np.trace(g_mat @ b))) for b in basis])
            ys = np.stack([s_inv @ np.kron(eye_a, b) for b in basis])
            hess = np.real(np.einsum("aij,bji->ab", ys, ys))
            try:
                step = np.linalg.solve(hess, -grad)
            except np.linalg.LinAlgError:
                step = np.linalg.lstsq(hess, -grad, rcond=None)[0]
            decrement = float(-grad @ step)
            if decrement < 0:
                step = -grad
                decrement = float(grad @ grad)
            alpha = 1.0
            f0 = t * float(tr_vec @ x) - float(np.log(max(
                np.real(np.linalg.det(s)), 1e-300)))
            while alpha > 1e-12:
                x_new = x + alpha * step
                s_new = slack(assemble(x_new))
                if is_pd(s_new):
                    f_new = t * float(tr_vec @ x_new) - float(np.log(max(
                        np.real(np.linalg.det(s_new)), 1e-300)))
                    if f_new <= f0 - 0.25 * alpha * decrement + 1e-12:
                        break
                alpha *= 0.5
            x = x + alpha * step
            if decrement / 2 < 1e-11:
                break
        t *= 5.0
    xb = assemble(x)
    return float(np.real(np.trace(xb))), xb


def hmin(rho, partition, return_witness=False, gap_tol=1e-9):
    """Conditional min-entropy H_min(A|B) via the defining SDP.

    ``partition`` is (A labels, B labels); together they must cover the system.
    """
    rho = _as_density(rho)
    a_labels, b_labels = list(partition[0]), list(partition[1])
    if sorted(a_labels + b_labels) != sorted(rho.system.labels):
        raise ValueError("partition does not cover the system")
    ordered = permute_registers(rho, a_labels + b_labels)
    d_a = 1
    for lab in a_labels:
        d_a *= rho.system.dim_of(lab)
    d_b = ordered.system.total_dim // d_a
    opt, xb = _hmin_sdp(ordered.matrix, d_a, d_b, gap_tol=gap_tol)
    val = EntropyValue(float(-np.log2(max(opt, 1e-300))))
    if return_witness:
        return val, xb
    return val


def imax(rho, partition):
    """Max-information I_max(A:B) = D_max(rho_AB || rho_A (x) rho_B)."""
    rho = _as_density(rho)
    a_labels, b_labels = list(partition[0]), list(partition[1])
    if sorted(a_labels + b_labels) != sorted(rho.system.labels):
        raise ValueError("partition does not cover the system")
    ordered = permute_registers(rho, a_labels + b_labels)
    rho_a = partial_trace(ordered, b_labels)
    rho_b = partial_trace(ordered, a_labels)
    return dmax(ordered, tensor(rho_a, rho_b))


def check_mixture_identity(states, weights, theta):
    """Residual of D(sum_i p_i rho_i || theta) = sum_i p_i (D(rho_i||theta) - D(rho_i||rho)).

    Returns the absolute difference; inf if any term has a support violation.
    """
    states = [_as_density(s) for s in states]
    theta = _as_density(theta)
    weights = np.asarray(weights, dtype=float)
    if abs(weights.sum() - 1.0) > 1e-9 or np.any(weights < -1e-12):
        raise ValueError("weights must form a probability vector")
    mix_mat = sum(p * s.matrix for p, s in zip(weights, states))
    mix = DensityOperator(states[0].system, mix_mat, validate=False)
    lhs = relative_entropy(mix, theta)
    rhs = 0.0
    for p, s in zip(weights, states):
        if p <= 0:
            continue
        d_theta = relative_entropy(s, theta)
        d_mix = relative_entropy(s, mix)
        if not (d_theta.finite and d_mix.finite):
            return float("inf")
        rhs += p * (d_theta.value - d_mix.value)
    if not lhs.finite:
        return float("inf")
    return abs(lhs.value - rhs)


def transpose_unitary(unitary, dim):
    """Transpose method: U^T with (U (x) I)|Phi> = (I (x) U^T)|Phi> verified."""
    u = np.asarray(unitary, dtype=complex)
    if u.shape != (dim, dim):
        raise ValueError(f"expected a {dim} x {dim} matrix")
    if float(np.max(np.abs(u.conj().T @ u - np.eye(dim)))) > 1e-9:
        raise ValueError("input is not unitary within tolerance")
    ut = u.T.copy()
    phi = np.eye(dim, dtype=complex).reshape(-1) / np.sqrt(dim)
    lhs = np.kron(u, np.eye(dim)) @ phi
    rhs = np.kron(np.eye(dim), ut) @ phi
    if float(np.max(np.abs(lhs - rhs))) > 1e-9:
        raise AssertionError("transpose identity failed beyond tolerance")
    return ut
