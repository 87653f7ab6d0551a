"""Register-labeled dense complex linear algebra.

Every state in the toolkit is a dense matrix or vector over an ordered list of
labeled tensor factors (a :class:`RegisterSystem`).  Registers are addressed by
string label because the protocols relabel and permute factors constantly.
Dimensions stay small (a few thousand at most), so everything is dense numpy.
"""

from __future__ import annotations

import numpy as np

HERMITICITY_TOL = 1e-9
TRACE_TOL = 1e-9
EIG_FLOOR = 1e-9
NORM_TOL = 1e-9

# Above this side length, constructor-time PSD checks are skipped (O(d^3)).
_PSD_CHECK_MAX_DIM = 512


class RegisterSystem:
    """Ordered labeled tensor factors with dimensions."""

    def __init__(self, registers):
        regs = tuple((str(label), int(dim)) for label, dim in registers)
        labels = [lab for lab, _ in regs]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate register labels in {labels}")
        for lab, dim in regs:
            if dim < 1:
                raise ValueError(f"register {lab!r} has dimension {dim} < 1")
        self.registers = regs

    @property
    def labels(self):
        return tuple(lab for lab, _ in self.registers)

    @property
    def dims(self):
        return tuple(dim for _, dim in self.registers)

    @property
    def total_dim(self):
        out = 1
        for _, dim in self.registers:
            out *= dim
        return out

    def dim_of(self, label):
        for lab, dim in self.registers:
            if lab == label:
                return dim
        raise KeyError(f"no register labeled {label!r}")

    def position(self, label):
        for k, (lab, _) in enumerate(self.registers):
            if lab == label:
                return k
        raise KeyError(f"no register labeled {label!r}")

    def subsystem(self, labels):
        return RegisterSystem([(lab, self.dim_of(lab)) for lab in labels])

    def __eq__(self, other):
        return isinstance(other, RegisterSystem) and self.registers == other.registers

    def __hash__(self):
        return hash(self.registers)

    def __len__(self):
        return len(self.registers)

    def __repr__(self):
        inner = ", ".join(f"{lab}:{dim}" for lab, dim in self.registers)
        return f"RegisterSystem({inner})"


def _check_hermitian(matrix, tol=HERMITICITY_TOL):
    return float(np.max(np.abs(matrix - matrix.conj().T))) <= tol


class DensityOperator:
    """Complex square matrix over a RegisterSystem, Hermitian and PSD.

    ``subnormalized=True`` permits trace <= 1 (used for intermediate
    sub-normalized states); otherwise trace must be 1 within tolerance.
    """

    def __init__(self, system, matrix, subnormalized=False, validate=True):
        self.system = system
        mat = np.asarray(matrix, dtype=complex)
        d = system.total_dim
        if mat.shape != (d, d):
            raise ValueError(f"matrix shape {mat.shape} != ({d}, {d})")
        self.matrix = mat
        self.subnormalized = subnormalized
        if validate:
            self._validate()

    def _validate(self):
        if not _check_hermitian(self.matrix):
            raise ValueError("matrix is not Hermitian within tolerance")
        tr = float(np.real(np.trace(self.matrix)))
        if self.subnormalized:
            if tr > 1.0 + TRACE_TOL or tr < -TRACE_TOL:
                raise ValueError(f"sub-normalized trace {tr} outside [0, 1]")
        elif abs(tr - 1.0) > TRACE_TOL:
            raise ValueError(f"trace {tr} != 1 within tolerance")
        if self.system.total_dim <= _PSD_CHECK_MAX_DIM:
            lam_min = float(np.linalg.eigvalsh(self.matrix)[0])
            if lam_min < -EIG_FLOOR:
                raise ValueError(f"negative eigenvalue {lam_min}")

    @property
    def total_dim(self):
        return self.system.total_dim

    def trace(self):
        return float(np.real(np.trace(self.matrix)))

    def purity(self):
        return float(np.real(np.trace(self.matrix @ self.matrix)))

    def __repr__(self):
        return f"DensityOperator({self.system!r})"


class PureState:
    """Complex unit vector over a RegisterSystem."""

    def __init__(self, system, vector, validate=True):
        self.system = system
        vec = np.asarray(vector, dtype=complex).reshape(-1)
        if vec.shape != (system.total_dim,):
            raise ValueError(f"vector length {vec.shape[0]} != {system.total_dim}")
        self.vector = vec
        if validate and abs(np.linalg.norm(vec) - 1.0) > NORM_TOL:
            raise ValueError(f"norm {np.linalg.norm(vec)} != 1 within tolerance")

    def density(self):
        return DensityOperator(self.system, np.outer(self.vector, self.vector.conj()),
                               validate=False)

    def __repr__(self):
        return f"PureState({self.system!r})"


def _as_density(state):
    return state.density() if isinstance(state, PureState) else state


def tensor(*ops):
    """Kronecker product of density operators; register lists concatenate."""
    ops = [_as_density(op) for op in ops]
    if len(ops) < 2:
        raise ValueError("tensor needs at least two operators")
    labels = [lab for op in ops for lab in op.system.labels]
    if len(set(labels)) != len(labels):
        raise ValueError(f"label collision in tensor product: {labels}")
    system = RegisterSystem([rd for op in ops for rd in op.system.registers])
    mat = ops[0].matrix
    for op in ops[1:]:
        mat = np.kron(mat, op.matrix)
    sub = any(op.subnormalized for op in ops)
    return DensityOperator(system, mat, subnormalized=sub, validate=False)


def tensor_pure(*states):
    """Kronecker product of pure states."""
    labels = [lab for st in states for lab in st.system.labels]
    if len(set(labels)) != len(labels):
        raise ValueError(f"label collision in tensor product: {labels}")
    system = RegisterSystem([rd for st in states for rd in st.system.registers])
    vec = states[0].vector
    for st in states[1:]:
        vec = np.kron(vec, st.vector)
    return PureState(system, vec, validate=False)


def partial_trace(op, drop):
    """Marginal after tracing out the registers in ``drop`` (order preserved)."""
    op = _as_density(op)
    drop = set(drop)
    for lab in drop:
        if lab not in op.system.labels:
            raise KeyError(f"unknown label {lab!r}")
    keep = [lab for lab in op.system.labels if lab not in drop]
    dims = list(op.system.dims)
    n = len(dims)
    tens = op.matrix.reshape(dims + dims)
    # trace out from the rightmost dropped factor to keep axis indices stable
    positions = sorted((op.system.position(lab) for lab in drop), reverse=True)
    for pos in positions:
        tens = np.trace(tens, axis1=pos, axis2=pos + len(dims))
        dims.pop(pos)
    d_keep = 1
    for d in dims:
        d_keep *= d
    system = op.system.subsystem(keep) if keep else RegisterSystem([("scalar", 1)])
    mat = tens.reshape(d_keep, d_keep)
    return DensityOperator(system, mat, subnormalized=op.subnormalized, validate=False)


def permute_registers(op, new_order):
    """Same operator on the reordered tensor factorization; involutive."""
    op = _as_density(op)
    new_order = list(new_order)
    if sorted(new_order) != sorted(op.system.labels):
        raise ValueError(f"{new_order} is not a permutation of {op.system.labels}")
    perm = [op.system.position(lab) for lab in new_order]
    dims = op.system.dims
    n = len(dims)
    tens = op.matrix.reshape(dims + dims)
    tens = tens.transpose(perm + [p + n for p in perm])
    system = op.system.subsystem(new_order)
    d = op.system.total_dim
    return DensityOperator(system, tens.reshape(d, d),
                           subnormalized=op.subnormalized, validate=False)


def eig_hermitian(op):
    """Eigenvalues (descending) and eigenvectors of a Hermitian operator."""
    mat = op.matrix if isinstance(op, DensityOperator) else np.asarray(op, dtype=complex)
    if not _check_hermitian(mat, tol=1e-8):
        raise ValueError("input is not Hermitian within tolerance")
    vals, vecs = np.linalg.eigh(mat)
    return vals[::-1].copy(), vecs[:, ::-1].copy()


def sqrtm_psd(matrix):
    """Hermitian square root with eigenvalues clamped to [0, inf)."""
    vals, vecs = np.linalg.eigh(matrix)
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.conj().T


def fidelity(rho, sigma):
    """F(rho, sigma) = || sqrt(rho) sqrt(sigma) ||_1, via one Hermitian eigensolve."""
    rho, sigma = _as_density(rho), _as_density(sigma)
    if rho.system.dims != sigma.system.dims:
        raise ValueError("dimension mismatch")
    s = sqrtm_psd(rho.matrix)
    vals = np.linalg.eigvalsh(s @ sigma.matrix @ s)
    # eigensolve noise ~1e-16 inflates to ~1e-8 under sqrt; clip relative to top
    floor = max(vals[-1], 0.0) * 1e-13
    vals = np.where(vals > floor, vals, 0.0)
    f = float(np.sum(np.sqrt(vals)))
    return min(f, 1.0) if f <= 1.0 + 1e-7 else f


def purified_distance(rho, sigma):
    """P(rho, sigma) = sqrt(1 - F^2)."""
    f = fidelity(rho, sigma)
    return float(np.sqrt(max(0.0, 1.0 - f * f)))


def canonical_purification(rho, mirror_label):
    """Purification (sqrt(rho) (x) I) sum_i |i>|i> on system (A, mirror)."""
    rho = _as_density(rho)
    if len(rho.system) != 1:
        raise ValueError("canonical purification expects a single-register state")
    lab, d = rho.system.registers[0]
    if mirror_label == lab:
        raise ValueError("mirror label must differ from the state's label")
    vec = sqrtm_psd(rho.matrix).reshape(-1)  # row-major: component (a, b) = sqrt(rho)[a, b]
    system = RegisterSystem([(lab, d), (mirror_label, d)])
    vec = vec / np.linalg.norm(vec)
    return PureState(system, vec, validate=False)


def maximally_mixed(system):
    d = system.total_dim
    return DensityOperator(system, np.eye(d) / d, validate=False)


def basis_state(system, index):
    """Computational basis state |index> (flat index into the joint basis)."""
    d = system.total_dim
    if not 0 <= index < d:
        raise ValueError(f"basis index {index} out of range for dim {d}")
    vec = np.zeros(d, dtype=complex)
    vec[index] = 1.0
    return PureState(system, vec, validate=False)


def maximally_entangled(label_a, label_b, dim):
    """(1/sqrt(d)) sum_i |i>_A |i>_B."""
    system = RegisterSystem([(label_a, dim), (label_b, dim)])
    vec = np.eye(dim, dtype=complex).reshape(-1) / np.sqrt(dim)
    return PureState(system, vec, validate=False)


def random_density(seed, system, rank=None):
    """Seeded random density operator of the given rank (Ginibre construction)."""
    d = system.total_dim
    rank = d if rank is None else int(rank)
    if not 1 <= rank <= d:
        raise ValueError(f"rank {rank} out of range [1, {d}]")
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((d, rank)) + 1j * rng.standard_normal((d, rank))
    mat = g @ g.conj().T
    mat /= np.real(np.trace(mat))
    mat = (mat + mat.conj().T) / 2
    return DensityOperator(system, mat, validate=False)


def random_pure(seed, system):
    """Seeded Haar-random pure state via a normalized complex Gaussian vector."""
    d = system.total_dim
    rng = np.random.default_rng(seed)
    vec = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return PureState(system, vec / np.linalg.norm(vec), validate=False)


def apply_unitary(op, unitary, labels):
    """Conjugate by a unitary acting on the contiguous-by-label subsystem.

    The unitary's dimension must match the product of the named registers'
    dimensions; the registers need not be adjacent in the system order.
    """
    op = _as_density(op)
    labels = list(labels)
    rest = [lab for lab in op.system.labels if lab not in labels]
    moved = permute_registers(op, labels + rest)
    d_act = 1
    for lab in labels:
        d_act *= op.system.dim_of(lab)
    u = np.asarray(unitary, dtype=complex)
    if u.shape != (d_act, d_act):
        raise ValueError(f"unitary shape {u.shape} != ({d_act}, {d_act})")
    d_rest = moved.system.total_dim // d_act
    full = np.kron(u, np.eye(d_rest))
    out = DensityOperator(moved.system, full @ moved.matrix @ full.conj().T,
                          subnormalized=op.subnormalized, validate=False)
    return permute_registers(out, op.system.labels)


def dump_matrix(op, fh):
    """Write row-major complex pairs, full precision decimal, one row per line."""
    mat = _as_density(op).matrix
    for row in mat:
        fh.write(" ".join(f"{float(z.real)!r} {float(z.imag)!r}" for z in row) + "\n")
