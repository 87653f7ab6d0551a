"""Reversible-circuit synthesis of the classical decoupling unitary.

Gate set is {X, CNOT, TOFFOLI}.  Modular arithmetic is schoolbook: a Cuccaro
ripple-carry adder, compare-and-conditional-subtract reduction, and per-bit
controlled shift-adds keyed to the control register's binary expansion.  Every
helper register is returned to zero on all valid inputs, so fragments compose
and blocks invert by reversing the gate list.

Wire values are little-endian: wire 0 of a register is the least significant
bit.  Valid data inputs are values below the modulus; behavior outside that
range is unspecified.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Gate:
    kind: str
    target: int
    controls: tuple = ()

    def __post_init__(self):
        expected = {"X": 0, "CNOT": 1, "TOF": 2}.get(self.kind)
        if expected is None:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if len(self.controls) != expected:
            raise ValueError(f"{self.kind} expects {expected} controls")
        wires = (self.target,) + self.controls
        if len(set(wires)) != len(wires):
            raise ValueError(f"gate wires must be distinct: {wires}")

    @property
    def wires(self):
        return self.controls + (self.target,)


@dataclass
class ReversibleCircuit:
    """Gate list over labeled wires with role bookkeeping."""

    wire_count: int
    roles: list
    gates: list = field(default_factory=list)

    def __post_init__(self):
        if len(self.roles) != self.wire_count:
            raise ValueError("one role per wire required")

    def inverse(self):
        """X/CNOT/TOFFOLI are involutions, so the inverse is the reversed list."""
        return ReversibleCircuit(self.wire_count, list(self.roles),
                                 list(reversed(self.gates)))

    def ancilla_wires(self):
        return [w for w, r in enumerate(self.roles) if r in ("ancilla", "scratch")]


@dataclass(frozen=True)
class CircuitMetrics:
    size: int
    depth: int
    ancilla_count: int


def metrics(circuit):
    """Gate count, ASAP-layered depth, and ancilla count."""
    layer = [0] * circuit.wire_count
    depth = 0
    for g in circuit.gates:
        lev = 1 + max((layer[w] for w in g.wires), default=0)
        for w in g.wires:
            layer[w] = lev
        depth = max(depth, lev)
    return CircuitMetrics(len(circuit.gates), depth, len(circuit.ancilla_wires()))


def simulate_basis(circuit, bits):
    """Classical simulation of one basis input; returns the same kind as given."""
    was_str = isinstance(bits, str)
    state = [int(b) for b in bits]
    if len(state) != circuit.wire_count:
        raise ValueError(f"input length {len(state)} != wire count {circuit.wire_count}")
    for g in circuit.gates:
        if all(state[c] for c in g.controls):
            state[g.target] ^= 1
    return "".join(map(str, state)) if was_str else state


def simulate_table(circuit, inputs):
    """Vectorized simulation of many basis inputs (rows of a 0/1 array)."""
    state = np.array(inputs, dtype=bool)
    if state.shape[1] != circuit.wire_count:
        raise ValueError("input width mismatch")
    for g in circuit.gates:
        if g.kind == "X":
            state[:, g.target] ^= True
        elif g.kind == "CNOT":
            state[:, g.target] ^= state[:, g.controls[0]]
        else:
            state[:, g.target] ^= state[:, g.controls[0]] & state[:, g.controls[1]]
    return state


def circuit_to_text(circuit):
    lines = [f"wires={circuit.wire_count} roles={','.join(circuit.roles)}"]
    for g in circuit.gates:
        if g.kind == "X":
            lines.append(f"X {g.target}")
        elif g.kind == "CNOT":
            lines.append(f"CNOT {g.controls[0]} {g.target}")
        else:
            lines.append(f"TOF {g.controls[0]} {g.controls[1]} {g.target}")
    return "\n".join(lines) + "\n"


def circuit_from_text(text):
    lines = [ln for ln in text.strip().split("\n") if ln.strip()]
    head = lines[0]
    if not head.startswith("wires="):
        raise ValueError("missing header line")
    wires_part, roles_part = head.split(" roles=")
    wire_count = int(wires_part.split("=")[1])
    roles = roles_part.split(",") if roles_part else []
    gates = []
    for ln in lines[1:]:
        parts = ln.split()
        if parts[0] == "X":
            gates.append(Gate("X", int(parts[1])))
        elif parts[0] == "CNOT":
            gates.append(Gate("CNOT", int(parts[2]), (int(parts[1]),)))
        elif parts[0] == "TOF":
            gates.append(Gate("TOF", int(parts[3]), (int(parts[1]), int(parts[2]))))
        else:
            raise ValueError(f"unknown gate line {ln!r}")
    return ReversibleCircuit(wire_count, roles, gates)


class _Builder:
    """Sequential wire allocator and gate emitter for arithmetic fragments."""

    def __init__(self):
        self.roles = []
        self.gates = []

    def alloc(self, count, role):
        start = len(self.roles)
        self.roles.extend([role] * count)
        return list(range(start, start + count))

    def x(self, t):
        self.gates.append(Gate("X", t))

    def cnot(self, c, t):
        self.gates.append(Gate("CNOT", t, (c,)))

    def tof(self, c1, c2, t):
        self.gates.append(Gate("TOF", t, (c1, c2)))

    def swap(self, a, b):
        self.cnot(a, b)
        self.cnot(b, a)
        self.cnot(a, b)

    def emit_inverse(self, emit_fn):
        """Run ``emit_fn`` and replace its output with the reversed gate list."""
        start = len(self.gates)
        emit_fn()
        block = self.gates[start:]
        del self.gates[start:]
        self.gates.extend(reversed(block))

    # --- ripple-carry addition (target += addend mod 2^width) ---

    def cuccaro_add(self, addend, target, cin, cout=None):
        if len(addend) != len(target):
            raise ValueError("adder registers must have equal width")
        n = len(addend)
        carries = [cin] + addend[:-1]
        for i in range(n):
            c, b, a = carries[i], target[i], addend[i]
            self.cnot(a, b)
            self.cnot(a, c)
            self.tof(c, b, a)
        if cout is not None:
            self.cnot(addend[-1], cout)
        for i in reversed(range(n)):
            c, b, a = carries[i], target[i], addend[i]
            self.tof(c, b, a)
            self.cnot(a, c)
            self.cnot(c, b)

    def sub_with_borrow(self, addend, target, cin, borrow=None):
        """target -= addend mod 2^width; borrow ^= [target < addend]."""
        for w in target:
            self.x(w)
        self.cuccaro_add(addend, target, cin, cout=borrow)
        for w in target:
            self.x(w)


class _ModularUnit:
    """Shared scratch block for modular arithmetic over one modulus."""

    def __init__(self, builder, modulus):
        if modulus < 2:
            raise ValueError("modulus must be >= 2")
        self.b = builder
        self.modulus = modulus
        self.n = max(1, (modulus - 1).bit_length())
        self.w = builder.alloc(self.n + 1, "scratch")       # universal addend
        self.c0 = builder.alloc(1, "ancilla")[0]            # adder carry-in
        self.flag = builder.alloc(1, "ancilla")[0]          # compare flag

    def alloc_value_register(self, role="scratch"):
        """n data wires plus one top scratch bit, all starting at 0."""
        return self.b.alloc(self.n + 1, role)

    # addend loaders XOR a value into the scratch register self.w
    def _load_const(self, value, ctrl=None):
        for bit in range(self.n + 1):
            if (value >> bit) & 1:
                if ctrl is None:
                    self.b.x(self.w[bit])
                else:
                    self.b.cnot(ctrl, self.w[bit])

    def _load_reg(self, src, ctrl=None):
        for bit in range(self.n):
            if ctrl is None:
                self.b.cnot(src[bit], self.w[bit])
            else:
                self.b.tof(ctrl, src[bit], self.w[bit])

    def _mod_add_core(self, target, loader):
        """target = (target + addend) mod modulus, addend provided by ``loader``.

        ``target`` is a value register (n + 1 wires, top scratch).  The loader
        is invoked four times: load/unload around the addition and again
        around the flag-uncomputing comparison.
        """
        b, big_n = self.b, self.modulus
        loader()
        b.cuccaro_add(self.w, target, self.c0)
        loader()  # unload: the loader XORs, so a second call clears
        self._load_const(big_n)
        b.sub_with_borrow(self.w, target, self.c0, borrow=self.flag)
        self._load_const(big_n)
        self._load_const(big_n, ctrl=self.flag)
        b.cuccaro_add(self.w, target, self.c0)
        self._load_const(big_n, ctrl=self.flag)
        b.x(self.flag)
        loader()
        b.sub_with_borrow(self.w, target, self.c0, borrow=self.flag)
        b.cuccaro_add(self.w, target, self.c0)
        loader()

    def add_reg(self, src, target, ctrl=None):
        self._mod_add_core(target, lambda: self._load_reg(src, ctrl))

    def add_const(self, value, target, ctrl=None):
        value %= self.modulus
        self._mod_add_core(target, lambda: self._load_const(value, ctrl))

    def sub_reg(self, src, target, ctrl=None):
        self.b.emit_inverse(lambda: self.add_reg(src, target, ctrl))

    def double(self, target):
        """target = 2 * target mod modulus (modulus odd)."""
        if self.modulus % 2 == 0:
            raise ValueError("doubling trick requires an odd modulus")
        b, n, big_n = self.b, self.n, self.modulus
        for i in range(n, 0, -1):      # left shift through the top scratch bit
            b.swap(target[i], target[i - 1])
        self._load_const(big_n)
        b.sub_with_borrow(self.w, target, self.c0, borrow=self.flag)
        self._load_const(big_n)
        self._load_const(big_n, ctrl=self.flag)
        b.cuccaro_add(self.w, target, self.c0)
        self._load_const(big_n, ctrl=self.flag)
        # flag = [2x < modulus]; the reduced value's parity uncomputes it
        b.x(self.flag)
        b.cnot(target[0], self.flag)

    def undouble(self, target):
        self.b.emit_inverse(lambda: self.double(target))

    def mult_accumulate(self, source, ell_wires, targets, subtract=False):
        """targets +-= (source * ell) mod N with ell read from control wires.

        The shifted source (source * 2^bit mod N) lives in a doubling register
        rebuilt from ``source`` and cleared afterwards.
        """
        b = self.b
        ds = self._mult_scratch
        for bit in range(self.n):
            b.cnot(source[bit], ds[bit])
        for bit, ctrl in enumerate(ell_wires):
            for target in targets:
                if subtract:
                    self.sub_reg(ds, target, ctrl=ctrl)
                else:
                    self.add_reg(ds, target, ctrl=ctrl)
            if bit < len(ell_wires) - 1:
                self.double(ds)
        for _ in range(len(ell_wires) - 1):
            self.undouble(ds)
        for bit in range(self.n):
            b.cnot(source[bit], ds[bit])


def _finish(builder):
    return ReversibleCircuit(len(builder.roles), builder.roles, builder.gates)


def synth_mod_add(modulus):
    """|x>|y> -> |x>|(y + x) mod modulus> with x on wires [0, n), y on [n, 2n).

    n is the bit width of modulus - 1; all remaining wires are restored
    scratch/ancilla.
    """
    b = _Builder()
    n = max(1, (modulus - 1).bit_length())
    x = b.alloc(n, "data")
    y = b.alloc(n, "data")
    top = b.alloc(1, "scratch")[0]
    unit = _ModularUnit(b, modulus)
    unit.add_reg(x, y + [top])
    return _finish(b)


def synth_mod_mul_const(modulus, constant):
    """|x> -> |constant * x mod modulus> in place, for invertible constant.

    Schoolbook multiply-accumulate into a zero register per set bit of x,
    swap, then clear the stale value with the inverse constant.
    """
    constant %= modulus
    if np.gcd(constant, modulus) != 1:
        raise ValueError(f"{constant} is not invertible modulo {modulus}")
    inv = pow(constant, -1, modulus)
    b = _Builder()
    n = max(1, (modulus - 1).bit_length())
    x = b.alloc(n, "data")
    unit = _ModularUnit(b, modulus)
    acc = unit.alloc_value_register()
    for bit in range(n):
        unit.add_const((constant << bit) % modulus, acc, ctrl=x[bit])
    for i in range(n):
        b.swap(x[i], acc[i])
    for bit in range(n):
        b.emit_inverse(lambda v=(inv << bit) % modulus, c=x[bit]:
                       unit.add_const(v, acc, ctrl=c))
    return _finish(b)


def synth_decoupler(c_dim, g_prime, l_size):
    """Circuit acting as |i>|j>|l> -> |i + (j-i)l>|j + (j-i)l>|l> mod g_prime.

    Compute-swap-uncompute: fresh registers receive the rotated pair, are
    swapped with the data registers, and the stale values are cleared via
    i = new1 + l*(new1 - new2) and j = new2 + l*(new1 - new2).  The control on
    l decomposes into per-bit controlled shift-adds.  All helper wires return
    to zero on valid inputs (i, j < g_prime, l < l_size).
    """
    if g_prime < 2 or any(g_prime % p == 0 for p in range(2, int(g_prime ** 0.5) + 1)):
        raise ValueError(f"{g_prime} is not prime")
    if not c_dim * c_dim <= g_prime <= 2 * c_dim * c_dim:
        raise ValueError(f"prime {g_prime} outside [{c_dim ** 2}, {2 * c_dim ** 2}]")
    if not 1 <= l_size <= g_prime:
        raise ValueError(f"l_size {l_size} outside [1, {g_prime}]")
    b = _Builder()
    n = max(1, (g_prime - 1).bit_length())
    l_bits = max(1, (l_size - 1).bit_length())
    i_reg = b.alloc(n, "g1-data")
    j_reg = b.alloc(n, "g2-data")
    l_reg = b.alloc(l_bits, "l-control")
    unit = _ModularUnit(b, g_prime)
    p1 = unit.alloc_value_register()
    p2 = unit.alloc_value_register()
    t = unit.alloc_value_register()
    unit._mult_scratch = unit.alloc_value_register()

    # compute: p1 <- i + (j - i) l, p2 <- j + (j - i) l
    unit.add_reg(j_reg, t)
    unit.sub_reg(i_reg, t)
    unit.add_reg(i_reg, p1)
    unit.add_reg(j_reg, p2)
    unit.mult_accumulate(t, l_reg, [p1, p2])
    unit.add_reg(i_reg, t)
    unit.sub_reg(j_reg, t)

    for a, c in zip(i_reg, p1):
        b.swap(a, c)
    for a, c in zip(j_reg, p2):
        b.swap(a, c)

    # uncompute: p1/p2 hold old i/j = new + l*(new1 - new2)
    unit.add_reg(i_reg, t)
    unit.sub_reg(j_reg, t)
    unit.sub_reg(i_reg, p1)
    unit.sub_reg(j_reg, p2)
    unit.mult_accumulate(t, l_reg, [p1, p2], subtract=True)
    unit.add_reg(j_reg, t)
    unit.sub_reg(i_reg, t)

    return _finish(b)


def synth_swap(wire_a=0, wire_b=1):
    """Two-wire swap fragment: three CNOT gates, depth three."""
    b = _Builder()
    b.alloc(max(wire_a, wire_b) + 1, "data")
    b.swap(wire_a, wire_b)
    return _finish(b)


def encode_decoupler_input(n_bits, l_bits, i, j, ell, wire_count):
    """Little-endian bit layout matching synth_decoupler's wire allocation."""
    bits = [0] * wire_count
    for k in range(n_bits):
        bits[k] = (i >> k) & 1
        bits[n_bits + k] = (j >> k) & 1
    for k in range(l_bits):
        bits[2 * n_bits + k] = (ell >> k) & 1
    return bits
