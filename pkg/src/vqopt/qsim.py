"""Dense statevector circuit simulator with per-gate noise injection.

Gates are drawn from {RX, RY, RZ, H, CNOT}. After every non-RZ gate the
noisy executor applies a same-axis rotation with angle drawn from
Normal(mu, sigma^2) plus a small orthogonal-axis rotation with angle from
Normal(0, (ortho_fraction*sigma)^2). RZ is treated as noise-free. CNOT
receives independent noise rotations on control and target, both scaled by
``cnot_factor``.

States are stored batched, shape (samples, 2**q), with big-endian qubit
ordering: basis index of |q0 q1 ... q_{n-1}> is sum q_i * 2**(n-1-i).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .core import ContractViolation, substream

_SQ2 = 1.0 / math.sqrt(2.0)

_ONE_QUBIT_KINDS = ("RX", "RY", "RZ", "H")

# (main axis, orthogonal axis) used for noise rotations, per gate kind.
# H rotates about (X+Z)/sqrt(2); its orthogonal component is taken along Y.
_NOISE_AXES = {
    "RX": ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0)),
    "RY": ((0.0, 1.0, 0.0), (0.0, 0.0, 1.0)),
    "H": ((_SQ2, 0.0, _SQ2), (0.0, 1.0, 0.0)),
    "CNOT": ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0)),
}


@dataclass(frozen=True)
class Gate:
    kind: str
    targets: Tuple[int, ...]
    angle: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("RX", "RY", "RZ", "H", "CNOT"):
            raise ContractViolation(f"unknown gate kind {self.kind!r}")
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        if self.kind == "CNOT":
            if len(self.targets) != 2 or self.targets[0] == self.targets[1]:
                raise ContractViolation("CNOT needs distinct control and target")
            if self.angle is not None:
                raise ContractViolation("CNOT takes no angle")
        else:
            if len(self.targets) != 1:
                raise ContractViolation(f"{self.kind} acts on exactly one qubit")
            if self.kind == "H":
                if self.angle is not None:
                    raise ContractViolation("H takes no angle")
            elif self.angle is None:
                raise ContractViolation(f"{self.kind} requires an angle")


@dataclass(frozen=True)
class Circuit:
    n_qubits: int
    gates: Tuple[Gate, ...]

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        if self.n_qubits < 1 or self.n_qubits > 12:
            raise ContractViolation("qubit count must be in [1, 12]")
        for g in self.gates:
            if any(t < 0 or t >= self.n_qubits for t in g.targets):
                raise ContractViolation("gate target out of range")


@dataclass(frozen=True)
class NoiseSpec:
    """Coherent offset, stochastic width (radians), orthogonal fraction."""

    mu: float = 0.0
    sigma: float = 0.0
    ortho_fraction: float = 0.1
    cnot_factor: float = 2.0

    def __post_init__(self):
        if self.sigma < 0:
            raise ContractViolation("sigma must be nonnegative")
        if self.ortho_fraction < 0:
            raise ContractViolation("ortho_fraction must be nonnegative")
        if self.cnot_factor < 1:
            raise ContractViolation("cnot_factor must be >= 1")

    @property
    def silent(self) -> bool:
        return self.mu == 0.0 and self.sigma == 0.0


@dataclass(frozen=True)
class PauliSum:
    """Weighted sum of Pauli strings (real coefficients, Hermitian)."""

    terms: Tuple[Tuple[float, str], ...]

    def __post_init__(self):
        terms = tuple((float(c), str(s).upper()) for c, s in self.terms)
        object.__setattr__(self, "terms", terms)
        if not terms:
            raise ContractViolation("PauliSum needs at least one term")
        n = len(terms[0][1])
        for _, s in terms:
            if len(s) != n or any(ch not in "IXYZ" for ch in s):
                raise ContractViolation(f"malformed pauli string {s!r}")

    @property
    def n_qubits(self) -> int:
        return len(self.terms[0][1])

    def to_dense(self) -> np.ndarray:
        mats = {
            "I": np.eye(2, dtype=complex),
            "X": np.array([[0, 1], [1, 0]], dtype=complex),
            "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
            "Z": np.array([[1, 0], [0, -1]], dtype=complex),
        }
        dim = 2 ** self.n_qubits
        out = np.zeros((dim, dim), dtype=complex)
        for coeff, s in self.terms:
            m = np.array([[1.0]], dtype=complex)
            for ch in s:
                m = np.kron(m, mats[ch])
            out += coeff * m
        return out

    def to_text(self) -> str:
        return "\n".join(f"{c!r} {s}" for c, s in self.terms) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "PauliSum":
        terms = []
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ContractViolation(f"line {lineno}: expected 'coeff pauli-string'")
            terms.append((float(parts[0]), parts[1]))
        return cls(tuple(terms))


# ---------------------------------------------------------------------------
# gate application


def _rotation_matrix(axis, angle) -> np.ndarray:
    """exp(-i*angle/2 * axis.sigma); angle may be an array (batched)."""
    ax, ay, az = axis
    angle = np.asarray(angle, dtype=float)
    c = np.cos(angle / 2.0)
    s = np.sin(angle / 2.0)
    m = np.empty(angle.shape + (2, 2), dtype=complex)
    m[..., 0, 0] = c - 1j * az * s
    m[..., 0, 1] = (-1j * ax - ay) * s
    m[..., 1, 0] = (-1j * ax + ay) * s
    m[..., 1, 1] = c + 1j * az * s
    return m


def gate_matrix(gate: Gate) -> np.ndarray:
    """2x2 matrix of a one-qubit gate."""
    if gate.kind == "RX":
        return _rotation_matrix((1, 0, 0), gate.angle)
    if gate.kind == "RY":
        return _rotation_matrix((0, 1, 0), gate.angle)
    if gate.kind == "RZ":
        return _rotation_matrix((0, 0, 1), gate.angle)
    if gate.kind == "H":
        return np.array([[_SQ2, _SQ2], [_SQ2, -_SQ2]], dtype=complex)
    raise ContractViolation(f"{gate.kind} has no one-qubit matrix")


def _apply_1q(states: np.ndarray, n_qubits: int, qubit: int, mat: np.ndarray) -> np.ndarray:
    """Apply a 2x2 matrix (shared, or one per sample) to one qubit of (S, 2^q)."""
    s = states.shape[0]
    left = 2 ** qubit
    right = 2 ** (n_qubits - 1 - qubit)
    view = states.reshape(s, left, 2, right)
    if mat.ndim == 2:
        out = np.einsum("ab,slbr->slar", mat, view)
    else:
        out = np.einsum("sab,slbr->slar", mat, view)
    return np.ascontiguousarray(out.reshape(s, -1))


def _cnot_permutation(n_qubits: int, control: int, target: int) -> np.ndarray:
    idx = np.arange(2 ** n_qubits)
    cbit = 1 << (n_qubits - 1 - control)
    tbit = 1 << (n_qubits - 1 - target)
    return np.where(idx & cbit, idx ^ tbit, idx)


def apply_gate(states: np.ndarray, n_qubits: int, gate: Gate) -> np.ndarray:
    """Unitary update of batched states (norm preserving)."""
    if gate.kind == "CNOT":
        perm = _cnot_permutation(n_qubits, *gate.targets)
        return states[:, perm]
    return _apply_1q(states, n_qubits, gate.targets[0], gate_matrix(gate))


def zero_state(n_qubits: int, n_samples: int = 1) -> np.ndarray:
    states = np.zeros((n_samples, 2 ** n_qubits), dtype=complex)
    states[:, 0] = 1.0
    return states


def execute(circuit: Circuit, n_samples: int = 1) -> np.ndarray:
    """Noiseless execution from |0...0>, returning (n_samples, 2^q)."""
    states = zero_state(circuit.n_qubits, n_samples)
    for gate in circuit.gates:
        states = apply_gate(states, circuit.n_qubits, gate)
    return states


# ---------------------------------------------------------------------------
# noise injection


def noise_slots(circuit: Circuit) -> List[Tuple[int, str, float]]:
    """(qubit, axes-key, scale-factor) per noise rotation, in application order."""
    slots = []
    for gate in circuit.gates:
        if gate.kind == "RZ":
            continue
        if gate.kind == "CNOT":
            control, target = gate.targets
            slots.append((control, "CNOT", 1.0))
            slots.append((target, "CNOT", 1.0))
        else:
            slots.append((gate.targets[0], gate.kind, 0.0))
    return slots


def draw_noise_angles(circuit: Circuit, noise: NoiseSpec, seed: int,
                      stream_ids: Sequence[int]) -> np.ndarray:
    """Noise angles per (sample, slot, main/ortho); pure in (seed, stream_id).

    Slot count and order depend only on the circuit structure, so draws are
    reproducible regardless of how executions are scheduled.
    """
    slots = noise_slots(circuit)
    n_slots = len(slots)
    factors = np.array(
        [noise.cnot_factor if key == "CNOT" else 1.0 for _, key, _ in slots]
    )
    angles = np.zeros((len(stream_ids), n_slots, 2))
    for i, sid in enumerate(stream_ids):
        if n_slots == 0:
            continue
        z = substream(seed, sid).standard_normal((n_slots, 2))
        angles[i, :, 0] = factors * (noise.mu + noise.sigma * z[:, 0])
        angles[i, :, 1] = factors * (noise.ortho_fraction * noise.sigma * z[:, 1])
    return angles


def _noise_matrices(circuit: Circuit, angles: np.ndarray) -> np.ndarray:
    """Combined ortho*main noise rotations, (n_samples, n_slots, 2, 2).

    Built one axes group at a time so the per-matrix work is a few
    vectorized calls rather than a Python loop over slots.
    """
    slots = noise_slots(circuit)
    combined = np.empty((angles.shape[0], len(slots), 2, 2), dtype=complex)
    keys = [key for _, key, _ in slots]
    for key in set(keys):
        idx = [i for i, k in enumerate(keys) if k == key]
        main_axis, ortho_axis = _NOISE_AXES[key]
        main = _rotation_matrix(main_axis, angles[:, idx, 0])
        ortho = _rotation_matrix(ortho_axis, angles[:, idx, 1])
        combined[:, idx] = ortho @ main
    return combined


def _noisy_states(circuit: Circuit, noise: NoiseSpec, seed: int,
                  stream_ids: Sequence[int]) -> np.ndarray:
    angles = draw_noise_angles(circuit, noise, seed, stream_ids)
    noise_mats = _noise_matrices(circuit, angles)
    states = zero_state(circuit.n_qubits, len(stream_ids))
    slot = 0
    for gate in circuit.gates:
        if gate.kind == "RZ":
            states = apply_gate(states, circuit.n_qubits, gate)
            continue
        if gate.kind == "CNOT":
            states = apply_gate(states, circuit.n_qubits, gate)
            for qubit in gate.targets:
                states = _apply_1q(states, circuit.n_qubits, qubit,
                                   noise_mats[:, slot])
                slot += 1
        else:
            # fold the ideal gate into its noise rotation: one apply per slot
            total = noise_mats[:, slot] @ gate_matrix(gate)
            states = _apply_1q(states, circuit.n_qubits, gate.targets[0], total)
            slot += 1
    return states


def noisy_execute(circuit: Circuit, noise: NoiseSpec, seed: int,
                  stream_id: int) -> np.ndarray:
    """Single noisy execution from |0...0>; returns the 2^q amplitude vector.

    With sigma = 0 the draws collapse to the coherent offset mu, so the
    result is independent of stream_id; with mu = sigma = 0 it is bitwise
    equal to the noiseless path.
    """
    if noise.silent:
        return execute(circuit, 1)[0]
    return _noisy_states(circuit, noise, seed, [stream_id])[0]


# ---------------------------------------------------------------------------
# expectation values


_PAULI_MATS = {
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def _expectations(states: np.ndarray, h: PauliSum) -> np.ndarray:
    """<psi|H|psi> per sample; imaginary residue (<=1e-10) discarded."""
    n_qubits = h.n_qubits
    if states.shape[1] != 2 ** n_qubits:
        raise ContractViolation("state / Hamiltonian dimension mismatch")
    vals = np.zeros(states.shape[0])
    for coeff, s in h.terms:
        acted = states
        for q, ch in enumerate(s):
            if ch != "I":
                acted = _apply_1q(acted, n_qubits, q, _PAULI_MATS[ch])
        inner = np.einsum("sk,sk->s", states.conj(), acted)
        vals += coeff * inner.real
    return vals


def expectation(state: np.ndarray, h: PauliSum) -> float:
    state = np.asarray(state, dtype=complex)
    if state.ndim == 1:
        state = state[None, :]
    return float(_expectations(state, h)[0])


def _sampled_expectations(states: np.ndarray, h: PauliSum, shots: int,
                          rng: np.random.Generator) -> np.ndarray:
    """Multinomial shot estimate: measure each term in its eigenbasis."""
    n_qubits = h.n_qubits
    vals = np.zeros(states.shape[0])
    hadamard = np.array([[_SQ2, _SQ2], [_SQ2, -_SQ2]], dtype=complex)
    y_basis = _rotation_matrix((1, 0, 0), np.pi / 2)  # maps Y eigenbasis to Z
    for coeff, s in h.terms:
        if all(ch == "I" for ch in s):
            vals += coeff
            continue
        rotated = states
        for q, ch in enumerate(s):
            if ch == "X":
                rotated = _apply_1q(rotated, n_qubits, q, hadamard)
            elif ch == "Y":
                rotated = _apply_1q(rotated, n_qubits, q, y_basis)
        probs = np.abs(rotated) ** 2
        probs /= probs.sum(axis=1, keepdims=True)
        signs = np.ones(2 ** n_qubits)
        for q, ch in enumerate(s):
            if ch != "I":
                bit = 1 << (n_qubits - 1 - q)
                signs *= np.where(np.arange(2 ** n_qubits) & bit, -1.0, 1.0)
        for i in range(states.shape[0]):
            counts = rng.multinomial(shots, probs[i])
            vals[i] += coeff * float(counts @ signs) / shots
    return vals


def estimate_energy(circuit: Circuit, h: PauliSum, noise: NoiseSpec,
                    n_samples: int, seed: int, base_stream: int,
                    shots: Optional[int] = None) -> float:
    """Mean energy over n_samples independent noisy executions.

    This is the objective value fed to the optimizers. ``shots`` switches on
    multinomial measurement sampling; by default the exact expectation of
    each noisy state is used (shot noise is unbiased and averages out).
    """
    if n_samples < 1:
        raise ContractViolation("n_samples must be >= 1")
    stream_ids = [base_stream + k for k in range(n_samples)]
    if noise.silent:
        states = np.repeat(execute(circuit, 1), n_samples, axis=0)
    else:
        states = _noisy_states(circuit, noise, seed, stream_ids)
    if shots is None:
        vals = _expectations(states, h)
    else:
        rng = substream(seed, base_stream)
        vals = _sampled_expectations(states, h, shots, rng)
    return float(vals.mean())


# ---------------------------------------------------------------------------
# circuit text format: one gate per line, e.g. "RX 0 1.5708" / "CNOT 0 1"


def circuit_to_text(circuit: Circuit) -> str:
    lines = [f"# qubits {circuit.n_qubits}"]
    for g in circuit.gates:
        if g.kind == "CNOT":
            lines.append(f"CNOT {g.targets[0]} {g.targets[1]}")
        elif g.kind == "H":
            lines.append(f"H {g.targets[0]}")
        else:
            lines.append(f"{g.kind} {g.targets[0]} {g.angle!r}")
    return "\n".join(lines) + "\n"


def circuit_from_text(text: str, n_qubits: Optional[int] = None) -> Circuit:
    gates = []
    declared = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if stripped.startswith("# qubits "):
            declared = int(stripped.split()[2])
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        kind = parts[0].upper()
        try:
            if kind == "CNOT":
                gates.append(Gate("CNOT", (int(parts[1]), int(parts[2]))))
            elif kind == "H":
                gates.append(Gate("H", (int(parts[1]),)))
            elif kind in ("RX", "RY", "RZ"):
                gates.append(Gate(kind, (int(parts[1]),), float(parts[2])))
            else:
                raise ContractViolation(f"unknown gate {kind!r}")
        except (IndexError, ValueError) as exc:
            raise ContractViolation(f"line {lineno}: {exc}") from exc
    if n_qubits is None:
        n_qubits = declared
    if n_qubits is None:
        n_qubits = 1 + max((max(g.targets) for g in gates), default=0)
    return Circuit(n_qubits, tuple(gates))
