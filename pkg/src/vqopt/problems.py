"""Benchmark problems: ansatz circuits with Hamiltonians, and synthetic
noisy test functions with known optima.

VQE problems expose an ansatz mapping parameters to a circuit over the gate
set {RX, RY, RZ, H, CNOT} plus the exact ground energy from dense
diagonalization, so every optimizer run can be scored against ground truth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional

import numpy as np

from .core import Box, ContractViolation, substream
from .qsim import (
    Circuit,
    Gate,
    NoiseSpec,
    PauliSum,
    estimate_energy,
    execute,
    expectation,
)


@dataclass(frozen=True)
class VqeProblem:
    name: str
    n_qubits: int
    n_params: int
    hamiltonian: PauliSum
    ansatz: Callable[[np.ndarray], Circuit]
    default_box: Box
    exact_ground_energy: float
    known_optimum: Optional[tuple] = None


@dataclass(frozen=True)
class SyntheticProblem:
    name: str
    n_params: int
    f: Callable[[np.ndarray], float]
    noise_sigma_f: float
    default_box: Box
    known_optimum: tuple


# ---------------------------------------------------------------------------
# compiled rotation blocks


def _basis_in(kind: str, qubit: int) -> list:
    """Gates mapping the given Pauli axis onto Z for one qubit."""
    if kind == "X":
        return [Gate("H", (qubit,))]
    if kind == "Y":
        return [Gate("RX", (qubit,), math.pi / 2)]
    return []


def _basis_out(kind: str, qubit: int) -> list:
    if kind == "X":
        return [Gate("H", (qubit,))]
    if kind == "Y":
        return [Gate("RX", (qubit,), -math.pi / 2)]
    return []


def two_pauli_rotation(theta: float, kind_a: str, qubit_a: int,
                       kind_b: str, qubit_b: int) -> list:
    """Gates implementing exp(-i*theta * P_a P_b) for one-qubit Paulis P."""
    gates = _basis_in(kind_a, qubit_a) + _basis_in(kind_b, qubit_b)
    gates += [
        Gate("CNOT", (qubit_a, qubit_b)),
        Gate("RZ", (qubit_b,), 2.0 * theta),
        Gate("CNOT", (qubit_a, qubit_b)),
    ]
    gates += _basis_out(kind_a, qubit_a) + _basis_out(kind_b, qubit_b)
    return gates


def _ground_energy(h: PauliSum, n_particles: Optional[int] = None) -> float:
    """Smallest eigenvalue; restricted to a particle-number sector if given."""
    dense = h.to_dense()
    if n_particles is not None:
        dim = dense.shape[0]
        keep = [i for i in range(dim) if bin(i).count("1") == n_particles]
        dense = dense[np.ix_(keep, keep)]
    return float(np.linalg.eigvalsh(dense)[0])


# ---------------------------------------------------------------------------
# toy two-qubit molecule


# Fixed two-qubit electronic-structure coefficients (hartree).
TOY_MOLECULE_COEFFS = (
    -1.052373245772859,
    0.39793742484318045,
    -0.39793742484318045,
    -0.01128010425623538,
    0.18093119978423156,
    0.18093119978423156,
)


def make_toy_molecule() -> VqeProblem:
    """2-qubit Hamiltonian with a 2-parameter pair-rotation ansatz.

    The ansatz prepares X|00> = |10> and applies exp(-i*t1*X0Y1) followed by
    exp(-i*t2*Y0X1); the ground state lies in the span these rotations reach,
    so the noiseless optimum attains the exact ground energy.
    """
    g = TOY_MOLECULE_COEFFS
    h = PauliSum((
        (g[0], "II"), (g[1], "ZI"), (g[2], "IZ"),
        (g[3], "ZZ"), (g[4], "XX"), (g[5], "YY"),
    ))

    def ansatz(theta: np.ndarray) -> Circuit:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (2,):
            raise ContractViolation("toy molecule ansatz takes 2 parameters")
        gates = [Gate("RX", (0,), math.pi)]
        gates += two_pauli_rotation(theta[0], "X", 0, "Y", 1)
        gates += two_pauli_rotation(theta[1], "Y", 0, "X", 1)
        return Circuit(2, tuple(gates))

    return VqeProblem(
        name="toy_molecule",
        n_qubits=2,
        n_params=2,
        hamiltonian=h,
        ansatz=ansatz,
        default_box=Box(np.full(2, -1.0), np.full(2, 1.0)),
        exact_ground_energy=_ground_energy(h),
    )


# ---------------------------------------------------------------------------
# 2-site Hubbard model (Jordan-Wigner)


def hubbard_hamiltonian(t: float = 1.0, u: float = 2.0,
                        mu: float = 0.0) -> PauliSum:
    """Jordan-Wigner mapped 2-site Hubbard model.

    Mode order: (site0 up, site1 up, site0 down, site1 down). Hopping pairs
    are adjacent in this order so no Z strings appear.
    """
    terms = []
    # hopping: -t/2 (XX + YY) on the up pair (0,1) and the down pair (2,3)
    terms += [(-t / 2, "XXII"), (-t / 2, "YYII"),
              (-t / 2, "IIXX"), (-t / 2, "IIYY")]
    # on-site repulsion: U * (n0 n2 + n1 n3), n_p = (I - Z_p)/2
    terms += [
        (u / 2, "IIII"),
        (-u / 4, "ZIII"), (-u / 4, "IZII"),
        (-u / 4, "IIZI"), (-u / 4, "IIIZ"),
        (u / 4, "ZIZI"), (u / 4, "IZIZ"),
    ]
    if mu != 0.0:
        # -mu * total particle number
        terms.append((-2.0 * mu, "IIII"))
        for q in range(4):
            s = ["I"] * 4
            s[q] = "Z"
            terms.append((mu / 2, "".join(s)))
    return PauliSum(tuple(terms))


def number_operator(n_modes: int = 4) -> PauliSum:
    terms = [(n_modes / 2.0, "I" * n_modes)]
    for q in range(n_modes):
        s = ["I"] * n_modes
        s[q] = "Z"
        terms.append((-0.5, "".join(s)))
    return PauliSum(tuple(terms))


def make_hubbard(sites: int = 2, electrons: int = 2, layers: int = 3,
                 t: float = 1.0, u: float = 2.0,
                 chemical_potential: float = 0.0) -> VqeProblem:
    """Variational-Hamiltonian-ansatz Hubbard problem with 2*layers params."""
    if sites != 2:
        raise ContractViolation("only the 2-site model is supported")
    if not 1 <= layers <= 7:
        raise ContractViolation("layers must be in [1, 7]")
    h = hubbard_hamiltonian(t=t, u=u, mu=chemical_potential)
    n_params = 2 * layers

    def ansatz(theta: np.ndarray) -> Circuit:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (n_params,):
            raise ContractViolation(f"hubbard ansatz takes {n_params} parameters")
        # reference: noninteracting ground state, each spin in the bonding
        # orbital (|01> + |10>)/sqrt(2). The layers conserve total spin and
        # site-exchange parity, so the reference must already be in the
        # even-singlet sector that holds the ground state; a product
        # occupation reference leaves a stuck component in another sector.
        gates = []
        for a, b in ((0, 1), (2, 3)):
            gates += [Gate("H", (a,)), Gate("CNOT", (a, b)),
                      Gate("RX", (b,), math.pi)]
        for k in range(layers):
            gamma, beta = theta[2 * k], theta[2 * k + 1]
            # hopping layer: exp(-i*gamma*(-t/2)*(XX+YY)) per spin pair
            angle = gamma * (-t / 2)
            for a, b in ((0, 1), (2, 3)):
                gates += two_pauli_rotation(angle, "X", a, "X", b)
                gates += two_pauli_rotation(angle, "Y", a, "Y", b)
            # interaction layer: exp(-i*beta*U/4*(Z0Z2 + Z1Z3 - sum Z_p))
            zang = beta * u / 4
            for a, b in ((0, 2), (1, 3)):
                gates += [
                    Gate("CNOT", (a, b)),
                    Gate("RZ", (b,), 2.0 * zang),
                    Gate("CNOT", (a, b)),
                ]
            for q in range(4):
                gates.append(Gate("RZ", (q,), -2.0 * zang))
        return Circuit(4, tuple(gates))

    return VqeProblem(
        name="hubbard",
        n_qubits=4,
        n_params=n_params,
        hamiltonian=h,
        ansatz=ansatz,
        default_box=Box(np.full(n_params, -2.0), np.full(n_params, 2.0)),
        exact_ground_energy=_ground_energy(h, n_particles=electrons),
    )


# ---------------------------------------------------------------------------
# synthetic analytic problems


TWOWELL_GLOBAL = (0.00012, 0.04)
TWOWELL_LOCAL = (0.5, -0.5)


def _sphere(x: np.ndarray) -> float:
    return float(np.dot(x, x))


def _rosenbrock(x: np.ndarray) -> float:
    return float(np.sum(100.0 * (x[1:] - x[:-1] ** 2) ** 2 + (1.0 - x[:-1]) ** 2))


def _two_well(x: np.ndarray) -> float:
    g = np.asarray(TWOWELL_GLOBAL)
    l = np.asarray(TWOWELL_LOCAL)
    rg2 = float(np.sum((x - g) ** 2))
    rl2 = float(np.sum((x - l) ** 2))
    return 1.0 - math.exp(-rg2 / (2 * 0.18 ** 2)) - 0.7 * math.exp(-rl2 / (2 * 0.25 ** 2))


def _shallow_multi_well(x: np.ndarray) -> float:
    # shallow quadratic envelope with many cosine wells within 0.05 of each other
    return float(np.sum(0.02 * x ** 2 + 0.01 * (1.0 - np.cos(4 * math.pi * x))))


_SYNTHETIC_KINDS = {
    "Sphere": (_sphere, (-1.0, 1.0), lambda n: (0.0,) * n),
    "Rosenbrock": (_rosenbrock, (-2.0, 2.0), lambda n: (1.0,) * n),
    "TwoWell": (_two_well, (-1.0, 1.0), lambda n: TWOWELL_GLOBAL),
    "ShallowMultiWell": (_shallow_multi_well, (-1.0, 1.0), lambda n: (0.0,) * n),
}


def make_synthetic(kind: str, n: int, sigma_f: float = 0.0) -> SyntheticProblem:
    if kind not in _SYNTHETIC_KINDS:
        raise ContractViolation(f"unknown synthetic kind {kind!r}")
    if kind == "TwoWell":
        n = 2
    if n < 1:
        raise ContractViolation("dimension must be >= 1")
    fn, (lo, hi), opt = _SYNTHETIC_KINDS[kind]
    return SyntheticProblem(
        name=f"{kind.lower()}_{n}d",
        n_params=n,
        f=fn,
        noise_sigma_f=float(sigma_f),
        default_box=Box(np.full(n, lo), np.full(n, hi)),
        known_optimum=tuple(opt(n)),
    )


# ---------------------------------------------------------------------------
# objectives


class VqeObjective:
    """Objective wrapping a VQE problem: mean noisy energy per evaluation.

    Evaluation k uses noise substreams [k*n_samples, (k+1)*n_samples), so
    evaluate(x, stream_id) is pure in (x, stream_id) for a fixed seed.
    """

    def __init__(self, problem: VqeProblem, noise: NoiseSpec, n_samples: int,
                 seed: int, shots: Optional[int] = None):
        self.problem = problem
        self.noise = noise
        self.n_samples = int(n_samples)
        self.seed = int(seed)
        self.shots = shots
        self.dimension = problem.n_params

    def evaluate(self, x: np.ndarray, stream_id: int) -> float:
        circuit = self.problem.ansatz(x)
        return estimate_energy(
            circuit, self.problem.hamiltonian, self.noise,
            self.n_samples, self.seed, stream_id * self.n_samples,
            shots=self.shots,
        )

    def true_value(self, x: np.ndarray) -> float:
        """Noiseless re-evaluation at x."""
        state = execute(self.problem.ansatz(x), 1)[0]
        return expectation(state, self.problem.hamiltonian)


class SyntheticObjective:
    """Analytic function plus additive Gaussian noise per evaluation."""

    def __init__(self, problem: SyntheticProblem, seed: int,
                 sigma_f: Optional[float] = None):
        self.problem = problem
        self.seed = int(seed)
        self.sigma_f = problem.noise_sigma_f if sigma_f is None else float(sigma_f)
        self.dimension = problem.n_params

    def evaluate(self, x: np.ndarray, stream_id: int) -> float:
        value = self.problem.f(np.asarray(x, dtype=float))
        if self.sigma_f > 0:
            value += self.sigma_f * float(substream(self.seed, stream_id).standard_normal())
        return value

    def true_value(self, x: np.ndarray) -> float:
        return self.problem.f(np.asarray(x, dtype=float))
