"""Born-rule behaviors for star networks of two-qubit sources.

Source ``i`` sends one qubit to branch party ``i`` and one to the central party.
A source state is a 4-vector ordered as |branch, central>. The central party
measures its ``n`` qubits, in source order, in an orthonormal basis whose
elements are labeled by ``n``-bit strings.

The default central basis is the joint eigenbasis of the commuting Pauli
strings ``X_S Z_{S^c}`` over even-size subsets ``S``. Outcome bit ``b_1`` is the
eigenvalue bit of ``Z...Z`` and bit ``b_k`` (k >= 2) that of ``X_1 X_k Z_rest``.
For two sources this is the Bell basis with b = 00, 01, 10, 11 for
Phi+, Phi-, Psi+, Psi-.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .scenario import BehaviorTensor, Scenario, make_star_scenario

SQRT_HALF = 1.0 / np.sqrt(2.0)

PAULI_I = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)

UNIT_TOL = 1e-12


def singlet() -> np.ndarray:
    return np.array([0.0, SQRT_HALF, -SQRT_HALF, 0.0], dtype=complex)


def bell_states() -> dict[str, np.ndarray]:
    """The four Bell states keyed by their (b0, b1) label."""
    s = SQRT_HALF
    return {
        "00": np.array([s, 0, 0, s], dtype=complex),  # Phi+
        "01": np.array([s, 0, 0, -s], dtype=complex),  # Phi-
        "10": np.array([0, s, s, 0], dtype=complex),  # Psi+
        "11": np.array([0, s, -s, 0], dtype=complex),  # Psi-
    }


def dichotomic_observable(theta: float) -> np.ndarray:
    return np.cos(theta) * PAULI_Z + np.sin(theta) * PAULI_X


def pauli_string(ops: Sequence[np.ndarray]) -> np.ndarray:
    out = np.array([[1.0 + 0j]])
    for op in ops:
        out = np.kron(out, op)
    return out


def even_subsets(n: int) -> list[tuple[int, ...]]:
    """Even-size subsets of {0..n-1}, ordered by bitmask (bit i <-> party i+1)."""
    subsets = []
    for mask in range(2**n):
        if bin(mask).count("1") % 2 == 0:
            subsets.append(tuple(i for i in range(n) if (mask >> i) & 1))
    return subsets


def xz_string(n: int, subset: Sequence[int]) -> np.ndarray:
    return pauli_string([PAULI_X if i in subset else PAULI_Z for i in range(n)])


def _generators(n: int) -> list[np.ndarray]:
    gens = [xz_string(n, ())]
    gens += [xz_string(n, (0, k)) for k in range(1, n)]
    return gens


def _fix_phase(v: np.ndarray) -> np.ndarray:
    k = int(np.argmax(np.abs(v) > 1e-9))
    return v * (abs(v[k]) / v[k])


@lru_cache(maxsize=None)
def _ghz_basis_cached(n: int) -> np.ndarray:
    gens = _generators(n)
    dim = 2**n
    cols = []
    for b in range(dim):
        proj = np.eye(dim, dtype=complex)
        for k, g in enumerate(gens):
            bit = (b >> (n - 1 - k)) & 1
            proj = proj @ (np.eye(dim) + (-1) ** bit * g) / 2
        norms = np.linalg.norm(proj, axis=0)
        col = proj[:, int(np.argmax(norms))]
        col = col / np.linalg.norm(col)
        cols.append(_fix_phase(col))
    basis = np.array(cols).T
    basis.setflags(write=False)
    return basis


def ghz_type_basis(n: int) -> np.ndarray:
    """Columns are the basis vectors, column ``b`` carries outcome label ``b``."""
    make_star_scenario(n)
    return _ghz_basis_cached(n).copy()


def bell_basis() -> np.ndarray:
    states = bell_states()
    return np.array([states[k] for k in ("00", "01", "10", "11")]).T


@dataclass(frozen=True)
class CentralSignConvention:
    """``table[j, b]`` is the +/-1 value of B^{j+1} on central outcome ``b``."""

    n: int
    table: np.ndarray = field(compare=False)

    def __post_init__(self) -> None:
        t = np.asarray(self.table, dtype=float)
        if t.shape != (2 ** (self.n - 1), 2**self.n):
            raise ValueError(f"sign table must have shape {(2 ** (self.n - 1), 2**self.n)}")
        if not np.all(np.isin(t, (-1.0, 1.0))):
            raise ValueError("sign table entries must be +1 or -1")
        object.__setattr__(self, "table", t)

    def sign(self, j: int, b: int) -> float:
        return float(self.table[j - 1, b])

    @classmethod
    def from_masks(cls, n: int, masks: Sequence[int], signs: Sequence[int] | None = None):
        """B^j(b) = s_j * (-1)^popcount(b & mask_j)."""
        if signs is None:
            signs = [1] * len(masks)
        table = np.array(
            [[s * (-1) ** bin(b & m).count("1") for b in range(2**n)] for m, s in zip(masks, signs)],
            dtype=float,
        )
        return cls(n, table)

    def to_json(self) -> list[list[int]]:
        return [[int(v) for v in row] for row in self.table]


def sign_convention_from_basis(basis: np.ndarray, n: int) -> CentralSignConvention:
    """Read B^j(b) = <v_b| X_{S_j} Z_{rest} |v_b> off a basis that diagonalizes them."""
    rows = []
    for subset in even_subsets(n):
        op = xz_string(n, subset)
        vals = np.einsum("ib,ij,jb->b", basis.conj(), op, basis).real
        if np.max(np.abs(np.abs(vals) - 1)) > 1e-9:
            raise ValueError("basis does not diagonalize the X/Z stabilizer strings")
        rows.append(np.sign(vals))
    return CentralSignConvention(n, np.array(rows))


@lru_cache(maxsize=None)
def _default_convention(n: int) -> CentralSignConvention:
    return sign_convention_from_basis(_ghz_basis_cached(n), n)


def default_sign_convention(n: int) -> CentralSignConvention:
    return _default_convention(n)


@dataclass
class QuantumSetup:
    n: int
    source_states: list[np.ndarray]
    branch_angles: list[tuple[float, float]]
    central_basis: np.ndarray
    sign_convention: CentralSignConvention | None = None
    basis_label: str = "explicit"

    def __post_init__(self) -> None:
        make_star_scenario(self.n)
        self.source_states = [np.asarray(s, dtype=complex) for s in self.source_states]
        if len(self.source_states) != self.n or len(self.branch_angles) != self.n:
            raise ValueError("need one source state and one angle pair per source")
        for s in self.source_states:
            if s.shape != (4,):
                raise ValueError("source states are two-qubit 4-vectors")
            if abs(np.linalg.norm(s) - 1) > UNIT_TOL:
                raise ValueError(f"source state is not unit norm (|psi|={np.linalg.norm(s)})")
        for pair in self.branch_angles:
            if len(pair) != 2:
                raise ValueError("each branch needs exactly two angles")
        basis = np.asarray(self.central_basis, dtype=complex)
        dim = 2**self.n
        if basis.shape != (dim, dim):
            raise ValueError(f"central basis must be {dim}x{dim}")
        if np.max(np.abs(basis.conj().T @ basis - np.eye(dim))) > UNIT_TOL:
            raise ValueError("central basis is not orthonormal")
        self.central_basis = basis
        if self.sign_convention is None:
            self.sign_convention = default_sign_convention(self.n)

    # -- JSON ---------------------------------------------------------------

    def to_json(self) -> dict:
        if self.basis_label in ("bell", "ghz"):
            basis: object = self.basis_label
        else:
            basis = [[[float(v.real), float(v.imag)] for v in row] for row in self.central_basis]
        return {
            "n": self.n,
            "source_states": [[[float(v.real), float(v.imag)] for v in s] for s in self.source_states],
            "branch_angles": [[float(a), float(b)] for a, b in self.branch_angles],
            "central_basis": basis,
            "sign_convention": self.sign_convention.to_json(),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "QuantumSetup":
        n = int(doc["n"])
        states = [np.array([complex(re, im) for re, im in s]) for s in doc["source_states"]]
        angles = [(float(a), float(b)) for a, b in doc["branch_angles"]]
        basis_doc = doc.get("central_basis", "ghz")
        if basis_doc == "bell":
            if n != 2:
                raise ValueError("the Bell basis needs n=2")
            basis, label = bell_basis(), "bell"
        elif basis_doc == "ghz":
            basis, label = ghz_type_basis(n), "ghz"
        else:
            basis = np.array([[complex(re, im) for re, im in row] for row in basis_doc])
            label = "explicit"
        conv_doc = doc.get("sign_convention", "default")
        if conv_doc in (None, "default"):
            conv = None
        elif isinstance(conv_doc, dict):
            conv = CentralSignConvention.from_masks(n, conv_doc["masks"], conv_doc.get("signs"))
        else:
            conv = CentralSignConvention(n, np.array(conv_doc, dtype=float))
        return cls(n, states, angles, basis, conv, label)


def _eigvecs(obs: np.ndarray) -> np.ndarray:
    """Rows: eigenvector for +1 then for -1."""
    vals, vecs = np.linalg.eigh(obs)
    order = np.argsort(-vals)
    return vecs[:, order].T


def quantum_behavior(setup: QuantumSetup) -> BehaviorTensor:
    n = setup.n
    scenario = make_star_scenario(n)
    psi = [s.reshape(2, 2) for s in setup.source_states]
    # conditional central-qubit vectors phi[i][x][a] = (<e_a| x I) psi_i
    phi = []
    for i in range(n):
        per_x = []
        for theta in setup.branch_angles[i]:
            e = _eigvecs(dichotomic_observable(theta))
            per_x.append(e.conj() @ psi[i])
        phi.append(per_x)
    basis_dag = setup.central_basis.conj().T
    probs = np.zeros(scenario.shape)
    for x in itertools.product((0, 1), repeat=n):
        for a in itertools.product((0, 1), repeat=n):
            vec = np.array([1.0 + 0j])
            for i in range(n):
                vec = np.kron(vec, phi[i][x[i]][a[i]])
            amps = basis_dag @ vec
            probs[x + a] = np.abs(amps) ** 2
    return BehaviorTensor(scenario, probs)


def mixed_behavior(
    setups: Sequence[QuantumSetup], weights: Sequence[float]
) -> BehaviorTensor:
    """Convex combination of behaviors, used for mixed sources."""
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0) or abs(w.sum() - 1) > UNIT_TOL:
        raise ValueError("mixture weights must be a probability vector")
    arrs = [quantum_behavior(s).probabilities for s in setups]
    total = sum(wi * a for wi, a in zip(w, arrs))
    return BehaviorTensor(Scenario(setups[0].n), total)


OPTIMAL_ANGLES = (np.pi / 4, -np.pi / 4)


def optimal_star_setup(n: int) -> QuantumSetup:
    basis = ghz_type_basis(n)
    label = "ghz"
    return QuantumSetup(
        n=n,
        source_states=[singlet() for _ in range(n)],
        branch_angles=[OPTIMAL_ANGLES for _ in range(n)],
        central_basis=basis,
        basis_label=label,
    )


def optimal_bilocal_setup() -> QuantumSetup:
    return QuantumSetup(
        n=2,
        source_states=[singlet(), singlet()],
        branch_angles=[OPTIMAL_ANGLES, OPTIMAL_ANGLES],
        central_basis=bell_basis(),
        sign_convention=CentralSignConvention.from_masks(2, [0b10, 0b01]),
        basis_label="bell",
    )
