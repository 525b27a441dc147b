"""Operator algebra on a truncated tensor space: one qubit and three bosonic modes.

The composite basis is lexicographic with the qubit as the slowest index and
the second magnon mode as the fastest.  Qubit levels are ordered (e, g), so
``sigma_z = [sigma_plus, sigma_minus]`` comes out as ``diag(+1, -1)``.  All
matrices are dense complex arrays; spaces, operators and states are immutable
value objects and safe to share between threads.
"""

from __future__ import annotations

from collections.abc import Iterable
from dataclasses import dataclass

import numpy as np

QUBIT_LEVELS = ("e", "g")

_NORM_TOL = 1e-8
_HERM_TOL = 1e-10
_TRACE_TOL = 1e-8
_EIG_TOL = 1e-8
_PROJECT_MIN_PROB = 1e-12


def _qubit_index(qubit: str) -> int:
    if qubit not in QUBIT_LEVELS:
        raise ValueError(f"qubit level must be 'e' or 'g', got {qubit!r}")
    return QUBIT_LEVELS.index(qubit)


@dataclass(frozen=True)
class HilbertSpace:
    """Truncated space qubit x resonator x magnon-1 x magnon-2.

    ``mode_cutoffs`` are the highest retained Fock levels of the three bosonic
    modes, so each mode carries ``cutoff + 1`` states.
    """

    mode_cutoffs: tuple[int, int, int]

    def __post_init__(self) -> None:
        cut = tuple(int(c) for c in self.mode_cutoffs)
        if len(cut) != 3:
            raise ValueError("expected exactly three mode cutoffs")
        if any(c < 0 for c in cut):
            raise ValueError(f"mode cutoffs must be non-negative, got {cut}")
        object.__setattr__(self, "mode_cutoffs", cut)

    @property
    def qubit_dim(self) -> int:
        return 2

    @property
    def mode_dims(self) -> tuple[int, int, int]:
        c = self.mode_cutoffs
        return (c[0] + 1, c[1] + 1, c[2] + 1)

    @property
    def dims(self) -> tuple[int, int, int, int]:
        return (2,) + self.mode_dims

    @property
    def total_dim(self) -> int:
        d = 2
        for c in self.mode_cutoffs:
            d *= c + 1
        return d

    def index(self, qubit: str, n_a: int, n_1: int, n_2: int) -> int:
        """Flat basis index of the product state |qubit, n_a, n_1, n_2>."""
        q = _qubit_index(qubit)
        occ = (n_a, n_1, n_2)
        for n, cut in zip(occ, self.mode_cutoffs):
            if not 0 <= n <= cut:
                raise ValueError(f"occupation {n} outside cutoff {cut}")
        d_a, d_1, d_2 = self.mode_dims
        return ((q * d_a + n_a) * d_1 + n_1) * d_2 + n_2

    def unindex(self, idx: int) -> tuple[str, int, int, int]:
        d_a, d_1, d_2 = self.mode_dims
        idx, n_2 = divmod(idx, d_2)
        idx, n_1 = divmod(idx, d_1)
        q, n_a = divmod(idx, d_a)
        return (QUBIT_LEVELS[q], n_a, n_1, n_2)


@dataclass(frozen=True)
class PairSpace:
    """Two-mode truncated Fock space for the post-measurement magnon pair."""

    mode_cutoffs: tuple[int, int]

    def __post_init__(self) -> None:
        cut = tuple(int(c) for c in self.mode_cutoffs)
        if len(cut) != 2 or any(c < 0 for c in cut):
            raise ValueError(f"invalid pair cutoffs {self.mode_cutoffs}")
        object.__setattr__(self, "mode_cutoffs", cut)

    @property
    def mode_dims(self) -> tuple[int, int]:
        c = self.mode_cutoffs
        return (c[0] + 1, c[1] + 1)

    @property
    def total_dim(self) -> int:
        return (self.mode_cutoffs[0] + 1) * (self.mode_cutoffs[1] + 1)

    def index(self, n_1: int, n_2: int) -> int:
        for n, cut in zip((n_1, n_2), self.mode_cutoffs):
            if not 0 <= n <= cut:
                raise ValueError(f"occupation {n} outside cutoff {cut}")
        return n_1 * (self.mode_cutoffs[1] + 1) + n_2


def make_space(cutoffs: Iterable[int]) -> HilbertSpace:
    """Build the composite space for the given three bosonic cutoffs."""
    return HilbertSpace(tuple(cutoffs))


@dataclass(frozen=True, eq=False)
class Operator:
    """Dense operator tied to its space."""

    space: HilbertSpace | PairSpace
    matrix: np.ndarray

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix, dtype=np.complex128)
        n = self.space.total_dim
        if m.shape != (n, n):
            raise ValueError(f"matrix shape {m.shape} does not match space dim {n}")
        object.__setattr__(self, "matrix", m)

    def dagger(self) -> "Operator":
        return Operator(self.space, self.matrix.conj().T)

    def _require_same_space(self, other: "Operator") -> None:
        if self.space != other.space:
            raise ValueError("operators live on different spaces")

    def __add__(self, other: "Operator") -> "Operator":
        self._require_same_space(other)
        return Operator(self.space, self.matrix + other.matrix)

    def __sub__(self, other: "Operator") -> "Operator":
        self._require_same_space(other)
        return Operator(self.space, self.matrix - other.matrix)

    def __mul__(self, scalar: complex) -> "Operator":
        return Operator(self.space, self.matrix * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> "Operator":
        return Operator(self.space, -self.matrix)

    def __matmul__(self, other: "Operator") -> "Operator":
        self._require_same_space(other)
        return Operator(self.space, self.matrix @ other.matrix)


@dataclass(frozen=True, eq=False)
class StateVector:
    """Pure state; construction rejects vectors more than 1e-8 off unit norm."""

    space: HilbertSpace | PairSpace
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.amplitudes, dtype=np.complex128)
        if v.shape != (self.space.total_dim,):
            raise ValueError(
                f"amplitude length {v.shape} does not match space dim {self.space.total_dim}"
            )
        norm = float(np.linalg.norm(v))
        if abs(norm - 1.0) > _NORM_TOL:
            raise ValueError(f"state vector norm {norm} is not 1")
        object.__setattr__(self, "amplitudes", v)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def to_density_matrix(self) -> "DensityMatrix":
        v = self.amplitudes
        return DensityMatrix(self.space, np.outer(v, v.conj()))


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Mixed state; Hermiticity, unit trace and positivity checked on entry."""

    space: HilbertSpace | PairSpace
    matrix: np.ndarray

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix, dtype=np.complex128)
        n = self.space.total_dim
        if m.shape != (n, n):
            raise ValueError(f"matrix shape {m.shape} does not match space dim {n}")
        herm = float(np.max(np.abs(m - m.conj().T))) if n else 0.0
        if herm > _HERM_TOL:
            raise ValueError(f"density matrix is not Hermitian (deviation {herm:.3e})")
        tr = complex(np.trace(m))
        if abs(tr - 1.0) > _TRACE_TOL:
            raise ValueError(f"density matrix trace {tr} is not 1")
        low = float(np.linalg.eigvalsh(m)[0])
        if low < -_EIG_TOL:
            raise ValueError(f"density matrix has negative eigenvalue {low:.3e}")
        object.__setattr__(self, "matrix", m)


def _embed(space: HilbertSpace, slot: int, local: np.ndarray) -> np.ndarray:
    """Kronecker-embed a single-factor matrix at the given tensor slot."""
    out = np.array([[1.0 + 0.0j]])
    for s, d in enumerate(space.dims):
        out = np.kron(out, local if s == slot else np.eye(d))
    return out


def _lowering_matrix(dim: int) -> np.ndarray:
    m = np.zeros((dim, dim), dtype=np.complex128)
    for n in range(1, dim):
        m[n - 1, n] = np.sqrt(n)
    return m


def identity(space: HilbertSpace | PairSpace) -> Operator:
    return Operator(space, np.eye(space.total_dim, dtype=np.complex128))


def annihilation(space: HilbertSpace, mode_index: int) -> Operator:
    """Truncated lowering operator of the resonator (0) or a magnon (1, 2)."""
    if mode_index not in (0, 1, 2):
        raise ValueError(f"mode index must be 0, 1 or 2, got {mode_index}")
    local = _lowering_matrix(space.mode_dims[mode_index])
    return Operator(space, _embed(space, mode_index + 1, local))


def number_operator(space: HilbertSpace, mode_index: int) -> Operator:
    a = annihilation(space, mode_index)
    return Operator(space, a.matrix.conj().T @ a.matrix)


def qubit_lowering(space: HilbertSpace) -> Operator:
    """sigma_minus = |g><e| embedded on the qubit slot."""
    local = np.zeros((2, 2), dtype=np.complex128)
    local[_qubit_index("g"), _qubit_index("e")] = 1.0
    return Operator(space, _embed(space, 0, local))


def qubit_sigma_z(space: HilbertSpace) -> Operator:
    sm = qubit_lowering(space)
    return commutator(sm.dagger(), sm)


def basis_state(space: HilbertSpace, qubit: str, n_a: int, n_1: int, n_2: int) -> StateVector:
    v = np.zeros(space.total_dim, dtype=np.complex128)
    v[space.index(qubit, n_a, n_1, n_2)] = 1.0
    return StateVector(space, v)


def pair_basis_state(space: PairSpace, n_1: int, n_2: int) -> StateVector:
    v = np.zeros(space.total_dim, dtype=np.complex128)
    v[space.index(n_1, n_2)] = 1.0
    return StateVector(space, v)


def superposition(space, components: Iterable[tuple[complex, StateVector]]) -> StateVector:
    """Normalized linear combination of states on a common space."""
    v = np.zeros(space.total_dim, dtype=np.complex128)
    for coeff, state in components:
        if state.space != space:
            raise ValueError("component lives on a different space")
        v += coeff * state.amplitudes
    norm = np.linalg.norm(v)
    if norm < 1e-14:
        raise ValueError("components cancel to the zero vector")
    return StateVector(space, v / norm)


def commutator(a: Operator, b: Operator) -> Operator:
    if a.space != b.space:
        raise ValueError("operators live on different spaces")
    return Operator(a.space, a.matrix @ b.matrix - b.matrix @ a.matrix)


def dagger(a: Operator) -> Operator:
    return a.dagger()


def expectation(state: StateVector | DensityMatrix, a: Operator) -> complex:
    """<psi|A|psi> for pure states, Tr(rho A) for mixed ones."""
    if state.space != a.space:
        raise ValueError("state and operator live on different spaces")
    if isinstance(state, StateVector):
        v = state.amplitudes
        return complex(v.conj() @ (a.matrix @ v))
    return complex(np.trace(state.matrix @ a.matrix))


def _population_weights(state: StateVector | DensityMatrix) -> np.ndarray:
    """Probability of each composite basis state."""
    if isinstance(state, StateVector):
        return np.abs(state.amplitudes) ** 2
    return np.real(np.diag(state.matrix))


def fock_population(
    state: StateVector | DensityMatrix,
    mode_index: int,
    levels: Iterable[int],
) -> float:
    """Probability that the marked mode holds one of the given Fock levels
    while the other two bosonic modes are in vacuum, with the qubit traced out.
    """
    space = state.space
    if not isinstance(space, HilbertSpace):
        raise ValueError("fock_population needs a state on the composite space")
    if mode_index not in (0, 1, 2):
        raise ValueError(f"mode index must be 0, 1 or 2, got {mode_index}")
    levels = sorted(set(int(n) for n in levels))
    cutoff = space.mode_cutoffs[mode_index]
    if any(not 0 <= n <= cutoff for n in levels):
        raise ValueError(f"levels {levels} exceed cutoff {cutoff}")
    weights = _population_weights(state).reshape(space.dims)
    total = 0.0
    for n in levels:
        occ = [0, 0, 0]
        occ[mode_index] = n
        for q in range(2):
            total += float(weights[q, occ[0], occ[1], occ[2]])
    return total


def mode_occupation_probability(
    state: StateVector | DensityMatrix,
    mode_index: int,
    levels: Iterable[int],
) -> float:
    """Probability that the marked mode holds one of the given Fock levels,
    with the qubit and the other two modes traced out.
    """
    space = state.space
    if not isinstance(space, HilbertSpace):
        raise ValueError("mode_occupation_probability needs a state on the composite space")
    if mode_index not in (0, 1, 2):
        raise ValueError(f"mode index must be 0, 1 or 2, got {mode_index}")
    levels = sorted(set(int(n) for n in levels))
    cutoff = space.mode_cutoffs[mode_index]
    if any(not 0 <= n <= cutoff for n in levels):
        raise ValueError(f"levels {levels} exceed cutoff {cutoff}")
    weights = _population_weights(state).reshape(space.dims)
    axes = tuple(i for i in range(4) if i != 1 + mode_index)
    marginal = weights.sum(axis=axes)
    return float(sum(marginal[n] for n in levels))


def project_qubit(rho: DensityMatrix, outcome: str) -> tuple[DensityMatrix, float]:
    """Project the qubit on |outcome>, renormalize, then trace out the qubit
    and the resonator.  Returns the magnon-pair density matrix and the
    outcome probability; a branch below probability 1e-12 is an error.
    """
    space = rho.space
    if not isinstance(space, HilbertSpace):
        raise ValueError("project_qubit needs a state on the composite space")
    q = _qubit_index(outcome)
    dims = space.dims
    block = rho.matrix.reshape(dims + dims)[q, :, :, :, q, :, :, :]
    prob = float(np.real(np.einsum("aijaij->", block)))
    if prob < _PROJECT_MIN_PROB:
        raise ValueError(f"outcome {outcome!r} has vanishing probability {prob:.3e}")
    pair_block = np.einsum("aijakl->ijkl", block) / prob
    d_1, d_2 = dims[2], dims[3]
    pair = PairSpace((space.mode_cutoffs[1], space.mode_cutoffs[2]))
    reduced = pair_block.reshape(d_1 * d_2, d_1 * d_2)
    reduced = 0.5 * (reduced + reduced.conj().T)
    return DensityMatrix(pair, reduced), prob


def _excitation_of_index(space: HilbertSpace, idx: int) -> int:
    qubit, n_a, n_1, n_2 = space.unindex(idx)
    return (1 if qubit == "e" else 0) + n_a + n_1 + n_2


@dataclass(frozen=True, eq=False)
class SectorBasis:
    """Slice of the composite space spanned by fixed total-excitation shells.

    Valid as a simulation basis only when the generator conserves the total
    excitation number (plus pure-lowering dissipation for the 'at most'
    flavor); the experiment drivers are responsible for that check.
    """

    space: HilbertSpace
    indices: np.ndarray

    @property
    def dim(self) -> int:
        return int(self.indices.size)

    def project_vector(self, full: np.ndarray) -> np.ndarray:
        return np.ascontiguousarray(full[self.indices])

    def embed_vector(self, reduced: np.ndarray) -> np.ndarray:
        full = np.zeros(self.space.total_dim, dtype=np.complex128)
        full[self.indices] = reduced
        return full

    def project_matrix(self, full: np.ndarray) -> np.ndarray:
        return np.ascontiguousarray(full[np.ix_(self.indices, self.indices)])

    def embed_matrix(self, reduced: np.ndarray) -> np.ndarray:
        full = np.zeros((self.space.total_dim,) * 2, dtype=np.complex128)
        full[np.ix_(self.indices, self.indices)] = reduced
        return full


def excitation_sector(space: HilbertSpace, totals: Iterable[int]) -> SectorBasis:
    """Basis of the union of exact total-excitation shells."""
    wanted = set(int(t) for t in totals)
    idx = [i for i in range(space.total_dim) if _excitation_of_index(space, i) in wanted]
    if not idx:
        raise ValueError(f"no basis states with total excitation in {sorted(wanted)}")
    return SectorBasis(space, np.asarray(idx, dtype=np.intp))


def excitation_sector_at_most(space: HilbertSpace, max_total: int) -> SectorBasis:
    """Basis of all states with total excitation up to ``max_total``.

    Closed under excitation-conserving generators and under lowering-type
    jump operators, which makes it the right reduced space for dissipative
    protocol runs.
    """
    return excitation_sector(space, range(int(max_total) + 1))
