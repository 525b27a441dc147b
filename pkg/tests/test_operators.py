"""Basis conventions, operator embeddings and reductions."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chiral_floquet.operators import (
    DensityMatrix,
    HilbertSpace,
    Operator,
    PairSpace,
    StateVector,
    annihilation,
    basis_state,
    commutator,
    dagger,
    excitation_sector,
    excitation_sector_at_most,
    expectation,
    fock_population,
    mode_occupation_probability,
    identity,
    make_space,
    number_operator,
    pair_basis_state,
    project_qubit,
    qubit_lowering,
    qubit_sigma_z,
    superposition,
)


def small_space() -> HilbertSpace:
    return make_space((1, 1, 1))


class TestSpaceLayout:
    def test_dims(self):
        space = make_space((2, 1, 3))
        assert space.dims == (2, 3, 2, 4)
        assert space.total_dim == 48

    def test_index_ordering_qubit_slowest(self):
        space = small_space()
        # |e100>: qubit slot 0 (excited), resonator occupied.
        assert space.index("e", 1, 0, 0) == 4
        assert space.index("g", 0, 0, 0) == 8
        assert space.index("e", 0, 0, 0) == 0
        assert space.index("g", 1, 1, 1) == 15

    def test_unindex_round_trip(self):
        space = make_space((2, 1, 2))
        for idx in range(space.total_dim):
            q, n_a, n_1, n_2 = space.unindex(idx)
            assert space.index(q, n_a, n_1, n_2) == idx

    def test_rejects_bad_occupation(self):
        space = small_space()
        with pytest.raises(ValueError):
            space.index("e", 2, 0, 0)
        with pytest.raises(ValueError):
            space.index("x", 0, 0, 0)

    def test_rejects_negative_cutoff(self):
        with pytest.raises(ValueError):
            make_space((1, -1, 1))


class TestOperators:
    def test_annihilation_matrix_element(self):
        space = make_space((3, 0, 0))
        a = annihilation(space, 0)
        src = basis_state(space, "g", 2, 0, 0)
        dst = basis_state(space, "g", 1, 0, 0)
        amp = dst.amplitudes.conj() @ (a.matrix @ src.amplitudes)
        assert amp == pytest.approx(np.sqrt(2.0))

    def test_canonical_commutator_below_cutoff(self):
        space = make_space((4, 0, 0))
        a = annihilation(space, 0)
        comm = commutator(a, dagger(a)).matrix
        # Truncation breaks the identity only on the top retained level.
        for n in range(4):
            idx = space.index("g", n, 0, 0)
            assert comm[idx, idx] == pytest.approx(1.0)
        top = space.index("g", 4, 0, 0)
        assert comm[top, top] == pytest.approx(-4.0)

    def test_modes_commute(self):
        space = small_space()
        a = annihilation(space, 0)
        m1 = annihilation(space, 1)
        assert np.allclose(commutator(a, m1).matrix, 0.0)
        assert np.allclose(commutator(a, dagger(m1)).matrix, 0.0)

    def test_qubit_lowering_action(self):
        space = small_space()
        sm = qubit_lowering(space)
        e = basis_state(space, "e", 1, 0, 1)
        out = sm.matrix @ e.amplitudes
        g = basis_state(space, "g", 1, 0, 1)
        assert np.allclose(out, g.amplitudes)
        # Lowering annihilates the ground state.
        assert np.allclose(sm.matrix @ g.amplitudes, 0.0)

    def test_sigma_z_signs(self):
        space = small_space()
        sz = qubit_sigma_z(space)
        e = basis_state(space, "e", 0, 0, 0)
        g = basis_state(space, "g", 0, 0, 0)
        assert expectation(e, sz) == pytest.approx(1.0)
        assert expectation(g, sz) == pytest.approx(-1.0)

    def test_number_operator(self):
        space = make_space((2, 2, 2))
        n1 = number_operator(space, 1)
        state = basis_state(space, "g", 0, 2, 1)
        assert expectation(state, n1) == pytest.approx(2.0)

    def test_dagger_matches_conjugate_transpose(self):
        space = small_space()
        a = annihilation(space, 2)
        assert np.array_equal(dagger(a).matrix, a.matrix.conj().T)

    def test_identity_neutral(self):
        space = small_space()
        a = annihilation(space, 0)
        assert np.allclose((identity(space) @ a).matrix, a.matrix)


class TestStates:
    def test_basis_state_normalized(self):
        state = basis_state(small_space(), "e", 1, 0, 0)
        assert np.linalg.norm(state.amplitudes) == pytest.approx(1.0, abs=1e-12)

    def test_rejects_unnormalized_vector(self):
        space = small_space()
        v = np.zeros(space.total_dim, dtype=complex)
        v[0] = 0.5
        with pytest.raises(ValueError):
            StateVector(space, v)

    def test_superposition_normalizes(self):
        space = small_space()
        psi = superposition(
            space,
            [(1.0, basis_state(space, "e", 1, 0, 0)), (1.0j, basis_state(space, "g", 1, 0, 0))],
        )
        assert np.linalg.norm(psi.amplitudes) == pytest.approx(1.0, abs=1e-12)

    def test_density_matrix_validation(self):
        space = small_space()
        rho = basis_state(space, "g", 0, 0, 0).to_density_matrix()
        assert np.trace(rho.matrix) == pytest.approx(1.0)
        bad = np.eye(space.total_dim, dtype=complex)
        with pytest.raises(ValueError):
            DensityMatrix(space, bad)


class TestFockPopulation:
    def test_pure_state_levels(self):
        space = make_space((2, 2, 2))
        psi = superposition(
            space,
            [
                (1.0, basis_state(space, "e", 2, 0, 0)),
                (1.0, basis_state(space, "g", 1, 0, 0)),
            ],
        )
        assert fock_population(psi, 0, [2]) == pytest.approx(0.5)
        assert fock_population(psi, 0, [1, 2]) == pytest.approx(1.0)
        assert fock_population(psi, 1, [1]) == pytest.approx(0.0)

    def test_requires_other_modes_in_vacuum(self):
        space = make_space((1, 1, 1))
        psi = basis_state(space, "g", 1, 1, 0)
        # Resonator occupied but magnon-1 is not in vacuum.
        assert fock_population(psi, 0, [1]) == pytest.approx(0.0)

    def test_level_outside_cutoff_rejected(self):
        space = make_space((1, 1, 1))
        psi = basis_state(space, "g", 1, 0, 0)
        with pytest.raises(ValueError):
            fock_population(psi, 0, [2])

    def test_density_matrix_agrees_with_pure(self):
        space = make_space((2, 1, 1))
        psi = superposition(
            space,
            [(0.6, basis_state(space, "e", 2, 0, 0)), (0.8, basis_state(space, "g", 0, 1, 0))],
        )
        for mode, levels in ((0, [2]), (1, [1])):
            assert fock_population(psi.to_density_matrix(), mode, levels) == pytest.approx(
                fock_population(psi, mode, levels)
            )


class TestModeOccupationProbability:
    def test_counts_multi_mode_components(self):
        space = make_space((1, 1, 1))
        psi = basis_state(space, "g", 1, 1, 0)
        # The exclusive metric skips this state, the marginal one keeps it.
        assert fock_population(psi, 0, [1]) == pytest.approx(0.0)
        assert mode_occupation_probability(psi, 0, [1]) == pytest.approx(1.0)
        assert mode_occupation_probability(psi, 1, [1]) == pytest.approx(1.0)
        assert mode_occupation_probability(psi, 2, [0]) == pytest.approx(1.0)
        assert mode_occupation_probability(psi, 2, [1]) == pytest.approx(0.0)

    def test_levels_partition_unity(self):
        space = make_space((2, 1, 1))
        psi = superposition(
            space,
            [(0.6, basis_state(space, "e", 2, 1, 0)), (0.8, basis_state(space, "g", 1, 0, 1))],
        )
        assert mode_occupation_probability(psi, 0, [0, 1, 2]) == pytest.approx(1.0)
        assert mode_occupation_probability(psi, 0, [2]) == pytest.approx(0.36)
        assert mode_occupation_probability(psi, 0, [1]) == pytest.approx(0.64)

    def test_matches_density_matrix(self):
        space = make_space((1, 1, 1))
        psi = superposition(
            space,
            [(1.0, basis_state(space, "e", 1, 1, 0)), (1.0, basis_state(space, "g", 1, 0, 0))],
        )
        assert mode_occupation_probability(psi.to_density_matrix(), 0, [1]) == pytest.approx(
            mode_occupation_probability(psi, 0, [1])
        )

    def test_level_outside_cutoff_rejected(self):
        space = make_space((1, 1, 1))
        psi = basis_state(space, "g", 1, 0, 0)
        with pytest.raises(ValueError):
            mode_occupation_probability(psi, 0, [2])


class TestProjectQubit:
    def test_projection_on_product_state(self):
        space = make_space((1, 2, 2))
        psi = superposition(
            space,
            [
                (1.0, basis_state(space, "e", 0, 0, 2)),
                (1.0, basis_state(space, "g", 0, 2, 0)),
            ],
        )
        reduced, prob = project_qubit(psi.to_density_matrix(), "g")
        assert prob == pytest.approx(0.5)
        target = pair_basis_state(reduced.space, 2, 0)
        overlap = target.amplitudes.conj() @ reduced.matrix @ target.amplitudes
        assert np.real(overlap) == pytest.approx(1.0)

    def test_probabilities_sum_to_one(self):
        space = make_space((1, 1, 1))
        psi = superposition(
            space,
            [
                (0.6, basis_state(space, "e", 1, 0, 0)),
                (0.8j, basis_state(space, "g", 0, 1, 0)),
            ],
        )
        _, p_e = project_qubit(psi.to_density_matrix(), "e")
        _, p_g = project_qubit(psi.to_density_matrix(), "g")
        assert p_e + p_g == pytest.approx(1.0)
        assert p_e == pytest.approx(0.36)

    def test_vanishing_branch_rejected(self):
        space = make_space((1, 1, 1))
        rho = basis_state(space, "g", 0, 0, 0).to_density_matrix()
        with pytest.raises(ValueError):
            project_qubit(rho, "e")

    def test_traces_out_resonator(self):
        space = make_space((2, 1, 1))
        # Entangled across resonator levels within the g branch.
        psi = superposition(
            space,
            [
                (1.0, basis_state(space, "g", 0, 1, 0)),
                (1.0, basis_state(space, "g", 2, 0, 1)),
            ],
        )
        reduced, prob = project_qubit(psi.to_density_matrix(), "g")
        assert prob == pytest.approx(1.0)
        # Distinct resonator states kill the off-diagonal coherence.
        i = reduced.space.index(1, 0)
        j = reduced.space.index(0, 1)
        assert reduced.matrix[i, j] == pytest.approx(0.0)
        assert np.real(reduced.matrix[i, i]) == pytest.approx(0.5)


class TestSectors:
    def test_sector_membership(self):
        space = make_space((2, 2, 2))
        sector = excitation_sector(space, [2])
        for idx in sector.indices:
            q, n_a, n_1, n_2 = space.unindex(int(idx))
            exc = (1 if q == "e" else 0) + n_a + n_1 + n_2
            assert exc == 2

    def test_sector_dimension_n1(self):
        # One excitation over qubit + three modes: 4 states; plus ground 1.
        space = make_space((1, 1, 1))
        assert excitation_sector(space, [1]).dim == 4
        assert excitation_sector_at_most(space, 1).dim == 5

    def test_round_trip_vector(self):
        space = make_space((2, 2, 2))
        sector = excitation_sector(space, [1, 2])
        rng = np.random.default_rng(7)
        reduced = rng.normal(size=sector.dim) + 1j * rng.normal(size=sector.dim)
        assert np.allclose(sector.project_vector(sector.embed_vector(reduced)), reduced)

    def test_round_trip_matrix(self):
        space = make_space((1, 1, 1))
        sector = excitation_sector_at_most(space, 2)
        rng = np.random.default_rng(11)
        m = rng.normal(size=(sector.dim, sector.dim))
        assert np.allclose(sector.project_matrix(sector.embed_matrix(m)), m)

    def test_at_most_closed_under_lowering(self):
        space = make_space((2, 2, 2))
        sector = excitation_sector_at_most(space, 2)
        a = annihilation(space, 0).matrix
        member = set(int(i) for i in sector.indices)
        for idx in sector.indices:
            col = a[:, int(idx)]
            for row in np.nonzero(col)[0]:
                assert int(row) in member

    def test_empty_sector_rejected(self):
        space = make_space((1, 1, 1))
        with pytest.raises(ValueError):
            excitation_sector(space, [99])


@settings(max_examples=50, deadline=None)
@given(
    n_a=st.integers(min_value=0, max_value=2),
    n_1=st.integers(min_value=0, max_value=2),
    n_2=st.integers(min_value=0, max_value=2),
    qubit=st.sampled_from(["e", "g"]),
)
def test_index_round_trip_property(qubit, n_a, n_1, n_2):
    space = make_space((2, 2, 2))
    idx = space.index(qubit, n_a, n_1, n_2)
    assert space.unindex(idx) == (qubit, n_a, n_1, n_2)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(min_value=0, max_value=2**31 - 1))
def test_expectation_hermitian_real_property(seed):
    space = make_space((1, 1, 1))
    rng = np.random.default_rng(seed)
    raw = rng.normal(size=(space.total_dim,) * 2) + 1j * rng.normal(size=(space.total_dim,) * 2)
    op = Operator(space, (raw + raw.conj().T) / 2)
    v = rng.normal(size=space.total_dim) + 1j * rng.normal(size=space.total_dim)
    psi = StateVector(space, v / np.linalg.norm(v))
    val = expectation(psi, op)
    assert abs(val.imag) < 1e-10


class TestPairSpace:
    def test_index(self):
        pair = PairSpace((2, 3))
        assert pair.total_dim == 12
        assert pair.index(1, 2) == 6

    def test_basis_state(self):
        pair = PairSpace((3, 3))
        state = pair_basis_state(pair, 3, 0)
        assert state.amplitudes[pair.index(3, 0)] == pytest.approx(1.0)
