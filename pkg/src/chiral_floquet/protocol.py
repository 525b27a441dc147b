"""Two-part protocol: Fock-ladder preparation, chiral split, magnon readout.

Part A climbs the resonator Fock ladder with alternating qubit pulses and
exchange swaps.  A half pulse then splits the qubit, part B runs the chiral
transfer for a third of the triangle period so each branch routes the
resonator quanta onto its own magnon mode, and a phase-alignment gate plus a
final half pulse convert the qubit measurement outcomes into the two
N00N-state phase branches.
"""

from __future__ import annotations

import math
from collections.abc import Iterable
from dataclasses import dataclass

import numpy as np

from .dynamics import (
    Trajectory,
    effective_frame_map,
    evolve_lindblad,
    evolve_schrodinger,
    fidelity,
    transfer_matrix,
)
from .floquet import SystemParams, coupling_strengths, effective_hamiltonian, full_hamiltonian_terms
from .operators import (
    DensityMatrix,
    HilbertSpace,
    Operator,
    PairSpace,
    StateVector,
    annihilation,
    basis_state,
    excitation_sector,
    excitation_sector_at_most,
    make_space,
    pair_basis_state,
    project_qubit,
    qubit_lowering,
    superposition,
)

PART_B_MODELS = ("full", "effective", "analytic")
_DEFAULT_RABI_IN_G = 30.0


@dataclass(frozen=True)
class ProtocolParams:
    """Protocol configuration.

    ``n_quanta`` is the Fock level prepared on the resonator and split into
    the N00N state.  ``theta`` is the phase of the splitting pulse, imprinted
    on the final superposition.  Dissipation applies the four lowering
    channels at the given rates; all zero means unitary evolution.
    ``finite_pulses`` replaces instantaneous qubit rotations by resonant
    drive windows of a Rabi frequency ``rabi_frequency`` (default 30 g).
    ``pulse_crosstalk`` keeps the qubit-resonator exchange switched on
    during those windows instead of idealizing it away; the residual
    coupling is what limits the ladder fidelity at small ``rabi_frequency``.
    """

    n_quanta: int
    theta: float = 0.0
    rabi_frequency: float | None = None
    jc_coupling: float | None = None
    kappa_a: float = 0.0
    kappa_m: float = 0.0
    gamma_qubit: float = 0.0
    measurement: str = "e"
    finite_pulses: bool = False
    pulse_crosstalk: bool = False
    part_b_model: str = "full"

    def __post_init__(self) -> None:
        if self.n_quanta < 1:
            raise ValueError(f"n_quanta must be at least 1, got {self.n_quanta}")
        if self.measurement not in ("e", "g"):
            raise ValueError(f"measurement must be 'e' or 'g', got {self.measurement!r}")
        if self.part_b_model not in PART_B_MODELS:
            raise ValueError(f"part_b_model must be one of {PART_B_MODELS}")
        for name in ("kappa_a", "kappa_m", "gamma_qubit"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.rabi_frequency is not None and self.rabi_frequency <= 0:
            raise ValueError("rabi_frequency must be positive")
        if self.jc_coupling is not None and self.jc_coupling <= 0:
            raise ValueError("jc_coupling must be positive")
        if self.pulse_crosstalk and not self.finite_pulses:
            raise ValueError("pulse_crosstalk is only meaningful with finite_pulses")
        if self.dissipative and self.part_b_model == "analytic":
            raise ValueError("the analytic closed form has no dissipative counterpart")

    @property
    def dissipative(self) -> bool:
        return self.kappa_a > 0 or self.kappa_m > 0 or self.gamma_qubit > 0


@dataclass(frozen=True, eq=False)
class ProtocolResult:
    """Outcome of one protocol run, conditioned on the qubit measurement."""

    noon_fidelity: float
    outcome_probability: float
    fock_prep_fidelity: float
    total_time: float
    part_a_peaks: tuple[float, ...]
    part_b_trajectory: Trajectory | None
    magnon_state: DensityMatrix


def circulation_period(params: SystemParams) -> float:
    """Time for one full circulation of the effective triangle."""
    return 2.0 * math.pi / (math.sqrt(3.0) * coupling_strengths(params).g_eff)


def transfer_time(params: SystemParams) -> float:
    """A third of the circulation period, which moves the resonator content
    onto one magnon mode (which one depends on the qubit branch)."""
    return circulation_period(params) / 3.0


def _qubit_matrix(space: HilbertSpace, u2: np.ndarray) -> np.ndarray:
    return np.kron(u2, np.eye(space.total_dim // 2, dtype=np.complex128))


def _pulse_unitary(kind: str, theta: float) -> np.ndarray:
    if kind == "pi":
        return np.array(
            [[0.0, 1j * np.exp(1j * theta)], [1j * np.exp(-1j * theta), 0.0]],
            dtype=np.complex128,
        )
    if kind == "half_pi":
        return np.array(
            [[1.0, 1j * np.exp(1j * theta)], [1j * np.exp(-1j * theta), 1.0]],
            dtype=np.complex128,
        ) / math.sqrt(2.0)
    raise ValueError(f"pulse kind must be 'pi' or 'half_pi', got {kind!r}")


def apply_pulse(
    state: StateVector | DensityMatrix, kind: str, theta: float = math.pi
) -> StateVector | DensityMatrix:
    """Instantaneous resonant qubit rotation.

    ``pi`` flips the qubit, ``half_pi`` is the balanced beam-splitter pulse
    whose phase ``theta`` ends up on the superposition.
    """
    u = _qubit_matrix(state.space, _pulse_unitary(kind, theta))
    if isinstance(state, StateVector):
        return StateVector(state.space, u @ state.amplitudes)
    return DensityMatrix(state.space, u @ state.matrix @ u.conj().T)


def _pulse_hamiltonian(space: HilbertSpace, theta: float, rabi: float) -> Operator:
    m2 = -rabi * np.array(
        [[0.0, np.exp(1j * theta)], [np.exp(-1j * theta), 0.0]], dtype=np.complex128
    )
    return Operator(space, _qubit_matrix(space, m2))


def _pulse_duration(kind: str, rabi: float) -> float:
    return math.pi / (2.0 * rabi) if kind == "pi" else math.pi / (4.0 * rabi)


def _jump_list(space: HilbertSpace, protocol: ProtocolParams, magnons: bool):
    jumps = [(annihilation(space, 0), protocol.kappa_a)]
    if magnons:
        jumps.append((annihilation(space, 1), protocol.kappa_m))
        jumps.append((annihilation(space, 2), protocol.kappa_m))
    jumps.append((qubit_lowering(space), protocol.gamma_qubit))
    return jumps


def _evolve(state, hamiltonian, jumps, grid, *, dissipative, sector=None, target=None,
            population_levels=None):
    if dissipative:
        # Tighter tolerance keeps the noise on the zero eigenvalues of rho
        # below the positivity guard over the long transfer window.
        rho = state if isinstance(state, DensityMatrix) else state.to_density_matrix()
        return evolve_lindblad(
            hamiltonian, rho, jumps, grid, tol=1e-10, sector=sector, target=target,
            population_levels=population_levels,
        )
    return evolve_schrodinger(
        hamiltonian, state, grid, tol=1e-9, sector=sector, target=target,
        population_levels=population_levels,
    )


def _finite_pulse(state, kind, theta, rabi, t0, protocol, *, magnons, sector=None,
                  extra: Operator | None = None):
    """Resonant drive window replacing an instantaneous rotation."""
    space = state.space
    h = _pulse_hamiltonian(space, theta, rabi)
    if extra is not None:
        h = Operator(space, h.matrix + extra.matrix)
    width = _pulse_duration(kind, rabi)
    grid = np.linspace(t0, t0 + width, 9)
    jumps = _jump_list(space, protocol, magnons) if protocol.dissipative else None
    traj = _evolve(
        state, h, jumps, grid, dissipative=protocol.dissipative, sector=sector
    )
    return traj.final_state


def prepare_fock(
    params: SystemParams, protocol: ProtocolParams, samples_per_step: int = 17
) -> tuple[StateVector | DensityMatrix, tuple[float, ...], float, tuple[Trajectory, ...]]:
    """Part A: climb to the ``n_quanta`` resonator Fock level.

    Runs on the qubit-resonator pair with the magnons left in vacuum (they
    are decoupled spectators here).  Returns the prepared state, the
    fidelity to the intermediate ladder target after each swap, the elapsed
    time, and the sampled swap-window records (their ``fidelity`` column
    tracks the running ladder target).
    """
    n = protocol.n_quanta
    rabi = protocol.rabi_frequency or _DEFAULT_RABI_IN_G * params.g
    g_jc = protocol.jc_coupling or params.g
    space = make_space((n, 0, 0))
    exchange = Operator(
        space,
        g_jc * (
            qubit_lowering(space).dagger().matrix @ annihilation(space, 0).matrix
            + annihilation(space, 0).dagger().matrix @ qubit_lowering(space).matrix
        ),
    )
    jumps = [(annihilation(space, 0), protocol.kappa_a), (qubit_lowering(space), protocol.gamma_qubit)]

    state: StateVector | DensityMatrix = basis_state(space, "g", 0, 0, 0)
    if protocol.dissipative:
        state = state.to_density_matrix()
    clock = 0.0
    peaks = []
    records = []
    for j in range(1, n + 1):
        if protocol.finite_pulses:
            state = _finite_pulse(
                state, "pi", math.pi, rabi, clock, protocol, magnons=False,
                extra=exchange if protocol.pulse_crosstalk else None,
            )
        else:
            state = apply_pulse(state, "pi", math.pi)
        clock += _pulse_duration("pi", rabi)
        swap = math.pi / (2.0 * math.sqrt(j) * g_jc)
        target = basis_state(space, "g", j, 0, 0)
        grid = np.linspace(clock, clock + swap, samples_per_step)
        traj = _evolve(
            state, exchange, jumps, grid,
            dissipative=protocol.dissipative, target=target, population_levels=(j,),
        )
        state = traj.final_state
        clock += swap
        peaks.append(float(traj.fidelity[-1]))
        records.append(traj)
    return state, tuple(peaks), clock, tuple(records)


def _embed_part_a(state, space: HilbertSpace):
    """Lift a qubit-resonator state into the full space, magnons in vacuum."""
    small = state.space
    idx = np.array(
        [space.index(q, n_a, 0, 0) for q in ("e", "g") for n_a in range(small.mode_dims[0])]
    )
    if isinstance(state, StateVector):
        v = np.zeros(space.total_dim, dtype=np.complex128)
        v[idx] = state.amplitudes
        return StateVector(space, v)
    m = np.zeros((space.total_dim, space.total_dim), dtype=np.complex128)
    m[np.ix_(idx, idx)] = state.matrix
    return DensityMatrix(space, m)


def _alignment_diagonal(space: HilbertSpace, params: SystemParams) -> np.ndarray:
    """Phase gate mapping the transfer output onto the N00N axes: a qubit
    sign together with opposite phase ramps on the two magnon numbers."""
    amp = math.sqrt(3.0) * params.f / 2.0
    diag = np.empty(space.total_dim, dtype=np.complex128)
    for idx in range(space.total_dim):
        qubit, _, n_1, n_2 = space.unindex(idx)
        sign = 1.0 if qubit == "g" else -1.0
        diag[idx] = sign * np.exp(1j * (amp - math.pi / 2.0) * (n_1 - n_2))
    return diag


def _apply_diagonal(state, diag: np.ndarray):
    if isinstance(state, StateVector):
        return StateVector(state.space, diag * state.amplitudes)
    return DensityMatrix(state.space, diag[:, None] * state.matrix * diag.conj()[None, :])


def _expand_rotated_fock(space: HilbertSpace, branch: str, n: int, w: np.ndarray) -> np.ndarray:
    """Amplitudes of ((w . modes)^dagger)^n |vac> / sqrt(n!) on the branch."""
    amps = np.zeros(space.total_dim, dtype=np.complex128)
    for k_a in range(n + 1):
        for k_1 in range(n + 1 - k_a):
            k_2 = n - k_a - k_1
            weight = math.sqrt(
                math.factorial(n)
                / (math.factorial(k_a) * math.factorial(k_1) * math.factorial(k_2))
            )
            amps[space.index(branch, k_a, k_1, k_2)] = (
                weight * (w[0] ** k_a) * (w[1] ** k_1) * (w[2] ** k_2)
            )
    return amps


def _analytic_part_b(state: StateVector, params: SystemParams, period: float) -> StateVector:
    """Closed-form branch-resolved transfer of an arbitrary resonator state."""
    space = state.space
    dims = space.dims
    amps = state.amplitudes.reshape(dims)
    out = np.zeros(space.total_dim, dtype=np.complex128)
    cols = {
        "e": transfer_matrix("e", period, params)[:, 0],
        "g": transfer_matrix("g", period, params)[:, 0],
    }
    for qi, qubit in enumerate(("e", "g")):
        for n_a in range(dims[1]):
            c = amps[qi, n_a, 0, 0]
            if c == 0.0:
                continue
            out += c * _expand_rotated_fock(space, qubit, n_a, cols[qubit])
        rest = np.abs(amps[qi]) ** 2
        rest[:, 0, 0] = 0.0
        if float(rest.sum()) > 1e-12:
            raise ValueError("analytic transfer needs the magnons in vacuum")
    return StateVector(space, out)


def _protocol_total_time(n: int, rabi: float, g_jc: float, period: float) -> float:
    swaps = sum(math.pi / (2.0 * math.sqrt(j) * g_jc) for j in range(1, n + 1))
    return n * _pulse_duration("pi", rabi) + _pulse_duration("half_pi", rabi) + swaps + period


def noon_target(pair: PairSpace, n: int, theta: float, outcome: str) -> StateVector:
    """Heralded N00N state for the given qubit outcome."""
    sign = 1.0 if outcome == "e" else -1.0
    return superposition(
        pair,
        [
            (1.0, pair_basis_state(pair, n, 0)),
            (sign * np.exp(1j * theta), pair_basis_state(pair, 0, n)),
        ],
    )


def run_noon_protocol(params: SystemParams, protocol: ProtocolParams) -> ProtocolResult:
    """Full protocol run conditioned on the configured qubit outcome."""
    return run_noon_protocol_outcomes(params, protocol)[protocol.measurement]


def run_noon_protocol_outcomes(
    params: SystemParams, protocol: ProtocolParams
) -> dict[str, ProtocolResult]:
    """One protocol run heralded on both qubit outcomes.

    The evolution up to the measurement is shared, so this costs the same as
    a single conditioned run.
    """
    n = protocol.n_quanta
    rabi = protocol.rabi_frequency or _DEFAULT_RABI_IN_G * params.g
    g_jc = protocol.jc_coupling or params.g
    period = transfer_time(params)

    state_a, peaks, clock, _ = prepare_fock(params, protocol)
    space = make_space((n, n, n))
    state = _embed_part_a(state_a, space)

    if protocol.finite_pulses:
        sector = excitation_sector_at_most(space, n + 1) if protocol.dissipative else None
        state = _finite_pulse(
            state, "half_pi", protocol.theta, rabi, clock, protocol, magnons=True, sector=sector
        )
    else:
        state = apply_pulse(state, "half_pi", protocol.theta)

    trajectory = None
    if protocol.part_b_model == "analytic":
        state = _analytic_part_b(state, params, period)
    else:
        if protocol.part_b_model == "full":
            hamiltonian = full_hamiltonian_terms(space, params)
        else:
            hamiltonian = effective_hamiltonian(space, params)
        grid = np.linspace(0.0, period, 25)
        if protocol.dissipative:
            sector = excitation_sector_at_most(space, n + 1)
        else:
            sector = excitation_sector(space, (n, n + 1))
        trajectory = _evolve(
            state, hamiltonian, _jump_list(space, protocol, magnons=True), grid,
            dissipative=protocol.dissipative, sector=sector, population_levels=(n,),
        )
        state = trajectory.final_state
        if protocol.part_b_model == "full":
            state = _apply_diagonal(state, np.conj(effective_frame_map(space, params, period)))

    state = _apply_diagonal(state, _alignment_diagonal(space, params))

    if protocol.finite_pulses:
        sector = excitation_sector_at_most(space, n + 2) if protocol.dissipative else None
        state = _finite_pulse(
            state, "half_pi", math.pi, rabi, clock + period, protocol, magnons=True, sector=sector
        )
    else:
        state = apply_pulse(state, "half_pi", math.pi)

    rho = state if isinstance(state, DensityMatrix) else state.to_density_matrix()
    total = _protocol_total_time(n, rabi, g_jc, period)
    results = {}
    for outcome in ("e", "g"):
        magnon_state, probability = project_qubit(rho, outcome)
        target = noon_target(magnon_state.space, n, protocol.theta, outcome)
        results[outcome] = ProtocolResult(
            noon_fidelity=fidelity(magnon_state, target),
            outcome_probability=probability,
            fock_prep_fidelity=peaks[-1],
            total_time=total,
            part_a_peaks=peaks,
            part_b_trajectory=trajectory,
            magnon_state=magnon_state,
        )
    return results


def run_entangler(
    params: SystemParams,
    resonator_amplitudes: Iterable[complex],
    theta: float = 0.0,
    measurement: str = "e",
    model: str = "effective",
) -> tuple[DensityMatrix, float, float]:
    """Split an arbitrary resonator state onto the two magnon modes.

    The alignment gate cancels the per-quantum transfer phases exactly, so
    the heralded magnon state is ``(|phi,0> +/- e^{i theta}|0,phi>)/sqrt(2)``
    with the same amplitudes as the input.  Returns the heralded magnon
    state, the outcome probability and the fidelity to that target.
    """
    coeffs = np.asarray(list(resonator_amplitudes), dtype=np.complex128)
    if coeffs.ndim != 1 or len(coeffs) == 0:
        raise ValueError("resonator_amplitudes must be a non-empty sequence")
    if abs(np.linalg.norm(coeffs) - 1.0) > 1e-8:
        raise ValueError("resonator amplitudes must be normalized")
    if measurement not in ("e", "g"):
        raise ValueError(f"measurement must be 'e' or 'g', got {measurement!r}")
    if model not in ("full", "effective", "analytic"):
        raise ValueError("model must be 'full', 'effective' or 'analytic'")
    cutoff = len(coeffs) - 1
    space = make_space((cutoff, cutoff, cutoff))
    period = transfer_time(params)

    packet = np.zeros(space.total_dim, dtype=np.complex128)
    for n_a, c in enumerate(coeffs):
        packet[space.index("g", n_a, 0, 0)] = c
    state = apply_pulse(StateVector(space, packet), "half_pi", theta)

    if model == "analytic":
        state = _analytic_part_b(state, params, period)
    else:
        if model == "full":
            hamiltonian = full_hamiltonian_terms(space, params)
        else:
            hamiltonian = effective_hamiltonian(space, params)
        traj = evolve_schrodinger(hamiltonian, state, np.linspace(0.0, period, 9))
        state = traj.final_state
        if model == "full":
            state = _apply_diagonal(state, np.conj(effective_frame_map(space, params, period)))

    state = _apply_diagonal(state, _alignment_diagonal(space, params))
    state = apply_pulse(state, "half_pi", math.pi)
    magnon_state, probability = project_qubit(state.to_density_matrix(), measurement)

    pair = magnon_state.space
    sign = 1.0 if measurement == "e" else -1.0
    target_vec = np.zeros(pair.total_dim, dtype=np.complex128)
    for n_a, c in enumerate(coeffs):
        target_vec[pair.index(n_a, 0)] += c
        target_vec[pair.index(0, n_a)] += sign * np.exp(1j * theta) * c
    target = StateVector(pair, target_vec / np.linalg.norm(target_vec))
    return magnon_state, probability, fidelity(magnon_state, target)
