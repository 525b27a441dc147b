"""State evolution: closed-form chiral transfer and numerical integration.

The closed-form side covers the single-excitation transfer matrices of the
effective triangle and their lift to resonator Fock superpositions.  The
numerical side wraps the integration kernels with population/fidelity
bookkeeping, optional excitation-sector reduction and the safety monitors
(norm, trace, positivity).
"""

from __future__ import annotations

import math
from collections.abc import Iterable
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .floquet import SystemParams, TimeDependentOperator, coupling_strengths
from .operators import (
    DensityMatrix,
    HilbertSpace,
    Operator,
    SectorBasis,
    StateVector,
    make_space,
    fock_population,
)

_TRACE_ABORT = 1e-5
# Zero eigenvalues of a sampled density matrix pick up integrator noise of
# roughly (steps x local tolerance); long drive windows reach a few 1e-7.
_EIG_ABORT = 1e-6
_BRANCHES = ("e", "g")


class NumericalAbort(RuntimeError):
    """Integration left the physically trusted regime."""


def _xyz(theta: float) -> tuple[float, float, float]:
    x = 1.0 + 2.0 * math.cos(theta)
    y = 1.0 + 2.0 * math.cos(theta - 2.0 * math.pi / 3.0)
    z = 1.0 + 2.0 * math.cos(theta + 2.0 * math.pi / 3.0)
    return x, y, z


def transfer_matrix(branch: str, t: float, params: SystemParams) -> np.ndarray:
    """Closed-form mode-transfer matrix of the effective triangle.

    Returns the 3x3 unitary connecting the (a, m_1, m_2) single-excitation
    amplitudes at time ``t`` for the given qubit branch.  The excited branch
    circulates a -> m_2 -> m_1 at one third of the triangle period; the
    ground branch runs the cycle backwards.
    """
    if branch not in _BRANCHES:
        raise ValueError(f"branch must be 'e' or 'g', got {branch!r}")
    g_eff = coupling_strengths(params).g_eff
    amp = math.sqrt(3.0) * params.f / 2.0
    theta = math.sqrt(3.0) * g_eff * t
    if branch == "g":
        theta = -theta
    x, y, z = _xyz(theta)
    ea = np.exp(1j * amp)
    m = np.array(
        [
            [x, -1j * ea * y, 1j * np.conj(ea) * z],
            [1j * np.conj(ea) * z, x, -(ea ** -2) * y],
            [-1j * ea * y, -(ea ** 2) * z, x],
        ],
        dtype=np.complex128,
    )
    return m / 3.0


def propagate_fock_superposition(
    coeffs: Iterable[complex],
    branch: str,
    t: float,
    params: SystemParams,
) -> StateVector:
    """Closed-form evolution of a resonator Fock superposition.

    ``coeffs[n]`` is the amplitude of the ``n``-quantum resonator level with
    the magnons in vacuum.  Each creation operator is rotated through the
    transfer matrix and the result is expanded multinomially over the three
    modes, giving the evolved state on a space with all cutoffs at the
    highest occupied level.  The qubit slot carries the branch label.
    """
    coeffs = np.asarray(list(coeffs), dtype=np.complex128)
    if coeffs.ndim != 1 or len(coeffs) == 0:
        raise ValueError("coeffs must be a non-empty amplitude sequence")
    if abs(np.linalg.norm(coeffs) - 1.0) > 1e-8:
        raise ValueError("resonator amplitudes must be normalized")
    n_max = len(coeffs) - 1
    space = make_space((n_max, n_max, n_max))
    # Amplitudes of the rotated creation operator: conjugated first column.
    w = np.conj(transfer_matrix(branch, t, params)[:, 0])
    amps = np.zeros(space.total_dim, dtype=np.complex128)
    for n, c_n in enumerate(coeffs):
        if c_n == 0.0:
            continue
        for k_a in range(n + 1):
            for k_1 in range(n + 1 - k_a):
                k_2 = n - k_a - k_1
                weight = math.sqrt(
                    math.factorial(n)
                    / (math.factorial(k_a) * math.factorial(k_1) * math.factorial(k_2))
                )
                idx = space.index(branch, k_a, k_1, k_2)
                amps[idx] += c_n * weight * (w[0] ** k_a) * (w[1] ** k_1) * (w[2] ** k_2)
    return StateVector(space, amps)


def fidelity(state: StateVector | DensityMatrix, target: StateVector | DensityMatrix) -> float:
    """Overlap fidelity; mixed-state pairs use the Uhlmann form."""
    if state.space.total_dim != target.space.total_dim:
        raise ValueError("state and target dimensions differ")
    if isinstance(state, StateVector) and isinstance(target, StateVector):
        return float(abs(np.vdot(target.amplitudes, state.amplitudes)) ** 2)
    if isinstance(state, StateVector):
        state, target = target, state
    if isinstance(target, StateVector):
        v = target.amplitudes
        return float(np.real(np.vdot(v, state.matrix @ v)))
    # Both mixed: (tr sqrt(sqrt(rho) sigma sqrt(rho)))^2 via eigenbasis.
    vals, vecs = np.linalg.eigh(state.matrix)
    vals = np.clip(vals, 0.0, None)
    sqrt_rho = (vecs * np.sqrt(vals)) @ vecs.conj().T
    inner = sqrt_rho @ target.matrix @ sqrt_rho
    eig = np.clip(np.linalg.eigvalsh(inner), 0.0, None)
    return float(np.sum(np.sqrt(eig)) ** 2)


def effective_frame_map(space: HilbertSpace, params: SystemParams, t: float) -> np.ndarray:
    """Diagonal of the unitary relating the integrated frame to the frame in
    which the effective triangle takes its closed form.

    ``psi_closed(t) = conj(diag) * psi_integrated(t)`` elementwise, i.e. the
    map's inverse is its conjugate.  It combines the accumulated drive phases
    on the magnon modes with the static gauge twist that symmetrizes the
    triangle couplings.
    """
    f, omega = params.f, params.omega
    phi = params.phi
    diag = np.ones(space.total_dim, dtype=np.complex128)
    for idx in range(space.total_dim):
        _, _, n_1, n_2 = space.unindex(idx)
        phase = 0.0
        for n_k, phik in ((n_1, phi[0]), (n_2, phi[1])):
            s_k = math.sin(phik)
            beta = f * (math.sin(omega * t - phik) + s_k)
            phase += -beta * n_k + 2.0 * f * s_k * n_k
        diag[idx] = np.exp(1j * phase)
    return diag


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Sampled evolution record.

    ``p_a, p_1, p_2`` are exclusive single-mode populations: the probability
    that the marked mode holds one of the tracked Fock levels while the other
    two bosonic modes sit in vacuum, with the qubit traced out.  ``norm`` is
    the state norm or the density-matrix trace; ``leakage`` is the weight
    outside the three tracked single-mode manifolds (a diagnostic lower
    bound when level 0 is tracked, since the vacuum is shared); ``fidelity``
    is the overlap with the optional target, ``min_eigenvalue`` the
    positivity monitor of dissipative runs.
    """

    times: np.ndarray
    p_a: np.ndarray
    p_1: np.ndarray
    p_2: np.ndarray
    norm: np.ndarray
    leakage: np.ndarray
    fidelity: np.ndarray | None
    min_eigenvalue: np.ndarray | None
    n_steps: int
    final_state: StateVector | DensityMatrix


def _as_terms(hamiltonian) -> TimeDependentOperator:
    if isinstance(hamiltonian, TimeDependentOperator):
        return hamiltonian
    if isinstance(hamiltonian, Operator):
        d = hamiltonian.space.total_dim
        return TimeDependentOperator(
            hamiltonian.space,
            hamiltonian.matrix,
            np.zeros((0, d, d), dtype=np.complex128),
            np.zeros(0),
            np.zeros(0),
        )
    raise TypeError(
        "hamiltonian must be a TimeDependentOperator or a static Operator"
    )


def _grid(t_grid) -> np.ndarray:
    grid = np.asarray(t_grid, dtype=np.float64)
    if grid.ndim != 1 or len(grid) < 2:
        raise ValueError("time grid needs at least two points")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("time grid must increase strictly")
    return grid

def _step_bounds(terms: TimeDependentOperator, grid: np.ndarray, max_step):
    span = float(grid[-1] - grid[0])
    if max_step is None:
        w = terms.max_frequency
        max_step = (2.0 * math.pi / w) / 20.0 if w > 0 else span / 10.0
    max_step = min(float(max_step), span)
    return max_step, max_step / 10.0


def _infer_levels(weights: np.ndarray, space: HilbertSpace) -> tuple[int, ...]:
    """Resonator levels that carry initial population, others in vacuum."""
    probs = weights.reshape(space.dims)
    levels = [
        n for n in range(space.mode_dims[0]) if float(np.sum(probs[:, n, 0, 0])) > 1e-12
    ]
    return tuple(levels) if levels else (space.mode_cutoffs[0],)


def _populations(state, levels):
    cutoffs = state.space.mode_cutoffs
    out = []
    for mode in range(3):
        kept = [lv for lv in levels if lv <= cutoffs[mode]]
        out.append(fock_population(state, mode, kept) if kept else 0.0)
    return tuple(out)


def evolve_schrodinger(
    hamiltonian,
    psi0: StateVector,
    t_grid,
    tol: float = 1e-9,
    population_levels: Iterable[int] | None = None,
    target: StateVector | None = None,
    sector: SectorBasis | None = None,
    max_step: float | None = None,
) -> Trajectory:
    """Integrate the Schroedinger equation and record mode populations.

    ``population_levels`` picks the tracked Fock levels (default: resonator
    levels populated at ``t_grid[0]``).  ``sector`` restricts the integration
    to an excitation sector; the Hamiltonian must conserve the excitation
    number for this to be exact.  The final state is renormalized; the raw
    norm drift stays visible in the ``norm`` column.
    """
    terms = _as_terms(hamiltonian)
    space = terms.space
    if psi0.space != space:
        raise ValueError("initial state lives on a different space")
    grid = _grid(t_grid)
    max_step, first_step = _step_bounds(terms, grid, max_step)

    if sector is not None:
        h_static = sector.project_matrix(terms.static)
        cos_amps = (
            np.stack([sector.project_matrix(m) for m in terms.cos_amps])
            if len(terms.cos_freqs)
            else np.zeros((0, sector.dim, sector.dim), dtype=np.complex128)
        )
        y0 = sector.project_vector(psi0.amplitudes)
        lost = 1.0 - float(np.linalg.norm(y0) ** 2)
        if lost > 1e-10:
            raise ValueError(f"initial state has weight {lost:.3e} outside the sector")
    else:
        h_static = terms.static
        cos_amps = terms.cos_amps
        y0 = psi0.amplitudes

    try:
        samples, n_steps = _kernels.schrodinger_dopri5(
            h_static,
            cos_amps,
            terms.cos_freqs,
            terms.cos_phases,
            y0,
            grid,
            tol,
            tol,
            max_step,
            first_step,
        )
    except RuntimeError as exc:
        raise NumericalAbort(str(exc)) from exc

    levels = tuple(population_levels) if population_levels is not None else None
    cols = {"p_a": [], "p_1": [], "p_2": [], "norm": [], "leak": []}
    fid = [] if target is not None else None
    final = None
    for i in range(len(grid)):
        vec = sector.embed_vector(samples[i]) if sector is not None else samples[i]
        norm = float(np.linalg.norm(vec))
        state = StateVector(space, vec / norm)
        if levels is None:
            levels = _infer_levels(np.abs(vec) ** 2, space)
        p = _populations(state, levels)
        cols["p_a"].append(p[0])
        cols["p_1"].append(p[1])
        cols["p_2"].append(p[2])
        cols["norm"].append(norm)
        cols["leak"].append(max(0.0, 1.0 - p[0] - p[1] - p[2]))
        if fid is not None:
            fid.append(fidelity(state, target))
        if i == len(grid) - 1:
            final = state
    return Trajectory(
        times=grid,
        p_a=np.asarray(cols["p_a"]),
        p_1=np.asarray(cols["p_1"]),
        p_2=np.asarray(cols["p_2"]),
        norm=np.asarray(cols["norm"]),
        leakage=np.asarray(cols["leak"]),
        fidelity=np.asarray(fid) if fid is not None else None,
        min_eigenvalue=None,
        n_steps=n_steps,
        final_state=final,
    )


def _validate_density_sample(raw: np.ndarray, t: float) -> tuple[float, np.ndarray]:
    """Trace and positivity guards for one sampled density matrix.

    Returns the smallest eigenvalue of the Hermitized sample together with
    the sample projected back onto the physical set (tolerated negative
    weights clipped, trace rescaled to one).
    """
    trace = float(np.real(np.trace(raw)))
    if abs(trace - 1.0) > _TRACE_ABORT:
        raise NumericalAbort(
            f"trace drifted to {trace!r} at t={t!r}; integration not trustworthy"
        )
    sym = 0.5 * (raw + raw.conj().T)
    vals, vecs = np.linalg.eigh(sym)
    low = float(vals[0])
    if low < -_EIG_ABORT:
        raise NumericalAbort(
            f"negative eigenvalue {low!r} at t={t!r}; integration not trustworthy"
        )
    clipped = np.clip(vals, 0.0, None)
    cleaned = (vecs * clipped) @ vecs.conj().T
    return low, cleaned / np.sum(clipped)


def _jump_coo(mats: list[np.ndarray], rates: list[float]):
    ptr = [0]
    rows: list[int] = []
    cols: list[int] = []
    vals: list[complex] = []
    for m, rate in zip(mats, rates):
        r, c = np.nonzero(m)
        rows.extend(int(i) for i in r)
        cols.extend(int(i) for i in c)
        vals.extend(math.sqrt(rate) * m[r, c])
        ptr.append(len(rows))
    return (
        np.asarray(ptr, dtype=np.intp),
        np.asarray(rows, dtype=np.intp),
        np.asarray(cols, dtype=np.intp),
        np.asarray(vals, dtype=np.complex128),
    )


def evolve_lindblad(
    hamiltonian,
    rho0: DensityMatrix,
    jump_ops: Iterable[tuple[Operator, float]],
    t_grid,
    tol: float = 1e-9,
    population_levels: Iterable[int] | None = None,
    target: StateVector | None = None,
    sector: SectorBasis | None = None,
    max_step: float | None = None,
) -> Trajectory:
    """Integrate the Lindblad master equation with safety monitors.

    ``jump_ops`` pairs each collapse operator with its rate.  The sampled
    trace must stay within 1e-5 of one and the smallest eigenvalue above
    -1e-7, otherwise ``NumericalAbort`` is raised.  With ``sector`` given,
    the generator is projected onto the sector; this is exact when the
    Hamiltonian conserves the excitation number and every jump operator
    lowers it.
    """
    terms = _as_terms(hamiltonian)
    space = terms.space
    if rho0.space != space:
        raise ValueError("initial state lives on a different space")
    grid = _grid(t_grid)
    max_step, first_step = _step_bounds(terms, grid, max_step)

    mats = []
    rates = []
    for op, rate in jump_ops:
        if op.space != space:
            raise ValueError("jump operator lives on a different space")
        if rate < 0:
            raise ValueError(f"negative dissipation rate {rate}")
        if rate > 0:
            mats.append(op.matrix)
            rates.append(float(rate))

    if sector is not None:
        h_static = sector.project_matrix(terms.static)
        cos_amps = (
            np.stack([sector.project_matrix(m) for m in terms.cos_amps])
            if len(terms.cos_freqs)
            else np.zeros((0, sector.dim, sector.dim), dtype=np.complex128)
        )
        mats = [sector.project_matrix(m) for m in mats]
        r0 = sector.project_matrix(rho0.matrix)
        lost = 1.0 - float(np.real(np.trace(r0)))
        if lost > 1e-10:
            raise ValueError(f"initial state has weight {lost:.3e} outside the sector")
        dim = sector.dim
    else:
        h_static = terms.static
        cos_amps = terms.cos_amps
        r0 = rho0.matrix
        dim = space.total_dim

    damp = np.zeros((dim, dim), dtype=np.complex128)
    for m, rate in zip(mats, rates):
        damp += 0.5 * rate * (m.conj().T @ m)
    ptr, rows, cols_idx, vals = _jump_coo(mats, rates)

    try:
        samples, n_steps = _kernels.lindblad_dopri5(
            h_static,
            cos_amps,
            terms.cos_freqs,
            terms.cos_phases,
            damp,
            ptr,
            rows,
            cols_idx,
            vals,
            r0,
            grid,
            tol,
            tol,
            max_step,
            first_step,
        )
    except RuntimeError as exc:
        raise NumericalAbort(str(exc)) from exc

    levels = tuple(population_levels) if population_levels is not None else None
    cols = {"p_a": [], "p_1": [], "p_2": [], "norm": [], "leak": []}
    fid = [] if target is not None else None
    eigs = []
    final = None
    for i in range(len(grid)):
        raw = samples[i]
        trace = float(np.real(np.trace(raw)))
        low, cleaned = _validate_density_sample(raw, float(grid[i]))
        eigs.append(low)
        full = sector.embed_matrix(cleaned) if sector is not None else cleaned
        state = DensityMatrix(space, full)
        if levels is None:
            levels = _infer_levels(np.real(np.diag(full)), space)
        p = _populations(state, levels)
        cols["p_a"].append(p[0])
        cols["p_1"].append(p[1])
        cols["p_2"].append(p[2])
        cols["norm"].append(trace)
        cols["leak"].append(max(0.0, 1.0 - p[0] - p[1] - p[2]))
        if fid is not None:
            fid.append(fidelity(state, target))
        if i == len(grid) - 1:
            final = state
    return Trajectory(
        times=grid,
        p_a=np.asarray(cols["p_a"]),
        p_1=np.asarray(cols["p_1"]),
        p_2=np.asarray(cols["p_2"]),
        norm=np.asarray(cols["norm"]),
        leakage=np.asarray(cols["leak"]),
        fidelity=np.asarray(fid) if fid is not None else None,
        min_eigenvalue=np.asarray(eigs),
        n_steps=n_steps,
        final_state=final,
    )
