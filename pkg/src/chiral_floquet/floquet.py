"""System parameters, drive engineering and Hamiltonian builders.

The model is a qubit exchange-coupled to a resonator mode and two magnon
modes.  A single-tone cosine drive on each magnon frequency and on the
qubit-resonator coupling turns the static star-shaped coupling graph into an
effective chiral triangle among the three bosonic modes, with the circulation
direction set by the qubit state.

Drive phases enter every builder through ``cos(omega t - phi_k)``; the
second-order effective Hamiltonians below are written in the frame where
their coefficient matrices take the published closed form, and the two
conventions are consistent (see the frame helpers in ``dynamics``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .operators import (
    HilbertSpace,
    Operator,
    annihilation,
    number_operator,
    qubit_lowering,
    qubit_sigma_z,
)

_SERIES_MAX_ORDER = 200
_F_CONSISTENCY_TOL = 1e-12
_RESONANCE_TOL = 1e-9
_OPERATING_POINT_TOL = 1e-6


def bessel_j(n: int, x: float) -> float:
    """Integer-order Bessel function of the first kind, by power series.

    The series is summed until the next term falls below 1e-16 of the
    accumulated value, which is plenty for the drive-index arguments used
    here (|x| of order a few).
    """
    n = int(n)
    if n < 0:
        val = bessel_j(-n, x)
        return -val if (-n) % 2 else val
    x = float(x)
    half = 0.5 * x
    # Leading term (x/2)^n / n!
    term = 1.0
    for m in range(1, n + 1):
        term *= half / m
        if term == 0.0:
            return 0.0
    total = term
    ratio = -half * half
    m = 0
    while True:
        m += 1
        term *= ratio / (m * (n + m))
        total += term
        if abs(term) <= 1e-16 * abs(total) or m > 400:
            return total


def find_j0_zero() -> float:
    """First positive zero of J_0, by Newton iteration from 2.4."""
    x = 2.4
    for _ in range(60):
        j0 = bessel_j(0, x)
        j1 = bessel_j(1, x)
        x += j0 / j1  # J_0' = -J_1
        if abs(bessel_j(0, x)) < 1e-12:
            return x
    raise RuntimeError("Newton iteration for the J_0 zero did not converge")


@dataclass(frozen=True)
class SystemParams:
    """Physical parameters of the driven qubit/resonator/two-magnon system.

    Omitted fields are resolved at construction: the drive index ``f``
    defaults to the first zero of J_0 (and ``delta_drive`` to ``f * omega``),
    the qubit-resonator amplitude ``g_a`` to the value that matches the
    effective star couplings to the chiral one, ``omega`` to ``20 g`` and
    ``omega_a`` to ``10 omega``.  ``f == delta_drive / omega`` is enforced
    to 1e-12 when both are supplied.
    """

    g: float = 1.0
    g_a: float | None = None
    omega: float | None = None
    delta_drive: float | None = None
    f: float | None = None
    phi: tuple[float, float] = (2.0 * math.pi / 3.0, 4.0 * math.pi / 3.0)
    omega_a: float | None = None

    def __post_init__(self) -> None:
        if self.g <= 0:
            raise ValueError(f"coupling g must be positive, got {self.g}")
        omega = 20.0 * self.g if self.omega is None else float(self.omega)
        if omega <= 0:
            raise ValueError(f"drive frequency must be positive, got {omega}")
        f = self.f
        delta = self.delta_drive
        if f is None and delta is None:
            f = find_j0_zero()
            delta = f * omega
        elif f is None:
            f = delta / omega
        elif delta is None:
            delta = f * omega
        else:
            if abs(f - delta / omega) > _F_CONSISTENCY_TOL * max(1.0, abs(f)):
                raise ValueError(
                    f"inconsistent drive index: f={f} but delta_drive/omega={delta / omega}"
                )
        phi = tuple(float(p) for p in self.phi)
        if len(phi) != 2:
            raise ValueError("phi must hold exactly two drive phases")
        g_a = self.g_a
        if g_a is None:
            g_a = _matched_ga_value(self.g, omega, f, phi)
        omega_a = 10.0 * omega if self.omega_a is None else float(self.omega_a)
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "f", float(f))
        object.__setattr__(self, "delta_drive", float(delta))
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "g_a", float(g_a))
        object.__setattr__(self, "omega_a", omega_a)


@dataclass(frozen=True)
class ErrorParams:
    """Deviation knobs for the nonideal Hamiltonian variants.

    ``delta`` skews the two qubit-magnon couplings to ``g(1 +/- delta)``;
    ``epsilon_k`` scale the two drive amplitudes by ``(1 + epsilon_k)`` and
    must lie in ``[0, epsilon]``; ``chi`` detunes either the magnon pair
    (antisymmetrically) or the qubit, chosen by ``mismatch_target``.
    """

    delta: float = 0.0
    epsilon: float = 0.0
    epsilon_k: tuple[float, float] = (0.0, 0.0)
    chi: float = 0.0
    mismatch_target: str = "magnons"

    def __post_init__(self) -> None:
        if abs(self.delta) > 1.0:
            raise ValueError(f"relative coupling error |delta| must not exceed 1, got {self.delta}")
        if not 0.0 <= self.epsilon < 1.0:
            raise ValueError(f"drive error bound must satisfy 0 <= epsilon < 1, got {self.epsilon}")
        eps_k = tuple(float(e) for e in self.epsilon_k)
        if len(eps_k) != 2:
            raise ValueError("epsilon_k must hold exactly two samples")
        for e in eps_k:
            if not 0.0 <= e <= self.epsilon:
                raise ValueError(f"epsilon_k sample {e} outside [0, {self.epsilon}]")
        if self.mismatch_target not in ("magnons", "qubit"):
            raise ValueError(f"mismatch_target must be 'magnons' or 'qubit', got {self.mismatch_target!r}")
        object.__setattr__(self, "epsilon_k", eps_k)


@dataclass(frozen=True)
class EffectiveCouplings:
    """Second-order coupling strengths of the bosonic triangle.

    ``g_1, g_2`` are the resonator-magnon legs, ``g_12`` the magnon-magnon
    leg and ``g_eff = |g_12|`` the common magnitude at the operating point.
    The primed fields are the finite-frequency corrected couplings and the
    resonant counter-rotating ones; they stay ``None`` unless filled by
    ``counter_rotating_couplings``.
    """

    g_1: float
    g_2: float
    g_12: float
    g_eff: float
    off_operating_point: bool
    gp_1: float | None = None
    gp_2: float | None = None
    gp_12: float | None = None
    Gp_1: complex | None = None
    Gp_2: complex | None = None
    Gp_12: complex | None = None
    n_prime: int | None = None


def _chiral_series(f: float, dphi: float, weight, series_tol: float) -> float:
    """sum_n weight(n) J_n(f)^2 sin(n dphi), truncated when J_n dies out."""
    total = 0.0
    for n in range(1, _SERIES_MAX_ORDER + 1):
        jn = bessel_j(n, f)
        if n > abs(f) and abs(jn) < series_tol:
            break
        total += weight(n) * jn * jn * math.sin(n * dphi)
    return total


def _matched_ga_value(g: float, omega: float, f: float, phi: tuple[float, float]) -> float:
    j1 = bessel_j(1, f)
    cos1 = math.cos(phi[0])
    if abs(j1 * cos1) < 1e-12:
        raise ValueError("cannot match g_a: J_1(f) cos(phi_1) vanishes")
    g12 = 2.0 * g * g / omega * _chiral_series(f, phi[1] - phi[0], lambda n: 1.0 / n, 1e-12)
    return abs(g12) * omega / (g * abs(j1 * cos1))


def coupling_strengths(params: SystemParams, series_tol: float = 1e-12) -> EffectiveCouplings:
    """Second-order star and triangle couplings for the given parameters."""
    g, g_a, omega, f = params.g, params.g_a, params.omega, params.f
    phi_1, phi_2 = params.phi
    j1 = bessel_j(1, f)
    g_1 = -g_a * g * j1 * math.cos(phi_1) / omega
    g_2 = -g_a * g * j1 * math.cos(phi_2) / omega
    g_12 = 2.0 * g * g / omega * _chiral_series(f, phi_2 - phi_1, lambda n: 1.0 / n, series_tol)
    g_eff = abs(g_12)
    scale = max(g_eff, 1e-300)
    off = (
        abs(bessel_j(0, f)) > _OPERATING_POINT_TOL
        or abs(abs(g_1) - g_eff) > _OPERATING_POINT_TOL * scale
        or abs(abs(g_2) - g_eff) > _OPERATING_POINT_TOL * scale
    )
    return EffectiveCouplings(g_1=g_1, g_2=g_2, g_12=g_12, g_eff=g_eff, off_operating_point=off)


def matched_ga(params: SystemParams) -> float:
    """Qubit-resonator drive amplitude that equalizes all triangle legs."""
    return _matched_ga_value(params.g, params.omega, params.f, params.phi)


def counter_rotating_couplings(
    params: SystemParams,
    n_prime: int | None = None,
    series_tol: float = 1e-12,
) -> EffectiveCouplings:
    """Couplings including the finite qubit frequency and, on resonance
    ``2 omega_a = n' omega`` with integer ``n' >= 2``, the counter-rotating
    pair-creation couplings.  Off resonance the latter are zero.
    """
    g, g_a, omega, f, omega_a = params.g, params.g_a, params.omega, params.f, params.omega_a
    phi_1, phi_2 = params.phi
    base = coupling_strengths(params, series_tol)

    if n_prime is None:
        ratio = 2.0 * omega_a / omega
        nearest = round(ratio)
        if abs(ratio - nearest) <= _RESONANCE_TOL and nearest >= 1:
            n_prime = int(nearest)
    else:
        n_prime = int(n_prime)
        if n_prime < 1:
            raise ValueError(f"resonance order must be a positive integer, got {n_prime}")
    if n_prime == 1:
        raise ValueError("resonance order n' = 1 is outside the validity of the expansion")

    j1 = bessel_j(1, f)
    weight = 1.0 / omega - 1.0 / (2.0 * omega_a + omega)
    gp_1 = -g_a * g * j1 * math.cos(phi_1) * weight
    gp_2 = -g_a * g * j1 * math.cos(phi_2) * weight
    gp_12 = 2.0 * g * g * _chiral_series(
        f,
        phi_2 - phi_1,
        lambda n: 1.0 / (n * omega) - 1.0 / (2.0 * omega_a + n * omega),
        series_tol,
    )

    if n_prime is None:
        zero = complex(0.0)
        return EffectiveCouplings(
            g_1=base.g_1,
            g_2=base.g_2,
            g_12=base.g_12,
            g_eff=base.g_eff,
            off_operating_point=base.off_operating_point,
            gp_1=gp_1,
            gp_2=gp_2,
            gp_12=gp_12,
            Gp_1=zero,
            Gp_2=zero,
            Gp_12=zero,
            n_prime=None,
        )

    sign = (-1.0) ** (n_prime - 1)

    def big_g(phik: float) -> complex:
        lower = n_prime * np.exp(-1j * (n_prime - 1) * phik) * bessel_j(n_prime - 1, f) / (n_prime - 1)
        upper = n_prime * np.exp(-1j * (n_prime + 1) * phik) * bessel_j(n_prime + 1, f) / (n_prime + 1)
        return sign * (g_a * g / omega) * (lower - upper)

    total = 0.0 + 0.0j
    for n in range(1, _SERIES_MAX_ORDER + 1):
        jn = bessel_j(n, f)
        jshift = bessel_j(n + n_prime, f)
        if n > abs(f) and abs(jn) < series_tol:
            break
        pref = (-1.0) ** (n + n_prime) * n_prime / (n * (n_prime + n)) * jn * jshift
        total += pref * (
            np.exp(-1j * (n * phi_1 - (n + n_prime) * phi_2))
            + np.exp(-1j * (n * phi_2 - (n + n_prime) * phi_1))
        )
    finite = 0.0 + 0.0j
    # J_n(f) J_{n'-n}(f) needs both orders within reach of f; the middle of a
    # long sum underflows, so only the two tails are visited.
    if n_prime - 1 <= 2 * _SERIES_MAX_ORDER:
        finite_orders = range(1, n_prime)
    else:
        finite_orders = list(range(1, _SERIES_MAX_ORDER + 1)) + list(
            range(n_prime - _SERIES_MAX_ORDER, n_prime)
        )
    for n in finite_orders:
        finite += (
            bessel_j(n, f)
            * bessel_j(n_prime - n, f)
            / n
            * (
                np.exp(1j * (n * phi_1 + (n_prime - n) * phi_2))
                + np.exp(1j * (n * phi_2 + (n_prime - n) * phi_1))
            )
        )
    gp_big_12 = (g * g / omega) * (total + (-1.0) ** n_prime * finite)

    return EffectiveCouplings(
        g_1=base.g_1,
        g_2=base.g_2,
        g_12=base.g_12,
        g_eff=base.g_eff,
        off_operating_point=base.off_operating_point,
        gp_1=gp_1,
        gp_2=gp_2,
        gp_12=gp_12,
        Gp_1=complex(big_g(phi_1)),
        Gp_2=complex(big_g(phi_2)),
        Gp_12=complex(gp_big_12),
        n_prime=n_prime,
    )


@dataclass(frozen=True, eq=False)
class TimeDependentOperator:
    """Hamiltonian in structured form: a static matrix plus cosine terms.

    ``H(t) = static + sum_j cos(freq_j t + phase_j) amp_j``.  This is the
    shape the integration kernels consume directly.
    """

    space: HilbertSpace
    static: np.ndarray
    cos_amps: np.ndarray
    cos_freqs: np.ndarray
    cos_phases: np.ndarray

    def __post_init__(self) -> None:
        d = self.space.total_dim
        static = np.asarray(self.static, dtype=np.complex128)
        amps = np.asarray(self.cos_amps, dtype=np.complex128)
        freqs = np.asarray(self.cos_freqs, dtype=np.float64)
        phases = np.asarray(self.cos_phases, dtype=np.float64)
        if static.shape != (d, d):
            raise ValueError("static part has wrong shape")
        if amps.ndim != 3 or amps.shape[1:] != (d, d) or amps.shape[0] != len(freqs):
            raise ValueError("cosine amplitude stack has wrong shape")
        if len(freqs) != len(phases):
            raise ValueError("frequency and phase lists differ in length")
        object.__setattr__(self, "static", static)
        object.__setattr__(self, "cos_amps", amps)
        object.__setattr__(self, "cos_freqs", freqs)
        object.__setattr__(self, "cos_phases", phases)

    @property
    def max_frequency(self) -> float:
        return float(np.max(self.cos_freqs)) if len(self.cos_freqs) else 0.0

    def at(self, t: float) -> Operator:
        m = self.static.copy()
        for amp, w, p in zip(self.cos_amps, self.cos_freqs, self.cos_phases):
            m += math.cos(w * t + p) * amp
        return Operator(self.space, m)

    def __call__(self, t: float) -> Operator:
        return self.at(t)


FULL_VARIANTS = (
    "ideal",
    "coupling-deviation",
    "drive-error",
    "magnon-mismatch",
    "qubit-mismatch",
    "lab-frame-CR",
)

EFFECTIVE_VARIANTS = ("ideal", "coupling-deviation", "drive-error", "lab-frame-CR")


def _exchange(space: HilbertSpace, mode: int, coupling: float) -> np.ndarray:
    """coupling * (sigma^+ m + sigma^- m^dag)."""
    sp = qubit_lowering(space).matrix.conj().T
    m = annihilation(space, mode).matrix
    block = sp @ m
    return coupling * (block + block.conj().T)


def _counter_exchange(space: HilbertSpace, mode: int, coupling: float) -> np.ndarray:
    """coupling * (sigma^+ m^dag + sigma^- m)."""
    sp = qubit_lowering(space).matrix.conj().T
    mdag = annihilation(space, mode).matrix.conj().T
    block = sp @ mdag
    return coupling * (block + block.conj().T)


def full_hamiltonian_terms(
    space: HilbertSpace,
    params: SystemParams,
    errors: ErrorParams | None = None,
    variant: str = "ideal",
) -> TimeDependentOperator:
    """Structured time-dependent Hamiltonian for one of the model variants.

    Variants: 'ideal' is the working rotating-frame model; 'coupling-deviation'
    skews the qubit-magnon couplings by ``(1 +/- delta)``; 'drive-error'
    scales the magnon drive amplitudes by ``(1 + epsilon_k)``;
    'magnon-mismatch' and 'qubit-mismatch' add the lab-frame diagonal with a
    relative detuning ``chi`` on the magnon pair or on the qubit; and
    'lab-frame-CR' is the resonant lab-frame model with counter-rotating
    couplings and no rotating-wave approximation.
    """
    if variant not in FULL_VARIANTS:
        raise ValueError(f"unknown Hamiltonian variant: {variant}")
    errors = errors if errors is not None else ErrorParams()
    g, g_a, omega, delta = params.g, params.g_a, params.omega, params.delta_drive
    phi = params.phi
    d = space.total_dim

    static = np.zeros((d, d), dtype=np.complex128)
    amps: list[np.ndarray] = []
    freqs: list[float] = []
    phases: list[float] = []

    num = [number_operator(space, k).matrix for k in range(3)]
    sp = qubit_lowering(space).matrix.conj().T
    qubit_num = sp @ sp.conj().T

    def add_drive(amp: np.ndarray, phase: float) -> None:
        amps.append(amp)
        freqs.append(omega)
        phases.append(phase)

    a = annihilation(space, 0).matrix
    ja_block = sp @ a
    resonator_drive = g_a * (ja_block + ja_block.conj().T)

    if variant == "lab-frame-CR":
        omega_a = params.omega_a
        static += omega_a * (num[0] + qubit_num + num[1] + num[2])
        for k in (1, 2):
            static += _exchange(space, k, g) + _counter_exchange(space, k, g)
            add_drive(delta * num[k], -phi[k - 1])
        ja_counter = sp @ a.conj().T
        add_drive(resonator_drive + g_a * (ja_counter + ja_counter.conj().T), 0.0)
        return TimeDependentOperator(space, static, np.array(amps), np.array(freqs), np.array(phases))

    # All rotating-wave variants share the resonator drive term.
    add_drive(resonator_drive, 0.0)

    if variant == "coupling-deviation":
        skew = (1.0 + errors.delta, 1.0 - errors.delta)
    else:
        skew = (1.0, 1.0)
    for k in (1, 2):
        static += _exchange(space, k, g * skew[k - 1])
        scale = 1.0
        if variant == "drive-error":
            scale = 1.0 + errors.epsilon_k[k - 1]
        add_drive(scale * delta * num[k], -phi[k - 1])

    if variant == "magnon-mismatch":
        omega_a = params.omega_a
        chi_k = (errors.chi, -errors.chi)
        static += omega_a * (num[0] + qubit_num)
        static += omega_a * ((1.0 + chi_k[0]) * num[1] + (1.0 + chi_k[1]) * num[2])
    elif variant == "qubit-mismatch":
        omega_a = params.omega_a
        static += omega_a * num[0] + omega_a * (1.0 + errors.chi) * qubit_num
        static += omega_a * (num[1] + num[2])

    return TimeDependentOperator(space, static, np.array(amps), np.array(freqs), np.array(phases))


def full_hamiltonian(
    space: HilbertSpace,
    params: SystemParams,
    errors: ErrorParams | None = None,
    variant: str = "ideal",
    t: float = 0.0,
) -> Operator:
    """The chosen Hamiltonian variant evaluated at time ``t``."""
    return full_hamiltonian_terms(space, params, errors, variant).at(t)


def _triangle_block(
    space: HilbertSpace,
    params: SystemParams,
    f: float,
    leg_1: complex,
    leg_2: complex,
    leg_12: complex,
) -> np.ndarray:
    """a^dag (c1 m_1 + c2 m_2) + c12 m_1^dag m_2 + h.c. with drive-index phases.

    ``leg_*`` are the bare couplings; the phases ``exp(i f sin phi_k)`` and
    ``exp(i f (sin phi_2 - sin phi_1))`` are attached here.
    """
    s1, s2 = math.sin(params.phi[0]), math.sin(params.phi[1])
    adag = annihilation(space, 0).matrix.conj().T
    m1 = annihilation(space, 1).matrix
    m2 = annihilation(space, 2).matrix
    block = adag @ (leg_1 * np.exp(1j * f * s1) * m1 + leg_2 * np.exp(1j * f * s2) * m2)
    block += leg_12 * np.exp(1j * f * (s2 - s1)) * (m1.conj().T @ m2)
    return block + block.conj().T


def effective_hamiltonian(
    space: HilbertSpace,
    params: SystemParams,
    errors: ErrorParams | None = None,
    variant: str = "ideal",
    series_tol: float = 1e-12,
) -> Operator:
    """Second-order static Hamiltonian for the supported variants.

    'ideal' is the chiral triangle; 'coupling-deviation' modifies the legs
    by ``(1 +/- delta)`` and ``(1 - delta^2)``; 'drive-error' replaces the
    drive index by ``f' = f (1 + epsilon)`` wholesale, which revives the
    zeroth-order star term with strength ``g J_0(f')``; 'lab-frame-CR' uses
    the finite-frequency couplings plus, on resonance, the pair-creation
    block.
    """
    if variant not in EFFECTIVE_VARIANTS:
        raise ValueError(f"unknown effective variant: {variant}")
    errors = errors if errors is not None else ErrorParams()
    sz = qubit_sigma_z(space).matrix

    if variant == "ideal":
        c = coupling_strengths(params, series_tol)
        block = _triangle_block(space, params, params.f, c.g_1, c.g_2, -1j * c.g_12)
        return Operator(space, sz @ block)

    if variant == "coupling-deviation":
        c = coupling_strengths(params, series_tol)
        de = errors.delta
        block = _triangle_block(
            space,
            params,
            params.f,
            c.g_eff * (1.0 + de),
            c.g_eff * (1.0 - de),
            -1j * c.g_eff * (1.0 - de * de),
        )
        return Operator(space, sz @ block)

    if variant == "drive-error":
        f_err = params.f * (1.0 + errors.epsilon)
        shifted = SystemParams(
            g=params.g,
            g_a=params.g_a,
            omega=params.omega,
            f=f_err,
            phi=params.phi,
            omega_a=params.omega_a,
        )
        c = coupling_strengths(shifted, series_tol)
        block = _triangle_block(space, shifted, f_err, c.g_1, c.g_2, -1j * c.g_12)
        static = np.zeros_like(block)
        j0 = bessel_j(0, f_err)
        for k in (1, 2):
            static += _exchange(space, k, params.g * j0)
        return Operator(space, sz @ block + static)

    c = counter_rotating_couplings(params, series_tol=series_tol)
    block = _triangle_block(space, params, params.f, c.gp_1, c.gp_2, -1j * c.gp_12)
    h = sz @ block
    if c.n_prime is not None:
        s1, s2 = math.sin(params.phi[0]), math.sin(params.phi[1])
        adag = annihilation(space, 0).matrix.conj().T
        m1dag = annihilation(space, 1).matrix.conj().T
        m2dag = annihilation(space, 2).matrix.conj().T
        pair = adag @ (
            c.Gp_1 * np.exp(-1j * params.f * s1) * m1dag
            + c.Gp_2 * np.exp(-1j * params.f * s2) * m2dag
        )
        pair += c.Gp_12 * np.exp(-1j * params.f * (s2 + s1)) * (m1dag @ m2dag)
        h = h + sz @ (pair + pair.conj().T)
    return Operator(space, h)


def drive_fourier_components(
    space: HilbertSpace,
    params: SystemParams,
    n_max: int = 30,
) -> list[tuple[int, Operator]]:
    """Fourier components of the interaction-frame Hamiltonian.

    Returns ``[(0, H_0), (1, H_1), (-1, H_{-1}), ...]`` with
    ``H(t) = sum_n H_n exp(i n omega t)`` and ``H_{-n} = H_n^dag``.  The
    zeroth component is the drive-dressed star coupling, proportional to
    ``J_0(f)`` and hence absent at the operating point.
    """
    g, g_a, f = params.g, params.g_a, params.f
    phi = params.phi
    s = (math.sin(phi[0]), math.sin(phi[1]))
    sp = qubit_lowering(space).matrix.conj().T
    sm = sp.conj().T
    a = annihilation(space, 0).matrix
    mags = [annihilation(space, k).matrix for k in (1, 2)]

    def magnon_component(n: int) -> np.ndarray:
        out = np.zeros((space.total_dim,) * 2, dtype=np.complex128)
        jn = bessel_j(n, f)
        for k in (0, 1):
            coeff = g * jn * np.exp(-1j * n * phi[k])
            out += coeff * np.exp(-1j * f * s[k]) * (sm @ mags[k].conj().T)
            out += coeff * ((-1.0) ** n) * np.exp(1j * f * s[k]) * (sp @ mags[k])
        return out

    components: list[tuple[int, Operator]] = []
    components.append((0, Operator(space, magnon_component(0))))
    h_a = 0.5 * g_a * (sp @ a + (sp @ a).conj().T)
    for n in range(1, int(n_max) + 1):
        h_n = magnon_component(n)
        if n == 1:
            h_n = h_n + h_a
        components.append((n, Operator(space, h_n)))
        components.append((-n, Operator(space, h_n.conj().T)))
    return components


def james_effective(components, omega: float) -> Operator:
    """Second-order effective Hamiltonian from Fourier components.

    ``H_eff = H_0 + sum_{n>=1} [H_n, H_{-n}] / (n omega)``.  Components must
    come in conjugate pairs ``H_{-n} = H_n^dag`` and the zeroth one must be
    Hermitian; violations raise ``ValueError``.
    """
    by_order: dict[int, Operator] = {}
    space = None
    for n, op in components:
        n = int(n)
        if n in by_order:
            raise ValueError(f"duplicate Fourier component for n={n}")
        by_order[n] = op
        space = op.space if space is None else space
        if op.space != space:
            raise ValueError("components live on different spaces")
    if space is None:
        raise ValueError("no components given")
    if 0 not in by_order:
        raise ValueError("missing zeroth Fourier component")
    h0 = by_order[0].matrix
    if np.max(np.abs(h0 - h0.conj().T)) > 1e-10:
        raise ValueError("zeroth Fourier component is not Hermitian")

    orders = sorted(n for n in by_order if n > 0)
    for n in orders:
        if -n not in by_order:
            raise ValueError(f"non-conjugate component pairs: n={n} lacks n={-n}")
        diff = by_order[-n].matrix - by_order[n].matrix.conj().T
        if np.max(np.abs(diff)) > 1e-10:
            raise ValueError(f"non-conjugate component pairs: H_{-n} != dagger(H_{n})")
    extra = sorted(n for n in by_order if n < 0 and -n not in by_order)
    if extra:
        raise ValueError(f"non-conjugate component pairs: n={extra[0]} lacks n={-extra[0]}")

    total = h0.astype(np.complex128, copy=True)
    for n in orders:
        h_n = by_order[n].matrix
        h_mn = by_order[-n].matrix
        total += (h_n @ h_mn - h_mn @ h_n) / (n * omega)
    return Operator(space, total)
