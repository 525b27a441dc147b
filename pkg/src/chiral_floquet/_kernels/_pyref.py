"""Pure-Python reference kernels: adaptive Dormand-Prince 5(4) integration.

Hamiltonians are handed over in structured form, a static dense matrix plus
cosine-modulated dense terms ``H(t) = H_s + sum_j cos(w_j t + p_j) A_j``.
The Lindblad kernel additionally takes jump operators in concatenated COO
triplet form with the rates already folded into the entries, plus the dense
damping matrix ``G = (1/2) sum_j o_j^dag o_j`` so the drift can be applied
with two matrix products per evaluation.

Both kernels sample the solution exactly on the caller's time grid and
carry the adaptive step across grid points.  They are deterministic: no
randomness, no threading, identical arithmetic order on every call.
"""

from __future__ import annotations

import numpy as np

# Dormand-Prince 5(4) tableau with the first-same-as-last evaluation.
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
# Difference between the 5th and 4th order weights, used for the error estimate.
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])

_MIN_FACTOR = 0.2
_MAX_FACTOR = 5.0
_SAFETY = 0.9
_UNDERFLOW = 1e-14


def _dopri5(rhs, y0, t_grid, rtol, atol, max_step, first_step):
    """Integrate ``y' = rhs(t, y)`` over ``t_grid``, sampling at every grid point.

    Returns the stacked samples and the number of accepted steps.  Raises
    ``RuntimeError`` when the step size underflows.
    """
    y = np.array(y0, dtype=np.complex128)
    out = np.empty((len(t_grid),) + y.shape, dtype=np.complex128)
    out[0] = y
    t = float(t_grid[0])
    h = float(min(first_step, max_step))
    n_steps = 0
    k = [None] * 7
    k[0] = rhs(t, y)

    for i_out in range(1, len(t_grid)):
        t_end = float(t_grid[i_out])
        while t < t_end - 1e-12 * max(1.0, abs(t_end)):
            h = min(h, max_step, t_end - t)
            if h < _UNDERFLOW * max(1.0, abs(t)):
                raise RuntimeError(f"step size underflow at t={t!r}")
            for s in range(1, 7):
                ys = y + h * sum(a * k[j] for j, a in enumerate(_A[s]) if a != 0.0)
                k[s] = rhs(t + _C[s] * h, ys)
            y_new = y + h * sum(b * k[j] for j, b in enumerate(_B5) if b != 0.0)
            err_vec = h * sum(e * k[j] for j, e in enumerate(_E) if e != 0.0)
            scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
            with np.errstate(over="ignore", invalid="ignore"):
                err = float(np.sqrt(np.mean(np.abs(err_vec / scale) ** 2)))
            if err <= 1.0:
                t = t + h
                y = y_new
                k[0] = k[6]  # FSAL: last stage was evaluated at (t, y)
                n_steps += 1
                factor = _MAX_FACTOR if err == 0.0 else min(
                    _MAX_FACTOR, max(_MIN_FACTOR, _SAFETY * err ** -0.2)
                )
            else:
                factor = max(_MIN_FACTOR, _SAFETY * err ** -0.2)
            h = h * factor
        t = t_end
        out[i_out] = y
    return out, n_steps


def _hamiltonian_at(h_static, cos_amps, cos_freqs, cos_phases, t):
    if len(cos_freqs):
        c = np.cos(cos_freqs * t + cos_phases)
        return h_static + np.tensordot(c, cos_amps, axes=1)
    return h_static


def schrodinger_dopri5(
    h_static,
    cos_amps,
    cos_freqs,
    cos_phases,
    psi0,
    t_grid,
    rtol,
    atol,
    max_step,
    first_step,
):
    """Sample the Schroedinger evolution of ``psi0`` on ``t_grid``.

    Parameters
    ----------
    h_static : (d, d) complex ndarray
        Time-independent part of the Hamiltonian.
    cos_amps : (k, d, d) complex ndarray
        Amplitude matrices of the cosine-modulated terms; ``k`` may be zero.
    cos_freqs, cos_phases : (k,) float ndarrays
        Angular frequencies and phase offsets, term by term.
    psi0 : (d,) complex ndarray
    t_grid : (m,) float ndarray, strictly increasing
    rtol, atol : float
        Local error control parameters.
    max_step, first_step : float
        Upper bound on, and initial value of, the adaptive step.

    Returns
    -------
    (m, d) complex ndarray of samples and the accepted-step count.
    """
    h_static = np.asarray(h_static, dtype=np.complex128)
    cos_amps = np.asarray(cos_amps, dtype=np.complex128)
    cos_freqs = np.asarray(cos_freqs, dtype=np.float64)
    cos_phases = np.asarray(cos_phases, dtype=np.float64)

    def rhs(t, psi):
        h = _hamiltonian_at(h_static, cos_amps, cos_freqs, cos_phases, t)
        return -1j * (h @ psi)

    return _dopri5(
        rhs,
        np.asarray(psi0, dtype=np.complex128),
        np.asarray(t_grid, dtype=np.float64),
        float(rtol),
        float(atol),
        float(max_step),
        float(first_step),
    )


def lindblad_dopri5(
    h_static,
    cos_amps,
    cos_freqs,
    cos_phases,
    damp,
    jump_ptr,
    jump_rows,
    jump_cols,
    jump_vals,
    rho0,
    t_grid,
    rtol,
    atol,
    max_step,
    first_step,
):
    """Sample the Lindblad evolution of ``rho0`` on ``t_grid``.

    The jump operators arrive as concatenated COO triplets with the square
    root of each rate folded into the values: operator ``j`` owns the slice
    ``jump_ptr[j]:jump_ptr[j+1]`` of the row/col/value arrays.  ``damp`` is
    the dense positive matrix ``(1/2) sum_j o_j^dag o_j`` (rates included),
    so the right-hand side is ``A rho + rho A^dag + sum_j o_j rho o_j^dag``
    with the drift ``A = -iH(t) - damp``.
    """
    h_static = np.asarray(h_static, dtype=np.complex128)
    cos_amps = np.asarray(cos_amps, dtype=np.complex128)
    cos_freqs = np.asarray(cos_freqs, dtype=np.float64)
    cos_phases = np.asarray(cos_phases, dtype=np.float64)
    damp = np.asarray(damp, dtype=np.complex128)
    jump_ptr = np.asarray(jump_ptr, dtype=np.intp)
    jump_rows = np.asarray(jump_rows, dtype=np.intp)
    jump_cols = np.asarray(jump_cols, dtype=np.intp)
    jump_vals = np.asarray(jump_vals, dtype=np.complex128)
    rho0 = np.asarray(rho0, dtype=np.complex128)
    d = rho0.shape[0]

    n_jumps = len(jump_ptr) - 1
    # Per-jump index grids and value outer products, reused every evaluation.
    # Fancy-index accumulation is only valid when the row and column index
    # lists are duplicate-free; other jump operators go through dense products.
    scatter = []
    dense_jumps = []
    for j in range(n_jumps):
        lo, hi = int(jump_ptr[j]), int(jump_ptr[j + 1])
        if hi == lo:
            continue
        rows = jump_rows[lo:hi]
        cols = jump_cols[lo:hi]
        vals = jump_vals[lo:hi]
        if len(np.unique(rows)) == len(rows) and len(np.unique(cols)) == len(cols):
            scatter.append((np.ix_(rows, rows), np.ix_(cols, cols), np.outer(vals, vals.conj())))
        else:
            op = np.zeros((d, d), dtype=np.complex128)
            np.add.at(op, (rows, cols), vals)
            dense_jumps.append(op)

    def rhs(t, rho_flat):
        rho = rho_flat.reshape(d, d)
        h = _hamiltonian_at(h_static, cos_amps, cos_freqs, cos_phases, t)
        drift = -1j * h - damp
        out = drift @ rho
        out += rho @ drift.conj().T
        for rr, cc, w in scatter:
            out[rr] += w * rho[cc]
        for op in dense_jumps:
            out += op @ rho @ op.conj().T
        return out.ravel()

    samples, n_steps = _dopri5(
        rhs,
        rho0.ravel(),
        np.asarray(t_grid, dtype=np.float64),
        float(rtol),
        float(atol),
        float(max_step),
        float(first_step),
    )
    return samples.reshape(len(t_grid), d, d), n_steps
