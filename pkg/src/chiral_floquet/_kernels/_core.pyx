# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled Dormand-Prince 5(4) kernels.

Same algorithm, tableau, tolerances and sampling behavior as ``_pyref``;
the two backends differ only in floating-point association, so trajectories
agree to integration accuracy rather than bit for bit.  The integration
loops run without the GIL so Monte Carlo samples can share a process.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport cos, fabs, hypot, pow, sqrt
from scipy.linalg.cython_blas cimport zgemm, zgemv

cnp.import_array()

ctypedef double complex zdouble

# Dormand-Prince tableau, explicit rows flattened to 6 coefficients each.
cdef double[36] _A_FLAT
_A_FLAT[:] = [
    1.0 / 5, 0, 0, 0, 0, 0,
    3.0 / 40, 9.0 / 40, 0, 0, 0, 0,
    44.0 / 45, -56.0 / 15, 32.0 / 9, 0, 0, 0,
    19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729, 0, 0,
    9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656, 0,
    35.0 / 384, 0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84,
]

cdef double[7] _B5
_B5[:] = [35.0 / 384, 0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84, 0]

# Difference between the 5th and 4th order weights, used for the error estimate.
cdef double[7] _E
_E[:] = [71.0 / 57600, 0, -71.0 / 16695, 71.0 / 1920, -17253.0 / 339200, 22.0 / 525, -1.0 / 40]

cdef double[7] _C_NODES
_C_NODES[:] = [0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0]

cdef double _MIN_FACTOR = 0.2
cdef double _MAX_FACTOR = 5.0
cdef double _SAFETY = 0.9
cdef double _UNDERFLOW = 1e-14


cdef void _assemble_h(
    const zdouble* h_static,
    const zdouble* cos_amps,
    const double* cos_freqs,
    const double* cos_phases,
    Py_ssize_t n_cos,
    Py_ssize_t dd,
    double t,
    zdouble* hbuf,
) noexcept nogil:
    """hbuf = h_static + sum_j cos(w_j t + p_j) A_j, all dense of length dd."""
    cdef Py_ssize_t i, j
    cdef double c
    for i in range(dd):
        hbuf[i] = h_static[i]
    for j in range(n_cos):
        c = cos(cos_freqs[j] * t + cos_phases[j])
        for i in range(dd):
            hbuf[i] = hbuf[i] + c * cos_amps[j * dd + i]


cdef void _matmul(
    zdouble* a, zdouble* b, zdouble* out, int d, zdouble alpha, zdouble beta,
    bint dagger_right,
) noexcept nogil:
    """out = alpha a@b + beta out on row-major operands, b optionally daggered.

    BLAS is column major, so the product is computed reversed through the
    transposed views: out^T = b^T a^T.  With ``dagger_right`` the left slot
    of the reversed call conjugate-transposes, giving out = alpha a@b^dag.
    """
    if dagger_right:
        zgemm(b"C", b"N", &d, &d, &d, &alpha, b, &d, a, &d, &beta, out, &d)
    else:
        zgemm(b"N", b"N", &d, &d, &d, &alpha, b, &d, a, &d, &beta, out, &d)


cdef double _error_norm(
    const zdouble* err_vec,
    const zdouble* y,
    const zdouble* y_new,
    Py_ssize_t n,
    double rtol,
    double atol,
) noexcept nogil:
    cdef Py_ssize_t i
    cdef double scale, ay, an, a, acc = 0.0
    for i in range(n):
        ay = hypot(y[i].real, y[i].imag)
        an = hypot(y_new[i].real, y_new[i].imag)
        scale = atol + rtol * (ay if ay > an else an)
        a = hypot(err_vec[i].real, err_vec[i].imag) / scale
        acc += a * a
    return sqrt(acc / n)


cdef struct RhsCtx:
    # Dense Hamiltonian pieces.
    const zdouble* h_static
    const zdouble* cos_amps
    const double* cos_freqs
    const double* cos_phases
    Py_ssize_t n_cos
    int d
    zdouble* hbuf
    # Lindblad extras, unset for pure-state runs.
    const zdouble* damp
    const Py_ssize_t* jump_ptr
    const Py_ssize_t* jump_rows
    const Py_ssize_t* jump_cols
    const zdouble* jump_vals
    Py_ssize_t n_jumps
    zdouble* drift


cdef void _rhs_schrodinger(RhsCtx* ctx, double t, zdouble* y, zdouble* out) noexcept nogil:
    cdef int d = ctx.d
    cdef zdouble alpha = -1j
    cdef zdouble beta = 0
    cdef int one = 1
    _assemble_h(ctx.h_static, ctx.cos_amps, ctx.cos_freqs, ctx.cos_phases,
                ctx.n_cos, <Py_ssize_t> d * d, t, ctx.hbuf)
    # out = -i H y: the transposed Fortran view of row-major H undoes itself.
    zgemv(b"T", &d, &d, &alpha, ctx.hbuf, &d, y, &one, &beta, out, &one)


cdef void _rhs_lindblad(RhsCtx* ctx, double t, zdouble* y, zdouble* out) noexcept nogil:
    """out = A rho + rho A^dag + sum_j o_j rho o_j^dag with A = -iH(t) - damp."""
    cdef int d = ctx.d
    cdef Py_ssize_t dd = <Py_ssize_t> d * d
    cdef Py_ssize_t i, j, a, b, lo, hi
    cdef zdouble one = 1
    cdef zdouble zero = 0
    _assemble_h(ctx.h_static, ctx.cos_amps, ctx.cos_freqs, ctx.cos_phases,
                ctx.n_cos, dd, t, ctx.hbuf)
    for i in range(dd):
        ctx.drift[i] = -1j * ctx.hbuf[i] - ctx.damp[i]
    _matmul(ctx.drift, y, out, d, one, zero, False)
    _matmul(y, ctx.drift, out, d, one, one, True)
    # o rho o^dag expands to pairwise terms over the COO entries of o; the
    # double loop is exact for arbitrary index multiplicity.
    for j in range(ctx.n_jumps):
        lo = ctx.jump_ptr[j]
        hi = ctx.jump_ptr[j + 1]
        for a in range(lo, hi):
            for b in range(lo, hi):
                out[ctx.jump_rows[a] * d + ctx.jump_rows[b]] = (
                    out[ctx.jump_rows[a] * d + ctx.jump_rows[b]]
                    + ctx.jump_vals[a] * ctx.jump_vals[b].conjugate()
                    * y[ctx.jump_cols[a] * d + ctx.jump_cols[b]]
                )


ctypedef void (*rhs_fn)(RhsCtx*, double, zdouble*, zdouble*) noexcept nogil


cdef Py_ssize_t _dopri5(
    rhs_fn rhs,
    RhsCtx* ctx,
    zdouble* y,            # length n, consumed
    zdouble* out,          # (m, n) samples, row 0 prefilled by the caller
    const double* t_grid,
    Py_ssize_t m,
    Py_ssize_t n,
    double rtol,
    double atol,
    double max_step,
    double first_step,
    zdouble* work,         # 7 stage rows plus ys, y_new, err_vec: (10, n)
    double* t_fail,
) noexcept nogil:
    cdef zdouble* k[7]
    cdef zdouble* ys
    cdef zdouble* y_new
    cdef zdouble* err_vec
    cdef zdouble* swap
    cdef Py_ssize_t i, s, j, i_out, n_steps = 0
    cdef double t, h, t_end, err, factor
    cdef zdouble acc

    for s in range(7):
        k[s] = work + s * n
    ys = work + 7 * n
    y_new = work + 8 * n
    err_vec = work + 9 * n

    t = t_grid[0]
    h = first_step if first_step < max_step else max_step
    rhs(ctx, t, y, k[0])

    for i_out in range(1, m):
        t_end = t_grid[i_out]
        while t < t_end - 1e-12 * max(1.0, fabs(t_end)):
            if max_step < h:
                h = max_step
            if t_end - t < h:
                h = t_end - t
            if h < _UNDERFLOW * max(1.0, fabs(t)):
                t_fail[0] = t
                return -1
            for s in range(1, 7):
                for i in range(n):
                    acc = 0
                    for j in range(s):
                        if _A_FLAT[(s - 1) * 6 + j] != 0.0:
                            acc = acc + _A_FLAT[(s - 1) * 6 + j] * k[j][i]
                    ys[i] = y[i] + h * acc
                rhs(ctx, t + _C_NODES[s] * h, ys, k[s])
            for i in range(n):
                acc = 0
                for j in range(7):
                    if _B5[j] != 0.0:
                        acc = acc + _B5[j] * k[j][i]
                y_new[i] = y[i] + h * acc
                acc = 0
                for j in range(7):
                    if _E[j] != 0.0:
                        acc = acc + _E[j] * k[j][i]
                err_vec[i] = h * acc
            err = _error_norm(err_vec, y, y_new, n, rtol, atol)
            if err <= 1.0:
                t = t + h
                for i in range(n):
                    y[i] = y_new[i]
                # FSAL: the last stage was evaluated at (t, y_new).
                swap = k[0]
                k[0] = k[6]
                k[6] = swap
                n_steps += 1
                if err == 0.0:
                    factor = _MAX_FACTOR
                else:
                    factor = _SAFETY * pow(err, -0.2)
                    if factor > _MAX_FACTOR:
                        factor = _MAX_FACTOR
                    elif factor < _MIN_FACTOR:
                        factor = _MIN_FACTOR
            else:
                factor = _SAFETY * pow(err, -0.2)
                if factor < _MIN_FACTOR:
                    factor = _MIN_FACTOR
            h = h * factor
        t = t_end
        for i in range(n):
            out[i_out * n + i] = y[i]
    return n_steps


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

    Arguments and return value match ``_pyref.schrodinger_dopri5``.
    """
    cdef cnp.ndarray[zdouble, ndim=2] h_s = np.ascontiguousarray(h_static, dtype=np.complex128)
    cdef cnp.ndarray[zdouble, ndim=3] amps = np.ascontiguousarray(
        np.asarray(cos_amps, dtype=np.complex128).reshape(-1, h_s.shape[0], h_s.shape[0])
    )
    cdef cnp.ndarray[double, ndim=1] freqs = np.ascontiguousarray(cos_freqs, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] phases = np.ascontiguousarray(cos_phases, dtype=np.float64)
    cdef cnp.ndarray[zdouble, ndim=1] y = np.array(psi0, dtype=np.complex128)
    cdef cnp.ndarray[double, ndim=1] grid = np.ascontiguousarray(t_grid, dtype=np.float64)

    cdef Py_ssize_t n = y.shape[0]
    cdef Py_ssize_t m = grid.shape[0]
    cdef cnp.ndarray[zdouble, ndim=2] out = np.empty((m, n), dtype=np.complex128)
    out[0] = y
    cdef cnp.ndarray[zdouble, ndim=1] hbuf = np.empty(n * n, dtype=np.complex128)
    cdef cnp.ndarray[zdouble, ndim=1] work = np.empty(10 * n, dtype=np.complex128)

    cdef RhsCtx ctx
    ctx.h_static = <const zdouble*> h_s.data
    ctx.cos_amps = <const zdouble*> amps.data
    ctx.cos_freqs = <const double*> freqs.data
    ctx.cos_phases = <const double*> phases.data
    ctx.n_cos = amps.shape[0]
    ctx.d = <int> n
    ctx.hbuf = <zdouble*> hbuf.data

    cdef double t_fail = 0.0
    cdef double c_rtol = rtol, c_atol = atol, c_max = max_step, c_first = first_step
    cdef Py_ssize_t n_steps
    with nogil:
        n_steps = _dopri5(
            _rhs_schrodinger, &ctx, <zdouble*> y.data, <zdouble*> out.data,
            <const double*> grid.data, m, n, c_rtol, c_atol, c_max, c_first,
            <zdouble*> work.data, &t_fail,
        )
    if n_steps < 0:
        raise RuntimeError(f"step size underflow at t={t_fail!r}")
    return out, int(n_steps)


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

    Arguments and return value match ``_pyref.lindblad_dopri5``: COO jump
    triplets with the square roots of the rates folded into the values,
    plus the dense damping matrix ``(1/2) sum_j o_j^dag o_j``.
    """
    cdef cnp.ndarray[zdouble, ndim=2] h_s = np.ascontiguousarray(h_static, dtype=np.complex128)
    cdef cnp.ndarray[zdouble, ndim=3] amps = np.ascontiguousarray(
        np.asarray(cos_amps, dtype=np.complex128).reshape(-1, h_s.shape[0], h_s.shape[0])
    )
    cdef cnp.ndarray[double, ndim=1] freqs = np.ascontiguousarray(cos_freqs, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] phases = np.ascontiguousarray(cos_phases, dtype=np.float64)
    cdef cnp.ndarray[zdouble, ndim=2] dampm = np.ascontiguousarray(damp, dtype=np.complex128)
    cdef cnp.ndarray[cnp.intp_t, ndim=1] ptr = np.ascontiguousarray(jump_ptr, dtype=np.intp)
    cdef cnp.ndarray[cnp.intp_t, ndim=1] rows = np.ascontiguousarray(jump_rows, dtype=np.intp)
    cdef cnp.ndarray[cnp.intp_t, ndim=1] cols = np.ascontiguousarray(jump_cols, dtype=np.intp)
    cdef cnp.ndarray[zdouble, ndim=1] vals = np.ascontiguousarray(jump_vals, dtype=np.complex128)
    cdef cnp.ndarray[zdouble, ndim=1] y = np.array(rho0, dtype=np.complex128).ravel()
    cdef cnp.ndarray[double, ndim=1] grid = np.ascontiguousarray(t_grid, dtype=np.float64)

    cdef Py_ssize_t d = dampm.shape[0]
    cdef Py_ssize_t n = d * d
    cdef Py_ssize_t m = grid.shape[0]
    cdef cnp.ndarray[zdouble, ndim=2] out = np.empty((m, n), dtype=np.complex128)
    out[0] = y
    cdef cnp.ndarray[zdouble, ndim=1] hbuf = np.empty(n, dtype=np.complex128)
    cdef cnp.ndarray[zdouble, ndim=1] drift = np.empty(n, dtype=np.complex128)
    cdef cnp.ndarray[zdouble, ndim=1] work = np.empty(10 * n, dtype=np.complex128)

    cdef RhsCtx ctx
    ctx.h_static = <const zdouble*> h_s.data
    ctx.cos_amps = <const zdouble*> amps.data
    ctx.cos_freqs = <const double*> freqs.data
    ctx.cos_phases = <const double*> phases.data
    ctx.n_cos = amps.shape[0]
    ctx.d = <int> d
    ctx.hbuf = <zdouble*> hbuf.data
    ctx.damp = <const zdouble*> dampm.data
    ctx.jump_ptr = <const Py_ssize_t*> ptr.data
    ctx.jump_rows = <const Py_ssize_t*> rows.data
    ctx.jump_cols = <const Py_ssize_t*> cols.data
    ctx.jump_vals = <const zdouble*> vals.data
    ctx.n_jumps = ptr.shape[0] - 1
    ctx.drift = <zdouble*> drift.data

    cdef double t_fail = 0.0
    cdef double c_rtol = rtol, c_atol = atol, c_max = max_step, c_first = first_step
    cdef Py_ssize_t n_steps
    with nogil:
        n_steps = _dopri5(
            _rhs_lindblad, &ctx, <zdouble*> y.data, <zdouble*> out.data,
            <const double*> grid.data, m, n, c_rtol, c_atol, c_max, c_first,
            <zdouble*> work.data, &t_fail,
        )
    if n_steps < 0:
        raise RuntimeError(f"step size underflow at t={t_fail!r}")
    return out.reshape(m, d, d), int(n_steps)
