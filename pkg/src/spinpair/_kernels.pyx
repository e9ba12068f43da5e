# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled midpoint propagator for H(t) = H_static + sum_b J_b(t) V_b.

J_b(t) = amps[b] * sin(omegas[b] * t + phases[b]).  Each step of length dt
uses the Hamiltonian sampled at the step midpoint and is exponentiated
exactly through LAPACK zheev.
"""
import numpy as np

from libc.math cimport sin, cos
from scipy.linalg.cython_lapack cimport zheev

ctypedef double complex cplx


cdef void _propagate_small(
    const cplx[:, ::1] h_static,
    const cplx[:, :, ::1] couplings,
    const double[::1] amps,
    const double[::1] omegas,
    const double[::1] phases,
    double t_start,
    double dt,
    Py_ssize_t n_steps,
    cplx[:, ::1] u,
) noexcept nogil:
    """Closed-form steps for 1x1 and 2x2 blocks: exp(-i (a0 + a.sigma) dt)."""
    cdef int d = <int>h_static.shape[0]
    cdef Py_ssize_t step, b
    cdef double tm, c, a0, ax, ay, az, norm, cs, sn, ph
    cdef cplx h00, h01, h11, p0, e00, e01, e10, e11, u00, u01, u10, u11
    for step in range(n_steps):
        tm = t_start + (step + 0.5) * dt
        h00 = h_static[0, 0]
        if d == 2:
            h01 = h_static[0, 1]
            h11 = h_static[1, 1]
        for b in range(couplings.shape[0]):
            c = amps[b] * sin(omegas[b] * tm + phases[b])
            h00 = h00 + c * couplings[b, 0, 0]
            if d == 2:
                h01 = h01 + c * couplings[b, 0, 1]
                h11 = h11 + c * couplings[b, 1, 1]
        if d == 1:
            ph = -h00.real * dt
            u[0, 0] = u[0, 0] * (cos(ph) + 1j * sin(ph))
            continue
        a0 = (h00.real + h11.real) / 2
        az = (h00.real - h11.real) / 2
        ax = h01.real
        ay = -h01.imag
        norm = (ax * ax + ay * ay + az * az) ** 0.5
        cs = cos(norm * dt)
        sn = sin(norm * dt) / norm if norm > 0 else dt
        p0 = cos(a0 * dt) - 1j * sin(a0 * dt)
        e00 = p0 * (cs - 1j * sn * az)
        e11 = p0 * (cs + 1j * sn * az)
        e01 = p0 * (-1j * sn * (ax - 1j * ay))
        e10 = p0 * (-1j * sn * (ax + 1j * ay))
        u00 = e00 * u[0, 0] + e01 * u[1, 0]
        u01 = e00 * u[0, 1] + e01 * u[1, 1]
        u10 = e10 * u[0, 0] + e11 * u[1, 0]
        u11 = e10 * u[0, 1] + e11 * u[1, 1]
        u[0, 0] = u00
        u[0, 1] = u01
        u[1, 0] = u10
        u[1, 1] = u11


def propagate(
    const cplx[:, ::1] h_static,
    const cplx[:, :, ::1] couplings,
    const double[::1] amps,
    const double[::1] omegas,
    const double[::1] phases,
    double t_start,
    double dt,
    Py_ssize_t n_steps,
):
    cdef int d = <int>h_static.shape[0]
    cdef Py_ssize_t nb = couplings.shape[0]
    cdef Py_ssize_t step, b, i, j, k
    cdef double tm, c, ph
    cdef int info = 0
    cdef int lwork = max(1, 4 * d)
    cdef char jobz = b'V'
    cdef char uplo = b'L'

    out = np.eye(d, dtype=np.complex128)
    cdef cplx[:, ::1] u = out
    cdef cplx[::1] a = np.empty(d * d, dtype=np.complex128)      # column-major work copy
    cdef double[::1] w = np.empty(d, dtype=np.float64)
    cdef cplx[::1] work = np.empty(lwork, dtype=np.complex128)
    cdef double[::1] rwork = np.empty(max(1, 3 * d - 2), dtype=np.float64)
    cdef cplx[:, ::1] e = np.empty((d, d), dtype=np.complex128)
    cdef cplx[:, ::1] tmp = np.empty((d, d), dtype=np.complex128)
    cdef cplx[::1] ph_k = np.empty(d, dtype=np.complex128)
    cdef double[::1] coef = np.empty(max(1, nb), dtype=np.float64)
    cdef cplx acc

    if d == 0 or n_steps <= 0:
        return out
    if d <= 2:
        _propagate_small(h_static, couplings, amps, omegas, phases, t_start, dt, n_steps, u)
        return out

    for step in range(n_steps):
        tm = t_start + (step + 0.5) * dt
        for b in range(nb):
            coef[b] = amps[b] * sin(omegas[b] * tm + phases[b])
        for j in range(d):
            for i in range(d):
                acc = h_static[i, j]
                for b in range(nb):
                    acc = acc + coef[b] * couplings[b, i, j]
                a[i + j * d] = acc
        zheev(&jobz, &uplo, &d, &a[0], &d, &w[0], &work[0], &lwork, &rwork[0], &info)
        if info != 0:
            raise RuntimeError(f"zheev failed with info={info}")
        for k in range(d):
            ph = -w[k] * dt
            ph_k[k] = cos(ph) + 1j * sin(ph)
        # e = V diag(ph) V^dagger, V[i, k] = a[i + k*d]
        for i in range(d):
            for j in range(d):
                acc = 0
                for k in range(d):
                    acc = acc + a[i + k * d] * ph_k[k] * a[j + k * d].conjugate()
                e[i, j] = acc
        # u = e @ u
        for i in range(d):
            for j in range(d):
                acc = 0
                for k in range(d):
                    acc = acc + e[i, k] * u[k, j]
                tmp[i, j] = acc
        u[:, :] = tmp
    return out
