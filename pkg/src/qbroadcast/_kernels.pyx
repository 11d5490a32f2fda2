# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: cyclic Jacobi for Hermitian matrices and the Dykstra loop.

``_fallback.py`` mirrors every function here; both must stay in lockstep.
"""
import numpy as np

from libc.math cimport sqrt, hypot

DEF SQRT2 = 1.4142135623730951


cdef double _offdiag(double complex[:, ::1] a, Py_ssize_t n) nogil:
    cdef Py_ssize_t i, j
    cdef double s = 0.0
    cdef double complex z
    for i in range(n):
        for j in range(n):
            if i != j:
                z = a[i, j]
                s += z.real * z.real + z.imag * z.imag
    return sqrt(s)


cdef int _jacobi(double complex[:, ::1] a, double complex[:, ::1] v,
                 double rel_tol, int max_sweeps) nogil:
    """In-place cyclic Jacobi; ``v`` must enter as the identity.

    Returns the number of sweeps used, or -1 without convergence.
    """
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t p, q, k
    cdef double app, aqq, r, tau, t, c, s, thresh, fro = 0.0
    cdef double complex z, ph, upp, upq, uqp, uqq, x, y
    cdef int sweep

    for p in range(n):
        for q in range(n):
            z = a[p, q]
            fro += z.real * z.real + z.imag * z.imag
    thresh = rel_tol * sqrt(fro)

    for sweep in range(max_sweeps + 1):
        if _offdiag(a, n) <= thresh:
            return sweep
        if sweep == max_sweeps:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                z = a[p, q]
                r = hypot(z.real, z.imag)
                if r == 0.0:
                    continue
                ph = z / r
                app = a[p, p].real
                aqq = a[q, q].real
                tau = (aqq - app) / (2.0 * r)
                if tau >= 0:
                    t = 1.0 / (tau + hypot(1.0, tau))
                else:
                    t = -1.0 / (-tau + hypot(1.0, tau))
                c = 1.0 / sqrt(1.0 + t * t)
                s = t * c
                # U = diag(1, conj(ph)) [[c, s], [-s, c]]
                upp = c
                upq = s
                uqp = -s * ph.conjugate()
                uqq = c * ph.conjugate()
                for k in range(n):
                    x = a[k, p]
                    y = a[k, q]
                    a[k, p] = x * upp + y * uqp
                    a[k, q] = x * upq + y * uqq
                for k in range(n):
                    x = a[p, k]
                    y = a[q, k]
                    a[p, k] = upp.conjugate() * x + uqp.conjugate() * y
                    a[q, k] = upq.conjugate() * x + uqq.conjugate() * y
                a[p, q] = 0.0
                a[q, p] = 0.0
                a[p, p] = a[p, p].real
                a[q, q] = a[q, q].real
                for k in range(n):
                    x = v[k, p]
                    y = v[k, q]
                    v[k, p] = x * upp + y * uqp
                    v[k, q] = x * upq + y * uqq
    return -1


def jacobi_eigh(h, double rel_tol, int max_sweeps):
    """Cyclic Jacobi on a Hermitian matrix.

    Returns ``(eigenvalues, eigenvectors, sweeps)`` unsorted; ``sweeps`` is
    -1 when the sweep limit was hit before convergence.
    """
    amat = np.array(h, dtype=np.complex128, order="C")
    cdef double complex[:, ::1] a = amat
    cdef Py_ssize_t n = a.shape[0]
    vmat = np.eye(n, dtype=np.complex128)
    cdef double complex[:, ::1] vv = vmat
    cdef int done
    with nogil:
        done = _jacobi(a, vv, rel_tol, max_sweeps)
    return np.diag(amat).real.copy(), vmat, done


def psd_clip(h, double rel_tol, int max_sweeps):
    """Frobenius-nearest PSD matrix, or None if Jacobi fails."""
    evals, vecs, sweeps = jacobi_eigh(h, rel_tol, max_sweeps)
    if sweeps < 0:
        return None
    pos = np.maximum(evals, 0.0)
    return (vecs * pos) @ vecs.conj().T


# --- Dykstra ---------------------------------------------------------------


cdef void _unvec(double[::1] z, Py_ssize_t off, Py_ssize_t n,
                 double complex[:, ::1] a) nogil:
    cdef Py_ssize_t i, j, k = off + n
    for i in range(n):
        a[i, i] = z[off + i]
    for i in range(n):
        for j in range(i + 1, n):
            a[i, j] = (z[k] + 1j * z[k + 1]) / SQRT2
            a[j, i] = a[i, j].conjugate()
            k += 2


cdef void _vec(double complex[:, ::1] a, Py_ssize_t n, double[::1] z,
               Py_ssize_t off) nogil:
    cdef Py_ssize_t i, j, k = off + n
    for i in range(n):
        z[off + i] = a[i, i].real
    for i in range(n):
        for j in range(i + 1, n):
            z[k] = SQRT2 * a[i, j].real
            z[k + 1] = SQRT2 * a[i, j].imag
            k += 2


cdef int _clip_block(double complex[:, ::1] a, double complex[:, ::1] v,
                     double complex[:, ::1] out, double rel_tol,
                     int max_sweeps) nogil:
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t i, j, k
    cdef double lam
    cdef double complex acc
    for i in range(n):
        for j in range(n):
            v[i, j] = 1.0 if i == j else 0.0
    if _jacobi(a, v, rel_tol, max_sweeps) < 0:
        return -1
    for i in range(n):
        for j in range(i, n):
            acc = 0.0
            for k in range(n):
                lam = a[k, k].real
                if lam > 0.0:
                    acc = acc + v[i, k] * lam * v[j, k].conjugate()
            out[i, j] = acc
            out[j, i] = acc.conjugate()
    return 0


def cone_project(z_in, kinds, sizes, offsets, double rel_tol, int max_sweeps,
                 int jacobi_max):
    """Project a stacked coordinate vector onto the product cone."""
    z = np.array(z_in, dtype=np.float64)
    cdef double[::1] zv = z
    cdef Py_ssize_t b, i, n, off
    cdef double complex[:, ::1] a, v, out
    for b in range(len(kinds)):
        n = sizes[b]
        off = offsets[b]
        if kinds[b] == 1:
            for i in range(n):
                if zv[off + i] < 0.0:
                    zv[off + i] = 0.0
            continue
        if n > jacobi_max:
            amat = np.zeros((n, n), dtype=np.complex128)
            _unvec(zv, off, n, amat)
            w, vecs = np.linalg.eigh(amat)
            clipped = (vecs * np.maximum(w, 0.0)) @ vecs.conj().T
            _vec(np.ascontiguousarray(clipped), n, zv, off)
            continue
        a = np.zeros((n, n), dtype=np.complex128)
        v = np.zeros((n, n), dtype=np.complex128)
        out = np.zeros((n, n), dtype=np.complex128)
        _unvec(zv, off, n, a)
        if _clip_block(a, v, out, rel_tol, max_sweeps) < 0:
            return None
        _vec(out, n, zv, off)
    return z


def dykstra_run(x0, vt_in, c_in, kinds, sizes, offsets, int max_iter,
                double stop_tol, double feas_tol, double floor,
                int stall_window, double stall_rel, double rel_tol,
                int max_sweeps, int jacobi_max):
    """Dykstra iteration between the product cone and ``{x : V^T x = c}``.

    ``vt_in`` holds the orthonormal rows ``V^T``. Returns
    ``(x, y, history, iterations, code)``; code 0 converged below
    ``stop_tol`` or stalled below ``feas_tol``, 1 stalled above ``floor``,
    2 budget exhausted, -1 eigensolver failure.
    """
    cdef double[:, ::1] vt = np.ascontiguousarray(vt_in, dtype=np.float64)
    cdef double[::1] c = np.ascontiguousarray(c_in, dtype=np.float64)
    cdef Py_ssize_t m = vt.shape[1], r = vt.shape[0]
    xa = np.array(x0, dtype=np.float64)
    ya = np.zeros(m)
    za = np.zeros(m)
    pa = np.zeros(m)
    ta = np.zeros(r)
    hist = np.zeros(max_iter)
    cdef double[::1] x = xa, y = ya, z = za, p = pa, t = ta, h = hist
    cdef Py_ssize_t i, j, b, n, off, nb = len(kinds)
    cdef Py_ssize_t k
    cdef double acc, gap, prev
    cdef int code = 2

    cdef Py_ssize_t[::1] kv = np.asarray(kinds, dtype=np.intp)
    cdef Py_ssize_t[::1] sv = np.asarray(sizes, dtype=np.intp)
    cdef Py_ssize_t[::1] ov = np.asarray(offsets, dtype=np.intp)
    work = []
    for b in range(nb):
        n = sv[b] if kv[b] == 0 else 1
        work.append((np.zeros((n, n), dtype=np.complex128),
                     np.zeros((n, n), dtype=np.complex128),
                     np.zeros((n, n), dtype=np.complex128)))
    cdef double complex[:, ::1] wa, wv, wo

    for k in range(max_iter):
        for i in range(m):
            z[i] = x[i] + p[i]
            y[i] = z[i]
        for b in range(nb):
            n = sv[b]
            off = ov[b]
            if kv[b] == 1:
                for i in range(n):
                    if y[off + i] < 0.0:
                        y[off + i] = 0.0
            elif n > jacobi_max:
                amat = np.zeros((n, n), dtype=np.complex128)
                _unvec(y, off, n, amat)
                w, vecs = np.linalg.eigh(amat)
                clipped = (vecs * np.maximum(w, 0.0)) @ vecs.conj().T
                _vec(np.ascontiguousarray(clipped), n, y, off)
            else:
                wa, wv, wo = work[b]
                _unvec(y, off, n, wa)
                if _clip_block(wa, wv, wo, rel_tol, max_sweeps) < 0:
                    return xa, ya, hist[:k], k, -1
                _vec(wo, n, y, off)
        for i in range(m):
            p[i] = z[i] - y[i]
        for j in range(r):
            acc = 0.0
            for i in range(m):
                acc += vt[j, i] * y[i]
            t[j] = acc - c[j]
        for i in range(m):
            x[i] = y[i]
        for j in range(r):
            for i in range(m):
                x[i] -= vt[j, i] * t[j]
        gap = 0.0
        for i in range(m):
            gap += (y[i] - x[i]) * (y[i] - x[i])
        gap = sqrt(gap)
        h[k] = gap
        if gap <= stop_tol:
            return xa, ya, hist[:k + 1], k + 1, 0
        if k >= stall_window:
            prev = h[k - stall_window]
            if prev - gap < stall_rel * prev:
                if gap >= floor:
                    return xa, ya, hist[:k + 1], k + 1, 1
                if gap <= feas_tol:
                    return xa, ya, hist[:k + 1], k + 1, 0
    return xa, ya, hist, max_iter, code
