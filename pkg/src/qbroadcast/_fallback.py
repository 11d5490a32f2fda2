"""Pure-Python twin of the compiled kernels in ``_kernels.pyx``.

Same algorithms, same rotation convention and the same stopping rules;
numpy performs the vector updates.
"""
import numpy as np

SQRT2 = np.sqrt(2.0)


def jacobi_eigh(h, rel_tol, max_sweeps):
    a = np.array(h, dtype=np.complex128, order="C")
    n = a.shape[0]
    v = np.eye(n, dtype=np.complex128)
    thresh = rel_tol * np.linalg.norm(a)
    offmask = ~np.eye(n, dtype=bool)
    done = -1
    for sweep in range(max_sweeps + 1):
        if np.linalg.norm(a[offmask]) <= thresh:
            done = sweep
            break
        if sweep == max_sweeps:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                z = a[p, q]
                r = abs(z)
                if r == 0.0:
                    continue
                ph = z / r
                tau = (a[q, q].real - a[p, p].real) / (2.0 * r)
                if tau >= 0:
                    t = 1.0 / (tau + np.hypot(1.0, tau))
                else:
                    t = -1.0 / (-tau + np.hypot(1.0, tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                u = np.array([[c, s], [-s * ph.conjugate(), c * ph.conjugate()]])
                idx = [p, q]
                a[:, idx] = a[:, idx] @ u
                a[idx, :] = u.conj().T @ a[idx, :]
                a[p, q] = a[q, p] = 0.0
                a[p, p] = a[p, p].real
                a[q, q] = a[q, q].real
                v[:, idx] = v[:, idx] @ u
    return np.diag(a).real.copy(), v, done


def psd_clip(h, rel_tol, max_sweeps):
    evals, vecs, sweeps = jacobi_eigh(h, rel_tol, max_sweeps)
    if sweeps < 0:
        return None
    pos = np.maximum(evals, 0.0)
    return (vecs * pos) @ vecs.conj().T


def _unvec(z, off, n):
    a = np.zeros((n, n), dtype=np.complex128)
    a[np.arange(n), np.arange(n)] = z[off:off + n]
    iu, ju = np.triu_indices(n, k=1)
    seg = z[off + n:off + n * n]
    vals = (seg[0::2] + 1j * seg[1::2]) / SQRT2
    a[iu, ju] = vals
    a[ju, iu] = vals.conj()
    return a


def _vec(a, n, z, off):
    iu, ju = np.triu_indices(n, k=1)
    z[off:off + n] = np.diag(a).real
    z[off + n:off + n * n:2] = SQRT2 * a[iu, ju].real
    z[off + n + 1:off + n * n:2] = SQRT2 * a[iu, ju].imag


def _project_blocks(y, kinds, sizes, offsets, rel_tol, max_sweeps, jacobi_max):
    for kind, n, off in zip(kinds, sizes, offsets):
        if kind == 1:
            np.maximum(y[off:off + n], 0.0, out=y[off:off + n])
            continue
        a = _unvec(y, off, n)
        if n > jacobi_max:
            w, vecs = np.linalg.eigh(a)
            clipped = (vecs * np.maximum(w, 0.0)) @ vecs.conj().T
        else:
            clipped = psd_clip(a, rel_tol, max_sweeps)
            if clipped is None:
                return False
        _vec(clipped, n, y, off)
    return True


def cone_project(z_in, kinds, sizes, offsets, rel_tol, max_sweeps, jacobi_max):
    z = np.array(z_in, dtype=np.float64)
    if not _project_blocks(z, kinds, sizes, offsets, rel_tol, max_sweeps, jacobi_max):
        return None
    return z


def dykstra_run(x0, vt, c, kinds, sizes, offsets, max_iter, stop_tol, feas_tol,
                floor, stall_window, stall_rel, rel_tol, max_sweeps, jacobi_max):
    vt = np.ascontiguousarray(vt, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    x = np.array(x0, dtype=np.float64)
    p = np.zeros_like(x)
    y = np.zeros_like(x)
    hist = np.zeros(max_iter)
    for k in range(max_iter):
        z = x + p
        y = z.copy()
        if not _project_blocks(y, kinds, sizes, offsets, rel_tol, max_sweeps, jacobi_max):
            return x, y, hist[:k], k, -1
        p = z - y
        x = y - vt.T @ (vt @ y - c)
        gap = np.linalg.norm(y - x)
        hist[k] = gap
        if gap <= stop_tol:
            return x, y, hist[:k + 1], k + 1, 0
        if k >= stall_window:
            prev = hist[k - stall_window]
            if prev - gap < stall_rel * prev:
                if gap >= floor:
                    return x, y, hist[:k + 1], k + 1, 1
                if gap <= feas_tol:
                    return x, y, hist[:k + 1], k + 1, 0
    return x, y, hist, max_iter, 2
