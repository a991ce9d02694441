# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled filter-bank observation update.

Mirrors _core_py.bank_kf_step cell by cell with stack-allocated scratch:
one predict+correct cycle per active (destination, arrival-time) cell,
Joseph-form covariance update, log predictive density per cell.

Limits: augmented state dim <= 16, observation dim <= 8 (the _backend
dispatcher falls back to numpy beyond that). Returns 0 on success, 1 when
some cell's innovation covariance is not positive definite; in that case
cells processed before the failure have already been written.
"""

from libc.math cimport log, sqrt

cdef double LOG_2PI = 1.8378770664093454837


cdef inline int _chol_lower(double* a, Py_ssize_t n) noexcept nogil:
    """In-place lower Cholesky of row-major a; 1 if not positive definite."""
    cdef Py_ssize_t i, j, p
    cdef double s
    for j in range(n):
        s = a[j * n + j]
        for p in range(j):
            s -= a[j * n + p] * a[j * n + p]
        if s <= 0.0:
            return 1
        a[j * n + j] = sqrt(s)
        for i in range(j + 1, n):
            s = a[i * n + j]
            for p in range(j):
                s -= a[i * n + p] * a[j * n + p]
            a[i * n + j] = s / a[j * n + j]
    return 0


cdef inline void _forward_solve(double* L, double* b, double* x,
                                Py_ssize_t n) noexcept nogil:
    """x = L^{-1} b for lower-triangular L."""
    cdef Py_ssize_t i, p
    cdef double s
    for i in range(n):
        s = b[i]
        for p in range(i):
            s -= L[i * n + p] * x[p]
        x[i] = s / L[i * n + i]


cdef inline void _chol_solve(double* L, double* b, double* x,
                             Py_ssize_t n) noexcept nogil:
    """x = (L L')^{-1} b."""
    cdef Py_ssize_t i, p
    cdef double s
    _forward_solve(L, b, x, n)
    for i in range(n - 1, -1, -1):
        s = x[i]
        for p in range(i + 1, n):
            s -= L[p * n + i] * x[p]
        x[i] = s / L[i * n + i]


def bank_kf_step(double[:, :, ::1] means, double[:, :, :, ::1] covs,
                 double[:, ::1] logliks, const unsigned char[::1] active,
                 const double[:, :, ::1] Hq, const double[:, :, ::1] Cq,
                 const double[:, :, ::1] moff, const double[::1] y,
                 const double[:, ::1] G, const double[:, ::1] V,
                 double[:, ::1] pedls):
    cdef Py_ssize_t N = means.shape[0]
    cdef Py_ssize_t q = means.shape[1]
    cdef Py_ssize_t n = means.shape[2]
    cdef Py_ssize_t r = n // 2
    cdef Py_ssize_t k = y.shape[0]
    if n > 16 or k > 8:
        raise ValueError("compiled kernel limits: state dim 16, obs dim 8")

    cdef Py_ssize_t d, i, a, b, c, p
    cdef double s, pedl, logdet, quad
    cdef int status = 0

    cdef double z[16]
    cdef double zp[16]
    cdef double P[256]
    cdef double Pp[256]
    cdef double W[256]
    cdef double A[256]
    cdef double T1[256]
    cdef double B[128]
    cdef double K[128]
    cdef double KV[128]
    cdef double T2[128]
    cdef double S[64]
    cdef double Ls[64]
    cdef double e[8]
    cdef double sol[8]

    with nogil:
        for d in range(N):
            if status != 0:
                break
            for i in range(q):
                if status != 0:
                    break
                if active[i] == 0:
                    continue

                # load the cell
                for a in range(n):
                    z[a] = means[d, i, a]
                    for b in range(n):
                        P[a * n + b] = covs[d, i, a, b]

                # predict mean: top block blends toward the endpoint
                for a in range(r):
                    s = moff[d, i, a]
                    for c in range(n):
                        s += Hq[i, a, c] * z[c]
                    zp[a] = s
                for a in range(r):
                    zp[r + a] = z[r + a]

                # W = H P  (r x n)
                for a in range(r):
                    for b in range(n):
                        s = 0.0
                        for c in range(n):
                            s += Hq[i, a, c] * P[c * n + b]
                        W[a * n + b] = s

                # predicted covariance, exploiting the held endpoint block
                for a in range(r):
                    for b in range(r):
                        s = Cq[i, a, b]
                        for c in range(n):
                            s += W[a * n + c] * Hq[i, b, c]
                        Pp[a * n + b] = s
                    for b in range(r, n):
                        Pp[a * n + b] = W[a * n + b]
                for a in range(r, n):
                    for b in range(r):
                        Pp[a * n + b] = W[b * n + a]
                    for b in range(r, n):
                        Pp[a * n + b] = P[a * n + b]
                for a in range(n):
                    for b in range(a + 1, n):
                        s = 0.5 * (Pp[a * n + b] + Pp[b * n + a])
                        Pp[a * n + b] = s
                        Pp[b * n + a] = s

                # innovation and its covariance S = G Pp_xx G' + V
                for c in range(k):
                    s = y[c]
                    for a in range(r):
                        s -= G[c, a] * zp[a]
                    e[c] = s
                for c in range(k):
                    for b in range(r):
                        s = 0.0
                        for a in range(r):
                            s += G[c, a] * Pp[a * n + b]
                        T2[c * r + b] = s
                for c in range(k):
                    for b in range(k):
                        s = V[c, b]
                        for a in range(r):
                            s += T2[c * r + a] * G[b, a]
                        S[c * k + b] = s
                for a in range(k):
                    for b in range(a + 1, k):
                        s = 0.5 * (S[a * k + b] + S[b * k + a])
                        S[a * k + b] = s
                        S[b * k + a] = s

                for a in range(k * k):
                    Ls[a] = S[a]
                if _chol_lower(Ls, k) != 0:
                    status = 1
                    break

                logdet = 0.0
                for a in range(k):
                    logdet += log(Ls[a * k + a])
                logdet *= 2.0
                _forward_solve(Ls, e, sol, k)
                quad = 0.0
                for a in range(k):
                    quad += sol[a] * sol[a]
                pedl = -0.5 * (k * LOG_2PI + logdet + quad)

                # gain K = Pp G~' S^{-1}, with G~ = [G, 0]
                for a in range(n):
                    for c in range(k):
                        s = 0.0
                        for b in range(r):
                            s += Pp[a * n + b] * G[c, b]
                        B[a * k + c] = s
                for a in range(n):
                    _chol_solve(Ls, &B[a * k], &K[a * k], k)

                # posterior mean
                for a in range(n):
                    s = zp[a]
                    for c in range(k):
                        s += K[a * k + c] * e[c]
                    means[d, i, a] = s

                # Joseph form: (I - K G~) Pp (.)' + K V K'
                for a in range(n):
                    for b in range(r):
                        s = 0.0
                        for c in range(k):
                            s += K[a * k + c] * G[c, b]
                        A[a * n + b] = (1.0 if a == b else 0.0) - s
                    for b in range(r, n):
                        A[a * n + b] = 1.0 if a == b else 0.0
                for a in range(n):
                    for b in range(n):
                        s = 0.0
                        for c in range(n):
                            s += A[a * n + c] * Pp[c * n + b]
                        T1[a * n + b] = s
                for a in range(n):
                    for c in range(k):
                        s = 0.0
                        for b in range(k):
                            s += K[a * k + b] * V[b, c]
                        KV[a * k + c] = s
                for a in range(n):
                    for b in range(a, n):
                        s = 0.0
                        for c in range(n):
                            s += T1[a * n + c] * A[b * n + c]
                        for c in range(k):
                            s += KV[a * k + c] * K[b * k + c]
                        covs[d, i, a, b] = s
                        covs[d, i, b, a] = s

                logliks[d, i] += pedl
                pedls[d, i] = pedl

    return status
