# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled steering core.

Same interface and arithmetic as ``kinorrt._pycore``; all matrices are small,
dense and row-major, so plain loops beat BLAS call overhead here.
"""

import math

import numpy as np

from libc.math cimport fabs, log2, ceil, log, exp, NAN
from libc.stdlib cimport malloc, free
from libc.string cimport memcpy, memset

VARIANT_PFF = 0
VARIANT_PENALTY = 1
VARIANT_FIXED = 2

STATUS_OK = 0
STATUS_BOUNDARY = 1
STATUS_DEGENERATE = 2

PIVOT_TOL = 1e-13

cdef enum:
    C_PFF = 0
    C_PENALTY = 1
    C_FIXED = 2

cdef enum:
    C_OK = 0
    C_BOUNDARY = 1
    C_DEGENERATE = 2

cdef double EPS = 2.220446049250313e-16
cdef double C_PIVOT_TOL = 1e-13
cdef int GRID_CACHE_SIZE = 8

cdef double THETA[4]
THETA[:] = [1.495585217958292e-2, 2.539398330063230e-1,
            9.504178996162932e-1, 2.097847961257068e0]
cdef double THETA13 = 5.371920351148152e0
cdef double PADE3[4]
PADE3[:] = [120., 60., 12., 1.]
cdef double PADE5[6]
PADE5[:] = [30240., 15120., 3360., 420., 30., 1.]
cdef double PADE7[8]
PADE7[:] = [17297280., 8648640., 1995840., 277200., 25200., 1512., 56., 1.]
cdef double PADE9[10]
PADE9[:] = [17643225600., 8821612800., 2075673600., 302702400., 30270240.,
            2162160., 110880., 3960., 90., 1.]
cdef double PADE13[14]
PADE13[:] = [64764752532480000., 32382376266240000., 7771770303897600.,
             1187353796428800., 129060195264000., 10559470521600.,
             670442572800., 33522128640., 1323241920., 40840800., 960960.,
             16380., 182., 1.]


# -- dense helpers -----------------------------------------------------------

cdef inline void matmul(const double* X, const double* Y, double* Z, int n) noexcept nogil:
    cdef int i, j, k
    cdef double x
    memset(Z, 0, n * n * sizeof(double))
    for i in range(n):
        for k in range(n):
            x = X[i * n + k]
            if x != 0.0:
                for j in range(n):
                    Z[i * n + j] += x * Y[k * n + j]


cdef inline void set_identity(double* X, int n, double alpha) noexcept nogil:
    cdef int i
    memset(X, 0, n * n * sizeof(double))
    for i in range(n):
        X[i * n + i] = alpha


cdef inline void axpy(double alpha, const double* X, double* Y, int size) noexcept nogil:
    cdef int i
    for i in range(size):
        Y[i] += alpha * X[i]


cdef int lu_inplace(double* K, int n, int* piv) noexcept nogil:
    """Partial-pivoting LU; returns the index of a zero pivot plus one, else 0."""
    cdef int i, j, k, p
    cdef double amax, v, f
    for k in range(n):
        p = k
        amax = fabs(K[k * n + k])
        for i in range(k + 1, n):
            v = fabs(K[i * n + k])
            if v > amax:
                amax = v
                p = i
        piv[k] = p
        if p != k:
            for j in range(n):
                v = K[k * n + j]
                K[k * n + j] = K[p * n + j]
                K[p * n + j] = v
        if K[k * n + k] == 0.0:
            return k + 1
        for i in range(k + 1, n):
            f = K[i * n + k] / K[k * n + k]
            K[i * n + k] = f
            if f != 0.0:
                for j in range(k + 1, n):
                    K[i * n + j] -= f * K[k * n + j]
    return 0


cdef void lu_solve_multi(const double* LU, int n, const int* piv, double* X, int ncol) noexcept nogil:
    """Solve in place for an n x ncol right-hand side stored row-major."""
    cdef int i, j, k
    cdef double v, f
    for k in range(n):
        if piv[k] != k:
            for j in range(ncol):
                v = X[k * ncol + j]
                X[k * ncol + j] = X[piv[k] * ncol + j]
                X[piv[k] * ncol + j] = v
    for i in range(n):
        for k in range(i):
            f = LU[i * n + k]
            if f != 0.0:
                for j in range(ncol):
                    X[i * ncol + j] -= f * X[k * ncol + j]
    for i in range(n - 1, -1, -1):
        for k in range(i + 1, n):
            f = LU[i * n + k]
            if f != 0.0:
                for j in range(ncol):
                    X[i * ncol + j] -= f * X[k * ncol + j]
        f = LU[i * n + i]
        for j in range(ncol):
            X[i * ncol + j] /= f


cdef int expm_c(const double* M, int n, double* E) noexcept nogil:
    cdef int nn = n * n
    cdef int i, k, s, degree, half
    cdef double norm1, colsum, scale
    cdef const double* b
    cdef double* buf
    cdef int* piv
    cdef double* A
    cdef double* A2
    cdef double* A4
    cdef double* A6
    cdef double* U
    cdef double* V
    cdef double* T1
    cdef double* T2
    norm1 = 0.0
    for k in range(n):
        colsum = 0.0
        for i in range(n):
            colsum += fabs(M[i * n + k])
        if colsum > norm1:
            norm1 = colsum
    if norm1 == 0.0:
        set_identity(E, n, 1.0)
        return 0
    if not (norm1 < 1e300):
        return -1
    buf = <double*>malloc(8 * nn * sizeof(double))
    piv = <int*>malloc(n * sizeof(int))
    A = buf
    A2 = buf + nn
    A4 = buf + 2 * nn
    A6 = buf + 3 * nn
    U = buf + 4 * nn
    V = buf + 5 * nn
    T1 = buf + 6 * nn
    T2 = buf + 7 * nn
    matmul(M, M, A2, n)
    s = 0
    degree = 13
    for i in range(4):
        if norm1 <= THETA[i]:
            degree = 3 + 2 * i
            break
    if degree < 13:
        if degree == 3:
            b = PADE3
        elif degree == 5:
            b = PADE5
        elif degree == 7:
            b = PADE7
        else:
            b = PADE9
        set_identity(T1, n, 1.0)
        set_identity(T2, n, b[1])
        set_identity(V, n, b[0])
        half = degree // 2
        for k in range(1, half + 1):
            matmul(T1, A2, U, n)
            memcpy(T1, U, nn * sizeof(double))
            axpy(b[2 * k + 1], T1, T2, nn)
            axpy(b[2 * k], T1, V, nn)
        matmul(M, T2, U, n)
    else:
        b = PADE13
        s = <int>ceil(log2(norm1 / THETA13))
        if s < 0:
            s = 0
        scale = 1.0
        for i in range(s):
            scale *= 0.5
        for i in range(nn):
            A[i] = M[i] * scale
            A2[i] = A2[i] * scale * scale
        matmul(A2, A2, A4, n)
        matmul(A4, A2, A6, n)
        for i in range(nn):
            T1[i] = b[13] * A6[i] + b[11] * A4[i] + b[9] * A2[i]
        matmul(A6, T1, T2, n)
        for i in range(nn):
            T2[i] += b[7] * A6[i] + b[5] * A4[i] + b[3] * A2[i]
        for i in range(n):
            T2[i * n + i] += b[1]
        matmul(A, T2, U, n)
        for i in range(nn):
            T1[i] = b[12] * A6[i] + b[10] * A4[i] + b[8] * A2[i]
        matmul(A6, T1, V, n)
        for i in range(nn):
            V[i] += b[6] * A6[i] + b[4] * A4[i] + b[2] * A2[i]
        for i in range(n):
            V[i * n + i] += b[0]
    for i in range(nn):
        T1[i] = V[i] - U[i]
        E[i] = V[i] + U[i]
    lu_inplace(T1, n, piv)
    lu_solve_multi(T1, n, piv, E, n)
    for k in range(s):
        matmul(E, E, T1, n)
        memcpy(E, T1, nn * sizeof(double))
    free(buf)
    free(piv)
    return 0


# -- equilibrated factorisation -----------------------------------------------

cdef int factor_eq(double* K, int k, int* piv, double* rs, double* cs) noexcept nogil:
    """Scale columns then rows to unit max-norm and LU-factor in place.

    Returns 0 when the factor is usable, 1 when numerically singular.
    """
    cdef int i, j
    cdef double v, amax
    for j in range(k):
        amax = 0.0
        for i in range(k):
            v = fabs(K[i * k + j])
            if v > amax or v != v:
                amax = v
        if amax == 0.0 or not (amax < 1e300):
            return 1
        cs[j] = 1.0 / amax
    for i in range(k):
        amax = 0.0
        for j in range(k):
            K[i * k + j] *= cs[j]
            v = fabs(K[i * k + j])
            if v > amax:
                amax = v
        rs[i] = 1.0 / amax
        for j in range(k):
            K[i * k + j] *= rs[i]
    if lu_inplace(K, k, piv) != 0:
        return 1
    for i in range(k):
        if fabs(K[i * k + i]) < C_PIVOT_TOL:
            return 1
    return 0


cdef void solve_eq(const double* LU, int k, const int* piv, const double* rs,
                   const double* cs, double* b) noexcept nogil:
    cdef int i
    for i in range(k):
        b[i] *= rs[i]
    lu_solve_multi(LU, k, piv, b, 1)
    for i in range(k):
        b[i] *= cs[i]


# -- system data ------------------------------------------------------------

cdef struct Sys:
    int n
    int n1
    int N
    double* A
    double* Q
    double* c
    double* S
    double* aug
    double* flw


cdef inline int sys_k(const Sys* sy, int variant) noexcept nogil:
    return sy.n1 if variant == C_PFF else sy.n


cdef int kernel_c(const Sys* sy, double t, double* Phi, double* G, double* d,
                  double* Emt, double* work) noexcept nogil:
    """work needs 2 N^2 doubles."""
    cdef int n = sy.n
    cdef int N = sy.N
    cdef int i, j, k
    cdef double* Mt = work
    cdef double* E = work + N * N
    cdef double v
    for i in range(N * N):
        Mt[i] = sy.aug[i] * t
    if expm_c(Mt, N, E) != 0:
        return 1
    for i in range(n):
        for j in range(n):
            Phi[i * n + j] = E[i * N + j]
        d[i] = E[i * N + 2 * n]
    if Emt != NULL:
        for i in range(n):
            for j in range(n):
                Emt[i * n + j] = E[(n + i) * N + n + j]
    for i in range(n):
        for j in range(n):
            v = 0.0
            for k in range(n):
                v += E[i * N + n + k] * Phi[j * n + k]
            G[i * n + j] = v
    for i in range(n):
        for j in range(i + 1, n):
            v = 0.5 * (G[i * n + j] + G[j * n + i])
            G[i * n + j] = v
            G[j * n + i] = v
    return 0


cdef void build_system(const Sys* sy, int variant, const double* G, double* K) noexcept nogil:
    cdef int n = sy.n
    cdef int n1 = sy.n1
    cdef int n2 = n - n1
    cdef int i, j, l
    cdef double v
    if variant == C_PFF:
        for i in range(n1):
            for j in range(n1):
                K[i * n1 + j] = G[i * n + j]
    elif variant == C_FIXED:
        memcpy(K, G, n * n * sizeof(double))
    else:
        for i in range(n):
            for j in range(n1):
                K[i * n + j] = 0.5 * G[i * n + j]
            for j in range(n2):
                v = 0.0
                for l in range(n2):
                    v += G[i * n + n1 + l] * sy.S[l * n2 + j]
                K[i * n + n1 + j] = 0.5 * v
        for i in range(n2):
            K[(n1 + i) * n + n1 + i] += 1.0


cdef void finish_c(const Sys* sy, int variant, double t, const double* Phi,
                   const double* G, const double* d, const double* LU,
                   const int* piv, const double* rs, const double* cs,
                   const double* xa, const double* target, double* cost,
                   double* H, double* lam, double* xend, double* work) noexcept nogil:
    """work needs 2 n doubles."""
    cdef int n = sy.n
    cdef int n1 = sy.n1
    cdef int n2 = n - n1
    cdef int i, j
    cdef double v, acc
    cdef double* xbar = work
    cdef double* rhs = work + n
    for i in range(n):
        v = 0.0
        for j in range(n):
            v += Phi[i * n + j] * xa[j]
        xbar[i] = v + d[i]
    if variant == C_PFF:
        for i in range(n1):
            rhs[i] = 2.0 * (xbar[i] - target[i])
        solve_eq(LU, n1, piv, rs, cs, rhs)
        for i in range(n):
            lam[i] = rhs[i] if i < n1 else 0.0
        for i in range(n1):
            xend[i] = target[i]
        for i in range(n1, n):
            v = 0.0
            for j in range(n1):
                v += G[i * n + j] * rhs[j]
            xend[i] = xbar[i] - 0.5 * v
        acc = 0.0
        for i in range(n1):
            v = 0.0
            for j in range(n1):
                v += G[i * n + j] * rhs[j]
            acc += rhs[i] * v
        cost[0] = t + 0.25 * acc
    elif variant == C_FIXED:
        for i in range(n):
            rhs[i] = 2.0 * (xbar[i] - target[i])
        solve_eq(LU, n, piv, rs, cs, rhs)
        for i in range(n):
            lam[i] = rhs[i]
            xend[i] = target[i]
        acc = 0.0
        for i in range(n):
            v = 0.0
            for j in range(n):
                v += G[i * n + j] * lam[j]
            acc += lam[i] * v
        cost[0] = t + 0.25 * acc
    else:
        for i in range(n):
            rhs[i] = xbar[i] - target[i] if i < n1 else xbar[i]
        solve_eq(LU, n, piv, rs, cs, rhs)
        for i in range(n1):
            lam[i] = rhs[i]
            xend[i] = target[i]
        for i in range(n2):
            v = 0.0
            for j in range(n2):
                v += sy.S[i * n2 + j] * rhs[n1 + j]
            lam[n1 + i] = v
            xend[n1 + i] = rhs[n1 + i]
        acc = 0.0
        for i in range(n):
            v = 0.0
            for j in range(n):
                v += G[i * n + j] * lam[j]
            acc += lam[i] * v
        cost[0] = t + 0.25 * acc
        acc = 0.0
        for i in range(n2):
            acc += rhs[n1 + i] * lam[n1 + i]
        cost[0] += 0.5 * acc
    # H = 1 + lam.(A x + c) - lam.Q.lam / 4
    acc = 0.0
    for i in range(n):
        v = sy.c[i]
        for j in range(n):
            v += sy.A[i * n + j] * xend[j]
        acc += lam[i] * v
    H[0] = 1.0 + acc
    acc = 0.0
    for i in range(n):
        v = 0.0
        for j in range(n):
            v += sy.Q[i * n + j] * lam[j]
        acc += lam[i] * v
    H[0] -= 0.25 * acc


cdef int eval_at(const Sys* sy, int variant, double t, const double* xa,
                 const double* target, double* cost, double* H, double* lam,
                 double* xend, double* work) noexcept nogil:
    """Full solve at one arrival time; work needs eval_work_size doubles."""
    cdef int n = sy.n
    cdef int N = sy.N
    cdef int k = sys_k(sy, variant)
    cdef double* Phi = work
    cdef double* G = Phi + n * n
    cdef double* d = G + n * n
    cdef double* K = d + n
    cdef double* rs = K + n * n
    cdef double* cs = rs + n
    cdef double* fw = cs + n
    cdef double* kw = fw + 2 * n
    cdef int* piv = <int*>(kw + 2 * N * N)
    if kernel_c(sy, t, Phi, G, d, NULL, kw) != 0:
        return C_DEGENERATE
    build_system(sy, variant, G, K)
    if factor_eq(K, k, piv, rs, cs) != 0:
        return C_DEGENERATE
    finish_c(sy, variant, t, Phi, G, d, K, piv, rs, cs, xa, target, cost, H,
             lam, xend, fw)
    return C_OK


cdef inline int eval_work_size(int n, int N) noexcept nogil:
    # Phi, G, d, K, rs, cs, finish work, kernel work, pivots (as doubles)
    return 3 * n * n + 5 * n + 2 * N * N + n + 1


cdef double brent_root(const Sys* sy, int variant, const double* xa,
                       const double* target, double a, double b, double fa,
                       double fb, double rtol, double* work, double* lam,
                       double* xend, double* cost_out, double* H_out,
                       double* t_last) noexcept nogil:
    """Brent's zeroin on H(t); leaves the evaluation at the last point in the outputs."""
    cdef double c = a, fc = fa, d = b - a, e = b - a
    cdef double tol, m, s, p, q, r, tmp
    cdef int it, st
    t_last[0] = NAN
    for it in range(100):
        if (fb > 0) == (fc > 0):
            c = a
            fc = fa
            d = b - a
            e = d
        if fabs(fc) < fabs(fb):
            a = b
            b = c
            c = a
            fa = fb
            fb = fc
            fc = fa
        tol = 2.0 * EPS * fabs(b) + 0.5 * rtol * fabs(b)
        m = 0.5 * (c - b)
        if fabs(m) <= tol or fb == 0.0:
            return b
        if fabs(e) >= tol and fabs(fa) > fabs(fb):
            s = fb / fa
            if a == c:
                p = 2.0 * m * s
                q = 1.0 - s
            else:
                q = fa / fc
                r = fb / fc
                p = s * (2.0 * m * q * (q - r) - (b - a) * (r - 1.0))
                q = (q - 1.0) * (r - 1.0) * (s - 1.0)
            if p > 0.0:
                q = -q
            else:
                p = -p
            tmp = 3.0 * m * q - fabs(tol * q)
            if fabs(e * q) < tmp:
                tmp = fabs(e * q)
            if 2.0 * p < tmp:
                e = d
                d = p / q
            else:
                d = m
                e = m
        else:
            d = m
            e = m
        a = b
        fa = fb
        if fabs(d) > tol:
            b = b + d
        elif m > 0:
            b = b + tol
        else:
            b = b - tol
        st = eval_at(sy, variant, b, xa, target, cost_out, H_out, lam, xend, work)
        if st != C_OK:
            return NAN
        t_last[0] = b
        fb = H_out[0]
    return b


cdef int free_time_c(const Sys* sy, int variant, const double* xa,
                     const double* target, int ngrid, const double* ts,
                     const double* gPhi, const double* gG, const double* gd,
                     const double* gLU, const int* gpiv, const double* grs,
                     const double* gcs, const int* gok, double rtol,
                     double* tf_out, double* cost_out, double* H_out,
                     double* lam_out, double* xend_out) noexcept nogil:
    cdef int n = sy.n
    cdef int N = sy.N
    cdef int k = sys_k(sy, variant)
    cdef int g, found = 0, gbest = -1, st
    cdef double cbest = 0.0, t, troot, tlast, ccost, cH
    cdef double* costs = <double*>malloc(ngrid * sizeof(double))
    cdef double* Hs = <double*>malloc(ngrid * sizeof(double))
    cdef double* work = <double*>malloc((eval_work_size(n, N) + 6 * n) * sizeof(double))
    cdef double* lam = work + eval_work_size(n, N)
    cdef double* xend = lam + n
    cdef double* fw = xend + n
    cdef double* lam2 = fw + 2 * n
    cdef double* xend2 = lam2 + n
    for g in range(ngrid):
        if gok[g]:
            finish_c(sy, variant, ts[g], gPhi + g * n * n, gG + g * n * n,
                     gd + g * n, gLU + g * k * k, gpiv + g * k, grs + g * k,
                     gcs + g * k, xa, target, &costs[g], &Hs[g], lam, xend, fw)
    for g in range(ngrid):
        if not gok[g]:
            continue
        if Hs[g] == 0.0:
            finish_c(sy, variant, ts[g], gPhi + g * n * n, gG + g * n * n,
                     gd + g * n, gLU + g * k * k, gpiv + g * k, grs + g * k,
                     gcs + g * k, xa, target, &ccost, &cH, lam2, xend2, fw)
            troot = ts[g]
        elif g + 1 < ngrid and gok[g + 1] and Hs[g] < 0.0 and Hs[g + 1] > 0.0:
            troot = brent_root(sy, variant, xa, target, ts[g], ts[g + 1], Hs[g],
                               Hs[g + 1], rtol, work, lam2, xend2, &ccost, &cH,
                               &tlast)
            if troot != troot:
                continue
            if troot != tlast:
                st = eval_at(sy, variant, troot, xa, target, &ccost, &cH, lam2,
                             xend2, work)
                if st != C_OK:
                    continue
        else:
            continue
        if not found or ccost < cbest:
            found = 1
            cbest = ccost
            tf_out[0] = troot
            cost_out[0] = ccost
            H_out[0] = cH
            memcpy(lam_out, lam2, n * sizeof(double))
            memcpy(xend_out, xend2, n * sizeof(double))
    if found:
        st = C_OK
    else:
        for g in range(ngrid):
            if gok[g] and (gbest < 0 or costs[g] < costs[gbest]):
                gbest = g
        if gbest < 0:
            st = C_DEGENERATE
        else:
            g = gbest
            finish_c(sy, variant, ts[g], gPhi + g * n * n, gG + g * n * n,
                     gd + g * n, gLU + g * k * k, gpiv + g * k, grs + g * k,
                     gcs + g * k, xa, target, cost_out, H_out, lam_out,
                     xend_out, fw)
            tf_out[0] = ts[g]
            st = C_BOUNDARY
    free(costs)
    free(Hs)
    free(work)
    return st


# -- Python-facing wrappers ---------------------------------------------------

def expm(M):
    """Matrix exponential by scaling and squaring with a diagonal Pade core."""
    cdef double[:, ::1] Mv = np.array(M, dtype=float, order="C")
    cdef int n = Mv.shape[0]
    out = np.empty((n, n))
    cdef double[:, ::1] Ev = out
    if n == 0:
        return out
    with nogil:
        expm_c(&Mv[0, 0], n, &Ev[0, 0])
    return out


cdef class SteeringCore:
    """Closed-form steering kernels for one linear system (compiled)."""

    cdef Sys sy
    cdef readonly object A, B, c, Rinv, Q, S
    cdef readonly int n, m, n1
    cdef object _aug, _flow, _grids, _sbuf

    def __init__(self, A, B, c, R, n1, S=None):
        self.A = np.array(A, dtype=float, order="C")
        self.B = np.array(B, dtype=float, order="C")
        self.c = np.array(c, dtype=float, order="C")
        n = self.A.shape[0]
        self.n = n
        self.m = self.B.shape[1]
        self.n1 = int(n1)
        n2 = n - self.n1
        self.Rinv = np.linalg.inv(np.asarray(R, dtype=float))
        self.Q = np.ascontiguousarray(self.B @ self.Rinv @ self.B.T)
        self.S = (np.zeros((n2, n2)) if S is None
                  else np.array(S, dtype=float, order="C"))
        self._sbuf = self.S if self.S.size else np.zeros((1, 1))
        aug = np.zeros((2 * n + 1, 2 * n + 1))
        aug[:n, :n] = self.A
        aug[:n, n:2 * n] = self.Q
        aug[:n, 2 * n] = self.c
        aug[n:2 * n, n:2 * n] = -self.A.T
        flow = np.zeros((2 * n + 1, 2 * n + 1))
        flow[:n, :n] = self.A
        flow[:n, n:2 * n] = -0.5 * self.Q
        flow[:n, 2 * n] = self.c
        flow[n:2 * n, n:2 * n] = -self.A.T
        self._aug = aug
        self._flow = flow
        self._grids = {}
        cdef double[:, ::1] a_v = self.A
        cdef double[:, ::1] q_v = self.Q
        cdef double[::1] c_v = self.c
        cdef double[:, ::1] s_v = self._sbuf
        cdef double[:, ::1] aug_v = aug
        cdef double[:, ::1] flow_v = flow
        self.sy.n = n
        self.sy.n1 = self.n1
        self.sy.N = 2 * n + 1
        self.sy.A = &a_v[0, 0]
        self.sy.Q = &q_v[0, 0]
        self.sy.c = &c_v[0]
        self.sy.S = &s_v[0, 0]
        self.sy.aug = &aug_v[0, 0]
        self.sy.flw = &flow_v[0, 0]

    def kernel(self, double t):
        """Return ``(Phi, G, d, Emt)`` at time ``t`` from one exponential."""
        cdef int n = self.n
        cdef int N = 2 * n + 1
        Phi = np.empty((n, n))
        G = np.empty((n, n))
        d = np.empty(n)
        Emt = np.empty((n, n))
        work = np.empty(2 * N * N)
        cdef double[:, ::1] pv = Phi
        cdef double[:, ::1] gv = G
        cdef double[::1] dv = d
        cdef double[:, ::1] ev = Emt
        cdef double[::1] wv = work
        with nogil:
            kernel_c(&self.sy, t, &pv[0, 0], &gv[0, 0], &dv[0], &ev[0, 0], &wv[0])
        return Phi, G, d, Emt

    def solve_fixed_time(self, int variant, xa, target, double t):
        """Steer with a given arrival time; returns ``(status, cost, H, lam, x_end)``."""
        status, cost, H, lam, x_end = self.solve_fixed_time_batch(
            variant, np.asarray(xa, dtype=float)[None, :],
            np.asarray(target, dtype=float)[None, :], np.array([t]))
        return int(status[0]), float(cost[0]), float(H[0]), lam[0], x_end[0]

    def solve_fixed_time_batch(self, int variant, XA, TARGETS, TF):
        XA = np.atleast_2d(np.asarray(XA, dtype=float))
        TARGETS = np.atleast_2d(np.asarray(TARGETS, dtype=float))
        TF = np.atleast_1d(np.asarray(TF, dtype=float))
        cdef int K = max(XA.shape[0], TARGETS.shape[0], TF.shape[0])
        cdef double[:, ::1] xa_v = np.array(np.broadcast_to(XA, (K, XA.shape[1])), dtype=float, order="C")
        cdef double[:, ::1] tg_v = np.array(np.broadcast_to(TARGETS, (K, TARGETS.shape[1])), dtype=float, order="C")
        cdef double[::1] tf_v = np.array(np.broadcast_to(TF, (K,)), dtype=float, order="C")
        cdef int n = self.n
        status = np.empty(K, dtype=np.int64)
        cost = np.empty(K)
        H = np.empty(K)
        lam = np.empty((K, n))
        x_end = np.empty((K, n))
        cdef long long[::1] st_v = status
        cdef double[::1] c_v = cost
        cdef double[::1] h_v = H
        cdef double[:, ::1] l_v = lam
        cdef double[:, ::1] x_v = x_end
        cdef int N = 2 * n + 1
        cdef double* work
        cdef int i, j, st
        with nogil:
            work = <double*>malloc(eval_work_size(n, N) * sizeof(double))
            for i in range(K):
                st = eval_at(&self.sy, variant, tf_v[i], &xa_v[i, 0], &tg_v[i, 0],
                             &c_v[i], &h_v[i], &l_v[i, 0], &x_v[i, 0], work)
                st_v[i] = st
                if st != C_OK:
                    c_v[i] = NAN
                    h_v[i] = NAN
                    for j in range(n):
                        l_v[i, j] = NAN
                        x_v[i, j] = NAN
            free(work)
        return status, cost, H, lam, x_end

    def _grid(self, int variant, double tmin, double tmax, int ngrid):
        key = (variant, tmin, tmax, ngrid)
        grid = self._grids.get(key)
        if grid is not None:
            return grid
        cdef int n = self.n
        cdef int N = 2 * n + 1
        cdef int k = self.n1 if variant == C_PFF else n
        ts = np.exp(np.linspace(math.log(tmin), math.log(tmax), ngrid))
        Phi = np.empty((ngrid, n, n))
        G = np.empty((ngrid, n, n))
        d = np.empty((ngrid, n))
        LU = np.empty((ngrid, k, k))
        piv = np.empty((ngrid, k), dtype=np.intc)
        rs = np.empty((ngrid, k))
        cs = np.empty((ngrid, k))
        ok = np.empty(ngrid, dtype=np.intc)
        cdef double[::1] t_v = ts
        cdef double[:, :, ::1] p_v = Phi
        cdef double[:, :, ::1] g_v = G
        cdef double[:, ::1] d_v = d
        cdef double[:, :, ::1] lu_v = LU
        cdef int[:, ::1] piv_v = piv
        cdef double[:, ::1] rs_v = rs
        cdef double[:, ::1] cs_v = cs
        cdef int[::1] ok_v = ok
        cdef double* work
        cdef int g
        with nogil:
            work = <double*>malloc(2 * N * N * sizeof(double))
            for g in range(ngrid):
                if kernel_c(&self.sy, t_v[g], &p_v[g, 0, 0], &g_v[g, 0, 0],
                            &d_v[g, 0], NULL, work) != 0:
                    ok_v[g] = 0
                    continue
                build_system(&self.sy, variant, &g_v[g, 0, 0], &lu_v[g, 0, 0])
                ok_v[g] = 1 - factor_eq(&lu_v[g, 0, 0], k, &piv_v[g, 0],
                                        &rs_v[g, 0], &cs_v[g, 0])
            free(work)
        if len(self._grids) >= GRID_CACHE_SIZE:
            self._grids.pop(next(iter(self._grids)))
        grid = (ts, Phi, G, d, LU, piv, rs, cs, ok)
        self._grids[key] = grid
        return grid

    def solve_free_time(self, int variant, xa, target, double tmin, double tmax,
                        int ngrid=64, double rtol=1e-9):
        """Steer with the transversality-optimal arrival time.

        Returns ``(status, tf, cost, H, lam, x_end)``.
        """
        status, tf, cost, H, lam, x_end = self.solve_free_time_batch(
            variant, np.asarray(xa, dtype=float)[None, :],
            np.asarray(target, dtype=float)[None, :], tmin, tmax, ngrid, rtol)
        return (int(status[0]), float(tf[0]), float(cost[0]), float(H[0]),
                lam[0], x_end[0])

    def solve_free_time_batch(self, int variant, XA, TARGETS, double tmin,
                              double tmax, int ngrid=64, double rtol=1e-9):
        XA = np.atleast_2d(np.asarray(XA, dtype=float))
        TARGETS = np.atleast_2d(np.asarray(TARGETS, dtype=float))
        cdef int K = max(XA.shape[0], TARGETS.shape[0])
        cdef double[:, ::1] xa_v = np.array(np.broadcast_to(XA, (K, XA.shape[1])), dtype=float, order="C")
        cdef double[:, ::1] tg_v = np.array(np.broadcast_to(TARGETS, (K, TARGETS.shape[1])), dtype=float, order="C")
        cdef int n = self.n
        ts, Phi, G, d, LU, piv, rs, cs, ok = self._grid(variant, tmin, tmax, ngrid)
        cdef double[::1] t_v = ts
        cdef double[:, :, ::1] p_v = Phi
        cdef double[:, :, ::1] g_v = G
        cdef double[:, ::1] d_v = d
        cdef double[:, :, ::1] lu_v = LU
        cdef int[:, ::1] piv_v = piv
        cdef double[:, ::1] rs_v = rs
        cdef double[:, ::1] cs_v = cs
        cdef int[::1] ok_v = ok
        status = np.empty(K, dtype=np.int64)
        tf = np.empty(K)
        cost = np.empty(K)
        H = np.empty(K)
        lam = np.empty((K, n))
        x_end = np.empty((K, n))
        cdef long long[::1] st_v = status
        cdef double[::1] tf_v = tf
        cdef double[::1] c_v = cost
        cdef double[::1] h_v = H
        cdef double[:, ::1] l_v = lam
        cdef double[:, ::1] x_v = x_end
        cdef int i, j, st
        with nogil:
            for i in range(K):
                st = free_time_c(&self.sy, variant, &xa_v[i, 0], &tg_v[i, 0],
                                 ngrid, &t_v[0], &p_v[0, 0, 0], &g_v[0, 0, 0],
                                 &d_v[0, 0], &lu_v[0, 0, 0], &piv_v[0, 0],
                                 &rs_v[0, 0], &cs_v[0, 0], &ok_v[0], rtol,
                                 &tf_v[i], &c_v[i], &h_v[i], &l_v[i, 0], &x_v[i, 0])
                st_v[i] = st
                if st == C_DEGENERATE:
                    tf_v[i] = NAN
                    c_v[i] = NAN
                    h_v[i] = NAN
                    for j in range(n):
                        l_v[i, j] = NAN
                        x_v[i, j] = NAN
        return status, tf, cost, H, lam, x_end

    def flow(self, x0, lam0, double tf, int nsteps):
        """States at ``nsteps + 1`` uniform times on [0, tf] via the joint flow."""
        cdef int n = self.n
        cdef int N = 2 * n + 1
        cdef double h = tf / nsteps
        Mh = self._flow * h
        cdef double[:, ::1] m_v = Mh
        E = np.empty((N, N))
        cdef double[:, ::1] e_v = E
        w = np.empty(N)
        w[:n] = x0
        w[n:2 * n] = lam0
        w[2 * n] = 1.0
        w2 = np.empty(N)
        cdef double[::1] w_v = w
        cdef double[::1] w2_v = w2
        out = np.empty((nsteps + 1, n))
        cdef double[:, ::1] o_v = out
        cdef int s, i, j
        cdef double v
        with nogil:
            expm_c(&m_v[0, 0], N, &e_v[0, 0])
            for i in range(n):
                o_v[0, i] = w_v[i]
            for s in range(1, nsteps + 1):
                for i in range(N):
                    v = 0.0
                    for j in range(N):
                        v += e_v[i, j] * w_v[j]
                    w2_v[i] = v
                for i in range(N):
                    w_v[i] = w2_v[i]
                for i in range(n):
                    o_v[s, i] = w_v[i]
        return out
