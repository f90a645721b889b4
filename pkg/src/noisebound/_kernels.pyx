# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled simulation loops.

Mirrors ``_pykernels`` operation for operation so both backends produce the
same trajectories from the same uniform buffers.
"""

from libc.math cimport log, pow, fabs, isfinite

# status codes (keep in sync with _pykernels)
cdef enum:
    S_DONE = 0
    S_NEED_RANDOM = 1
    S_BUFFER_FULL = 2
    S_JUMP_CAP = 3
    S_NEG_RATE = 4
    S_NONFINITE = 5

cdef enum:
    OP_CONST = 0
    OP_VAR = 1
    OP_ADD = 2
    OP_SUB = 3
    OP_MUL = 4
    OP_DIV = 5
    OP_HACT = 6
    OP_HREP = 7
    OP_MIN = 8
    OP_MAX = 9
    MAX_STACK = 64
cdef double ZERO_FLOOR = 1e-300

BACKEND = "cython"


cdef int eval_rates(const int* ops, const int* args, const int* starts, const double* consts,
                    const long long* x, int N, double* out, int* bad) noexcept nogil:
    cdef double stack[MAX_STACK]
    cdef int i, pc, sp, op
    cdef double a, b, K, h, xh, Kh, v
    for i in range(N):
        sp = 0
        for pc in range(starts[i], starts[i + 1]):
            op = ops[pc]
            if op == OP_CONST:
                stack[sp] = consts[args[pc]]
                sp += 1
            elif op == OP_VAR:
                stack[sp] = <double>x[args[pc]]
                sp += 1
            elif op == OP_HACT or op == OP_HREP:
                a = stack[sp - 1]
                K = consts[args[pc]]
                h = consts[args[pc] + 1]
                xh = pow(a, h)
                Kh = pow(K, h)
                if op == OP_HACT:
                    stack[sp - 1] = xh / (Kh + xh)
                else:
                    stack[sp - 1] = Kh / (Kh + xh)
            else:
                b = stack[sp - 1]
                a = stack[sp - 2]
                sp -= 1
                if op == OP_ADD:
                    stack[sp - 1] = a + b
                elif op == OP_SUB:
                    stack[sp - 1] = a - b
                elif op == OP_MUL:
                    stack[sp - 1] = a * b
                elif op == OP_DIV:
                    if b == 0.0:
                        bad[0] = i
                        return S_NONFINITE
                    stack[sp - 1] = a / b
                elif op == OP_MIN:
                    stack[sp - 1] = b if b < a else a
                else:
                    stack[sp - 1] = b if b > a else a
        v = stack[0]
        if not isfinite(v):
            bad[0] = i
            return S_NONFINITE
        if fabs(v) < ZERO_FLOOR:
            v = 0.0
        if v < 0.0:
            bad[0] = i
            return S_NEG_RATE
        out[i] = v
    return S_DONE


cdef inline void accumulate(double a, double b, const double* edges, int nb, long long* cb,
                            const long long* x, const double* f, int N,
                            double* ax, double* ax2, double* af, double* at) noexcept nogil:
    cdef double lo = a if a > edges[0] else edges[0]
    cdef double hi, d, xi
    cdef int i, k
    while lo < b and cb[0] < nb:
        k = <int>cb[0]
        hi = b if b < edges[k + 1] else edges[k + 1]
        d = hi - lo
        if d > 0:
            at[k] += d
            for i in range(N):
                xi = <double>x[i]
                ax[k * N + i] += d * xi
                ax2[k * N + i] += d * xi * xi
                af[k * N + i] += d * f[i]
        if b >= edges[k + 1]:
            cb[0] += 1
        lo = hi


def ssa_run(const int[::1] ops, const int[::1] args, const int[::1] starts, const double[::1] consts,
            const double[::1] tau, long long[::1] x, double[::1] fctl, long long[::1] ictl,
            const double[::1] edges, double[:, ::1] acc_x, double[:, ::1] acc_x2,
            double[:, ::1] acc_f, double[::1] acc_t, const double[::1] u,
            double[::1] rec_t, long long[:, ::1] rec_x):
    """Direct-method SSA from ``(fctl[0], x)`` until ``fctl[1]``.

    ``ictl`` = [u_pos, rec_pos, jumps, jump_cap, record, bad_component, batch].
    Returns a status code; on NEED_RANDOM / BUFFER_FULL the caller refills
    or flushes and calls again.
    """
    cdef int N = x.shape[0]
    cdef int nb = edges.shape[0] - 1
    cdef Py_ssize_t nu = u.shape[0]
    cdef Py_ssize_t cap = rec_t.shape[0]
    cdef double t = fctl[0]
    cdef double t_end = fctl[1]
    cdef long long u_pos = ictl[0], rec_pos = ictl[1], jumps = ictl[2], jump_cap = ictl[3]
    cdef long long cb = ictl[6]
    cdef int record = <int>ictl[4]
    cdef double f[64]
    cdef double lam, dt, tn, r, cum
    cdef int i, status = S_DONE, bad = -1, chosen
    if N > 64:
        raise ValueError("at most 64 components")
    with nogil:
        while True:
            status = eval_rates(&ops[0], &args[0], &starts[0], &consts[0], &x[0], N, f, &bad)
            if status != S_DONE:
                break
            lam = 0.0
            for i in range(N):
                lam += f[i]
            for i in range(N):
                lam += x[i] / tau[i]
            if lam <= 0.0:
                accumulate(t, t_end, &edges[0], nb, &cb, &x[0], f, N,
                           &acc_x[0, 0], &acc_x2[0, 0], &acc_f[0, 0], &acc_t[0])
                t = t_end
                status = S_DONE
                break
            if record and rec_pos >= cap:
                status = S_BUFFER_FULL
                break
            if u_pos + 2 > nu:
                status = S_NEED_RANDOM
                break
            if jumps >= jump_cap:
                status = S_JUMP_CAP
                break
            dt = -log(1.0 - u[u_pos]) / lam
            tn = t + dt
            if tn >= t_end:
                accumulate(t, t_end, &edges[0], nb, &cb, &x[0], f, N,
                           &acc_x[0, 0], &acc_x2[0, 0], &acc_f[0, 0], &acc_t[0])
                u_pos += 1
                t = t_end
                status = S_DONE
                break
            accumulate(t, tn, &edges[0], nb, &cb, &x[0], f, N,
                       &acc_x[0, 0], &acc_x2[0, 0], &acc_f[0, 0], &acc_t[0])
            t = tn
            r = u[u_pos + 1] * lam
            u_pos += 2
            cum = 0.0
            chosen = -1
            for i in range(N):
                if f[i] > 0.0:
                    cum += f[i]
                    chosen = i
                    if r < cum:
                        break
            if not (r < cum):
                for i in range(N):
                    if x[i] > 0:
                        cum += x[i] / tau[i]
                        chosen = N + i
                        if r < cum:
                            break
            if chosen < N:
                x[chosen] += 1
            else:
                x[chosen - N] -= 1
            jumps += 1
            if record:
                rec_t[rec_pos] = t
                for i in range(N):
                    rec_x[rec_pos, i] = x[i]
                rec_pos += 1
    fctl[0] = t
    ictl[0] = u_pos
    ictl[1] = rec_pos
    ictl[2] = jumps
    ictl[5] = bad
    ictl[6] = cb
    return status


def couple_run(const int[::1] ops, const int[::1] args, const int[::1] starts, const double[::1] consts,
               const double[::1] tau, long long[::1] z, long long[::1] w, const long long[::1] sigma,
               double[::1] T, double[::1] P, double[::1] fctl, long long[::1] ictl,
               const double[::1] u, double[::1] viol_t, double[::1] rec_t,
               long long[:, ::1] rec_z, long long[:, ::1] rec_w):
    """Split coupling by the modified next-reaction method.

    Channel ``6*i + c`` with c = b0, bx, by, d0, dx, dy.  ``T``/``P`` are the
    internal and next-firing times of the unit Poisson drivers.
    ``fctl`` = [t, t_end, max channel-identity error].
    ``ictl`` = [u_pos, jumps, jump_cap, n_viol, rec_pos, record, unmatched, bad].
    """
    cdef int N = z.shape[0]
    cdef int M = 6 * N
    cdef Py_ssize_t nu = u.shape[0]
    cdef Py_ssize_t vcap = viol_t.shape[0]
    cdef Py_ssize_t cap = rec_t.shape[0]
    cdef double t = fctl[0], t_end = fctl[1], err = fctl[2]
    cdef long long u_pos = ictl[0], jumps = ictl[1], jump_cap = ictl[2], n_viol = ictl[3]
    cdef long long rec_pos = ictl[4], unmatched = ictl[6]
    cdef int record = <int>ictl[5]
    cdef double fz[64]
    cdef double fw[64]
    cdef double a[384]
    cdef double dz, dw, lo, e, dt, best, cand
    cdef int i, k, c, mu, status = S_DONE, bad = -1, ordered
    if N > 64:
        raise ValueError("at most 64 components")
    with nogil:
        while True:
            status = eval_rates(&ops[0], &args[0], &starts[0], &consts[0], &z[0], N, fz, &bad)
            if status != S_DONE:
                break
            status = eval_rates(&ops[0], &args[0], &starts[0], &consts[0], &w[0], N, fw, &bad)
            if status != S_DONE:
                break
            for i in range(N):
                lo = fz[i] if fz[i] < fw[i] else fw[i]
                a[6 * i] = lo
                a[6 * i + 1] = fz[i] - lo
                a[6 * i + 2] = fw[i] - lo
                dz = z[i] / tau[i]
                dw = w[i] / tau[i]
                lo = dz if dz < dw else dw
                a[6 * i + 3] = lo
                a[6 * i + 4] = dz - lo
                a[6 * i + 5] = dw - lo
                e = fabs(a[6 * i] + a[6 * i + 1] - fz[i])
                if e > err:
                    err = e
                e = fabs(a[6 * i] + a[6 * i + 2] - fw[i])
                if e > err:
                    err = e
                e = fabs(a[6 * i + 3] + a[6 * i + 4] - dz)
                if e > err:
                    err = e
                e = fabs(a[6 * i + 3] + a[6 * i + 5] - dw)
                if e > err:
                    err = e
            mu = -1
            best = 0.0
            for k in range(M):
                if a[k] > 0.0:
                    cand = (P[k] - T[k]) / a[k]
                    if mu < 0 or cand < best:
                        best = cand
                        mu = k
            if mu < 0 or t + best >= t_end:
                if mu >= 0:
                    dt = t_end - t
                    for k in range(M):
                        T[k] += a[k] * dt
                t = t_end
                status = S_DONE
                break
            if record and rec_pos >= cap:
                status = S_BUFFER_FULL
                break
            if u_pos + 1 > nu:
                status = S_NEED_RANDOM
                break
            if jumps >= jump_cap:
                status = S_JUMP_CAP
                break
            dt = best
            for k in range(M):
                T[k] += a[k] * dt
            t = t + dt
            i = mu // 6
            c = mu - 6 * i
            if c == 0:
                z[i] += 1
                w[i] += 1
            elif c == 1:
                z[i] += 1
            elif c == 2:
                w[i] += 1
            elif c == 3:
                z[i] -= 1
                w[i] -= 1
            elif c == 4:
                z[i] -= 1
            else:
                w[i] -= 1
            if c != 0 and c != 3:
                unmatched += 1
            P[mu] += -log(1.0 - u[u_pos])
            u_pos += 1
            jumps += 1
            ordered = 1
            for i in range(N):
                if sigma[i] * z[i] > sigma[i] * w[i]:
                    ordered = 0
            if not ordered:
                if n_viol < vcap:
                    viol_t[n_viol] = t
                n_viol += 1
            if record:
                rec_t[rec_pos] = t
                for i in range(N):
                    rec_z[rec_pos, i] = z[i]
                    rec_w[rec_pos, i] = w[i]
                rec_pos += 1
    fctl[0] = t
    fctl[2] = err
    ictl[0] = u_pos
    ictl[1] = jumps
    ictl[3] = n_viol
    ictl[4] = rec_pos
    ictl[6] = unmatched
    ictl[7] = bad
    return status


def eval_program(const int[::1] ops, const int[::1] args, const int[::1] starts, const double[::1] consts,
                 long long[::1] x, double[::1] out):
    """Evaluate all rates at one state; returns (status, bad_component)."""
    cdef int bad = -1
    cdef int status = eval_rates(&ops[0], &args[0], &starts[0], &consts[0], &x[0], x.shape[0], &out[0], &bad)
    return status, bad
