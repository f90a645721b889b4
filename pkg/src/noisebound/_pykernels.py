"""Pure-Python simulation loops, operation-for-operation twins of ``_kernels``."""

from __future__ import annotations

import math

BACKEND = "python"

S_DONE, S_NEED_RANDOM, S_BUFFER_FULL, S_JUMP_CAP, S_NEG_RATE, S_NONFINITE = range(6)
OP_CONST, OP_VAR, OP_ADD, OP_SUB, OP_MUL, OP_DIV, OP_HACT, OP_HREP, OP_MIN, OP_MAX = range(10)
ZERO_FLOOR = 1e-300


def _eval_rates(prog, x, out):
    """Returns (status, bad_component); fills ``out`` on success."""
    ops, args, starts, consts = prog
    for i in range(len(starts) - 1):
        stack = []
        for pc in range(starts[i], starts[i + 1]):
            op = ops[pc]
            if op == OP_CONST:
                stack.append(consts[args[pc]])
            elif op == OP_VAR:
                stack.append(float(x[args[pc]]))
            elif op == OP_HACT or op == OP_HREP:
                a = stack[-1]
                K = consts[args[pc]]
                h = consts[args[pc] + 1]
                xh = _cpow(a, h)
                Kh = _cpow(K, h)
                stack[-1] = xh / (Kh + xh) if op == OP_HACT else Kh / (Kh + xh)
            else:
                b = stack.pop()
                a = stack[-1]
                if op == OP_ADD:
                    stack[-1] = a + b
                elif op == OP_SUB:
                    stack[-1] = a - b
                elif op == OP_MUL:
                    stack[-1] = a * b
                elif op == OP_DIV:
                    if b == 0.0:
                        return S_NONFINITE, i
                    stack[-1] = a / b
                elif op == OP_MIN:
                    stack[-1] = b if b < a else a
                else:
                    stack[-1] = b if b > a else a
        v = stack[0]
        if not math.isfinite(v):
            return S_NONFINITE, i
        if abs(v) < ZERO_FLOOR:
            v = 0.0
        if v < 0.0:
            return S_NEG_RATE, i
        out[i] = v
    return S_DONE, -1


def _cpow(a, h):
    # C pow() semantics: overflow gives inf instead of raising
    try:
        return math.pow(a, h)
    except OverflowError:
        return math.inf
    except ValueError:
        return math.nan


def _accumulate(a, b, edges, cb, x, f, ax, ax2, af, at):
    nb = len(edges) - 1
    lo = a if a > edges[0] else edges[0]
    N = len(x)
    while lo < b and cb < nb:
        k = cb
        hi = b if b < edges[k + 1] else edges[k + 1]
        d = hi - lo
        if d > 0:
            at[k] += d
            for i in range(N):
                xi = float(x[i])
                ax[k][i] += d * xi
                ax2[k][i] += d * xi * xi
                af[k][i] += d * f[i]
        if b >= edges[k + 1]:
            cb += 1
        lo = hi
    return cb


def _lists(prog):
    ops, args, starts, consts = prog
    return ([int(v) for v in ops], [int(v) for v in args], [int(v) for v in starts], [float(v) for v in consts])


def ssa_run(ops, args, starts, consts, tau, x, fctl, ictl, edges, acc_x, acc_x2, acc_f, acc_t, u, rec_t, rec_x):
    prog = _lists((ops, args, starts, consts))
    N = len(x)
    xs = [int(v) for v in x]
    tau_ = [float(v) for v in tau]
    edges_ = [float(v) for v in edges]
    ax, ax2, af = acc_x.tolist(), acc_x2.tolist(), acc_f.tolist()
    at = acc_t.tolist()
    uu = u.tolist()
    nu, cap = len(uu), len(rec_t)
    t, t_end = float(fctl[0]), float(fctl[1])
    u_pos, rec_pos, jumps, jump_cap, record, _, cb = (int(v) for v in ictl)
    f = [0.0] * N
    bad = -1
    while True:
        status, bad = _eval_rates(prog, xs, f)
        if status != S_DONE:
            break
        lam = 0.0
        for i in range(N):
            lam += f[i]
        for i in range(N):
            lam += xs[i] / tau_[i]
        if lam <= 0.0:
            cb = _accumulate(t, t_end, edges_, cb, xs, f, ax, ax2, af, at)
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
        dt = -math.log(1.0 - uu[u_pos]) / lam
        tn = t + dt
        if tn >= t_end:
            cb = _accumulate(t, t_end, edges_, cb, xs, f, ax, ax2, af, at)
            u_pos += 1
            t = t_end
            status = S_DONE
            break
        cb = _accumulate(t, tn, edges_, cb, xs, f, ax, ax2, af, at)
        t = tn
        r = uu[u_pos + 1] * lam
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
                if xs[i] > 0:
                    cum += xs[i] / tau_[i]
                    chosen = N + i
                    if r < cum:
                        break
        if chosen < N:
            xs[chosen] += 1
        else:
            xs[chosen - N] -= 1
        jumps += 1
        if record:
            rec_t[rec_pos] = t
            rec_x[rec_pos, :] = xs
            rec_pos += 1
    x[:] = xs
    acc_x[:], acc_x2[:], acc_f[:], acc_t[:] = ax, ax2, af, at
    fctl[0] = t
    ictl[0], ictl[1], ictl[2], ictl[5], ictl[6] = u_pos, rec_pos, jumps, bad, cb
    return status


def couple_run(ops, args, starts, consts, tau, z, w, sigma, T, P, fctl, ictl, u, viol_t, rec_t, rec_z, rec_w):
    prog = _lists((ops, args, starts, consts))
    N = len(z)
    M = 6 * N
    zs, ws = [int(v) for v in z], [int(v) for v in w]
    sg = [int(v) for v in sigma]
    tau_ = [float(v) for v in tau]
    TT, PP = T.tolist(), P.tolist()
    uu = u.tolist()
    nu, vcap, cap = len(uu), len(viol_t), len(rec_t)
    t, t_end, err = (float(v) for v in fctl)
    u_pos, jumps, jump_cap, n_viol, rec_pos, record, unmatched, _ = (int(v) for v in ictl)
    fz, fw = [0.0] * N, [0.0] * N
    a = [0.0] * M
    bad = -1
    while True:
        status, bad = _eval_rates(prog, zs, fz)
        if status != S_DONE:
            break
        status, bad = _eval_rates(prog, ws, fw)
        if status != S_DONE:
            break
        for i in range(N):
            lo = fz[i] if fz[i] < fw[i] else fw[i]
            a[6 * i] = lo
            a[6 * i + 1] = fz[i] - lo
            a[6 * i + 2] = fw[i] - lo
            dz = zs[i] / tau_[i]
            dw = ws[i] / tau_[i]
            lo = dz if dz < dw else dw
            a[6 * i + 3] = lo
            a[6 * i + 4] = dz - lo
            a[6 * i + 5] = dw - lo
            err = max(
                err,
                abs(a[6 * i] + a[6 * i + 1] - fz[i]),
                abs(a[6 * i] + a[6 * i + 2] - fw[i]),
                abs(a[6 * i + 3] + a[6 * i + 4] - dz),
                abs(a[6 * i + 3] + a[6 * i + 5] - dw),
            )
        mu = -1
        best = 0.0
        for k in range(M):
            if a[k] > 0.0:
                cand = (PP[k] - TT[k]) / a[k]
                if mu < 0 or cand < best:
                    best = cand
                    mu = k
        if mu < 0 or t + best >= t_end:
            if mu >= 0:
                dt = t_end - t
                for k in range(M):
                    TT[k] += a[k] * dt
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
            TT[k] += a[k] * dt
        t = t + dt
        i, c = divmod(mu, 6)
        if c == 0:
            zs[i] += 1
            ws[i] += 1
        elif c == 1:
            zs[i] += 1
        elif c == 2:
            ws[i] += 1
        elif c == 3:
            zs[i] -= 1
            ws[i] -= 1
        elif c == 4:
            zs[i] -= 1
        else:
            ws[i] -= 1
        if c != 0 and c != 3:
            unmatched += 1
        PP[mu] += -math.log(1.0 - uu[u_pos])
        u_pos += 1
        jumps += 1
        if any(sg[i] * zs[i] > sg[i] * ws[i] for i in range(N)):
            if n_viol < vcap:
                viol_t[n_viol] = t
            n_viol += 1
        if record:
            rec_t[rec_pos] = t
            rec_z[rec_pos, :] = zs
            rec_w[rec_pos, :] = ws
            rec_pos += 1
    z[:], w[:] = zs, ws
    T[:], P[:] = TT, PP
    fctl[0], fctl[2] = t, err
    ictl[0], ictl[1], ictl[3], ictl[4], ictl[6], ictl[7] = u_pos, jumps, n_viol, rec_pos, unmatched, bad
    return status


def eval_program(ops, args, starts, consts, x, out):
    f = [0.0] * len(x)
    status, bad = _eval_rates(_lists((ops, args, starts, consts)), [int(v) for v in x], f)
    if status == S_DONE:
        out[:] = f
    return status, bad
