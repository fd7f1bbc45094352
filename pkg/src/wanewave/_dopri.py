"""Compiled Dormand-Prince 5(4) integrator for the delay system in (S, I, Y) form.

Y(t) is the integral of I over [t - tau, t], so Y' = I(t) - I(t - tau) and the
distributed delay becomes a discrete one. Steps never exceed tau, hence every
lagged value lies in an already accepted step and is read from the stored
continuous extension (method of steps).

The infected fraction is carried as v = log(I), for which v' = beta S - gamma - d.
This keeps I positive through deep inter-epidemic troughs and makes its error
control relative.
"""

import numpy as np
from numba import njit

C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
A = np.array(
    [
        [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [1 / 5, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3 / 40, 9 / 40, 0.0, 0.0, 0.0, 0.0],
        [44 / 45, -56 / 15, 32 / 9, 0.0, 0.0, 0.0],
        [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729, 0.0, 0.0],
        [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656, 0.0],
        [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
    ]
)
B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
E = np.array([-71 / 57600, 0.0, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40])
# continuous extension: y(t + th h) = y + h * K^T P [th, th^2, th^3, th^4]
P = np.array(
    [
        [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
        [0.0, 0.0, 0.0, 0.0],
        [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
        [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
        [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
        [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
        [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
    ]
)

# status codes
OK = 0
STEP_UNDERFLOW = 1
DOMAIN_ESCAPE = 2
MAX_STEPS = 3


@njit(cache=True)
def dense_eval(T, H, Y, K, k, t, out):
    """Continuous extension of step k at time t, written into ``out`` (length 3)."""
    th = (t - T[k]) / H[k]
    if th < 0.0:
        th = 0.0
    elif th > 1.0:
        th = 1.0
    q0 = th
    q1 = th * th
    q2 = q1 * th
    q3 = q2 * th
    for c in range(3):
        acc = 0.0
        for j in range(7):
            acc += K[k, j, c] * (P[j, 0] * q0 + P[j, 1] * q1 + P[j, 2] * q2 + P[j, 3] * q3)
        out[c] = Y[k, c] + H[k] * acc


@njit(cache=True)
def _lagged(t, tau, hist_t, hist_s, hist_i, T, H, Y, K, nsteps, cursor, buf):
    """(S, I) at time t <= current time; ``cursor`` is a one-element search hint."""
    if t <= 0.0:
        return np.interp(t, hist_t, hist_s), np.interp(t, hist_t, hist_i)
    k = cursor[0]
    if k >= nsteps:
        k = nsteps - 1
    while k > 0 and t < T[k]:
        k -= 1
    while k < nsteps - 1 and t > T[k] + H[k]:
        k += 1
    cursor[0] = k
    dense_eval(T, H, Y, K, k, t, buf)
    return buf[0], np.exp(buf[1])


@njit(cache=True)
def _rhs(t, y, beta, gamma, d, nu, tau, hist_t, hist_s, hist_i, T, H, Y, K, nsteps, cursor, buf, out):
    s = y[0]
    i = np.exp(y[1])
    if tau > 0.0:
        s_lag, i_lag = _lagged(t - tau, tau, hist_t, hist_s, hist_i, T, H, Y, K, nsteps, cursor, buf)
    else:
        s_lag, i_lag = s, i
    inflow = i_lag * (gamma + nu * beta * (1.0 - s_lag - i_lag)) * np.exp(-d * tau - nu * beta * y[2])
    out[0] = d * (1.0 - s) - beta * i * s + inflow
    out[1] = beta * s - (gamma + d)
    out[2] = i - i_lag if tau > 0.0 else 0.0


@njit(cache=True)
def integrate_core(beta, gamma, d, nu, tau, hist_t, hist_s, hist_i, y0, t_end, rtol, atol, max_steps, n_breaks, escape_tol):
    """Adaptive DOPRI5 from t=0 to t_end.

    ``y0`` is (S, log I, Y). Returns (T, H, Y, K, nsteps, status): step
    starts, step sizes, states at step starts (nsteps + 1 rows, last row is the
    final state) and stage derivatives per step, all in (S, log I, Y).
    """
    cap = 1024
    T = np.empty(cap)
    H = np.empty(cap)
    Y = np.empty((cap + 1, 3))
    K = np.empty((cap, 7, 3))
    Y[0, :] = y0
    nsteps = 0
    t = 0.0
    h_max = tau if tau > 0.0 else t_end
    y = y0.copy()
    k_stage = np.empty((7, 3))
    ytmp = np.empty(3)
    ynew = np.empty(3)
    f = np.empty(3)
    buf = np.empty(3)
    cursor = np.zeros(1, dtype=np.int64)
    _rhs(t, y, beta, gamma, d, nu, tau, hist_t, hist_s, hist_i, T, H, Y, K, nsteps, cursor, buf, f)
    # initial step from the usual norm heuristic
    sc = atol + rtol * np.abs(y)
    d0 = np.sqrt(np.mean((y / sc) ** 2))
    d1 = np.sqrt(np.mean((f / sc) ** 2))
    h = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h = min(h, h_max, t_end)
    next_break = 1
    status = OK
    while t < t_end:
        if nsteps >= max_steps:
            status = MAX_STEPS
            break
        if h < 1e-14 * max(1.0, abs(t)):
            status = STEP_UNDERFLOW
            break
        h_try = min(h, h_max, t_end - t)
        # land exactly on the first few multiples of tau, where the derivative jumps
        if tau > 0.0 and next_break <= n_breaks:
            tb = next_break * tau
            if t + h_try >= tb - 1e-12 * tb:
                h_try = tb - t
        if nsteps + 1 >= cap:
            cap2 = cap * 2
            T2 = np.empty(cap2)
            H2 = np.empty(cap2)
            Y2 = np.empty((cap2 + 1, 3))
            K2 = np.empty((cap2, 7, 3))
            T2[:cap] = T
            H2[:cap] = H
            Y2[: cap + 1] = Y
            K2[:cap] = K
            T, H, Y, K, cap = T2, H2, Y2, K2, cap2
        k_stage[0, :] = f
        for j in range(1, 7):
            for c in range(3):
                acc = 0.0
                for m in range(j):
                    acc += A[j, m] * k_stage[m, c]
                ytmp[c] = y[c] + h_try * acc
            _rhs(t + C[j] * h_try, ytmp, beta, gamma, d, nu, tau, hist_t, hist_s, hist_i, T, H, Y, K, nsteps, cursor, buf, f)
            k_stage[j, :] = f
        err = 0.0
        for c in range(3):
            acc = 0.0
            for j in range(7):
                acc += B[j] * k_stage[j, c]
            ynew[c] = y[c] + h_try * acc
            e = 0.0
            for j in range(7):
                e += E[j] * k_stage[j, c]
            scale = atol + rtol * max(abs(y[c]), abs(ynew[c]))
            err += (h_try * e / scale) ** 2
        err = np.sqrt(err / 3.0)
        if err <= 1.0:
            T[nsteps] = t
            H[nsteps] = h_try
            K[nsteps] = k_stage
            nsteps += 1
            t = t + h_try
            if tau > 0.0 and next_break <= n_breaks and abs(t - next_break * tau) <= 1e-12 * max(1.0, t):
                t = next_break * tau
                next_break += 1
            y[:] = ynew
            Y[nsteps, :] = y
            if y[0] < -escape_tol or y[0] + np.exp(y[1]) > 1.0 + escape_tol:
                status = DOMAIN_ESCAPE
                break
            # FSAL: last stage is f at the new point
            f[:] = k_stage[6]
            factor = 10.0 if err == 0.0 else min(10.0, 0.9 * err ** -0.2)
            h = h_try * factor
        else:
            h = h_try * max(0.2, 0.9 * err ** -0.2)
            f[:] = k_stage[0]
    return T[:nsteps], H[:nsteps], Y[: nsteps + 1], K[:nsteps], nsteps, status


@njit(cache=True)
def dense_many(T, H, Y, K, ts):
    """Evaluate the continuous extension at sorted times ``ts`` inside [T[0], T[-1] + H[-1]]."""
    out = np.empty((ts.shape[0], 3))
    buf = np.empty(3)
    n = T.shape[0]
    k = 0
    for q in range(ts.shape[0]):
        t = ts[q]
        while k < n - 1 and t > T[k] + H[k]:
            k += 1
        while k > 0 and t < T[k]:
            k -= 1
        dense_eval(T, H, Y, K, k, t, buf)
        out[q, :] = buf
    return out
