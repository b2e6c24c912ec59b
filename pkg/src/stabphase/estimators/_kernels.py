"""Compiled inner loop for the sequential grid-Bayes estimators."""

import numpy as np
from numba import njit

PI = np.pi
TWO_PI = 2.0 * np.pi

OK = 0
DEGENERATE = 1


@njit(cache=True)
def wrap1(x):
    y = (x + PI) % TWO_PI - PI
    if y >= PI:
        y -= TWO_PI
    return y


@njit(cache=True, fastmath=True)
def _update(w, cos_g, sin_g, amp, c, s):
    """w *= (1 + amp cos(phi - t)) / 2, renormalized; returns (ok, C, S)."""
    total = 0.0
    for b in range(w.shape[0]):
        v = w[b] * 0.5 * (1.0 + amp * (cos_g[b] * c + sin_g[b] * s))
        w[b] = v
        total += v
    if not total >= 1e-300:
        return False, 0.0, 0.0
    inv = 1.0 / total
    cc = 0.0
    ss = 0.0
    for b in range(w.shape[0]):
        v = w[b] * inv
        w[b] = v
        cc += v * cos_g[b]
        ss += v * sin_g[b]
    return True, cc, ss


@njit(cache=True)
def _circ_mean(cc, ss):
    if np.hypot(cc, ss) < 1e-12:
        return 0.0, True
    return wrap1(np.arctan2(ss, cc)), False


@njit(cache=True)
def run_sequential(
    phi_true, points, cos_g, sin_g,
    lik_a, lik_b, combo_target, ttilde_rows, solver, rotated,
    comp_phase, comp_qubits, sign_table, combo_masks,
    sampling, uniforms, warmup, adaptive, first_zero,
    checkpoints, out_mean, out_var, out_diffuse,
    record, rec_tt, rec_phibar, rec_theta, rec_out,
):
    """Run one trial of adaptive/random grid Bayes with marginal likelihoods.

    sampling: 0 analytic single combination, 1 joint statevector readout,
    2 independent per-combination draws.
    Uniform columns per step: [readout, per-combo draws (G), selection (P)].
    Returns (status, steps_done).
    """
    P = phi_true.shape[0]
    G = combo_target.shape[0]
    Q = ttilde_rows.shape[1]
    B = points.shape[0]
    K = lik_a.shape[1]
    C = comp_phase.shape[0]
    D = sign_table.shape[0]
    n = uniforms.shape[0]

    w = np.full((P, B), 1.0 / B)
    phibar = np.zeros(P)
    diffuse = np.ones(P, dtype=np.bool_)
    targets = np.zeros(P)
    theta = np.zeros(Q)
    tt = np.zeros(G)
    outcome = np.zeros(G, dtype=np.int64)
    psi = np.zeros(C)
    cpsi = np.zeros(C)
    spsi = np.zeros(C)
    ck = 0

    for t in range(n):
        u = uniforms[t]
        for i in range(P):
            if first_zero and t == 0:
                targets[i] = 0.0
            elif t < warmup or not adaptive:
                targets[i] = -PI + TWO_PI * u[1 + G + i]
            else:
                beta = 0.5 * PI if u[1 + G + i] < 0.5 else -0.5 * PI
                targets[i] = wrap1(phibar[i] + beta)
        for q in range(Q):
            theta[q] = 0.0
        for r in range(rotated.shape[0]):
            acc = 0.0
            for i in range(P):
                acc += solver[r, i] * targets[i]
            theta[rotated[r]] = acc
        for g in range(G):
            acc = 0.0
            for q in range(Q):
                acc += ttilde_rows[g, q] * theta[q]
            tt[g] = wrap1(acc)

        if sampling == 1:
            for c in range(C):
                acc = 0.0
                if comp_phase[c] > 0:
                    acc = phi_true[comp_phase[c] - 1]
                for q in range(Q):
                    acc += 2.0 * comp_qubits[c, q] * theta[q]
                psi[c] = acc
                cpsi[c] = np.cos(acc)
                spsi[c] = np.sin(acc)
            cum = 0.0
            pick = D - 1
            for s in range(D):
                re = 0.0
                im = 0.0
                for c in range(C):
                    re += sign_table[s, c] * cpsi[c]
                    im += sign_table[s, c] * spsi[c]
                cum += (re * re + im * im) / (C * D)
                if u[0] < cum:
                    pick = s
                    break
            for g in range(G):
                bits = pick & combo_masks[g]
                par = 0
                while bits:
                    par ^= bits & 1
                    bits >>= 1
                outcome[g] = -1 if par else 1
        else:
            for g in range(G):
                acc = 0.0
                for k in range(K):
                    arg = 0.0
                    for i in range(P):
                        arg += lik_a[g, k, i] * phi_true[i]
                    for q in range(Q):
                        arg += lik_b[g, k, q] * theta[q]
                    acc += np.cos(arg)
                p_plus = 0.5 * (1.0 + acc / K)
                draw = u[0] if sampling == 0 else u[1 + g]
                outcome[g] = 1 if draw < p_plus else -1

        if record:
            for i in range(P):
                rec_phibar[t, i] = phibar[i]
            for q in range(Q):
                rec_theta[t, q] = theta[q]
            for g in range(G):
                rec_tt[t, g] = tt[g]
                rec_out[t, g] = outcome[g]

        for g in range(G):
            i = combo_target[g]
            ok, cc, ss = _update(w[i], cos_g, sin_g, outcome[g] / K,
                                 np.cos(tt[g]), np.sin(tt[g]))
            if not ok:
                return DEGENERATE, t
            phibar[i], diffuse[i] = _circ_mean(cc, ss)

        while ck < checkpoints.shape[0] and checkpoints[ck] == t + 1:
            for i in range(P):
                var = 0.0
                for b in range(B):
                    d = wrap1(points[b] - phibar[i])
                    var += w[i, b] * d * d
                out_mean[ck, i] = phibar[i]
                out_var[ck, i] = var
                out_diffuse[ck, i] = diffuse[i]
            ck += 1

    return OK, n
