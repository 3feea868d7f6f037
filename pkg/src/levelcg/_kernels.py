"""Compiled inner loops for the graph Fokker-Planck solver and graph Monte Carlo.

Kept free of package imports so numba can cache the compiled functions.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _interp_uniform(x, lo, step, table):
    """Linear interpolation on a uniform grid, clamped at both ends."""
    n = table.shape[0]
    u = (x - lo) / step
    if u <= 0.0:
        return table[0]
    if u >= n - 1:
        return table[n - 1]
    i = int(u)
    w = u - i
    return table[i] * (1.0 - w) + table[i + 1] * w


@njit(cache=True)
def fp_run(muL, muR, muA, aL, aR, aA, dL, dR, dA,
           betaL, betaR, betaA, a_vertexA, has_vertex,
           dt, nsteps, snap_at, outL, outR, outA):
    """Explicit conservative finite-volume steps on the three-edge graph.

    Well edges carry the vertex at their top face, the upper edge at its bottom
    face. The vertex state v enforces (a mu / 2) = beta_i v on every incident
    face and is solved each step from the discrete Kirchhoff balance, so total
    mass is conserved exactly. With ``has_vertex`` false only muA is evolved
    (single-edge test case, zero-flux at both ends).
    """
    nL = muL.shape[0]
    nR = muR.shape[0]
    nA = muA.shape[0]
    FL = np.zeros(nL + 1)
    FR = np.zeros(nR + 1)
    FA = np.zeros(nA + 1)
    si = 0
    nsnap = snap_at.shape[0]
    if si < nsnap and snap_at[si] == 0:
        outL[si] = muL
        outR[si] = muR
        outA[si] = muA
        si += 1
    for k in range(nsteps):
        # interior faces: upwind advection (b = 1) + centered diffusion of a*mu/2
        for i in range(1, nL):
            FL[i] = muL[i - 1] - (aL[i] * muL[i] - aL[i - 1] * muL[i - 1]) * 0.5 / dL
        for i in range(1, nR):
            FR[i] = muR[i - 1] - (aR[i] * muR[i] - aR[i - 1] * muR[i - 1]) * 0.5 / dR
        for i in range(1, nA):
            FA[i] = muA[i - 1] - (aA[i] * muA[i] - aA[i - 1] * muA[i - 1]) * 0.5 / dA
        FL[0] = 0.0
        FR[0] = 0.0
        FA[nA] = 0.0
        if has_vertex:
            # shared vertex value from the Kirchhoff balance J_L + J_R = J_A
            rhs = (muL[nL - 1] + aL[nL - 1] * muL[nL - 1] / dL
                   + muR[nR - 1] + aR[nR - 1] * muR[nR - 1] / dR)
            lhs = 2.0 * betaL / dL + 2.0 * betaR / dR
            lhsA = 2.0 * betaA / a_vertexA + 2.0 * betaA / dA
            rhsA = aA[0] * muA[0] / dA
            v = (rhs + rhsA) / (lhs + lhsA)
            FL[nL] = muL[nL - 1] - (betaL * v - 0.5 * aL[nL - 1] * muL[nL - 1]) / (0.5 * dL)
            FR[nR] = muR[nR - 1] - (betaR * v - 0.5 * aR[nR - 1] * muR[nR - 1]) / (0.5 * dR)
            FA[0] = (2.0 * betaA / a_vertexA) * v - (0.5 * aA[0] * muA[0] - betaA * v) / (0.5 * dA)
        else:
            FL[nL] = 0.0
            FR[nR] = 0.0
            FA[0] = 0.0
        for i in range(nL):
            muL[i] -= dt * (FL[i + 1] - FL[i]) / dL
        for i in range(nR):
            muR[i] -= dt * (FR[i + 1] - FR[i]) / dR
        for i in range(nA):
            muA[i] -= dt * (FA[i + 1] - FA[i]) / dA
        if si < nsnap and snap_at[si] == k + 1:
            outL[si] = muL
            outR[si] = muR
            outA[si] = muA
            si += 1


@njit(cache=True, nogil=True)
def gmc_block(h, edge, conf_edge, nsteps, dt, hstar, dv, pL, pLR,
              loL, stL, aTabL, loR, stR, aTabR, loA, stA, aTabA,
              leafL, leafR, h_escape, seed, band, counts,
              has_vertex, snap_at, out_h, out_edge, extra_steps, well_to_well):
    """Euler-Maruyama for one block of atoms on the graph, with shell gluing.

    ``edge`` codes: 0 left well, 1 right well, 2 above. On entering the vertex
    shell [h* - dv, h* + dv] an atom is re-emitted on edge i with probability
    p_i at the shell boundary. The per-edge tables hold sqrt(a(h)). Leaves
    reflect. ``conf_edge``/``counts`` track
    hysteresis branch entries when band > 0. Atoms advance one at a time over
    the whole horizon (atom-major, block RNG stream). Returns -1 or the index
    of an escaped atom.
    """
    np.random.seed(seed)
    n = h.shape[0]
    nsnap = snap_at.shape[0]
    sq = np.sqrt(dt)
    for i in range(n):
        e = edge[i]
        x = h[i]
        ce = conf_edge[i]
        si = 0
        if si < nsnap and snap_at[si] == 0:
            out_h[si, i] = x
            out_edge[si, i] = e
            si += 1
        for k in range(nsteps):
            if e == 0:
                sa = _interp_uniform(x, loL, stL, aTabL)
            elif e == 1:
                sa = _interp_uniform(x, loR, stR, aTabR)
            else:
                sa = _interp_uniform(x, loA, stA, aTabA)
            x = x + dt + sa * sq * np.random.normal()
            if e == 0 and x < leafL:
                x = 2.0 * leafL - x
            elif e == 1 and x < leafR:
                x = 2.0 * leafR - x
            if has_vertex:
                in_shell = (x > hstar - dv) if e < 2 else (x < hstar + dv)
                if in_shell:
                    u = np.random.random()
                    if u < pL:
                        e = 0
                        x = hstar - dv
                    elif u < pLR:
                        e = 1
                        x = hstar - dv
                    else:
                        e = 2
                        x = hstar + dv
            if x > h_escape:
                return i
            if band > 0.0:
                # default protocol alternates: a well entry is recorded only
                # from a confirmed-above state; well_to_well also records
                # direct well-to-well confirmations
                if e == 2:
                    if ce != 2 and x > hstar + band:
                        ce = 2
                        counts[2] += 1
                else:
                    if (ce == 2 or (well_to_well and ce != e)) and x < hstar - band:
                        ce = e
                        counts[e] += 1
            if si < nsnap and snap_at[si] == k + 1:
                out_h[si, i] = x
                out_edge[si, i] = e
                si += 1
        h[i] = x
        edge[i] = e
        # completion phase: close any episode still open in a well so the
        # last excursion is not truncated (drift +1 closes it above a.s.)
        if band > 0.0 and ce != 2:
            for _ in range(extra_steps):
                if e == 0:
                    sa = _interp_uniform(x, loL, stL, aTabL)
                elif e == 1:
                    sa = _interp_uniform(x, loR, stR, aTabR)
                else:
                    sa = _interp_uniform(x, loA, stA, aTabA)
                x = x + dt + sa * sq * np.random.normal()
                if e == 0 and x < leafL:
                    x = 2.0 * leafL - x
                elif e == 1 and x < leafR:
                    x = 2.0 * leafR - x
                if has_vertex:
                    in_shell = (x > hstar - dv) if e < 2 else (x < hstar + dv)
                    if in_shell:
                        u = np.random.random()
                        if u < pL:
                            e = 0
                            x = hstar - dv
                        elif u < pLR:
                            e = 1
                            x = hstar - dv
                        else:
                            e = 2
                            x = hstar + dv
                # same counting rule as the main loop, so pending episodes
                # close naturally instead of being truncated
                if e == 2:
                    if x > hstar + band:
                        ce = 2
                        counts[2] += 1
                        break
                elif well_to_well and ce != e and x < hstar - band:
                    ce = e
                    counts[e] += 1
            if ce != 2:
                # unresolved within the cap: drift +1 closes it above a.s.
                ce = 2
                counts[2] += 1
        conf_edge[i] = ce
    return -1
