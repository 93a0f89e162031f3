#!/usr/bin/env python3
"""Generate data/new_england_39.json: a 10-machine reduced swing model of the
New England 39-bus test system.

The bus, branch, and generator tables below follow the standard published New
England test-system data (100 MVA base, 60 Hz).  The classical dynamic data
(inertia constants H in seconds and transient reactances x'd in per unit) are
the usual 10-machine values; machine 39 is the aggregated equivalent of the
external system, which is why its inertia is so large.

Pipeline:
  1. Solve the AC power flow with Newton's method.
  2. Convert every load to a constant shunt admittance at its solved voltage.
  3. Place each generator EMF behind its transient reactance.
  4. Eliminate the 39 network buses (Kron reduction), keeping the 10 internal
     machine nodes.
  5. Drop the transfer conductances of the reduced network and recompute the
     machine injections from the lossless sine flow law at the reduced angles,
     so the reduced operating point is an exact equilibrium of the shipped
     lossless model and the injections sum to zero exactly.

Run from the repository root:  python3 scripts/make_new_england_39.py
"""

import json
import math
import os
import sys

import numpy as np

BASE_MVA = 100.0
OMEGA_S = 2.0 * math.pi * 60.0

# --- bus table: (bus, type, Pd_MW, Qd_MVAr); type 1=PQ, 2=PV, 3=slack -------
BUSES = [
    (1, 1, 97.6, 44.2),
    (2, 1, 0.0, 0.0),
    (3, 1, 322.0, 2.4),
    (4, 1, 500.0, 184.0),
    (5, 1, 0.0, 0.0),
    (6, 1, 0.0, 0.0),
    (7, 1, 233.8, 84.0),
    (8, 1, 522.0, 176.6),
    (9, 1, 6.5, -66.6),
    (10, 1, 0.0, 0.0),
    (11, 1, 0.0, 0.0),
    (12, 1, 8.53, 88.0),
    (13, 1, 0.0, 0.0),
    (14, 1, 0.0, 0.0),
    (15, 1, 320.0, 153.0),
    (16, 1, 329.0, 32.3),
    (17, 1, 0.0, 0.0),
    (18, 1, 158.0, 30.0),
    (19, 1, 0.0, 0.0),
    (20, 1, 680.0, 103.0),
    (21, 1, 274.0, 115.0),
    (22, 1, 0.0, 0.0),
    (23, 1, 247.5, 84.6),
    (24, 1, 308.6, -92.2),
    (25, 1, 224.0, 47.2),
    (26, 1, 139.0, 17.0),
    (27, 1, 281.0, 75.5),
    (28, 1, 206.0, 27.6),
    (29, 1, 283.5, 26.9),
    (30, 2, 0.0, 0.0),
    (31, 3, 9.2, 4.6),
    (32, 2, 0.0, 0.0),
    (33, 2, 0.0, 0.0),
    (34, 2, 0.0, 0.0),
    (35, 2, 0.0, 0.0),
    (36, 2, 0.0, 0.0),
    (37, 2, 0.0, 0.0),
    (38, 2, 0.0, 0.0),
    (39, 2, 1104.0, 250.0),
]

# --- branch table: (from, to, r, x, total line charging b, tap ratio) --------
BRANCHES = [
    (1, 2, 0.0035, 0.0411, 0.6987, 0.0),
    (1, 39, 0.0010, 0.0250, 0.7500, 0.0),
    (2, 3, 0.0013, 0.0151, 0.2572, 0.0),
    (2, 25, 0.0070, 0.0086, 0.1460, 0.0),
    (2, 30, 0.0000, 0.0181, 0.0000, 1.025),
    (3, 4, 0.0013, 0.0213, 0.2214, 0.0),
    (3, 18, 0.0011, 0.0133, 0.2138, 0.0),
    (4, 5, 0.0008, 0.0128, 0.1342, 0.0),
    (4, 14, 0.0008, 0.0129, 0.1382, 0.0),
    (5, 6, 0.0002, 0.0026, 0.0434, 0.0),
    (5, 8, 0.0008, 0.0112, 0.1476, 0.0),
    (6, 7, 0.0006, 0.0092, 0.1130, 0.0),
    (6, 11, 0.0007, 0.0082, 0.1389, 0.0),
    (6, 31, 0.0000, 0.0250, 0.0000, 1.070),
    (7, 8, 0.0004, 0.0046, 0.0780, 0.0),
    (8, 9, 0.0023, 0.0363, 0.3804, 0.0),
    (9, 39, 0.0010, 0.0250, 1.2000, 0.0),
    (10, 11, 0.0004, 0.0043, 0.0729, 0.0),
    (10, 13, 0.0004, 0.0043, 0.0729, 0.0),
    (10, 32, 0.0000, 0.0200, 0.0000, 1.070),
    (12, 11, 0.0016, 0.0435, 0.0000, 1.006),
    (12, 13, 0.0016, 0.0435, 0.0000, 1.006),
    (13, 14, 0.0009, 0.0101, 0.1723, 0.0),
    (14, 15, 0.0018, 0.0217, 0.3660, 0.0),
    (15, 16, 0.0009, 0.0094, 0.1710, 0.0),
    (16, 17, 0.0007, 0.0089, 0.1342, 0.0),
    (16, 19, 0.0016, 0.0195, 0.3040, 0.0),
    (16, 21, 0.0008, 0.0135, 0.2548, 0.0),
    (16, 24, 0.0003, 0.0059, 0.0680, 0.0),
    (17, 18, 0.0007, 0.0082, 0.1319, 0.0),
    (17, 27, 0.0013, 0.0173, 0.3216, 0.0),
    (19, 20, 0.0007, 0.0138, 0.0000, 1.060),
    (19, 33, 0.0007, 0.0142, 0.0000, 1.070),
    (20, 34, 0.0009, 0.0180, 0.0000, 1.009),
    (21, 22, 0.0008, 0.0140, 0.2565, 0.0),
    (22, 23, 0.0006, 0.0096, 0.1846, 0.0),
    (22, 35, 0.0000, 0.0143, 0.0000, 1.025),
    (23, 24, 0.0022, 0.0350, 0.3610, 0.0),
    (23, 36, 0.0005, 0.0272, 0.0000, 1.000),
    (25, 26, 0.0032, 0.0323, 0.5310, 0.0),
    (25, 37, 0.0006, 0.0232, 0.0000, 1.025),
    (26, 27, 0.0014, 0.0147, 0.2396, 0.0),
    (26, 28, 0.0043, 0.0474, 0.7802, 0.0),
    (26, 29, 0.0057, 0.0625, 1.0290, 0.0),
    (28, 29, 0.0014, 0.0151, 0.2490, 0.0),
    (29, 38, 0.0008, 0.0156, 0.0000, 1.025),
]

# --- generator table: (bus, Pg_MW, Vg); slack Pg is recomputed by the PF -----
GENS = [
    (30, 250.0, 1.0499),
    (31, 677.87, 0.9820),
    (32, 650.0, 0.9841),
    (33, 632.0, 0.9972),
    (34, 508.0, 1.0123),
    (35, 650.0, 1.0494),
    (36, 560.0, 1.0636),
    (37, 540.0, 1.0275),
    (38, 830.0, 1.0265),
    (39, 1000.0, 1.0300),
]

# --- classical dynamic data per machine bus: H (s, 100 MVA base), x'd (pu) ---
DYNAMICS = {
    30: (42.0, 0.0310),
    31: (30.3, 0.0697),
    32: (35.8, 0.0531),
    33: (28.6, 0.0436),
    34: (26.0, 0.1320),
    35: (34.8, 0.0500),
    36: (26.4, 0.0490),
    37: (24.3, 0.0570),
    38: (34.5, 0.0570),
    39: (500.0, 0.0060),
}

DAMPING_RATIO = 0.5  # d_k = DAMPING_RATIO * m_k, matching the bundled 9-bus case


def build_ybus(nb, branches):
    y = np.zeros((nb, nb), dtype=complex)
    for f, t, r, x, b, tap in branches:
        i, j = f - 1, t - 1
        ys = 1.0 / complex(r, x)
        bc = 1j * b / 2.0
        tau = tap if tap > 0.0 else 1.0
        y[i, i] += (ys + bc) / (tau * tau)
        y[j, j] += ys + bc
        y[i, j] += -ys / tau
        y[j, i] += -ys / tau
    return y


def newton_power_flow(ybus, bus_types, pd, qd, pg, vg, slack, tol=1e-10):
    nb = len(bus_types)
    vm = np.ones(nb)
    va = np.zeros(nb)
    for k in range(nb):
        if bus_types[k] != 1:
            vm[k] = vg[k]
    p_sched = pg - pd
    q_sched = -qd.copy()  # PV/slack reactive output is solved, not scheduled
    pv = [k for k in range(nb) if bus_types[k] == 2]
    pq = [k for k in range(nb) if bus_types[k] == 1]
    ang_idx = [k for k in range(nb) if k != slack]

    for it in range(60):
        v = vm * np.exp(1j * va)
        s_inj = v * np.conj(ybus @ v)
        dp = p_sched - s_inj.real
        dq = q_sched - s_inj.imag
        mism = np.concatenate([dp[ang_idx], dq[pq]])
        if np.max(np.abs(mism)) < tol:
            return vm, va, s_inj, it
        # Jacobian of (P,Q) wrt (va, vm) via the standard complex-power form.
        diag_v = np.diag(v)
        diag_i = np.diag(ybus @ v)
        diag_e = np.diag(v / vm)
        ds_dva = 1j * diag_v @ (np.conj(diag_i) - np.conj(ybus) @ np.conj(diag_v))
        ds_dvm = diag_v @ np.conj(ybus) @ np.conj(diag_e) + np.conj(diag_i) @ diag_e
        j11 = ds_dva.real[np.ix_(ang_idx, ang_idx)]
        j12 = ds_dvm.real[np.ix_(ang_idx, pq)]
        j21 = ds_dva.imag[np.ix_(pq, ang_idx)]
        j22 = ds_dvm.imag[np.ix_(pq, pq)]
        jac = np.block([[j11, j12], [j21, j22]])
        step = np.linalg.solve(jac, mism)
        va[ang_idx] += step[: len(ang_idx)]
        vm[pq] += step[len(ang_idx):]
    raise RuntimeError("power flow did not converge")


def main():
    nb = len(BUSES)
    bus_types = np.array([b[1] for b in BUSES])
    pd = np.array([b[2] for b in BUSES]) / BASE_MVA
    qd = np.array([b[3] for b in BUSES]) / BASE_MVA
    pg = np.zeros(nb)
    vg = np.ones(nb)
    for bus, p, v in GENS:
        pg[bus - 1] = p / BASE_MVA
        vg[bus - 1] = v
    slack = next(k for k in range(nb) if bus_types[k] == 3)

    ybus = build_ybus(nb, BRANCHES)
    vm, va, s_inj, iters = newton_power_flow(ybus, bus_types, pd, qd, pg, vg, slack)
    v = vm * np.exp(1j * va)
    losses = float(np.sum(s_inj.real))
    print(f"power flow converged in {iters} iterations")
    print(f"  slack generation  {(s_inj.real[slack] + pd[slack]) * BASE_MVA:8.2f} MW")
    print(f"  network losses    {losses * BASE_MVA:8.2f} MW")
    print(f"  voltage range     [{vm.min():.4f}, {vm.max():.4f}] pu")

    # Loads as constant shunt admittances at the solved voltages.
    y_load = np.zeros(nb, dtype=complex)
    for k in range(nb):
        s_load = complex(pd[k], qd[k])
        if s_load != 0:
            y_load[k] = np.conj(s_load) / (vm[k] ** 2)

    # Generator internal EMFs behind the transient reactances.
    gen_buses = [g[0] - 1 for g in GENS]
    ng = len(gen_buses)
    emf = np.zeros(ng, dtype=complex)
    y_machine = np.zeros(ng, dtype=complex)
    for a, k in enumerate(gen_buses):
        s_gen = s_inj[k] + complex(pd[k], qd[k])
        i_gen = np.conj(s_gen / v[k])
        xdp = DYNAMICS[k + 1][1]
        emf[a] = v[k] + 1j * xdp * i_gen
        y_machine[a] = 1.0 / (1j * xdp)

    # Augmented admittance matrix over network buses + internal machine nodes,
    # then Kron reduction down to the internal nodes.
    yaug = np.zeros((nb + ng, nb + ng), dtype=complex)
    yaug[:nb, :nb] = ybus + np.diag(y_load)
    for a, k in enumerate(gen_buses):
        m = nb + a
        yaug[k, k] += y_machine[a]
        yaug[m, m] += y_machine[a]
        yaug[k, m] -= y_machine[a]
        yaug[m, k] -= y_machine[a]
    ynn = yaug[:nb, :nb]
    yni = yaug[:nb, nb:]
    yin = yaug[nb:, :nb]
    yii = yaug[nb:, nb:]
    y_red = yii - yin @ np.linalg.solve(ynn, yni)

    e_mag = np.abs(emf)
    delta = np.angle(emf)
    spread = max(
        abs(delta[a] - delta[b]) for a in range(ng) for b in range(a + 1, ng)
    )
    print(f"  internal angle spread  {math.degrees(spread):6.2f} deg (max pair)")
    if spread >= 0.5 * math.pi:
        raise RuntimeError("machine angle spread reaches pi/2; aborting")

    # Lossless couplings and exactly balanced injections at the reduced angles.
    b_red = np.zeros((ng, ng))
    for a in range(ng):
        for c in range(a + 1, ng):
            coupling = y_red[a, c].imag
            if coupling <= 0:
                raise RuntimeError(
                    f"non-inductive reduced coupling between machines {a+1},{c+1}"
                )
            b_red[a, c] = b_red[c, a] = coupling
    p_balanced = np.zeros(ng)
    for a in range(ng):
        p_balanced[a] = sum(
            b_red[a, c] * e_mag[a] * e_mag[c] * math.sin(delta[a] - delta[c])
            for c in range(ng)
        )
    p_gen = np.array([s_inj[k].real + pd[k] for k in gen_buses])
    shift = float(np.max(np.abs(p_balanced - p_gen)))
    print(f"  lossless injection shift  {shift:.4f} pu (max vs dispatched)")
    print(f"  injection sum  {np.sum(p_balanced):.3e} pu")

    generators = []
    for a, k in enumerate(gen_buses):
        h, _ = DYNAMICS[k + 1]
        m = 2.0 * h / OMEGA_S
        generators.append(
            {
                "id": a + 1,
                "m": m,
                "d": DAMPING_RATIO * m,
                "v": float(e_mag[a]),
                "p": float(p_balanced[a]),
            }
        )
    edges = [
        {"k": a + 1, "j": c + 1, "b": float(b_red[a, c])}
        for a in range(ng)
        for c in range(a + 1, ng)
    ]
    doc = {"generators": generators, "infinite_bus": None, "edges": edges}

    out = os.path.join(os.path.dirname(__file__), "..", "data", "new_england_39.json")
    out = os.path.normpath(out)
    os.makedirs(os.path.dirname(out), exist_ok=True)
    with open(out, "w") as f:
        json.dump(doc, f, indent=2)
        f.write("\n")
    print(f"wrote {out}: {ng} machines, {len(edges)} couplings")


if __name__ == "__main__":
    sys.exit(main())
