#!/usr/bin/env python3
"""Generate data/case1354synth.m, a synthetic 1354-bus transmission grid.

The real case1354pegase file cannot be redistributed with this repository,
so the test suite falls back to this stand-in: same bus/branch counts,
EHV-style impedance ranges, transformers with off-nominal taps and a few
phase shifters, bus shunts, non-contiguous bus ids, a handful of parallel
and out-of-service branches, and a smooth non-flat operating point stored
in the Vm/Va columns. Regenerate with: python3 scripts/make_synth_case.py
"""

import numpy as np

SEED = 20250809
N_BUS = 1354
N_BRANCH_IN_SERVICE = 1991
N_BRANCH_OOS = 10  # extra rows with status 0

rng = np.random.default_rng(SEED)


def build_topology():
    """Planar-ish grid: geometric points, MST backbone, short chords."""
    pts = rng.random((N_BUS, 2))
    # greedy MST (Prim) on Euclidean distance
    in_tree = np.zeros(N_BUS, dtype=bool)
    in_tree[0] = True
    dist = np.linalg.norm(pts - pts[0], axis=1)
    parent = np.zeros(N_BUS, dtype=int)
    edges = []
    for _ in range(N_BUS - 1):
        cand = np.where(~in_tree, dist, np.inf)
        j = int(np.argmin(cand))
        edges.append((parent[j], j))
        in_tree[j] = True
        d = np.linalg.norm(pts - pts[j], axis=1)
        closer = d < dist
        dist = np.where(closer, d, dist)
        parent = np.where(closer & ~in_tree, j, parent)

    have = set(tuple(sorted(e)) for e in edges)
    # candidate chords: k nearest neighbours not already connected
    k = 10
    cand = []
    for i in range(N_BUS):
        d = np.linalg.norm(pts - pts[i], axis=1)
        for j in np.argsort(d)[1 : k + 1]:
            a, b = sorted((i, int(j)))
            if (a, b) not in have:
                cand.append((d[j], a, b))
    cand.sort()
    need = N_BRANCH_IN_SERVICE - len(edges) - 5  # leave room for 5 parallels
    for _, a, b in cand:
        if need == 0:
            break
        if (a, b) in have:
            continue
        have.add((a, b))
        edges.append((a, b))
        need -= 1
    # 5 parallel circuits duplicating random short lines
    lens = [np.linalg.norm(pts[a] - pts[b]) for a, b in edges]
    order = np.argsort(lens)
    for idx in order[: 5]:
        edges.append(edges[int(idx)])
    assert len(edges) == N_BRANCH_IN_SERVICE
    return pts, edges


def smooth_field(edges, amplitude, rounds=40):
    """Neighbour-averaged random field -> spatially smooth profile."""
    adj = [[] for _ in range(N_BUS)]
    for a, b in edges:
        adj[a].append(b)
        adj[b].append(a)
    f = rng.normal(0.0, 1.0, N_BUS)
    for _ in range(rounds):
        g = f.copy()
        for i in range(N_BUS):
            if adj[i]:
                g[i] = 0.55 * f[i] + 0.45 * np.mean(f[adj[i]])
        f = g
    f -= f[0]
    m = np.max(np.abs(f))
    return f / m * amplitude if m > 0 else f


def main():
    pts, edges = build_topology()

    # external ids: non-contiguous, PGLib-style
    ext_id = np.sort(rng.choice(np.arange(1, 9 * N_BUS), size=N_BUS, replace=False))

    va = smooth_field(edges, amplitude=22.0)          # degrees
    vm = 1.02 + smooth_field(edges, amplitude=0.045)  # per unit
    vm = np.clip(vm, 0.955, 1.085)

    base_kv = np.where(rng.random(N_BUS) < 0.35, 380.0, 220.0)
    gs = np.zeros(N_BUS)
    bs = np.zeros(N_BUS)
    shunted = rng.random(N_BUS) < 0.06
    bs[shunted] = np.round(rng.uniform(-150.0, 300.0, shunted.sum()), 1)

    lines = []
    for a, b in edges:
        dist = np.linalg.norm(pts[a] - pts[b]) + 0.01
        x = float(np.clip(0.55 * dist * rng.lognormal(0.0, 0.35), 0.002, 0.35))
        r = x * rng.uniform(0.05, 0.25)
        ch = x * rng.uniform(0.2, 2.0)  # charging grows with line length
        tau, shift = 0.0, 0.0
        if rng.random() < 0.08:  # transformer
            tau = round(rng.uniform(0.94, 1.06), 4)
            ch = 0.0
            if rng.random() < 0.1:
                shift = round(rng.uniform(-3.0, 3.0), 2)
        lines.append((a, b, r, x, ch, tau, shift, 1))

    # out-of-service rows referencing existing buses
    for _ in range(N_BRANCH_OOS):
        a, b = rng.integers(0, N_BUS, 2)
        while a == b:
            b = rng.integers(0, N_BUS)
        lines.append((int(a), int(b), 0.01, 0.08, 0.02, 0.0, 0.0, 0))

    out = []
    out.append("function mpc = case1354synth")
    out.append("% CASE1354SYNTH  Synthetic 1354-bus transmission grid.")
    out.append("%   Generated by scripts/make_synth_case.py (seed " + str(SEED) + ").")
    out.append("%   Stand-in for tests when the PEGASE case file is unavailable.")
    out.append("")
    out.append("mpc.version = '2';")
    out.append("mpc.baseMVA = 100;")
    out.append("")
    out.append("%% bus data")
    out.append("%\tbus_i\ttype\tPd\tQd\tGs\tBs\tarea\tVm\tVa\tbaseKV\tzone\tVmax\tVmin")
    out.append("mpc.bus = [")
    for i in range(N_BUS):
        pd = round(float(rng.uniform(0, 120)), 2) if rng.random() < 0.7 else 0.0
        qd = round(pd * rng.uniform(0.1, 0.4), 2)
        btype = 3 if i == 0 else (2 if rng.random() < 0.18 else 1)
        out.append(
            "\t%d\t%d\t%.2f\t%.2f\t%.1f\t%.1f\t1\t%.6f\t%.6f\t%.0f\t1\t1.1\t0.9;"
            % (ext_id[i], btype, pd, qd, gs[i], bs[i], vm[i], va[i], base_kv[i])
        )
    out.append("];")
    out.append("")
    out.append("%% generator data (parsed and ignored by the estimator)")
    out.append("%\tbus\tPg\tQg\tQmax\tQmin\tVg\tmBase\tstatus\tPmax\tPmin")
    out.append("mpc.gen = [")
    gen_buses = rng.choice(N_BUS, size=60, replace=False)
    for g in gen_buses:
        out.append(
            "\t%d\t%.1f\t0\t300\t-300\t%.4f\t100\t1\t500\t0;"
            % (ext_id[g], rng.uniform(10, 400), vm[g])
        )
    out.append("];")
    out.append("")
    out.append("%% branch data")
    out.append("%\tfbus\ttbus\tr\tx\tb\trateA\trateB\trateC\tratio\tangle\tstatus\tangmin\tangmax")
    out.append("mpc.branch = [")
    for a, b, r, x, ch, tau, shift, status in lines:
        out.append(
            "\t%d\t%d\t%.6f\t%.6f\t%.6f\t0\t0\t0\t%g\t%g\t%d\t-360\t360;"
            % (ext_id[a], ext_id[b], r, x, ch, tau, shift, status)
        )
    out.append("];")
    out.append("")
    out.append("%% generator cost data (parsed and ignored)")
    out.append("mpc.gencost = [")
    for _ in gen_buses:
        out.append("\t2\t0\t0\t3\t0.01\t40\t0;")
    out.append("];")
    out.append("")

    with open("data/case1354synth.m", "w") as f:
        f.write("\n".join(out))
    print("wrote data/case1354synth.m: %d buses, %d branch rows" % (N_BUS, len(lines)))


if __name__ == "__main__":
    main()
