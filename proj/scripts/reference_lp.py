#!/usr/bin/env python3
"""Solve the unregularized dispatch LP of case files with HiGHS.

Writes {"<case file name>": {"objective": ..., "g": N x T rows}} so the C++
tests can compare the interior point solver against an independent solver.

    python3 scripts/reference_lp.py data/case2b.json data/small_*.json > data/reference_lp.json
"""
import json
import sys
from pathlib import Path

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import lil_matrix


def solve(case):
    n, T = case["n_nodes"], case["horizon"]
    lines, bats = case["lines"], case["batteries"]
    m, k = len(lines), len(bats)
    # variables g (n,T), theta (n,T), f (m,T), p (k,T), s (k,T+1); column-major per period
    g = lambda i, t: i + n * t
    th = lambda i, t: n * T + i + n * t
    f = lambda l, t: 2 * n * T + l + m * t
    p = lambda b, t: (2 * n + m) * T + b + k * t
    s = lambda b, t: (2 * n + m + k) * T + b + k * t
    nx = (2 * n + m + 2 * k) * T + k

    rows, rhs = [], []
    A = lil_matrix(((n + m + 1 + k) * T + 2 * k, nx))
    r = 0
    for t in range(T):
        for i in range(n):
            A[r, g(i, t)] = 1.0
            for l, ln in enumerate(lines):
                if ln["from"] - 1 == i:
                    A[r, f(l, t)] -= 1.0
                if ln["to"] - 1 == i:
                    A[r, f(l, t)] += 1.0
            for b, bt in enumerate(bats):
                if bt["node"] - 1 == i:
                    A[r, p(b, t)] += 1.0
            rhs.append(case["demand"][i][t])
            r += 1
        for l, ln in enumerate(lines):
            A[r, f(l, t)] = 1.0
            A[r, th(ln["from"] - 1, t)] -= ln["susceptance"]
            A[r, th(ln["to"] - 1, t)] += ln["susceptance"]
            rhs.append(0.0)
            r += 1
        A[r, th(0, t)] = 1.0
        rhs.append(0.0)
        r += 1
        for b in range(k):
            A[r, s(b, t + 1)] = 1.0
            A[r, s(b, t)] = -1.0
            A[r, p(b, t)] = 1.0
            rhs.append(0.0)
            r += 1
    for b, bt in enumerate(bats):
        A[r, s(b, 0)] = 1.0
        rhs.append(bt["s_init"])
        r += 1
    for b, bt in enumerate(bats):
        A[r, s(b, T)] = 1.0
        rhs.append(bt["s_final"])
        r += 1

    c = np.zeros(nx)
    bounds = [(None, None)] * nx
    for t in range(T):
        for i in range(n):
            c[g(i, t)] = case["cost"][i][t]
            bounds[g(i, t)] = (0.0, case["g_max"][i][t])
        for l, ln in enumerate(lines):
            bounds[f(l, t)] = (-ln["f_max"], ln["f_max"])
        for b, bt in enumerate(bats):
            bounds[p(b, t)] = (-bt["p_max"], bt["p_max"])
    for b, bt in enumerate(bats):
        for t in range(T + 1):
            bounds[s(b, t)] = (0.0, bt["s_max"])

    res = linprog(c, A_eq=A.tocsr(), b_eq=np.array(rhs), bounds=bounds, method="highs")
    if res.status != 0:
        raise SystemExit(f"reference LP failed: {res.message}")
    gm = [[res.x[g(i, t)] for t in range(T)] for i in range(n)]
    return {"objective": res.fun, "g": gm}


def main(paths):
    out = {Path(p).name: solve(json.loads(Path(p).read_text())) for p in paths}
    json.dump(out, sys.stdout, indent=2)
    sys.stdout.write("\n")


if __name__ == "__main__":
    main(sys.argv[1:])
