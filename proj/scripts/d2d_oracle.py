#!/usr/bin/env python3
"""Reference optima for the user-caching (D2D) slot program.

Formulates the full program with every (slot, owner, requester) variable,
computes the previous-request map directly from the request table and solves
with Clarabel. Writes tests/data/d2d_oracle_cases.json.
"""
import json
import pathlib
import sys

import cvxpy as cp
import numpy as np


def prev_map(req, instantaneous):
    N, U = req.shape
    prev = {}
    last = {}
    for n in range(N):
        holder = {}
        for u in range(U):
            j = int(req[n, u])
            if j not in holder:
                holder[j] = u
                prev[n, u] = last.get(j)
            elif instantaneous:
                prev[n, u] = (n, holder[j])
            else:
                prev[n, u] = last.get(j)
        for j, u in holder.items():
            last[j] = (n, u)
    return prev


def solve(case):
    req = np.array(case["requests"], dtype=int)
    lengths = [0.0] + list(case["lengths"])
    Ts = case["slot_seconds"]
    C = case["capacities"]
    xi = case["xi"]
    N, U = req.shape
    d = np.array([[lengths[req[n, u]] / Ts for u in range(U)] for n in range(N)])
    prev = prev_map(req, case["instantaneous"])
    holder = {(n, u): int(req[n, u]) not in [int(req[n, k]) for k in range(u)] for n in range(N) for u in range(U)}

    r = cp.Variable((N, U), nonneg=True)
    q = [[cp.Variable(U, nonneg=True) for _ in range(U)] for _ in range(N)]  # q[n][u][x]: owner x, request (n,u)
    b = [[cp.Variable(U, nonneg=True) for _ in range(U)] for _ in range(N)]
    cons = []
    for n in range(N):
        for u in range(U):
            cons.append(cp.sum(q[n][u]) <= Ts * d[n, u])
            p = prev[n, u]
            for x in range(U):
                src = q[p[0]][p[1]][x] if p is not None else 0.0
                if x != u:
                    cons.append(q[n][u][x] <= src)
                cons.append(b[n][u][x] <= src)
    for w in range(U):
        for n in range(N + 1)[1:]:
            sent = sum(r[l, w] * Ts for l in range(n))
            dem = sum(Ts * d[l, w] for l in range(n))
            recv = sum(cp.sum(b[l][w]) for l in range(n))
            # only the transfer to a slot's holder releases the cached copy
            out = sum(b[l][x][w] for l in range(n) for x in range(U) if holder[l, x])
            cached = sum(q[l][x][w] for l in range(n) for x in range(U))
            cons.append(sent <= C[w] + dem + out - recv - cached)
            cons.append(sent >= dem - recv)

    mbs = case["mbs"]
    if mbs["kind"] == "traffic":
        mbs_cost = Ts * cp.sum(r)
    else:
        W = mbs["bandwidth"]
        mbs_cost = Ts * cp.sum(W * cp.exp(r / W) - W)
    link = sum(xi * b[n][u][x] for n in range(N) for u in range(U) for x in range(U) if x != u)
    prob = cp.Problem(cp.Minimize(mbs_cost + link), cons)
    prob.solve(solver=cp.CLARABEL, tol_gap_abs=1e-10, tol_gap_rel=1e-10, tol_feas=1e-10)
    if prob.status != cp.OPTIMAL:
        raise RuntimeError(f"oracle status {prob.status}")
    return float(prob.value)


def make_cases(seed=20240611, count=36):
    rng = np.random.default_rng(seed)
    cases = []
    for i in range(count):
        N = int(rng.integers(2, 4))
        U = 2 if i < 30 else 3  # thirty two-user cases, then a few three-user ones
        F = int(rng.integers(1, 4))
        lengths = [round(float(v), 3) for v in rng.uniform(0.5, 3.0, F)]
        # mostly real requests, occasional idle slot
        req = rng.integers(1, F + 1, (N, U))
        req[rng.random((N, U)) < 0.1] = 0
        case = {
            "name": f"case{i:02d}",
            "requests": req.tolist(),
            "lengths": lengths,
            "slot_seconds": 1.0,
            "capacities": [round(float(v), 3) for v in rng.uniform(0.0, 3.0, U)],
            "mbs": {"kind": "traffic"} if i % 3 == 0 else {"kind": "energy", "bandwidth": 2.0},
            "xi": [0.0, 0.5][i % 2],
            "instantaneous": i % 5 == 4,
        }
        case["objective"] = solve(case)
        cases.append(case)
    return cases


def main():
    out = pathlib.Path(sys.argv[1] if len(sys.argv) > 1 else
                       pathlib.Path(__file__).resolve().parent.parent / "tests/data/d2d_oracle_cases.json")
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps({"cases": make_cases()}, indent=1) + "\n")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
