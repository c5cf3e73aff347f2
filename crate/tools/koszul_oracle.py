"""Independent numpy oracle for Koszul homology and the T operator.

Shares no code with the Rust crate. Prints JSON that
crates/core/tests/frozen.rs freezes. Run with:

    python3 tools/koszul_oracle.py
"""

import itertools
import json

import numpy as np

RANK_TOL = 1e-10
SING_TOL = 1e-8


def E(d, i, j):
    m = np.zeros((d, d), dtype=complex)
    m[i, j] = 1.0
    return m


def structure(basis):
    """c[i][j] with yx - xy = sum_k c[i][j][k] x_k (left action, opposite bracket)."""
    A = np.stack([b.reshape(-1) for b in basis], axis=1)
    n = len(basis)
    c = np.zeros((n, n, n), dtype=complex)
    for i in range(n):
        for j in range(n):
            rhs = (basis[j] @ basis[i] - basis[i] @ basis[j]).reshape(-1)
            sol, *_ = np.linalg.lstsq(A, rhs, rcond=None)
            assert np.abs(A @ sol - rhs).max() < 1e-12
            c[i, j] = sol
    return c


def boundary(basis, c, f, p):
    n, d = len(basis), basis[0].shape[0]
    src = list(itertools.combinations(range(n), p))
    dst = {s: k for k, s in enumerate(itertools.combinations(range(n), p - 1))}
    D = np.zeros((d * len(dst), d * len(src)), dtype=complex)
    for col, S in enumerate(src):
        cs = slice(col * d, (col + 1) * d)
        for k, ik in enumerate(S):
            rest = S[:k] + S[k + 1:]
            r = dst[rest]
            D[r * d:(r + 1) * d, cs] += (-1) ** k * (basis[ik] - f[ik] * np.eye(d))
        for k, l in itertools.combinations(range(p), 2):
            rest = [s for t, s in enumerate(S) if t not in (k, l)]
            for m in range(n):
                coeff = c[S[k], S[l], m]
                if coeff == 0 or m in rest:
                    continue
                # Move x_m from the front into sorted position.
                sign = (-1) ** sum(1 for s in rest if s < m)
                tgt = tuple(sorted(rest + [m]))
                r = dst[tgt]
                D[r * d:(r + 1) * d, cs] += (-1) ** (k + l) * sign * coeff * np.eye(d)
    return D


def rank(m, scale):
    if m.size == 0:
        return 0
    s = np.linalg.svd(m, compute_uv=False)
    return int((s > RANK_TOL * max(s[0], scale)).sum())


def analyse(basis, f):
    n, d = len(basis), basis[0].shape[0]
    c = structure(basis)
    dims = [d * len(list(itertools.combinations(range(n), p))) for p in range(n + 1)]
    Ds = [boundary(basis, c, f, p) for p in range(1, n + 1)]
    for a, b in zip(Ds, Ds[1:]):
        assert np.abs(a @ b).max() < 1e-12
    # Thresholds never drop below the size of the inputs.
    scale = max(max(np.abs(b).max() for b in basis), max(abs(v) for v in f), np.abs(c).max())
    ranks = [rank(D, scale) for D in Ds]
    homology = []
    for p in range(n + 1):
        r_out = ranks[p - 1] if p >= 1 else 0
        r_in = ranks[p] if p < n else 0
        homology.append(dims[p] - r_out - r_in)
    total = sum(dims)
    off = np.concatenate([[0], np.cumsum(dims)])
    Dt = np.zeros((total, total), dtype=complex)
    for p, D in enumerate(Ds, start=1):
        Dt[off[p - 1]:off[p], off[p]:off[p + 1]] = D
    s = np.linalg.svd(Dt + Dt.conj().T, compute_uv=False)
    denom = max(s[0], RANK_TOL / SING_TOL * scale)
    return homology, (s[-1] / denom) if denom > 0 else 0.0


def main():
    d2 = E(2, 0, 0), E(2, 0, 1)
    a3 = np.array([[1, 1, 0], [0, 2, 1], [0, 0, 3]], dtype=complex)
    h = np.diag([1.0, 0.0, -1.0]).astype(complex)
    diag56 = np.diag([5.0, 6.0]).astype(complex)
    cases = {
        "xy": (list(d2), [[0, 0], [1, 0], [0.5, 0], [2, 0]]),
        "tri3": ([a3, E(3, 0, 2)], [[1, 0], [2, 0], [3, 0], [1.5, 0], [0, 0]]),
        "heisenberg_ext": ([h, E(3, 0, 1), E(3, 1, 2), E(3, 0, 2)],
                           [[1, 0, 0, 0], [0, 0, 0, 0], [-1, 0, 0, 0], [0.5, 0, 0, 0], [2, 0, 0, 0]]),
        "xy_times_diag56": ([np.kron(d2[0], np.eye(2)), np.kron(d2[1], np.eye(2)), np.kron(np.eye(2), diag56)],
                            [[0, 0, 5], [0, 0, 6], [1, 0, 5], [1, 0, 6], [0, 0, 5.5]]),
    }
    out = {}
    for name, (basis, chars) in cases.items():
        rows = []
        for f in chars:
            hom, tmin = analyse(basis, f)
            rows.append({"f": f, "homology": hom, "t_min_sv": float(tmin)})
        out[name] = rows
    print(json.dumps(out, indent=1))


if __name__ == "__main__":
    main()
