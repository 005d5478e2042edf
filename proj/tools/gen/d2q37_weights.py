"""Solve the D2Q37 shell-weight moment system at high precision.

Unknowns: 8 shell weights + cs2. Conditions: Gaussian lattice moments
through order 8 (order-0, 2, 4, 6, 8 independent square-symmetric monomials).
"""
import itertools
import mpmath as mp

mp.mp.dps = 50
shells = [(0, 0), (1, 0), (1, 1), (2, 0), (2, 1), (2, 2), (3, 0), (3, 1)]


def members(a, b):
    out = set()
    for sx, sy in itertools.product((1, -1), repeat=2):
        out.add((sx * a, sy * b))
        out.add((sx * b, sy * a))
    return sorted(out)


def shell_moment(shell, i, j):
    return mp.mpf(sum(cx**i * cy**j for cx, cy in members(*shell)))


def dfact(n):
    return mp.mpf(1) if n <= 0 else n * dfact(n - 2)


monos = [(0, 0), (2, 0), (4, 0), (2, 2), (6, 0), (4, 2), (8, 0), (6, 2), (4, 4)]


def residuals(x):
    w, t = x[:8], x[8]
    res = []
    for i, j in monos:
        lhs = sum(w[s] * shell_moment(shells[s], i, j) for s in range(8))
        rhs = t ** ((i + j) // 2) * dfact(i - 1) * dfact(j - 1)
        res.append(lhs - rhs)
    return res


guess = [0.233, 0.107, 0.0577, 0.0142, 0.00535, 0.00101, 0.000245, 0.000283, 0.698]
sol = mp.findroot(lambda *x: residuals(list(x)), guess)
sol = [sol[i] for i in range(9)]
assert all(abs(r) < mp.mpf(10) ** -40 for r in residuals(sol))
assert sum(len(members(*s)) for s in shells) == 37
for s, w in zip(shells, sol[:8]):
    print(s, len(members(*s)), mp.nstr(w, 25))
print("cs2", mp.nstr(sol[8], 25))
