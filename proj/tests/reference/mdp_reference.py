"""Independent reference implementation used to produce frozen test values.

Written directly from the model definition with dictionaries and explicit
loops; it shares no code or indexing scheme with the C++ library. Run it to
regenerate the numbers embedded in tests/reference_values.hpp:

    python3 tests/reference/mdp_reference.py

and the golden threshold diff in tests/golden/diff_discount.csv:

    python3 tests/reference/mdp_reference.py golden > tests/golden/diff_discount.csv
"""

import itertools
import math

import numpy as np


class Model:
    def __init__(self, B, Ep, Es, arrivals, p, q, N, alpha, Tmax):
        order = sorted(range(len(p)), key=lambda j: p[j])
        self.p = [p[j] for j in order]
        self.q = [q[j] for j in order]
        self.B, self.Ep, self.Es = B, Ep, Es
        self.arrivals = arrivals
        self.N, self.alpha, self.Tmax = N, alpha, Tmax
        self.states = [
            (E, ages)
            for E in range(B + 1)
            for ages in itertools.product(range(1, Tmax + 1), repeat=N)
        ]

    def feasible(self, E):
        return E >= self.Ep + self.Es

    def aged(self, ages):
        return tuple(min(t + 1, self.Tmax) for t in ages)

    def reset(self, ages, k):
        return tuple(1 if i == k else min(t + 1, self.Tmax) for i, t in enumerate(ages))

    def expect(self, J, E_after, ages):
        return sum(pa * J[(min(E_after + a, self.B), ages)] for a, pa in enumerate(self.arrivals) if pa > 0)

    def branches(self, J, s):
        """Returns (no_probe, idle, [[sample cost for k] per channel])."""
        E, ages = s
        base = sum(ages)
        a = self.alpha
        no_probe = base + a * self.expect(J, E, self.aged(ages))
        if not self.feasible(E):
            return no_probe, None, None
        idle = base + a * self.expect(J, E - self.Ep, self.aged(ages))
        samples = []
        for pj in self.p:
            row = []
            for k in range(self.N):
                succ = self.expect(J, E - self.Ep - self.Es, self.reset(ages, k))
                fail = self.expect(J, E - self.Ep - self.Es, self.aged(ages))
                row.append(base - ages[k] * pj + a * (pj * succ + (1 - pj) * fail))
            samples.append(row)
        return no_probe, idle, samples

    def backup(self, J, s):
        no_probe, idle, samples = self.branches(J, s)
        if idle is None:
            return no_probe
        probe = sum(qj * min([idle] + row) for qj, row in zip(self.q, samples))
        return min(no_probe, probe)

    def value_iteration(self, tol=1e-8, max_iters=100000):
        J = {s: 0.0 for s in self.states}
        deltas = []
        for _ in range(max_iters):
            new = {s: self.backup(J, s) for s in self.states}
            delta = max(abs(new[s] - J[s]) for s in self.states)
            deltas.append(delta)
            J = new
            if delta < tol:
                return J, deltas
        raise RuntimeError("no convergence")

    def greedy(self, J, s, slack=1e-12):
        no_probe, idle, samples = self.branches(J, s)
        if idle is None:
            return False, None
        probe = sum(qj * min([idle] + row) for qj, row in zip(self.q, samples))
        if not probe < no_probe - slack * max(1, abs(no_probe)):
            return False, None
        choice = []
        for row in samples:
            best = min(row)
            k = row.index(best)
            choice.append(k + 1 if best < idle - slack * max(1, abs(idle)) else 0)
        return True, choice

    # Exact evaluation of a deterministic policy by a linear solve.
    def evaluate(self, policy):
        idx = {s: i for i, s in enumerate(self.states)}
        n = len(self.states)
        P = np.zeros((n, n))
        c = np.zeros(n)
        for s in self.states:
            i = idx[s]
            E, ages = s
            probe, choice = policy[s]

            def add(E_after, nxt, w):
                for a, pa in enumerate(self.arrivals):
                    if pa > 0:
                        P[i, idx[(min(E_after + a, self.B), nxt)]] += w * pa

            if not probe:
                c[i] = sum(ages)
                add(E, self.aged(ages), 1.0)
                continue
            for qj, pj, k in zip(self.q, self.p, choice):
                if k == 0:
                    c[i] += qj * sum(ages)
                    add(E - self.Ep, self.aged(ages), qj)
                else:
                    c[i] += qj * (sum(ages) - ages[k - 1] * pj)
                    add(E - self.Ep - self.Es, self.reset(ages, k - 1), qj * pj)
                    add(E - self.Ep - self.Es, self.aged(ages), qj * (1 - pj))
        v = np.linalg.solve(np.eye(n) - self.alpha * P, c)
        return {s: v[idx[s]] for s in self.states}

    def brute_force(self, start):
        feasible = [s for s in self.states if self.feasible(s[0])]
        options = [(False, None)] + [
            (True, list(ch)) for ch in itertools.product(range(self.N + 1), repeat=len(self.p))
        ]
        best = None
        count = 0
        for combo in itertools.product(options, repeat=len(feasible)):
            policy = {s: (False, None) for s in self.states}
            policy.update(dict(zip(feasible, combo)))
            v = self.evaluate(policy)
            count += 1
            if best is None or v[start] < best:
                best = v[start]
        return best, count


def bern(lam):
    return [1 - lam, lam]


REFERENCE_P = [0.9, 0.7, 0.5, 0.3, 0.1]
REFERENCE_Q = [0.2] * 5


def reference(N, lam, Tmax):
    return Model(12, 1, 1, bern(lam), REFERENCE_P, REFERENCE_Q, N, 0.99, Tmax)


TINY = {
    "tiny_a": dict(B=2, Ep=1, Es=1, arrivals=[0.0, 1.0], p=[1.0], q=[1.0], N=1, alpha=0.9, Tmax=3),
    "tiny_b": dict(B=2, Ep=1, Es=1, arrivals=[0.5, 0.5], p=[0.8, 0.3], q=[0.5, 0.5], N=1, alpha=0.9, Tmax=3),
    "tiny_c": dict(B=2, Ep=1, Es=1, arrivals=[0.2, 0.5, 0.3], p=[0.6], q=[1.0], N=1, alpha=0.95, Tmax=3),
    "tiny_d": dict(B=2, Ep=1, Es=1, arrivals=[0.4, 0.6], p=[0.7], q=[1.0], N=2, alpha=0.9, Tmax=2),
}


def main():
    print("== single stage / backup examples ==")
    m = reference(1, 0.5, 50)
    zero = {s: 0.0 for s in m.states}
    print("backup prev=0 E=5 T=4:", repr(m.backup(zero, (5, (4,)))))
    print("backup prev=0 E=1 T=4:", repr(m.backup(zero, (1, (4,)))))
    m3 = reference(3, 0.5, 12)

    class Zero(dict):
        def __missing__(self, key):
            return 0.0

    zero3 = Zero()
    print("backup prev=0 N=3 E=5 T=(3,5,2):", repr(m3.backup(zero3, (5, (3, 5, 2)))))

    print("== reference model N=1, lambda=0.5, Tmax=50 ==")
    J, deltas = m.value_iteration()
    print("iterations:", len(deltas), "e1:", deltas[0])
    print("bound:", math.ceil(math.log(1e-8 / deltas[0]) / math.log(0.99)) + 1)
    for s in [(12, (1,)), (0, (50,)), (6, (10,)), (2, (25,))]:
        print("J", s, repr(J[s]))
    tth = []
    for E in range(13):
        probes = [m.greedy(J, (E, (T,)))[0] for T in range(1, 51)]
        tth.append(probes.index(True) + 1 if True in probes else None)
    print("T_th(E):", tth)
    for s in [(6, (10,)), (12, (40,)), (3, (30,))]:
        print("greedy", s, m.greedy(J, s))

    print("== tiny oracle instances ==")
    for name, kw in TINY.items():
        mm = Model(**kw)
        start = (kw["B"], tuple([kw["Tmax"]] * kw["N"]))
        best, count = mm.brute_force(start)
        Jt, _ = mm.value_iteration(tol=1e-12)
        print(name, "start", start, "oracle", repr(best), "vi", repr(Jt[start]), "policies", count)


def thresholds(m, J):
    probe, sample = {}, {}
    for E in range(m.B + 1):
        flags = [m.greedy(J, (E, (T,)))[0] for T in range(1, m.Tmax + 1)]
        step = all(not (a and not b) for a, b in zip(flags, flags[1:]))
        probe[E] = ("inf" if True not in flags else str(flags.index(True) + 1)) if step else "na"
        for T in range(1, m.Tmax + 1):
            on, choice = m.greedy(J, (E, (T,)))
            if not on:
                continue
            act = [c != 0 for c in choice]
            step = all(not (a and not b) for a, b in zip(act, act[1:]))
            sample[(E, T)] = ("inf" if True not in act else repr(m.p[act.index(True)])) if step else "na"
    return probe, sample


def golden_discount_diff():
    """Threshold diff between alpha = 0.9 and alpha = 0.99 (lambda = 0.5, N = 1)."""
    surfaces = []
    for alpha in (0.9, 0.99):
        m = Model(12, 1, 1, bern(0.5), REFERENCE_P, REFERENCE_Q, 1, alpha, 50)
        J, _ = m.value_iteration()
        surfaces.append(thresholds(m, J))
    (pa, sa), (pb, sb) = surfaces

    def num(x):
        return float("inf") if x == "inf" else float(x)

    def row(surface, key, a, b):
        if "na" in (a, b):
            return f"{surface},{key},{a},{b},na,undefined"
        x, y = num(a), num(b)
        if x == y:
            return f"{surface},{key},{a},{b},0,tie"
        d = y - x
        text = ("inf" if d > 0 else "-inf") if math.isinf(d) else "%.12g" % d
        return f"{surface},{key},{a},{b},{text},{'increase' if y > x else 'decrease'}"

    lines = ["surface,key,a,b,difference,direction"]
    for E in range(13):
        lines.append(row("probe", f"point=0;energy={E}", pa[E], pb[E]))
    for (E, T) in sorted(sa):
        if (E, T) in sb:
            lines.append(row("sample", f"point=0;energy={E};t1={T}", sa[(E, T)], sb[(E, T)]))
    return "\r\n".join(lines) + "\r\n"


if __name__ == "__main__":
    import sys

    if sys.argv[1:] == ["golden"]:
        sys.stdout.write(golden_discount_diff())
    else:
        main()
