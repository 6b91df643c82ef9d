"""Compiled inner loop of the Moran engine.

Each birth-death event consumes one row of 8 uniforms, in this order::

    0 reproducer   1 dying player   2 mutate?   3 empathetic?
    4 offer        5 demand         6 migrate?  7 migration target

The pure-Python reference in :mod:`ultimatum_empathy.moran_sim` follows the
same protocol, so both paths give the same trajectory for the same stream.
"""

from numba import njit

DRAWS_PER_EVENT = 8

LOCAL = 0
GLOBAL = 1


@njit(cache=True, inline="always")
def pair_payoff(p1, q1, p2, q2):
    total = 0.0
    if p1 >= q2:
        total += 1.0 - p1
    if p2 >= q1:
        total += p2
    return total


@njit(cache=True, inline="always")
def target_from_uniform(g, pattern, M, x):
    if pattern == LOCAL:
        if x < 0.5:
            return (g - 1) % M
        return (g + 1) % M
    k = int(x * (M - 1))
    if k > M - 2:
        k = M - 2
    if k >= g:
        k += 1
    return k


@njit(cache=True)
def select_reproducer(pay, omega, x):
    N = pay.shape[0]
    total = 0.0
    for i in range(N):
        total += (1.0 - omega) + omega * pay[i]
    if total <= 0.0:
        r = int(x * N)
        return r if r < N else N - 1
    threshold = x * total
    cum = 0.0
    last = -1
    for i in range(N):
        f = (1.0 - omega) + omega * pay[i]
        if f > 0.0:
            last = i
        cum += f
        if cum > threshold and f > 0.0:
            return i
    return last


@njit(cache=True)
def recompute(p, q, emp, grp, pay, tot):
    """Naive payoffs (partners in index order) and sums of p, q and empathy flags."""
    N = p.shape[0]
    for i in range(N):
        s = 0.0
        for j in range(N):
            if j != i and grp[j] == grp[i]:
                s += pair_payoff(p[i], q[i], p[j], q[j])
        pay[i] = s
    sp = 0.0
    sq = 0.0
    se = 0.0
    for i in range(N):
        sp += p[i]
        sq += q[i]
        if emp[i]:
            se += 1.0
    tot[0] = sp
    tot[1] = sq
    tot[2] = se


@njit(cache=True)
def run_chunk(p, q, emp, grp, pay, tot, draws, gen0, M, u, v, alpha, omega,
              pattern, exclude_self, burn_in, sample_every, refresh_every,
              batch_len, acc_p, acc_q, acc_e, acc_n, series, sample0):
    """Advance ``draws.shape[0]`` events; returns the updated sample count."""
    N = p.shape[0]
    nb = acc_p.shape[0]
    k = sample0
    for t in range(draws.shape[0]):
        d_ = draws[t]
        r = select_reproducer(pay, omega, d_[0])
        if exclude_self:
            d = int(d_[1] * (N - 1))
            if d > N - 2:
                d = N - 2
            if d >= r:
                d += 1
        else:
            d = int(d_[1] * N)
            if d > N - 1:
                d = N - 1

        if d_[2] < u:
            if d_[3] < alpha:
                np_ = d_[4]
                nq_ = d_[4]
                ne_ = True
            else:
                np_ = d_[4]
                nq_ = d_[5]
                ne_ = False
        else:
            np_ = p[r]
            nq_ = q[r]
            ne_ = emp[r]
        ng = grp[r]
        if M > 1 and d_[6] < v:
            ng = target_from_uniform(ng, pattern, M, d_[7])

        og = grp[d]
        op = p[d]
        oq = q[d]
        sp = 0.0
        for i in range(N):
            if i == d:
                continue
            if grp[i] == og:
                pay[i] -= pair_payoff(p[i], q[i], op, oq)
            if grp[i] == ng:
                pay[i] += pair_payoff(p[i], q[i], np_, nq_)
                sp += pair_payoff(np_, nq_, p[i], q[i])
        pay[d] = sp
        tot[0] += np_ - op
        tot[1] += nq_ - oq
        if ne_ != emp[d]:
            tot[2] += 1.0 if ne_ else -1.0
        p[d] = np_
        q[d] = nq_
        emp[d] = ne_
        grp[d] = ng

        gen = gen0 + t + 1
        if refresh_every > 0 and gen % refresh_every == 0:
            recompute(p, q, emp, grp, pay, tot)

        if gen > burn_in and (gen - burn_in) % sample_every == 0:
            b = k // batch_len
            if b >= nb:
                b = nb - 1
            mp = tot[0] / N
            mq = tot[1] / N
            acc_p[b] += mp
            acc_q[b] += mq
            acc_e[b] += tot[2] / N
            acc_n[b] += 1
            if series.shape[0] > 0:
                series[k, 0] = gen
                series[k, 1] = mp
                series[k, 2] = mq
            k += 1
    return k
