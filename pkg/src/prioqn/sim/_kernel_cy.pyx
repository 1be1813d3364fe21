# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled event loop; mirrors ``_kernel_py.run_kernel`` step for step."""

import numpy as np
cimport numpy as cnp
from libc.math cimport log, INFINITY

cnp.import_array()


cdef class _Streams:
    cdef double[:, ::1] buf
    cdef long[::1] pos
    cdef long width
    cdef object refill

    def __init__(self, buf, refill):
        self.buf = buf
        self.pos = np.zeros(buf.shape[0], dtype=np.int_)
        self.width = buf.shape[1]
        self.refill = refill

    cdef inline double uniform(self, long s):
        cdef long p = self.pos[s]
        if p == self.width:
            self.refill(s)
            p = 0
        self.pos[s] = p + 1
        return self.buf[s, p]


cdef class _Pool:
    cdef public object nxt_a, arrive_a, rem_a, finish_a, free_a
    cdef long[::1] nxt
    cdef double[::1] arrive
    cdef double[::1] rem
    cdef double[::1] finish
    cdef long[::1] free
    cdef long nfree
    cdef long cap

    def __init__(self, long cap):
        self.cap = 0
        self.nfree = 0
        self.nxt_a = np.empty(0, dtype=np.int_)
        self.arrive_a = np.empty(0)
        self.rem_a = np.empty(0)
        self.finish_a = np.empty(0)
        self.free_a = np.empty(0, dtype=np.int_)
        self.grow(cap)

    cdef void grow(self, long extra):
        cdef long old = self.cap
        cdef long i
        self.cap = old + extra
        self.nxt_a = np.concatenate([self.nxt_a, np.full(extra, -1, dtype=np.int_)])
        self.arrive_a = np.concatenate([self.arrive_a, np.zeros(extra)])
        self.rem_a = np.concatenate([self.rem_a, np.zeros(extra)])
        self.finish_a = np.concatenate([self.finish_a, np.zeros(extra)])
        fresh = np.empty(self.cap, dtype=np.int_)
        fresh[:self.nfree] = self.free_a[:self.nfree]
        self.free_a = fresh
        self.nxt = self.nxt_a
        self.arrive = self.arrive_a
        self.rem = self.rem_a
        self.finish = self.finish_a
        self.free = self.free_a
        # same pop order as the Python list: lowest new index comes out first
        for i in range(self.cap - 1, old - 1, -1):
            self.free[self.nfree] = i
            self.nfree += 1

    cdef inline long pop(self):
        if self.nfree == 0:
            self.grow(self.cap)
        self.nfree -= 1
        return self.free[self.nfree]

    cdef inline void push(self, long x):
        self.free[self.nfree] = x
        self.nfree += 1


def run_kernel(station_in, servers_in, alpha_in, mean_in, cumroute_in,
               long max_events, double horizon, long warm_events, double warm_time,
               buf, refill, trace=None):
    if trace is not None:
        raise ValueError("event tracing is only available in the Python kernel")
    cdef long[::1] station = np.array(station_in, dtype=np.int_, order="C")
    cdef long[::1] servers = np.array(servers_in, dtype=np.int_, order="C")
    cdef double[::1] alpha = np.array(alpha_in, dtype=float, order="C")
    cdef double[::1] mean = np.array(mean_in, dtype=float, order="C")
    cdef double[:, ::1] cum = np.array(cumroute_in, dtype=float, order="C")
    cdef long K = alpha.shape[0]
    cdef long J = servers.shape[0]
    cdef _Streams rng = _Streams(buf, refill)
    cdef _Pool pool = _Pool(64)

    head_a = np.full(K, -1, dtype=np.int_)
    tail_a = np.full(K, -1, dtype=np.int_)
    n_a = np.zeros(K, dtype=np.int_)
    nserv_a = np.zeros(K, dtype=np.int_)
    next_arr_a = np.full(K, np.inf)
    area_a = np.zeros(K)
    zero_a = np.zeros(K)
    soj_sum_a = np.zeros(K)
    soj_cnt_a = np.zeros(K, dtype=np.int64)
    entered_a = np.zeros(K, dtype=np.int64)
    departed_a = np.zeros(K, dtype=np.int64)
    busy_area_a = np.zeros(J)
    empty_a = np.zeros(J)

    cdef long[::1] head = head_a
    cdef long[::1] tail = tail_a
    cdef long[::1] n = n_a
    cdef long[::1] nserv = nserv_a
    cdef double[::1] next_arr = next_arr_a
    cdef double[::1] area = area_a
    cdef double[::1] zero_time = zero_a
    cdef double[::1] soj_sum = soj_sum_a
    cdef long long[::1] soj_cnt = soj_cnt_a
    cdef long long[::1] entered = entered_a
    cdef long long[::1] departed = departed_a
    cdef double[::1] busy_area = busy_area_a
    cdef double[::1] empty_time = empty_a

    cdef long k, j, x, prev, i, l, dest, ev_k, ev_x, ev_prev, kind
    cdef double t, u
    cdef double now = 0.0
    cdef double t_start = 0.0
    cdef bint collecting = warm_events == 0 and warm_time <= 0.0
    cdef long events = 0
    cdef bint by_time = max_events < 0

    for k in range(K):
        if alpha[k] > 0:
            next_arr[k] = -log(1.0 - rng.uniform(k)) / alpha[k]

    while True:
        if not by_time and events >= max_events:
            break
        t = INFINITY
        kind = 0
        ev_k = -1
        ev_x = -1
        ev_prev = -1
        for k in range(K):
            x = head[k]
            prev = -1
            for i in range(nserv[k]):
                if pool.finish[x] < t:
                    t = pool.finish[x]
                    kind = 1
                    ev_k = k
                    ev_x = x
                    ev_prev = prev
                prev = x
                x = pool.nxt[x]
        for k in range(K):
            if next_arr[k] < t:
                t = next_arr[k]
                kind = 0
                ev_k = k
        if ev_k < 0:
            break

        if not collecting:
            if by_time and t >= warm_time:
                collecting = True
                t_start = warm_time
                now = warm_time
            elif not by_time and events >= warm_events:
                collecting = True
                t_start = now
        if by_time and t > horizon:
            if collecting:
                _accumulate(horizon - now, K, J, n, nserv, area, zero_time, busy_area, empty_time)
            now = horizon
            break
        if collecting:
            _accumulate(t - now, K, J, n, nserv, area, zero_time, busy_area, empty_time)
        now = t
        events += 1

        if kind == 0:
            k = ev_k
            x = pool.pop()
            pool.arrive[x] = t
            pool.rem[x] = -log(1.0 - rng.uniform(K + k)) * mean[k]
            _append(k, x, head, tail, n, pool.nxt)
            entered[k] += 1
            next_arr[k] = t - log(1.0 - rng.uniform(k)) / alpha[k]
            _realloc(station[k], t, K, J, servers, head, n, nserv, pool.nxt, pool.rem, pool.finish)
        else:
            k = ev_k
            x = ev_x
            if ev_prev < 0:
                head[k] = pool.nxt[x]
            else:
                pool.nxt[ev_prev] = pool.nxt[x]
            if tail[k] == x:
                tail[k] = ev_prev
            n[k] -= 1
            nserv[k] -= 1
            departed[k] += 1
            if collecting:
                soj_sum[k] += t - pool.arrive[x]
                soj_cnt[k] += 1
            u = rng.uniform(2 * K + k)
            dest = -1
            for l in range(K):
                if u < cum[k, l]:
                    dest = l
                    break
            if dest >= 0:
                pool.arrive[x] = t
                pool.rem[x] = -log(1.0 - rng.uniform(K + dest)) * mean[dest]
                _append(dest, x, head, tail, n, pool.nxt)
                entered[dest] += 1
            else:
                pool.push(x)
            _realloc(station[k], t, K, J, servers, head, n, nserv, pool.nxt, pool.rem, pool.finish)
            if dest >= 0 and station[dest] != station[k]:
                _realloc(station[dest], t, K, J, servers, head, n, nserv, pool.nxt, pool.rem, pool.finish)

    return {
        "area": area_a,
        "zero_time": zero_a,
        "sojourn_sum": soj_sum_a,
        "sojourn_count": soj_cnt_a,
        "entered": entered_a,
        "departed": departed_a,
        "in_system": n_a.astype(np.int64),
        "busy_area": busy_area_a,
        "empty_time": empty_a,
        "elapsed": now - t_start if collecting else 0.0,
        "events": events,
    }


cdef inline void _append(long k, long x, long[::1] head, long[::1] tail, long[::1] n, long[::1] nxt):
    nxt[x] = -1
    if tail[k] < 0:
        head[k] = x
    else:
        nxt[tail[k]] = x
    tail[k] = x
    n[k] += 1


cdef inline void _realloc(long j, double t, long K, long J, long[::1] servers, long[::1] head,
                          long[::1] n, long[::1] nserv, long[::1] nxt, double[::1] rem,
                          double[::1] finish):
    cdef long avail = servers[j]
    cdef long k, want, have, x, p, hi
    k = j
    while k < K:
        want = n[k] if n[k] < avail else avail
        have = nserv[k]
        if want != have:
            x = head[k]
            p = 0
            hi = want if want > have else have
            while p < hi:
                if p >= have and p < want:
                    finish[x] = t + rem[x]
                elif p >= want and p < have:
                    rem[x] = finish[x] - t
                x = nxt[x]
                p += 1
            nserv[k] = want
        avail -= want
        k += J


cdef inline void _accumulate(double dt, long K, long J, long[::1] n, long[::1] nserv,
                             double[::1] area, double[::1] zero_time, double[::1] busy_area,
                             double[::1] empty_time):
    cdef long k, j, busy, tot
    for k in range(K):
        area[k] += n[k] * dt
        if n[k] == 0:
            zero_time[k] += dt
    for j in range(J):
        busy = 0
        tot = 0
        k = j
        while k < K:
            busy += nserv[k]
            tot += n[k]
            k += J
        busy_area[j] += busy * dt
        if tot == 0:
            empty_time[j] += dt
