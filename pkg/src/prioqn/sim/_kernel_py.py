"""Pure-Python event loop (reference implementation and fallback).

The compiled kernel in ``_kernel_cy.pyx`` follows this code line for line;
both must produce bit-identical statistics from the same random buffers.

Jobs of a class form a FIFO linked list.  Under preemptive priority with
FIFO inside a class, the jobs in service are always a prefix of that list,
so ``nserv[k]`` fully describes who is being served.
"""

from math import inf, log

import numpy as np


def run_kernel(station, servers, alpha, mean, cumroute, max_events, horizon,
               warm_events, warm_time, buf, refill, trace=None):
    K = len(alpha)
    J = len(servers)
    B = buf.shape[1]
    bufl = [buf[s] for s in range(3 * K)]
    pos = [0] * (3 * K)

    station = [int(x) for x in station]
    servers = [int(x) for x in servers]
    alpha = [float(x) for x in alpha]
    mean = [float(x) for x in mean]
    cum = [[float(x) for x in row] for row in cumroute]
    at_station = [[k for k in range(j, K, J)] for j in range(J)]

    def uniform(s):
        p = pos[s]
        if p == B:
            refill(s)
            p = 0
        pos[s] = p + 1
        return float(bufl[s][p])

    # job pool
    cap = 64
    nxt = [-1] * cap
    arrive = [0.0] * cap
    rem = [0.0] * cap
    finish = [0.0] * cap
    free = list(range(cap - 1, -1, -1))

    head = [-1] * K
    tail = [-1] * K
    n = [0] * K
    nserv = [0] * K

    next_arr = [inf] * K
    for k in range(K):
        if alpha[k] > 0:
            next_arr[k] = -log(1.0 - uniform(k)) / alpha[k]

    area = [0.0] * K
    zero_time = [0.0] * K
    soj_sum = [0.0] * K
    soj_cnt = [0] * K
    entered = [0] * K
    departed = [0] * K
    busy_area = [0.0] * J
    empty_time = [0.0] * J

    now = 0.0
    t_start = 0.0
    collecting = warm_events == 0 and warm_time <= 0.0
    events = 0
    by_time = max_events < 0

    def new_job():
        nonlocal cap, nxt, arrive, rem, finish
        if not free:
            grow = cap
            nxt += [-1] * grow
            arrive += [0.0] * grow
            rem += [0.0] * grow
            finish += [0.0] * grow
            free.extend(range(cap + grow - 1, cap - 1, -1))
            cap += grow
        return free.pop()

    def append(k, x):
        nxt[x] = -1
        if tail[k] < 0:
            head[k] = x
        else:
            nxt[tail[k]] = x
        tail[k] = x
        n[k] += 1

    def realloc(j, t):
        avail = servers[j]
        for k in at_station[j]:
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

    def accumulate(dt):
        for k in range(K):
            area[k] += n[k] * dt
            if n[k] == 0:
                zero_time[k] += dt
        for j in range(J):
            busy = 0
            tot = 0
            for k in at_station[j]:
                busy += nserv[k]
                tot += n[k]
            busy_area[j] += busy * dt
            if tot == 0:
                empty_time[j] += dt

    while True:
        if not by_time and events >= max_events:
            break
        # next event: completions first (class order, FIFO order), then arrivals
        t = inf
        kind = 0
        ev_k = -1
        ev_x = -1
        ev_prev = -1
        for k in range(K):
            x = head[k]
            prev = -1
            for _ in range(nserv[k]):
                if finish[x] < t:
                    t = finish[x]
                    kind = 1
                    ev_k = k
                    ev_x = x
                    ev_prev = prev
                prev = x
                x = nxt[x]
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
                accumulate(horizon - now)
            now = horizon
            break
        if collecting:
            accumulate(t - now)
        now = t
        events += 1

        if kind == 0:
            k = ev_k
            x = new_job()
            arrive[x] = t
            rem[x] = -log(1.0 - uniform(K + k)) * mean[k]
            append(k, x)
            entered[k] += 1
            next_arr[k] = t - log(1.0 - uniform(k)) / alpha[k]
            realloc(station[k], t)
            if trace is not None:
                trace.append((t, 0, k, -1, tuple(n), tuple(nserv)))
        else:
            k = ev_k
            x = ev_x
            if ev_prev < 0:
                head[k] = nxt[x]
            else:
                nxt[ev_prev] = nxt[x]
            if tail[k] == x:
                tail[k] = ev_prev
            n[k] -= 1
            nserv[k] -= 1
            departed[k] += 1
            if collecting:
                soj_sum[k] += t - arrive[x]
                soj_cnt[k] += 1
            u = uniform(2 * K + k)
            row = cum[k]
            dest = -1
            for l in range(K):
                if u < row[l]:
                    dest = l
                    break
            if dest >= 0:
                arrive[x] = t
                rem[x] = -log(1.0 - uniform(K + dest)) * mean[dest]
                append(dest, x)
                entered[dest] += 1
            else:
                free.append(x)
            realloc(station[k], t)
            if dest >= 0 and station[dest] != station[k]:
                realloc(station[dest], t)
            if trace is not None:
                trace.append((t, 1, k, dest, tuple(n), tuple(nserv)))

    return {
        "area": np.array(area),
        "zero_time": np.array(zero_time),
        "sojourn_sum": np.array(soj_sum),
        "sojourn_count": np.array(soj_cnt, dtype=np.int64),
        "entered": np.array(entered, dtype=np.int64),
        "departed": np.array(departed, dtype=np.int64),
        "in_system": np.array(n, dtype=np.int64),
        "busy_area": np.array(busy_area),
        "empty_time": np.array(empty_time),
        "elapsed": now - t_start if collecting else 0.0,
        "events": events,
    }
