"""Event loop of the discrete-event simulator.

Everything here is plain scalars and preallocated numpy arrays so the
same source compiles under numba and runs unmodified in pure Python
(REPLICAST_DISABLE_JIT=1).  No Python objects, no dicts, no closures.

Event kinds at equal timestamps fire in the fixed priority
departure < monitor < evaluation < provisioning < arrival, which makes
runs bit-reproducible for a given seed on either backend.
"""

from __future__ import annotations

import math

import numpy as np

from ._jit import maybe_jit
from ._rng import draw_exponential, uniform01

# Workload encodings for the kernel.
WL_INFINITE_EXP = 0
WL_INFINITE_DET = 1
WL_SHARING_EXP = 2

# Metric encodings.
MT_CONCURRENCY = 0
MT_RPS = 1

_INF = math.inf


@maybe_jit
def _heap_push(h_time, h_slot, h_arr, h_n, t, slot, arr):
    i = h_n
    h_time[i] = t
    h_slot[i] = slot
    h_arr[i] = arr
    while i > 0:
        parent = (i - 1) // 2
        if h_time[parent] <= h_time[i]:
            break
        h_time[parent], h_time[i] = h_time[i], h_time[parent]
        h_slot[parent], h_slot[i] = h_slot[i], h_slot[parent]
        h_arr[parent], h_arr[i] = h_arr[i], h_arr[parent]
        i = parent
    return h_n + 1


@maybe_jit
def _heap_pop(h_time, h_slot, h_arr, h_n):
    t0 = h_time[0]
    s0 = h_slot[0]
    a0 = h_arr[0]
    n = h_n - 1
    h_time[0] = h_time[n]
    h_slot[0] = h_slot[n]
    h_arr[0] = h_arr[n]
    i = 0
    while True:
        left = 2 * i + 1
        right = left + 1
        smallest = i
        if left < n and h_time[left] < h_time[smallest]:
            smallest = left
        if right < n and h_time[right] < h_time[smallest]:
            smallest = right
        if smallest == i:
            break
        h_time[smallest], h_time[i] = h_time[i], h_time[smallest]
        h_slot[smallest], h_slot[i] = h_slot[i], h_slot[smallest]
        h_arr[smallest], h_arr[i] = h_arr[i], h_arr[smallest]
        i = smallest
    return t0, s0, a0, n


@maybe_jit
def run_simulation(metric_kind, tv, n_max, t_eva, window_len, mu_pro, mu_dep,
                   wl_kind, wl_mean, lam, duration, warmup, init_replicas,
                   streams):
    arr_rng = streams[0]
    svc_rng = streams[1]
    prov_rng = streams[2]

    # Container slots.  state: 0 free, 1 ready, 2 draining.  A slot's
    # index doubles as the container id for dispatch tie-breaks; birth
    # order decides which container a scale-down removes.
    cap = n_max + 8
    state = np.zeros(cap, dtype=np.uint8)
    conc = np.zeros(cap, dtype=np.int64)
    arr_count = np.zeros(cap, dtype=np.int64)
    birth = np.full(cap, -1, dtype=np.int64)

    # Per-slot arrival times of in-flight jobs (processor sharing only).
    ps_cols = 8
    ps_times = np.zeros((cap, ps_cols), dtype=np.float64)
    busy = 0

    # Pending completions (infinite server only), a manual binary heap.
    heap_cap = 1024
    h_time = np.zeros(heap_cap, dtype=np.float64)
    h_slot = np.zeros(heap_cap, dtype=np.int64)
    h_arr = np.zeros(heap_cap, dtype=np.float64)
    h_n = 0

    for k in range(init_replicas):
        state[k] = 1
        birth[k] = k
    birth_seq = init_replicas
    j_ready = init_replicas
    order = init_replicas

    # Stable window of per-second metric samples.
    wbuf = np.zeros(window_len, dtype=np.float64)
    w_count = 0
    w_idx = 0
    ov = 0.0

    n_tick_cap = int(duration) + 1
    tick_ready = np.zeros(n_tick_cap, dtype=np.int64)
    tick_ov = np.zeros(n_tick_cap, dtype=np.float64)
    tick_rt = np.zeros(n_tick_cap, dtype=np.float64)
    tick_carried = np.zeros(n_tick_cap, dtype=np.uint8)
    n_ticks = 0

    arrivals = 0
    completions = 0
    rt_sum_pw = 0.0
    completions_pw = 0
    rt_sum_sec = 0.0
    n_sec = 0
    last_rt = wl_mean  # gap-fill seed until the first completion
    area_replica = 0.0
    j_since = 0.0

    t_arrival = draw_exponential(arr_rng, lam)
    t_monitor = 1.0
    t_eval = t_eva
    t_prov = _INF
    t_ps_dep = _INF

    while True:
        if wl_kind == WL_SHARING_EXP:
            t_dep = t_ps_dep
        elif h_n > 0:
            t_dep = h_time[0]
        else:
            t_dep = _INF
        t_next = min(t_dep, t_monitor, t_eval, t_prov, t_arrival)
        if t_next > duration:
            break

        if t_dep <= t_next:
            # --- departure ---
            t = t_dep
            if wl_kind == WL_SHARING_EXP:
                # Pick the departing container uniformly among busy ones,
                # then the finishing job uniformly within it: exponential
                # demands make every busy container equally likely to
                # produce the next departure regardless of its job count.
                u = uniform01(svc_rng)
                pick = int(u * busy)
                if pick >= busy:
                    pick = busy - 1
                slot = -1
                seen = 0
                for k in range(cap):
                    if conc[k] > 0:
                        if seen == pick:
                            slot = k
                            break
                        seen += 1
                c = conc[slot]
                u2 = uniform01(svc_rng)
                idx = int(u2 * c)
                if idx >= c:
                    idx = c - 1
                rt = t - ps_times[slot, idx]
                ps_times[slot, idx] = ps_times[slot, c - 1]
                conc[slot] = c - 1
                if c == 1:
                    busy -= 1
                    if state[slot] == 2:
                        state[slot] = 0
                        birth[slot] = -1
                        arr_count[slot] = 0
                if busy > 0:
                    t_ps_dep = t + draw_exponential(svc_rng, busy / wl_mean)
                else:
                    t_ps_dep = _INF
            else:
                t0, slot, arr_t, h_n = _heap_pop(h_time, h_slot, h_arr, h_n)
                rt = t0 - arr_t
                conc[slot] -= 1
                if conc[slot] == 0 and state[slot] == 2:
                    state[slot] = 0
                    birth[slot] = -1
                    arr_count[slot] = 0
            completions += 1
            rt_sum_sec += rt
            n_sec += 1
            if t > warmup:
                rt_sum_pw += rt
                completions_pw += 1

        elif t_monitor <= t_next:
            # --- per-second monitor ---
            s_sum = 0.0
            n_ready = 0
            for k in range(cap):
                if state[k] == 1:
                    n_ready += 1
                    if metric_kind == MT_RPS:
                        s_sum += arr_count[k]
                    else:
                        s_sum += conc[k]
            sample = s_sum / n_ready
            if w_count < window_len:
                wbuf[w_idx] = sample
                w_count += 1
            else:
                wbuf[w_idx] = sample
            w_idx += 1
            if w_idx == window_len:
                w_idx = 0
            # Full re-sum: 60 adds per simulated second buys exactness.
            w_sum = 0.0
            for k in range(w_count):
                w_sum += wbuf[k]
            ov = w_sum / w_count

            tick_ready[n_ticks] = j_ready
            tick_ov[n_ticks] = ov
            if n_sec > 0:
                last_rt = rt_sum_sec / n_sec
                tick_rt[n_ticks] = last_rt
                tick_carried[n_ticks] = 0
            else:
                tick_rt[n_ticks] = last_rt
                tick_carried[n_ticks] = 1
            n_ticks += 1
            rt_sum_sec = 0.0
            n_sec = 0
            for k in range(cap):
                arr_count[k] = 0
            t_monitor += 1.0

        elif t_eval <= t_next:
            # --- scale evaluator ---
            desired = int(math.ceil(ov / tv))
            if desired < 1:
                desired = 1
            if desired > n_max:
                desired = n_max
            if desired != order:
                order = desired
                if j_ready == order:
                    t_prov = _INF
                elif j_ready < order:
                    t_prov = t_eval + draw_exponential(
                        prov_rng, (order - j_ready) * mu_pro)
                else:
                    t_prov = t_eval + draw_exponential(
                        prov_rng, (j_ready - order) * mu_dep)
            t_eval += t_eva

        elif t_prov <= t_next:
            # --- provisioning engine: one container becomes ready or leaves ---
            t = t_prov
            if t > warmup:
                lo = j_since if j_since > warmup else warmup
                area_replica += j_ready * (t - lo)
            j_since = t
            if j_ready < order:
                slot = -1
                for k in range(cap):
                    if state[k] == 0:
                        slot = k
                        break
                if slot == -1:
                    new_cap = cap * 2
                    ns = np.zeros(new_cap, dtype=np.uint8)
                    ns[:cap] = state
                    state = ns
                    nc = np.zeros(new_cap, dtype=np.int64)
                    nc[:cap] = conc
                    conc = nc
                    na = np.zeros(new_cap, dtype=np.int64)
                    na[:cap] = arr_count
                    arr_count = na
                    nb = np.full(new_cap, -1, dtype=np.int64)
                    nb[:cap] = birth
                    birth = nb
                    np2 = np.zeros((new_cap, ps_cols), dtype=np.float64)
                    np2[:cap] = ps_times
                    ps_times = np2
                    slot = cap
                    cap = new_cap
                state[slot] = 1
                conc[slot] = 0
                arr_count[slot] = 0
                birth[slot] = birth_seq
                birth_seq += 1
                j_ready += 1
            else:
                # Graceful scale-down of the newest ready container: it
                # finishes in-flight requests but gets no new ones.
                slot = -1
                newest = -1
                for k in range(cap):
                    if state[k] == 1 and birth[k] > newest:
                        newest = birth[k]
                        slot = k
                if conc[slot] == 0:
                    state[slot] = 0
                    birth[slot] = -1
                    arr_count[slot] = 0
                else:
                    state[slot] = 2
                j_ready -= 1
            if j_ready == order:
                t_prov = _INF
            elif j_ready < order:
                t_prov = t + draw_exponential(prov_rng, (order - j_ready) * mu_pro)
            else:
                t_prov = t + draw_exponential(prov_rng, (j_ready - order) * mu_dep)

        else:
            # --- arrival ---
            t = t_arrival
            best = -1
            for k in range(cap):
                if state[k] == 1:
                    if best == -1 or conc[k] < conc[best]:
                        best = k
            arrivals += 1
            arr_count[best] += 1
            if wl_kind == WL_SHARING_EXP:
                c = conc[best]
                if c >= ps_cols:
                    new_cols = ps_cols * 2
                    np2 = np.zeros((cap, new_cols), dtype=np.float64)
                    np2[:, :ps_cols] = ps_times
                    ps_times = np2
                    ps_cols = new_cols
                ps_times[best, c] = t
                conc[best] = c + 1
                if c == 0:
                    busy += 1
                    t_ps_dep = t + draw_exponential(svc_rng, busy / wl_mean)
            else:
                if wl_kind == WL_INFINITE_DET:
                    svc = wl_mean
                else:
                    svc = draw_exponential(svc_rng, 1.0 / wl_mean)
                conc[best] += 1
                if h_n == heap_cap:
                    new_cap = heap_cap * 2
                    nt = np.zeros(new_cap, dtype=np.float64)
                    nt[:heap_cap] = h_time
                    h_time = nt
                    nsl = np.zeros(new_cap, dtype=np.int64)
                    nsl[:heap_cap] = h_slot
                    h_slot = nsl
                    na2 = np.zeros(new_cap, dtype=np.float64)
                    na2[:heap_cap] = h_arr
                    h_arr = na2
                    heap_cap = new_cap
                h_n = _heap_push(h_time, h_slot, h_arr, h_n, t + svc, best, t)
            t_arrival = t + draw_exponential(arr_rng, lam)

    # Close the replica-count integral at the horizon.
    if duration > warmup:
        lo = j_since if j_since > warmup else warmup
        if duration > lo:
            area_replica += j_ready * (duration - lo)

    in_flight = 0
    for k in range(cap):
        in_flight += conc[k]

    return (n_ticks, tick_ready, tick_ov, tick_rt, tick_carried,
            area_replica, rt_sum_pw, completions_pw,
            arrivals, completions, in_flight)
