"""Numba kernels for the tree frog model.

One kernel call runs one trial.  The tree is realized lazily: vertices get
compact integer ids on first visit, children are looked up through a growing
table, and sleeping counts are sampled at realization time.  All randomness
comes from a counter-based splitmix64 stream whose key is derived from
(seed, trial index), so results do not depend on scheduling.
"""

import numpy as np
from numba import njit

U64 = np.uint64

STATUS_OK = 0
STATUS_FROG_LIMIT = 1
STATUS_VERTEX_LIMIT = 2

LAW_POISSON = 0
LAW_FIXED = 1
LAW_CUSTOM = 2

VARIANT_SIMPLE = 0
VARIANT_NONBACKTRACKING = 1


@njit(cache=True, nogil=True, inline="always")
def _next_u64(state):
    # splitmix64: counter-based, keyed via the initial state value
    state[0] += U64(0x9E3779B97F4A7C15)
    z = state[0]
    z = (z ^ (z >> U64(30))) * U64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> U64(27))) * U64(0x94D049BB133111EB)
    return z ^ (z >> U64(31))


@njit(cache=True, nogil=True, inline="always")
def _uniform(state):
    return (_next_u64(state) >> U64(11)) * (1.0 / 9007199254740992.0)


@njit(cache=True, nogil=True, inline="always")
def _randint(state, n):
    # n is small (tree degree); modulo bias is ~2^-60, irrelevant here
    return np.int64(_next_u64(state) % U64(n))


@njit(cache=True, nogil=True)
def _sample_law(state, kind, param, table):
    if kind == LAW_FIXED:
        return np.int64(param)
    if kind == LAW_POISSON:
        # Knuth's product method; fine for the desk-scale rates used here
        if param <= 0.0:
            return np.int64(0)
        L = np.exp(-param)
        k = np.int64(-1)
        p = 1.0
        while p > L:
            p *= _uniform(state)
            k += 1
        return k
    u = _uniform(state)
    return np.int64(np.searchsorted(table, u, side="right"))


@njit(cache=True, nogil=True)
def run_tree_trial(
    key,
    d,
    variant,
    horizon,
    depth_cap,
    law_kind,
    law_param,
    law_table,
    record_profile,
    max_frogs,
    max_vertices,
):
    """Simulate one trial; returns per-step root arrivals, counters, profile.

    Synchronous dynamics: all active frogs step at each tick; frogs landing on
    unvisited vertices wake the sleepers there (who start moving next tick).
    A frog stepping below `depth_cap` is removed and counted as absorbed.
    """
    state = np.empty(1, dtype=np.uint64)
    state[0] = U64(key)

    # vertex tables
    vcap = 1024
    depth = np.empty(vcap, dtype=np.int32)
    parent = np.empty(vcap, dtype=np.int64)
    children = np.full((vcap, d), np.int64(-1))
    nv = 1
    depth[0] = 0
    parent[0] = -1

    # frog arrays; prev = vertex the frog arrived from (-1 for just woken)
    fcap = 1024
    pos = np.empty(fcap, dtype=np.int64)
    prev = np.empty(fcap, dtype=np.int64)
    pos[0] = 0
    prev[0] = -1
    nf = 1

    root_arrivals = np.zeros(horizon + 1, dtype=np.int64)
    if record_profile:
        profile = np.zeros((horizon + 1, depth_cap + 1), dtype=np.int64)
        profile[0, 0] = 1
    else:
        profile = np.zeros((1, 1), dtype=np.int64)

    frogs_woken = np.int64(0)
    absorbed = np.int64(0)
    status = STATUS_OK

    npos = np.empty(fcap, dtype=np.int64)
    nprev = np.empty(fcap, dtype=np.int64)

    for t in range(1, horizon + 1):
        if nf == 0:
            break
        if npos.size < nf:
            npos = np.empty(nf, dtype=np.int64)
            nprev = np.empty(nf, dtype=np.int64)
        nnew = 0
        wake_list = np.empty(nf, dtype=np.int64)
        nwake = 0

        for i in range(nf):
            v = pos[i]
            dv = depth[v]
            pv = prev[i]
            # choose the move target as a neighbor slot:
            # slot -1 = parent, slots 0..d-1 = children
            if dv == 0:
                slot = _randint(state, d)
            elif variant == VARIANT_SIMPLE or pv == -1:
                slot = _randint(state, d + 1) - 1
            elif pv == parent[v]:
                # nonbacktracking, came from above: any child
                slot = _randint(state, d)
            else:
                # nonbacktracking, came from a child: parent or any other child
                r = _randint(state, d) - 1
                if r == -1:
                    slot = -1
                else:
                    c_pv = 0
                    for c in range(d):
                        if children[v, c] == pv:
                            c_pv = c
                            break
                    slot = r if r < c_pv else r + 1

            if slot == -1:
                w = parent[v]
            else:
                if dv == depth_cap:
                    absorbed += 1
                    continue
                w = children[v, slot]
                if w == -1:
                    # realize the child vertex
                    if nv == vcap:
                        vcap2 = vcap * 2
                        if vcap2 > max_vertices:
                            status = STATUS_VERTEX_LIMIT
                            break
                        d2 = np.empty(vcap2, dtype=np.int32)
                        p2 = np.empty(vcap2, dtype=np.int64)
                        c2 = np.full((vcap2, d), np.int64(-1))
                        d2[:vcap] = depth
                        p2[:vcap] = parent
                        c2[:vcap] = children
                        depth = d2
                        parent = p2
                        children = c2
                        vcap = vcap2
                    w = nv
                    depth[w] = dv + 1
                    parent[w] = v
                    children[v, slot] = w
                    nv += 1
                    if nwake == wake_list.size:
                        wl2 = np.empty(wake_list.size * 2, dtype=np.int64)
                        wl2[: wake_list.size] = wake_list
                        wake_list = wl2
                    wake_list[nwake] = w
                    nwake += 1

            if depth[w] == 0:
                root_arrivals[t] += 1
                if variant == VARIANT_NONBACKTRACKING:
                    continue  # stopped on arrival at the root
            npos[nnew] = w
            nprev[nnew] = v
            nnew += 1

        if status != STATUS_OK:
            break

        # wake sleepers on newly realized vertices
        for j in range(nwake):
            w = wake_list[j]
            s = _sample_law(state, law_kind, law_param, law_table)
            frogs_woken += s
            if s > 0:
                need = nnew + s
                if need > max_frogs:
                    status = STATUS_FROG_LIMIT
                    break
                if need > npos.size:
                    cap2 = npos.size
                    while cap2 < need:
                        cap2 *= 2
                    p2 = np.empty(cap2, dtype=np.int64)
                    q2 = np.empty(cap2, dtype=np.int64)
                    p2[:nnew] = npos[:nnew]
                    q2[:nnew] = nprev[:nnew]
                    npos = p2
                    nprev = q2
                for _ in range(s):
                    npos[nnew] = w
                    nprev[nnew] = -1
                    nnew += 1
        if status != STATUS_OK:
            break
        if nnew > max_frogs:
            status = STATUS_FROG_LIMIT
            break

        pos, npos = npos, pos
        prev, nprev = nprev, prev
        nf = nnew

        if record_profile:
            for i in range(nf):
                profile[t, depth[pos[i]]] += 1

    return root_arrivals, frogs_woken, absorbed, profile, status, nv


@njit(cache=True, nogil=True)
def run_cover_trial(key, d, height, max_steps):
    """One-per-site frog model on the finite d-ary tree of given height.

    Simple random walks reflecting at the root and at the leaves; returns the
    first step at which every vertex has been visited, or -1 if `max_steps`
    was not enough.
    """
    state = np.empty(1, dtype=np.uint64)
    state[0] = U64(key)

    nv = (d ** (height + 1) - 1) // (d - 1)
    if nv == 1:
        return np.int64(0)
    first_leaf = (d**height - 1) // (d - 1)

    pos = np.empty(nv, dtype=np.int64)
    active = np.zeros(nv, dtype=np.bool_)
    visited = np.zeros(nv, dtype=np.bool_)
    for i in range(nv):
        pos[i] = i
    active[0] = True
    visited[0] = True
    remaining = nv - 1

    woke = np.empty(nv, dtype=np.int64)
    for t in range(1, max_steps + 1):
        nwoke = 0
        for i in range(nv):
            if not active[i]:
                continue
            v = pos[i]
            if v == 0:
                w = 1 + _randint(state, d)
            elif v >= first_leaf:
                w = (v - 1) // d
            else:
                slot = _randint(state, d + 1)
                if slot == 0:
                    w = (v - 1) // d
                else:
                    w = v * d + slot
            pos[i] = w
            if not visited[w]:
                visited[w] = True
                remaining -= 1
                woke[nwoke] = w
                nwoke += 1
        # sleepers woken this step start moving at t+1
        for j in range(nwoke):
            active[woke[j]] = True
        if remaining == 0:
            return np.int64(t)
    return np.int64(-1)


def trial_key(seed: int, trial: int) -> np.uint64:
    """64-bit stream key for (seed, trial), via SeedSequence hashing."""
    return np.random.SeedSequence((seed, trial)).generate_state(1, np.uint64)[0]
