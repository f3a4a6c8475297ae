"""Compiled inner loops shared by the public modules.

All box-shaped data is flattened in C (row-major) order.  Neighbour
lookups use the per-axis strides of the box together with the flat index,
so a box of shape ``(n_1, ..., n_d)`` is handled without materializing
coordinates.
"""

import numpy as np
from numba import njit

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_LOW32 = np.uint64(0xFFFFFFFF)
_INV53 = 1.0 / 9007199254740992.0


@njit(cache=True)
def mix64(z):
    z = np.uint64(z)
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@njit(cache=True)
def seed_key(seed):
    return mix64(np.uint64(seed) ^ _GAMMA)


@njit(cache=True)
def _absorb(h, axis, c):
    word = (np.uint64(axis) << np.uint64(32)) | (np.uint64(c & 0xFFFFFFFF) & _LOW32)
    return mix64(h ^ mix64(word + _GAMMA))


@njit(cache=True)
def uniform_at(seed, coords):
    h = seed_key(seed)
    for i in range(coords.shape[0]):
        h = _absorb(h, i, coords[i])
    h = mix64(h ^ np.uint64(coords.shape[0]))
    return np.float64(h >> np.uint64(11)) * _INV53


@njit(cache=True)
def derive_seed(base, index):
    h = seed_key(base)
    h = mix64(h ^ mix64(np.uint64(index) + _GAMMA))
    return h


@njit(cache=True)
def uniform_box(seed, lo, shape):
    d = lo.shape[0]
    size = 1
    for i in range(d):
        size *= shape[i]
    out = np.empty(size, dtype=np.float64)
    if size == 0:
        return out
    # prefix hashes: pref[i] is the state after absorbing coordinates < i
    pref = np.empty(d + 1, dtype=np.uint64)
    cnt = np.zeros(d, dtype=np.int64)
    pref[0] = seed_key(seed)
    for i in range(d):
        pref[i + 1] = _absorb(pref[i], i, lo[i])
    dim = np.uint64(d)
    for idx in range(size):
        out[idx] = np.float64(mix64(pref[d] ^ dim) >> np.uint64(11)) * _INV53
        # odometer increment, recomputing only the changed suffix
        k = d - 1
        while k >= 0:
            cnt[k] += 1
            if cnt[k] < shape[k]:
                break
            cnt[k] = 0
            k -= 1
        if k < 0:
            break
        for i in range(k, d):
            pref[i + 1] = _absorb(pref[i], i, lo[i] + cnt[i])
    return out


@njit(cache=True)
def strides_of(shape):
    d = shape.shape[0]
    st = np.empty(d, dtype=np.int64)
    acc = 1
    for i in range(d - 1, -1, -1):
        st[i] = acc
        acc *= shape[i]
    return st


@njit(cache=True)
def forward_reach(plus, minus, shape, src):
    """Sites reachable from ``src`` along available arrows inside the box.

    ``plus[x]`` / ``minus[x]`` say whether the +e_i / -e_i arrows leave x.
    Neighbours are visited in lexicographic order of the target site, and
    ``parent`` records the BFS tree for witness paths.
    """
    d = shape.shape[0]
    st = strides_of(shape)
    size = plus.shape[0]
    seen = np.zeros(size, dtype=np.bool_)
    parent = np.full(size, -1, dtype=np.int64)
    queue = np.empty(size, dtype=np.int64)
    head = 0
    tail = 0
    seen[src] = True
    queue[tail] = src
    tail += 1
    while head < tail:
        x = queue[head]
        head += 1
        if minus[x]:
            for i in range(d):
                if (x // st[i]) % shape[i] > 0:
                    y = x - st[i]
                    if not seen[y]:
                        seen[y] = True
                        parent[y] = x
                        queue[tail] = y
                        tail += 1
        if plus[x]:
            for i in range(d - 1, -1, -1):
                if (x // st[i]) % shape[i] < shape[i] - 1:
                    y = x + st[i]
                    if not seen[y]:
                        seen[y] = True
                        parent[y] = x
                        queue[tail] = y
                        tail += 1
    return seen, parent


@njit(cache=True)
def backward_reach(plus, minus, shape, target):
    """Sites from which some site of ``target`` can be reached."""
    d = shape.shape[0]
    st = strides_of(shape)
    size = plus.shape[0]
    seen = np.zeros(size, dtype=np.bool_)
    queue = np.empty(size, dtype=np.int64)
    tail = 0
    for x in range(size):
        if target[x]:
            seen[x] = True
            queue[tail] = x
            tail += 1
    head = 0
    while head < tail:
        y = queue[head]
        head += 1
        for i in range(d):
            c = (y // st[i]) % shape[i]
            if c > 0:
                x = y - st[i]
                if plus[x] and not seen[x]:
                    seen[x] = True
                    queue[tail] = x
                    tail += 1
            if c < shape[i] - 1:
                x = y + st[i]
                if minus[x] and not seen[x]:
                    seen[x] = True
                    queue[tail] = x
                    tail += 1
    return seen


@njit(cache=True)
def reaches(minus, shape, src, target, skip):
    """Half-orthant reachability test with early exit.

    Every site has all +e_i arrows; ``minus`` marks sites that also have the
    -e_i arrows.  Site ``skip`` (if >= 0) is treated as having no -e_i
    arrows regardless of ``minus``.
    """
    d = shape.shape[0]
    st = strides_of(shape)
    size = minus.shape[0]
    seen = np.zeros(size, dtype=np.bool_)
    queue = np.empty(size, dtype=np.int64)
    head = 0
    tail = 1
    queue[0] = src
    seen[src] = True
    while head < tail:
        x = queue[head]
        head += 1
        if target[x]:
            return True
        down = minus[x] and x != skip
        for i in range(d):
            c = (x // st[i]) % shape[i]
            if c < shape[i] - 1:
                y = x + st[i]
                if not seen[y]:
                    seen[y] = True
                    queue[tail] = y
                    tail += 1
            if down and c > 0:
                y = x - st[i]
                if not seen[y]:
                    seen[y] = True
                    queue[tail] = y
                    tail += 1
    return False


@njit(cache=True)
def pivotal_fast(omega1, shape, src, target):
    """Pivotal sites for the half-orthant arrows of ``omega1``.

    Blocked configurations use the one-pass characterization: u is pivotal
    iff u is reached from the source, u is in Omega_1, and some lower
    neighbour of u can reach the target.  In a connected configuration a
    pivotal site must use one of its -e_i arrows on every source-target
    route, so only the sites taking a -e_i step along one breadth-first
    route are re-tested with those arrows removed.
    """
    d = shape.shape[0]
    st = strides_of(shape)
    size = omega1.shape[0]
    plus = np.ones(size, dtype=np.bool_)
    minus = ~omega1
    fwd, parent = forward_reach(plus, minus, shape, src)
    out = np.zeros(size, dtype=np.bool_)
    hit = -1
    for x in range(size):
        if fwd[x] and target[x]:
            hit = x
            break
    if hit < 0:
        bwd = backward_reach(plus, minus, shape, target)
        for u in range(size):
            if fwd[u] and omega1[u]:
                for i in range(d):
                    if (u // st[i]) % shape[i] > 0 and bwd[u - st[i]]:
                        out[u] = True
                        break
        return out, False
    y = hit
    while parent[y] >= 0:
        u = parent[y]
        if y < u and not omega1[u]:
            if not reaches(minus, shape, src, target, u):
                out[u] = True
        y = u
    return out, True


@njit(cache=True)
def pivotal_naive(omega1, shape, src, target):
    """Per-site two-sided definition, two searches per site."""
    size = omega1.shape[0]
    out = np.zeros(size, dtype=np.bool_)
    for u in range(size):
        w = omega1.copy()
        w[u] = True
        blocked_plus = not reaches(~w, shape, src, target, -1)
        w[u] = False
        linked_full = reaches(~w, shape, src, target, -1)
        out[u] = blocked_plus and linked_full
    return out


@njit(cache=True)
def padded_strides(shape):
    """Strides of the box grown by one wall layer on every side."""
    d = shape.shape[0]
    st = np.empty(d, dtype=np.int64)
    acc = 1
    for i in range(d - 1, -1, -1):
        st[i] = acc
        acc *= shape[i] + 2
    return st, acc


@njit(cache=True)
def pad_index(x, shape, pst):
    """Flat index in the padded box of flat index ``x`` of the plain box."""
    d = shape.shape[0]
    out = 0
    rem = x
    for i in range(d - 1, -1, -1):
        out += (rem % shape[i] + 1) * pst[i]
        rem //= shape[i]
    return out


@njit(cache=True)
def bottleneck_level(level, top, shape, src, target):
    """Largest k such that the source reaches the target at grid index k-1.

    Half-orthant arrows; the -e_i arrows of site x exist at grid index k
    iff ``k < level[x]``.  Returns the number of leading grid indices at
    which a connection exists.
    """
    pst, psize = padded_strides(shape)
    plev = np.full(psize, -1, dtype=np.int64)
    ptgt = np.zeros(psize, dtype=np.bool_)
    for x in range(level.shape[0]):
        j = pad_index(x, shape, pst)
        plev[j] = level[x]
        ptgt[j] = target[x]
    best = np.empty(psize, dtype=np.int64)
    head = np.empty(top + 2, dtype=np.int64)
    nxt = np.empty(2 * psize + 1, dtype=np.int32)
    node = np.empty(2 * psize + 1, dtype=np.int32)
    return bottleneck_padded(plev, top, pst, pad_index(src, shape, pst), ptgt,
                             best, head, nxt, node)


@njit(cache=True)
def bottleneck_padded(plev, top, pst, src, ptgt, best, head, nxt, node):
    """Bucket-queue widest path on a padded box.

    Wall sites carry ``plev == -1`` and are never entered.  Buckets are
    scanned downward, so the first target popped fixes the answer.  The
    work arrays are caller-owned so repeated trials reuse them; the push
    lists grow on demand.
    """
    d = pst.shape[0]
    inf = top + 1
    for j in range(plev.shape[0]):
        best[j] = inf + 1 if plev[j] < 0 else -1
    for v in range(top + 2):
        head[v] = -1
    best[src] = inf
    node[0] = src
    nxt[0] = -1
    head[inf] = 0
    used = 1
    cap = node.shape[0]
    for v in range(inf, 0, -1):
        while head[v] >= 0:
            e = head[v]
            head[v] = nxt[e]
            x = np.int64(node[e])
            if best[x] != v:
                continue
            # mark as settled by lifting above any later candidate
            best[x] = inf + 1
            if ptgt[x]:
                return v
            down = v if plev[x] > v else plev[x]
            if used + 2 * d >= cap:
                cap2 = 2 * cap
                nn = np.empty(cap2, dtype=np.int32)
                nx = np.empty(cap2, dtype=np.int32)
                nn[:used] = node[:used]
                nx[:used] = nxt[:used]
                node = nn
                nxt = nx
                cap = cap2
            for i in range(d):
                y = x + pst[i]
                if v > best[y]:
                    best[y] = v
                    node[used] = y
                    nxt[used] = head[v]
                    head[v] = used
                    used += 1
                if down > 0:
                    y = x - pst[i]
                    if down > best[y]:
                        best[y] = down
                        node[used] = y
                        nxt[used] = head[down]
                        head[down] = used
                        used += 1
    return 0


@njit(cache=True)
def sweep_corners(member, window, shape, stop):
    """Remove corners of ``member`` at sites flagged by ``window``.

    Sites are visited once in increasing flat index, which removes corners
    in lexicographically smallest-first order and leaves no corner among
    the window sites.  If ``stop >= 0`` the sweep halts before removing
    that site.  Returns the removed sites in order and a halted flag.
    """
    d = shape.shape[0]
    st = strides_of(shape)
    size = member.shape[0]
    removed = np.empty(size, dtype=np.int64)
    count = 0
    for x in range(size):
        if not (window[x] and member[x]):
            continue
        corner = True
        for i in range(d):
            if (x // st[i]) % shape[i] > 0 and member[x - st[i]]:
                corner = False
                break
        if corner:
            if x == stop:
                return removed[:count], True
            member[x] = False
            removed[count] = x
            count += 1
    return removed[:count], False


@njit(cache=True)
def bfs_trials_blocked(seeds, lo, shape, src, target, vd, ps, qs):
    """Blocking indicator for each (trial, parameter) pair.

    Site x is in Omega_1 iff U_x <= q (x in V_d) or U_x <= p (otherwise).
    """
    nt = seeds.shape[0]
    npar = ps.shape[0]
    out = np.zeros((nt, npar), dtype=np.bool_)
    for t in range(nt):
        u = uniform_box(seeds[t], lo, shape)
        for k in range(npar):
            minus = np.empty(u.shape[0], dtype=np.bool_)
            for x in range(u.shape[0]):
                thr = qs[k] if vd[x] else ps[k]
                minus[x] = u[x] > thr
            out[t, k] = not reaches(minus, shape, src, target, -1)
    return out


@njit(cache=True)
def pivotal_count_trials(seeds, lo, shape, src, target, vd, p, q):
    """Per-trial pivotal counts split into (off V_d, on V_d)."""
    nt = seeds.shape[0]
    out = np.zeros((nt, 2), dtype=np.int64)
    for t in range(nt):
        u = uniform_box(seeds[t], lo, shape)
        w = np.empty(u.shape[0], dtype=np.bool_)
        for x in range(u.shape[0]):
            thr = q if vd[x] else p
            w[x] = u[x] <= thr
        piv, _ = pivotal_fast(w, shape, src, target)
        for x in range(u.shape[0]):
            if piv[x]:
                if vd[x]:
                    out[t, 1] += 1
                else:
                    out[t, 0] += 1
    return out


@njit(cache=True)
def count_below(g, x):
    """Number of entries of the sorted array ``g`` strictly below ``x``."""
    n = g.shape[0]
    if x <= g[0]:
        return 0
    if x > g[n - 1]:
        return n
    # interpolated guess, then exact correction
    k = int((x - g[0]) / (g[n - 1] - g[0]) * (n - 1)) if g[n - 1] > g[0] else 0
    if k < 0:
        k = 0
    if k > n - 1:
        k = n - 1
    while k < n and g[k] < x:
        k += 1
    while k > 0 and g[k - 1] >= x:
        k -= 1
    return k


@njit(cache=True)
def threshold_levels(seeds, lo, shape, src, target, vd, grid, qgrid):
    """Per-trial connection counts along a monotone parameter path.

    Grid index k uses p = grid[k] off V_d and q = qgrid[k] on V_d; both
    sequences must be non-decreasing.  The returned value c means the
    source connects to the target exactly at grid indices k < c.
    """
    nt = seeds.shape[0]
    top = grid.shape[0] - 1
    size = target.shape[0]
    pst, psize = padded_strides(shape)
    pos = np.empty(size, dtype=np.int64)
    for x in range(size):
        pos[x] = pad_index(x, shape, pst)
    plev = np.full(psize, -1, dtype=np.int64)
    ptgt = np.zeros(psize, dtype=np.bool_)
    for x in range(size):
        ptgt[pos[x]] = target[x]
    psrc = pos[src]
    best = np.empty(psize, dtype=np.int64)
    head = np.empty(top + 2, dtype=np.int64)
    nxt = np.empty(2 * psize + 1, dtype=np.int32)
    node = np.empty(2 * psize + 1, dtype=np.int32)
    out = np.empty(nt, dtype=np.int64)
    for t in range(nt):
        u = uniform_box(seeds[t], lo, shape)
        for x in range(size):
            if vd[x]:
                plev[pos[x]] = count_below(qgrid, u[x])
            else:
                plev[pos[x]] = count_below(grid, u[x])
        out[t] = bottleneck_padded(plev, top, pst, psrc, ptgt, best, head, nxt, node)
    return out
