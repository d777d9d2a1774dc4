"""Transportation simplex on a spanning-tree basis.

Exact solver for the balanced transportation problem

    min <C, P>  s.t.  P 1 = a,  P^T 1 = b,  P >= 0

working on the bipartite tree of basic cells (rows are nodes ``0..n-1``,
columns are nodes ``n..n+m-1``). Potentials are read off the tree after every
pivot, so the returned ``u, v`` are a complementary dual pair for the final
basis.

Pricing is Dantzig's rule over the full cost matrix for small problems and
block search (continuing from the last scan position) for large ones. Ties in
the entering cell go to the first cell scanned, i.e. the lexicographically
smallest (row, column) within a block; ties in the leaving cell go to the
lexicographically smallest basic cell. A long run of degenerate pivots
switches pricing to Bland's rule until the next non-degenerate pivot.
"""

import numpy as np
from numba import njit

STATUS_OPTIMAL = 0
STATUS_MAX_ITER = 1

_FULL_PRICING_LIMIT = 1 << 16
# degenerate pivots (in units of n + m) tolerated before Bland's rule
BLAND_AFTER = 8


@njit(cache=True)
def _northwest(a, b):
    n = a.size
    m = b.size
    nb = n + m - 1
    ei = np.empty(nb, np.int64)
    ej = np.empty(nb, np.int64)
    fl = np.empty(nb, np.float64)
    ar = a.copy()
    br = b.copy()
    i = 0
    j = 0
    for e in range(nb):
        x = min(ar[i], br[j])
        ei[e] = i
        ej[e] = j
        fl[e] = x
        ar[i] -= x
        br[j] -= x
        if e == nb - 1:
            break
        if i == n - 1:
            j += 1
        elif j == m - 1:
            i += 1
        elif ar[i] <= br[j]:
            i += 1
        else:
            j += 1
    return ei, ej, fl


@njit(cache=True)
def _rebuild_tree(n, m, ei, ej, C, deg, start, adj, fill, parent, pedge, depth, pot, queue):
    nn = n + m
    nb = nn - 1
    for k in range(nn + 1):
        deg[k] = 0
    for e in range(nb):
        deg[ei[e] + 1] += 1
        deg[n + ej[e] + 1] += 1
    start[0] = 0
    for k in range(nn):
        start[k + 1] = start[k] + deg[k + 1]
        fill[k] = start[k]
    for e in range(nb):
        r = ei[e]
        c = n + ej[e]
        adj[fill[r]] = e
        fill[r] += 1
        adj[fill[c]] = e
        fill[c] += 1
    parent[0] = -1
    pedge[0] = -1
    depth[0] = 0
    pot[0] = 0.0
    head = 0
    tail = 1
    queue[0] = 0
    while head < tail:
        node = queue[head]
        head += 1
        for s in range(start[node], start[node + 1]):
            e = adj[s]
            other = n + ej[e] if node < n else ei[e]
            if other == parent[node]:
                continue
            parent[other] = node
            pedge[other] = e
            depth[other] = depth[node] + 1
            pot[other] = C[ei[e], ej[e]] - pot[node]
            queue[tail] = other
            tail += 1
    return tail


@njit(cache=True)
def _peel_flows(n, m, a, b, ei, ej):
    """Basic flows of a spanning tree from the exact marginals (leaf elimination)."""
    nn = n + m
    nb = nn - 1
    rem = np.empty(nn, np.float64)
    rem[:n] = a
    rem[n:] = b
    deg = np.zeros(nn, np.int64)
    for e in range(nb):
        deg[ei[e]] += 1
        deg[n + ej[e]] += 1
    # adjacency
    start = np.zeros(nn + 1, np.int64)
    for k in range(nn):
        start[k + 1] = start[k] + deg[k]
    fill = start[:-1].copy()
    adj = np.empty(2 * nb, np.int64)
    for e in range(nb):
        adj[fill[ei[e]]] = e
        fill[ei[e]] += 1
        adj[fill[n + ej[e]]] = e
        fill[n + ej[e]] += 1
    used = np.zeros(nb, np.bool_)
    fl = np.zeros(nb, np.float64)
    stack = np.empty(nn, np.int64)
    top = 0
    for k in range(nn):
        if deg[k] == 1:
            stack[top] = k
            top += 1
    while top > 0:
        top -= 1
        node = stack[top]
        if deg[node] != 1:
            continue
        e = -1
        for s in range(start[node], start[node + 1]):
            if not used[adj[s]]:
                e = adj[s]
                break
        if e < 0:
            continue
        other = n + ej[e] if node < n else ei[e]
        x = rem[node]
        if x < 0.0:
            x = 0.0
        fl[e] = x
        used[e] = True
        rem[node] -= x
        rem[other] -= x
        deg[node] -= 1
        deg[other] -= 1
        if deg[other] == 1:
            stack[top] = other
            top += 1
    return fl


@njit(cache=True)
def solve_transport(a, b, C, max_iter, block):
    n = a.size
    m = b.size
    nn = n + m
    nb = nn - 1
    total = n * m
    ei, ej, fl = _northwest(a, b)

    deg = np.empty(nn + 1, np.int64)
    start = np.empty(nn + 1, np.int64)
    adj = np.empty(2 * nb, np.int64)
    fill = np.empty(nn, np.int64)
    parent = np.empty(nn, np.int64)
    pedge = np.empty(nn, np.int64)
    depth = np.empty(nn, np.int64)
    pot = np.empty(nn, np.float64)
    queue = np.empty(nn, np.int64)

    cmax = 0.0
    for i in range(n):
        for j in range(m):
            if abs(C[i, j]) > cmax:
                cmax = abs(C[i, j])
    eps = 1e-13 * (cmax + 1.0)
    flow_eps = 1e-15

    scan = 0
    bland = False
    degenerate_run = 0
    status = STATUS_MAX_ITER
    it = 0
    while it < max_iter:
        _rebuild_tree(n, m, ei, ej, C, deg, start, adj, fill, parent, pedge, depth, pot, queue)

        bi = -1
        bj = -1
        if bland:
            for idx in range(total):
                i = idx // m
                j = idx - i * m
                if C[i, j] - pot[i] - pot[n + j] < -eps:
                    bi = i
                    bj = j
                    break
        else:
            best = -eps
            checked = 0
            while checked < total:
                cnt = min(block, total - checked)
                for _ in range(cnt):
                    i = scan // m
                    j = scan - i * m
                    r = C[i, j] - pot[i] - pot[n + j]
                    if r < best:
                        best = r
                        bi = i
                        bj = j
                    scan += 1
                    if scan == total:
                        scan = 0
                checked += cnt
                if bi >= 0:
                    break
        if bi < 0:
            status = STATUS_OPTIMAL
            break

        # cycle through the tree path between row bi and column bj
        na = bi
        nbn = n + bj
        da = 1
        db = 1
        theta = np.inf
        leave = -1
        while na != nbn:
            if depth[na] >= depth[nbn]:
                e = pedge[na]
                minus = (da % 2) == 1
                da += 1
                na = parent[na]
            else:
                e = pedge[nbn]
                minus = (db % 2) == 1
                db += 1
                nbn = parent[nbn]
            if minus:
                if fl[e] < theta:
                    theta = fl[e]
                    leave = e
                elif fl[e] == theta and (ei[e] < ei[leave] or (ei[e] == ei[leave] and ej[e] < ej[leave])):
                    leave = e

        # apply the pivot along the same path
        na = bi
        nbn = n + bj
        da = 1
        db = 1
        while na != nbn:
            if depth[na] >= depth[nbn]:
                e = pedge[na]
                minus = (da % 2) == 1
                da += 1
                na = parent[na]
            else:
                e = pedge[nbn]
                minus = (db % 2) == 1
                db += 1
                nbn = parent[nbn]
            if minus:
                fl[e] -= theta
            else:
                fl[e] += theta
        ei[leave] = bi
        ej[leave] = bj
        fl[leave] = theta

        if theta <= flow_eps:
            degenerate_run += 1
            if degenerate_run > BLAND_AFTER * nn:
                bland = True
        else:
            degenerate_run = 0
            bland = False
        it += 1

    fl = _peel_flows(n, m, a, b, ei, ej)
    _rebuild_tree(n, m, ei, ej, C, deg, start, adj, fill, parent, pedge, depth, pot, queue)
    return ei, ej, fl, pot[:n].copy(), pot[n:].copy(), it, status


def pricing_block(n, m):
    total = n * m
    if total <= _FULL_PRICING_LIMIT:
        return total
    return max(int(np.sqrt(total)), 64)
