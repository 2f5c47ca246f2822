"""Pure numpy/Python implementations of the hot loops (fallback backend)."""

import numpy as np


def disc_counts(xs, ys, owner, cx, cy, radius, m):
    inside = np.hypot(xs - cx, ys - cy) < radius
    return np.bincount(owner[inside], minlength=m).astype(np.int64)


def disc_sums(xs, ys, owner, weights, cx, cy, radius, m):
    inside = np.hypot(xs - cx, ys - cy) < radius
    out = np.zeros(m, dtype=np.float64)
    # sequential accumulation keeps float results identical to the compiled loop
    np.add.at(out, owner[inside], weights[inside])
    return out


def grid_counts(xs, ys, owner, min_x, min_y, max_x, max_y, k, m):
    col = np.clip(np.floor(((xs - min_x) / (max_x - min_x)) * k), 0, k - 1).astype(np.int64)
    row = np.clip(np.floor(((max_y - ys) / (max_y - min_y)) * k), 0, k - 1).astype(np.int64)
    flat = owner * (k * k) + row * k + col
    return np.bincount(flat, minlength=m * k * k).astype(np.int64).reshape(m, k * k)


def greedy_color(indptr, indices, caps):
    m = len(indptr) - 1
    indptr = indptr.tolist()
    indices = indices.tolist()
    caps = caps.tolist()
    color = [0] * m
    size = [0]
    gcap = [0]
    for u in range(m):
        taken = {color[v] for v in indices[indptr[u]:indptr[u + 1]] if color[v]}
        cap_u = caps[u]
        chosen = 0
        for c in range(1, len(size)):
            if c not in taken and size[c] < min(gcap[c], cap_u):
                chosen = c
                break
        if not chosen:
            size.append(0)
            gcap.append(cap_u)
            chosen = len(size) - 1
        else:
            gcap[chosen] = min(gcap[chosen], cap_u)
        color[u] = chosen
        size[chosen] += 1
    return np.asarray(color, dtype=np.int64)
