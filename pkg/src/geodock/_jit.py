"""Compiled inner loops of the docking kernel.

Every floating-point expression here mirrors the numpy reference in
:mod:`geodock.geometry` operation for operation, so scores agree bit for bit.
Only flags that cannot change a finite result are relaxed.
"""

import math

import numba as nb
import numpy as np

from .geometry import EPSILON, rodrigues_matrix

_FLAGS = {"nnan", "ninf", "nsz"}

_rodrigues = nb.njit(inline="always")(rodrigues_matrix)

jit = nb.njit(cache=True, nogil=True, fastmath=_FLAGS)


@jit
def query_rows(pose, rows, pk, out):
    """``out[a]`` = squared distance from ``pose[a]`` to the nearest pocket point.

    ``pk`` is ``(px, py, pz, origin, cell, shape, offsets, candidates)``; a
    zero-sized ``shape`` means plain brute force. The lookup is written out
    in this loop on purpose: a call per atom, even to a compiled helper,
    costs several times the scan over a grid cell's few candidates.
    """
    px, py, pz, origin, cell, shape, offsets, cands = pk
    use_grid = shape[0] > 0
    for a in rows:
        x = pose[a, 0]
        y = pose[a, 1]
        z = pose[a, 2]
        best = np.inf
        inside = False
        fx = fy = fz = 0
        if use_grid:
            fx = math.floor((x - origin[0]) / cell)
            fy = math.floor((y - origin[1]) / cell)
            fz = math.floor((z - origin[2]) / cell)
            inside = (0.0 <= fx < shape[0]) and (0.0 <= fy < shape[1]) and (0.0 <= fz < shape[2])
        if inside:
            c = (int(fx) * shape[1] + int(fy)) * shape[2] + int(fz)
            for k in range(offsets[c], offsets[c + 1]):
                j = cands[k]
                dx = x - px[j]
                dy = y - py[j]
                dz = z - pz[j]
                best = min(best, dx * dx + dy * dy + dz * dz)
        else:
            for j in range(px.shape[0]):
                dx = x - px[j]
                dy = y - py[j]
                dz = z - pz[j]
                best = min(best, dx * dx + dy * dy + dz * dz)
        out[a] = best


@jit
def all_min_sq(pose, pk, out):
    query_rows(pose, np.arange(pose.shape[0]), pk, out)


@jit
def score_from_sq(d2):
    total = 0.0
    for i in range(d2.shape[0]):
        total += max(d2[i], EPSILON)
    return d2.shape[0] / total


@jit
def overlap(pose, pk):
    d2 = np.empty(pose.shape[0])
    all_min_sq(pose, pk, d2)
    return score_from_sq(d2)


@jit
def _rotate_into(pose, out, atoms, ox, oy, oz, r):
    r00, r01, r02, r10, r11, r12, r20, r21, r22 = r
    for a in atoms:
        dx = pose[a, 0] - ox
        dy = pose[a, 1] - oy
        dz = pose[a, 2] - oz
        out[a, 0] = ox + (r00 * dx + r01 * dy + r02 * dz)
        out[a, 1] = oy + (r10 * dx + r11 * dy + r12 * dz)
        out[a, 2] = oz + (r20 * dx + r21 * dy + r22 * dz)


@jit
def _axis(pose, anchor, pivot):
    ox = pose[anchor, 0]
    oy = pose[anchor, 1]
    oz = pose[anchor, 2]
    ax = pose[pivot, 0] - ox
    ay = pose[pivot, 1] - oy
    az = pose[pivot, 2] - oz
    norm = math.sqrt(ax * ax + ay * ay + az * az)
    return ox, oy, oz, ax / norm, ay / norm, az / norm, norm


@jit
def _candidate(pose, scratch, cand_d2, atoms, bi, bj, blim, pk,
               ox, oy, oz, kx, ky, kz, c, s):
    """Score of ``pose`` with ``atoms`` rotated, or -1.0 when it bumps.

    ``scratch`` must equal ``pose`` outside ``atoms``; ``cand_d2`` must hold
    the current per-atom minima outside ``atoms``.
    """
    r = _rodrigues(kx, ky, kz, c, s)
    _rotate_into(pose, scratch, atoms, ox, oy, oz, r)
    for q in range(bi.shape[0]):
        i = bi[q]
        j = bj[q]
        dx = scratch[i, 0] - scratch[j, 0]
        dy = scratch[i, 1] - scratch[j, 1]
        dz = scratch[i, 2] - scratch[j, 2]
        if dx * dx + dy * dy + dz * dz < blim[q]:
            return -1.0
    query_rows(scratch, atoms, pk, cand_d2)
    return score_from_sq(cand_d2)


@jit
def _reachable_pairs(pose, bi, bj, blim, ox, oy, oz, kx, ky, kz):
    """Drop pairs that cannot bump at any angle about the current axis.

    Each atom keeps its axial coordinate and its distance from the axis while
    spinning, so a pair's closest approach is known up front. A small
    relative margin keeps borderline pairs, which makes the pruning exact.
    """
    keep = np.empty(bi.shape[0], dtype=np.int64)
    n = 0
    for q in range(bi.shape[0]):
        i = bi[q]
        j = bj[q]
        ix = pose[i, 0] - ox
        iy = pose[i, 1] - oy
        iz = pose[i, 2] - oz
        jx = pose[j, 0] - ox
        jy = pose[j, 1] - oy
        jz = pose[j, 2] - oz
        hi = ix * kx + iy * ky + iz * kz
        hj = jx * kx + jy * ky + jz * kz
        ri = math.sqrt(max(ix * ix + iy * iy + iz * iz - hi * hi, 0.0))
        rj = math.sqrt(max(jx * jx + jy * jy + jz * jz - hj * hj, 0.0))
        closest = (hi - hj) ** 2 + (ri - rj) ** 2
        if closest < blim[q] * (1.0 + 1e-6) + 1e-6:
            keep[n] = q
            n += 1
    keep = keep[:n]
    return bi[keep], bj[keep], blim[keep]


@jit
def fragment_pass(pose, atoms, anchor, pivot, bi, bj, blim, pk,
                  cos_t, sin_t, step, tile):
    """Optimise one fragment in place.

    ``tile == 0`` runs the flat scan over multiples of ``step``; otherwise the
    two-phase tiled search (tile centres, then the best tile at ``step``).
    Returns (best_angle, best_score, evaluations, checks).
    """
    d2 = np.empty(pose.shape[0])
    all_min_sq(pose, pk, d2)
    return _pass(pose, d2, np.empty_like(pose), np.empty_like(d2), atoms, anchor, pivot,
                 bi, bj, blim, pk, cos_t, sin_t, step, tile)


@jit
def _pass(pose, d2, scratch, cand_d2, atoms, anchor, pivot, bi, bj, blim, pk,
          cos_t, sin_t, step, tile):
    # d2 holds the per-atom minima of pose and is kept current, so a sweep
    # only re-queries the atoms a committed rotation has moved.
    s0 = score_from_sq(d2)
    scratch[:] = pose
    cand_d2[:] = d2
    ox, oy, oz, kx, ky, kz, norm = _axis(pose, anchor, pivot)
    if norm < 1e-9:
        return -1, s0, 0, 0
    bi, bj, blim = _reachable_pairs(pose, bi, bj, blim, ox, oy, oz, kx, ky, kz)

    evals = 0
    checks = 0
    best_angle = 0
    best = s0
    if tile == 0:
        evals += 1
        checks += 1
        for ang in range(step, 360, step):
            checks += 1
            sc = _candidate(pose, scratch, cand_d2, atoms, bi, bj, blim, pk,
                            ox, oy, oz, kx, ky, kz, cos_t[ang], sin_t[ang])
            if sc >= 0.0:
                evals += 1
                if sc > best:
                    best = sc
                    best_angle = ang
    else:
        half = tile // 2
        win_start = -1
        win_score = -1.0
        for start in range(0, 360, tile):
            ang = start + half
            checks += 1
            sc = _candidate(pose, scratch, cand_d2, atoms, bi, bj, blim, pk,
                            ox, oy, oz, kx, ky, kz, cos_t[ang], sin_t[ang])
            if sc >= 0.0:
                evals += 1
                if sc > win_score:
                    win_score = sc
                    win_start = start
        if win_start >= 0:
            tile_best_angle = win_start + half
            tile_best = win_score
            for ang in range(win_start, win_start + tile, step):
                if ang == win_start + half:
                    continue
                checks += 1
                if ang == 0:
                    sc = s0
                else:
                    sc = _candidate(pose, scratch, cand_d2, atoms, bi, bj, blim, pk,
                                    ox, oy, oz, kx, ky, kz, cos_t[ang], sin_t[ang])
                if sc >= 0.0:
                    evals += 1
                    if sc > tile_best:
                        tile_best = sc
                        tile_best_angle = ang
            # The entry pose is the fallback; it never wins a tie.
            if tile_best >= s0:
                best = tile_best
                best_angle = tile_best_angle

    if best_angle != 0:
        r = _rodrigues(kx, ky, kz, cos_t[best_angle], sin_t[best_angle])
        _rotate_into(pose, pose, atoms, ox, oy, oz, r)
        query_rows(pose, atoms, pk, d2)
    return best_angle, best, evals, checks


@jit
def dock(pose, frag_ptr, frag_atoms, frag_anchor, frag_pivot, frag_rel,
         bump_ptr, bump_i, bump_j, bump_lim, pk, cos_t, sin_t,
         hp_step, lp_step, threshold, repetitions, tile):
    """Full tunable kernel over all fragments; ``pose`` is updated in place.

    ``tile == 0`` disables refinement. Returns (score, evaluations, checks,
    failed_fragment) where failed_fragment is -1 unless an axis degenerated.
    """
    n_frag = frag_anchor.shape[0]
    evals = 0
    checks = 0
    score = -1.0
    if n_frag == 0:
        return overlap(pose, pk), 1, 1, -1
    d2 = np.empty(pose.shape[0])
    all_min_sq(pose, pk, d2)
    scratch = np.empty_like(pose)
    cand_d2 = np.empty_like(d2)
    for _ in range(repetitions):
        for f in range(n_frag):
            atoms = frag_atoms[frag_ptr[f]:frag_ptr[f + 1]]
            rot = f // 2
            lo = bump_ptr[rot]
            hi = bump_ptr[rot + 1]
            if frag_rel[f] <= threshold:
                step = lp_step
                t = 0
            else:
                step = hp_step
                t = tile
            ang, score, e, c = _pass(
                pose, d2, scratch, cand_d2, atoms, frag_anchor[f], frag_pivot[f],
                bump_i[lo:hi], bump_j[lo:hi], bump_lim[lo:hi], pk,
                cos_t, sin_t, step, t)
            if ang < 0:
                return score, evals, checks, f
            evals += e
            checks += c
    return score, evals, checks, -1


@jit
def profile(pose, atoms, anchor, pivot, bi, bj, blim, pk, cos_t, sin_t,
            scores, valid):
    """Score every integer degree of one fragment without changing ``pose``."""
    n = pose.shape[0]
    base = np.empty(n)
    all_min_sq(pose, pk, base)
    cand_d2 = base.copy()
    scratch = pose.copy()
    ox, oy, oz, kx, ky, kz, norm = _axis(pose, anchor, pivot)
    bi, bj, blim = _reachable_pairs(pose, bi, bj, blim, ox, oy, oz, kx, ky, kz)
    scores[0] = score_from_sq(base)
    valid[0] = True
    for ang in range(1, 360):
        sc = _candidate(pose, scratch, cand_d2, atoms, bi, bj, blim, pk,
                        ox, oy, oz, kx, ky, kz, cos_t[ang], sin_t[ang])
        if sc >= 0.0:
            scores[ang] = sc
            valid[ang] = True
        else:
            scores[ang] = 0.0
            valid[ang] = False
