"""Mod-2 relative cohomology ranks of split sublevel pairs on a cubical grid.

The difference function is sampled at the vertices of a box grid; the
full cubical complex on the doubled (Khalimsky) grid carries each cell's
filtration value (max over its corners) and a half-space classification
in the splitting coordinate s = xt_n - x_n.  Ranks of pairs
(Delta^tau, Delta^sigma) restricted to a half are computed from the
quotient complex of cells with sigma < value <= tau: a reduction /
coreduction collapse shrinks the complex (numba kernel), and GF(2)
elimination on the surviving core yields the ranks per degree.  Over a
field these homology ranks equal the relative cohomology ranks.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import BadEtaError, InvalidParamsError, UnsupportedDimensionError

__all__ = [
    "CubicalField",
    "build_field",
    "window_ranks",
    "RankSweep",
    "rank_sweep",
    "filtered_groups",
    "sweep_to_csv",
]

_HALves = ("all", "+", "-")

_USE_NUMBA = os.environ.get("GFCAP_NO_NUMBA", "") != "1"
if _USE_NUMBA:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover
        _USE_NUMBA = False

if not _USE_NUMBA:  # pragma: no cover
    def njit(*args, **kwargs):
        def wrap(fn):
            return fn
        if args and callable(args[0]):
            return args[0]
        return wrap


# ---------------------------------------------------------------------------
# collapse kernel

@njit(cache=True)
def _collapse(ids, pos, mshape, strides, qcap):
    """Reduction/coreduction collapse of a window complex.

    ids: flat doubled-grid ids of the window cells; pos: lookup from flat
    id to local index (-1 outside).  Returns the alive mask.  Each step
    cancels a pair whose incidence is a single remaining face/coface, so
    the relative homology of the quotient complex is unchanged and the
    boundary of a surviving cell stays 'geometric faces still alive'.
    """
    n = ids.shape[0]
    d = mshape.shape[0]
    alive = np.ones(n, np.uint8)
    nf = np.zeros(n, np.int32)
    nc = np.zeros(n, np.int32)
    coords = np.empty(d, np.int64)

    for i in range(n):
        cid = ids[i]
        rem = cid
        for k in range(d):
            coords[k] = rem // strides[k]
            rem -= coords[k] * strides[k]
        for k in range(d):
            if coords[k] & 1:
                if pos[cid - strides[k]] >= 0:
                    nf[i] += 1
                if pos[cid + strides[k]] >= 0:
                    nf[i] += 1
            else:
                if coords[k] + 1 < mshape[k] and pos[cid + strides[k]] >= 0:
                    nc[i] += 1
                if coords[k] - 1 >= 0 and pos[cid - strides[k]] >= 0:
                    nc[i] += 1

    queue = np.empty(qcap, np.int64)
    head = 0
    tail = 0
    for i in range(n):
        if nf[i] == 1 or nc[i] == 1:
            queue[tail] = i
            tail += 1

    neigh = np.empty(2 * d, np.int64)
    while head < tail:
        i = queue[head]
        head += 1
        if alive[i] == 0:
            continue
        partner = np.int64(-1)
        if nc[i] == 1:
            # unique coface: free-face reduction pair (i, coface)
            cid = ids[i]
            rem = cid
            for k in range(d):
                coords[k] = rem // strides[k]
                rem -= coords[k] * strides[k]
            for k in range(d):
                if not (coords[k] & 1):
                    if coords[k] + 1 < mshape[k]:
                        j = pos[cid + strides[k]]
                        if j >= 0 and alive[j] == 1:
                            partner = j
                    if coords[k] - 1 >= 0:
                        j = pos[cid - strides[k]]
                        if j >= 0 and alive[j] == 1:
                            partner = j
        elif nf[i] == 1:
            # unique face: coreduction pair (i, face)
            cid = ids[i]
            rem = cid
            for k in range(d):
                coords[k] = rem // strides[k]
                rem -= coords[k] * strides[k]
            for k in range(d):
                if coords[k] & 1:
                    j = pos[cid - strides[k]]
                    if j >= 0 and alive[j] == 1:
                        partner = j
                    j = pos[cid + strides[k]]
                    if j >= 0 and alive[j] == 1:
                        partner = j
        if partner < 0:
            continue
        # remove the pair, propagating the counter updates
        for victim in (i, partner):
            alive[victim] = 0
        for victim in (i, partner):
            cid = ids[victim]
            rem = cid
            for k in range(d):
                coords[k] = rem // strides[k]
                rem -= coords[k] * strides[k]
            nn = 0
            for k in range(d):
                if coords[k] & 1:
                    neigh[nn] = cid - strides[k]
                    nn += 1
                    neigh[nn] = cid + strides[k]
                    nn += 1
                else:
                    if coords[k] - 1 >= 0:
                        neigh[nn] = cid - strides[k]
                        nn += 1
                    if coords[k] + 1 < mshape[k]:
                        neigh[nn] = cid + strides[k]
                        nn += 1
            for t in range(nn):
                j = pos[neigh[t]]
                if j < 0 or alive[j] == 0:
                    continue
                # neighbor below (face of victim) loses a coface; above loses a face
                rem2 = neigh[t]
                # determine direction: face has one fewer odd coordinate
                odd_j = 0
                odd_v = 0
                r2 = neigh[t]
                rv = cid
                for k in range(d):
                    ck = r2 // strides[k]
                    r2 -= ck * strides[k]
                    if ck & 1:
                        odd_j += 1
                    cv = rv // strides[k]
                    rv -= cv * strides[k]
                    if cv & 1:
                        odd_v += 1
                if odd_j < odd_v:
                    nc[j] -= 1
                    if nc[j] == 1 and tail < qcap:
                        queue[tail] = j
                        tail += 1
                else:
                    nf[j] -= 1
                    if nf[j] == 1 and tail < qcap:
                        queue[tail] = j
                        tail += 1
    return alive


@njit(cache=True)
def _cell_dims(ids, strides, mshape):
    n = ids.shape[0]
    d = mshape.shape[0]
    out = np.empty(n, np.int8)
    for i in range(n):
        rem = ids[i]
        dim = 0
        for k in range(d):
            c = rem // strides[k]
            rem -= c * strides[k]
            if c & 1:
                dim += 1
        out[i] = dim
    return out


def _gf2_rank(columns: list) -> int:
    """Rank over GF(2) of integer-bitmask columns."""
    pivots: dict[int, int] = {}
    rank = 0
    for col in columns:
        while col:
            low = col.bit_length() - 1
            other = pivots.get(low)
            if other is None:
                pivots[low] = col
                rank += 1
                break
            col ^= other
    return rank


# ---------------------------------------------------------------------------
# field container

@dataclass
class CubicalField:
    """Sampled difference function with split masks on the doubled grid."""

    axes: list  # 1-D vertex grids per packed coordinate
    values: np.ndarray  # vertex values, shape tuple(len(ax) for ax in axes)
    cell_value: np.ndarray  # flat doubled-grid array: max over corners
    cell_variation: np.ndarray  # flat: max - min over corners
    mask_plus: np.ndarray  # flat bool
    mask_minus: np.ndarray
    mshape: np.ndarray  # doubled-grid shape
    strides: np.ndarray
    domain_dim: int
    fiber_dim: int
    critical_values: Optional[np.ndarray] = None
    value_min: float = 0.0
    value_max: float = 0.0
    core_extent: float = 0.0  # |coordinate| bound of the uniform fiber-axis core
    core_mask: Optional[np.ndarray] = None  # flat bool: cells inside the core
    domain_mask: Optional[np.ndarray] = None  # flat bool: plus-shaped domain

    @property
    def n_cells(self) -> int:
        return int(self.cell_value.size)

    def mask(self, half: str) -> Optional[np.ndarray]:
        if half in ("all", None):
            return None
        if half == "+":
            return self.mask_plus
        if half == "-":
            return self.mask_minus
        raise InvalidParamsError(f"half must be one of 'all', '+', '-', got {half!r}")

    def variation_at(self, point: np.ndarray) -> float:
        """Value spread of the grid cells around a domain point."""
        point = np.asarray(point, dtype=float)
        idx = []
        for k, ax in enumerate(self.axes):
            j = int(np.clip(np.searchsorted(ax, point[k]) - 1, 0, len(ax) - 2))
            idx.append(2 * j + 1)
        flat = int(sum(i * s for i, s in zip(idx, self.strides)))
        worst = 0.0
        for off in range(-1, 2):
            for k in range(len(self.axes)):
                j = flat + off * 2 * int(self.strides[k])
                if 0 <= j < self.n_cells:
                    worst = max(worst, float(self.cell_variation[j]))
        return worst

    def band_amplitude(self) -> float:
        """Largest |value| among overlap cells of the two closed halves.

        Restricted to the uniform core of the fiber axes: the geometric
        tails carry coarse diagonal cells living in the trivial
        far-field slab, which never carry sweep content.
        """
        both = self.mask_plus & self.mask_minus
        if self.core_mask is not None:
            both = both & self.core_mask
        if not np.any(both):
            return 0.0
        cv = self.cell_value[both]
        var = self.cell_variation[both]
        return float(np.max(np.maximum(np.abs(cv), np.abs(cv - var))))


def _corner_sweep(values: np.ndarray, op) -> np.ndarray:
    """Spread vertex values over the doubled grid, op-combining corners."""
    arr = values
    for ax in range(values.ndim):
        g = arr.shape[ax]
        new_shape = list(arr.shape)
        new_shape[ax] = 2 * g - 1
        out = np.empty(new_shape, dtype=arr.dtype)
        sl_even = [slice(None)] * arr.ndim
        sl_odd = [slice(None)] * arr.ndim
        sl_lo = [slice(None)] * arr.ndim
        sl_hi = [slice(None)] * arr.ndim
        sl_even[ax] = slice(0, None, 2)
        sl_odd[ax] = slice(1, None, 2)
        sl_lo[ax] = slice(0, g - 1)
        sl_hi[ax] = slice(1, g)
        out[tuple(sl_even)] = arr
        out[tuple(sl_odd)] = op(arr[tuple(sl_lo)], arr[tuple(sl_hi)])
        arr = out
    return arr


def build_field(delta, resolution: int, box=None, critical_data=None,
                margin_cells: int = 2, target_reach: float = 1.3,
                tail_points: int = 7) -> CubicalField:
    """Sample Delta_a on a box grid and classify cells for the split pairs.

    box may be a list of (lo, hi) per packed coordinate (sampled
    uniformly); when omitted the core box is auto-sized from the
    critical data (margin_cells of slack) and the x_n axes grow
    geometric tails until the walls sit entirely outside the window
    |Delta| <= target_reach * max |critical value|.  Boundary critical
    points of the restriction to a wall would otherwise pollute the
    relative pairs with artifacts.
    """
    d = delta.domain_dim
    if d > 4:
        raise UnsupportedDimensionError(
            f"cubical engine supports domain dimension <= 4, got {d}"
        )
    if resolution < 16:
        raise InvalidParamsError(f"resolution must be >= 16, got {resolution}")
    m = delta.m
    fib = delta.fiber

    crit_vals = None
    if critical_data is not None:
        crit_vals = np.array([cd.value for cd in critical_data], dtype=float)

    if box is None:
        if critical_data is None:
            raise InvalidParamsError("auto box sizing needs critical_data")
        pts = np.array([cd.point for cd in critical_data if cd.kind == "isolated"])
        samples = [cd.samples for cd in critical_data if cd.samples is not None]
        if samples:
            pts = np.vstack([pts.reshape(-1, d)] + samples) if pts.size else np.vstack(samples)
        if pts.size == 0:
            raise InvalidParamsError("auto box sizing needs at least one critical point")
        ext = np.max(np.abs(pts), axis=0)
        x_ext = float(np.max(ext[:m])) if m else 0.0
        xn_ext = float(max(ext[m], ext[m + fib]))
        e_ext = float(np.max(np.concatenate([ext[m + 1: m + fib], ext[m + fib + 1:]]))) if fib > 1 else 0.0
        vmax_crit = float(np.max(np.abs(crit_vals))) if crit_vals is not None and crit_vals.size else 1.0
        theta_target = target_reach * vmax_crit

        x_half = x_ext * 1.4 + 1.0
        e_half = e_ext * 1.4 + 1.0
        xn_half = xn_ext * 1.5 + 1.0
        core = {}
        for k in range(m):
            core[k] = np.linspace(-x_half, x_half, max(resolution // 2, 16))
        core[m] = np.linspace(-xn_half, xn_half, resolution)
        for k in range(1, fib):
            core[m + k] = np.linspace(-e_half, e_half, max(resolution // 2, 16))
        far = xn_half * 1.6
        core_extent = xn_half
        for _ in range(12):
            xn_axis = _tailed_axis(core[m], far, tail_points)
            axes = []
            for k in range(m):
                axes.append(core[k])
            axes.append(xn_axis)
            for k in range(1, fib):
                axes.append(core[m + k])
            axes.append(xn_axis)
            for k in range(1, fib):
                axes.append(core[m + k])
            values = _evaluate(delta, axes)
            if (_fiber_walls_clear(values, axes, m, fib, theta_target, core_extent)
                    and _tails_monotone(values, axes, m, fib, core_extent)):
                break
            far *= 1.45
    else:
        if len(box) != d:
            raise InvalidParamsError(f"box must have {d} (lo, hi) entries")
        axes = [np.linspace(lo, hi, resolution) for lo, hi in box]
        if d == m + 2 * fib:
            for k in range(fib):
                if not np.allclose(axes[m + k], axes[m + fib + k]):
                    raise InvalidParamsError("paired fiber axes must share one grid")
        values = _evaluate(delta, axes)

    cell_value = _corner_sweep(values, np.maximum)
    cell_min = _corner_sweep(values, np.minimum)
    variation = cell_value - cell_min

    core_extent = 0.0
    core_mask = None
    domain_mask = None
    if box is None:
        core_extent = xn_half
        core_mask = _core_cells(axes, (m, m + fib), xn_half)
        # excise the tail x tail corners: the diagonal would cross coarse
        # cells there, smearing the split masks far into the wrong half
        dom_p = _core_cells(axes, (m,), xn_half)
        dom_q = _core_cells(axes, (m + fib,), xn_half)
        domain_mask = dom_p | dom_q

    if d == m + 2 * fib:
        mask_plus, mask_minus = _split_masks(axes, m, fib)
    else:
        # not a difference-function layout: no splitting structure
        mask_plus = np.ones(cell_value.shape, dtype=bool)
        mask_minus = np.ones(cell_value.shape, dtype=bool)

    mshape = np.array(cell_value.shape, dtype=np.int64)
    strides = np.empty_like(mshape)
    acc = 1
    for k in range(len(mshape) - 1, -1, -1):
        strides[k] = acc
        acc *= mshape[k]

    return CubicalField(
        axes=axes,
        values=values,
        cell_value=cell_value.ravel(),
        cell_variation=variation.ravel(),
        mask_plus=mask_plus.ravel(),
        mask_minus=mask_minus.ravel(),
        mshape=mshape,
        strides=strides,
        domain_dim=d,
        fiber_dim=delta.parent.fiber_dim,
        critical_values=crit_vals,
        value_min=float(values.min()),
        value_max=float(values.max()),
        core_extent=core_extent,
        core_mask=core_mask,
        domain_mask=domain_mask,
    )


def _core_cells(axes, fiber_axes, extent: float) -> np.ndarray:
    """Flat mask of doubled-grid cells inside the fiber-axis core region."""
    mshape = tuple(2 * len(ax) - 1 for ax in axes)
    keep = np.ones(mshape, dtype=bool)
    for ax in fiber_axes:
        keep_v = np.abs(axes[ax]) <= extent * (1 + 1e-9)
        line = np.empty(mshape[ax], dtype=bool)
        line[0::2] = keep_v
        line[1::2] = keep_v[:-1] & keep_v[1:]
        shape = [1] * len(mshape)
        shape[ax] = -1
        keep &= line.reshape(shape)
    return keep.ravel()


def _tailed_axis(core: np.ndarray, far: float, tail_points: int) -> np.ndarray:
    """Core grid extended by geometrically growing steps out to +-far."""
    hi = float(core[-1])
    if far <= hi or tail_points < 1:
        return core
    ratio = (far / hi) ** (1.0 / tail_points)
    tail = hi * ratio ** np.arange(1, tail_points + 1)
    return np.concatenate([-tail[::-1], core, tail])


def _fiber_walls_clear(values: np.ndarray, axes, m: int, fib: int, theta: float,
                       core_extent: float) -> bool:
    """True when each x_n / xt_n wall clears the window |Delta| <= theta.

    The wall slab is restricted to the core range of the opposite fiber
    axis: the far corner where both fiber coordinates sit in the tails
    is the monotone far-field slab, which carries no wall-critical
    points.
    """
    for axis, other in ((m, m + fib), (m + fib, m)):
        other_keep = np.abs(axes[other]) <= core_extent * (1 + 1e-9)
        for side in (0, -1):
            sl = [slice(None)] * values.ndim
            sl[axis] = side
            wall = np.take(values[tuple(sl)], np.flatnonzero(other_keep),
                           axis=other if other < axis else other - 1)
            if not (np.all(wall > theta) or np.all(wall < -theta)):
                return False
    return True


def _tails_monotone(values: np.ndarray, axes, m: int, fib: int, core_extent: float) -> bool:
    """Delta must be strictly monotone along each fiber tail (cut walls of
    the excised corners are then transverse to the gradient flow)."""
    for axis in (m, m + fib):
        grid = axes[axis]
        inside = np.abs(grid) <= core_extent * (1 + 1e-9)
        lo_end = int(np.argmax(inside))
        hi_start = len(grid) - int(np.argmax(inside[::-1]))
        other = m + fib if axis == m else m
        other_keep = np.flatnonzero(np.abs(axes[other]) <= core_extent * (1 + 1e-9))
        vals = np.take(values, other_keep, axis=other)
        for sl in (slice(0, lo_end + 1), slice(hi_start - 1, len(grid))):
            seg = np.take(vals, range(*sl.indices(len(grid))), axis=axis)
            if seg.shape[axis] < 2:
                continue
            dd = np.diff(seg, axis=axis)
            if not (np.all(dd > 0) or np.all(dd < 0)):
                return False
    return True


def _evaluate(delta, axes):
    mesh = np.meshgrid(*axes, indexing="ij")
    Z = np.stack(mesh, axis=-1)
    return np.asarray(delta.eval(Z), dtype=float)


def _split_masks(axes, m, fib):
    """Closed-half masks: cells fully inside a half plus straddling cells
    (assigned to both) and the closures that keep each mask a subcomplex."""
    svals = _s_grid(axes, m, fib)
    s_max = _corner_sweep(svals, np.maximum)
    s_min = _corner_sweep(svals, np.minimum)
    scale = float(axes[m][1] - axes[m][0])
    tol = 1e-9 * (1.0 + scale)
    mask_plus = s_max > tol
    mask_minus = s_min < -tol
    diag = (np.abs(s_max) <= tol) & (np.abs(s_min) <= tol)
    mask_plus |= diag
    mask_minus |= diag
    _close_faces(mask_plus)
    _close_faces(mask_minus)
    return mask_plus, mask_minus


def _close_faces(mask: np.ndarray) -> None:
    """Mark all faces of marked cells (in place, doubled-grid layout).

    One pass per axis suffices: faces differ by -1/+1 on one odd axis and
    later axes see the marks accumulated by earlier ones.
    """
    for ax in range(mask.ndim):
        n = mask.shape[ax]
        sl_c = [slice(None)] * mask.ndim
        sl_m = [slice(None)] * mask.ndim
        sl_p = [slice(None)] * mask.ndim
        sl_c[ax] = slice(1, n, 2)
        sl_m[ax] = slice(0, n - 1, 2)
        sl_p[ax] = slice(2, n, 2)
        mask[tuple(sl_m)] |= mask[tuple(sl_c)]
        mask[tuple(sl_p)] |= mask[tuple(sl_c)]


def _s_grid(axes, m, fib):
    shape = tuple(len(ax) for ax in axes)
    xn = axes[m].reshape([-1 if k == m else 1 for k in range(len(axes))])
    xtn = axes[m + fib].reshape([-1 if k == m + fib else 1 for k in range(len(axes))])
    return np.broadcast_to(xtn - xn, shape).astype(float)


# ---------------------------------------------------------------------------
# windowed ranks

def window_ranks(field: CubicalField, sigma: float, tau: float, half: str = "all") -> np.ndarray:
    """Mod-2 ranks of H^k(Delta^tau_half, Delta^sigma_half), k = 0..domain_dim."""
    if not tau > sigma:
        raise InvalidParamsError(f"window needs sigma < tau, got [{sigma}, {tau}]")
    sel = (field.cell_value > sigma) & (field.cell_value <= tau)
    msk = field.mask(half)
    if msk is not None:
        sel &= msk
    if field.domain_mask is not None:
        sel &= field.domain_mask
    ids = np.flatnonzero(sel).astype(np.int64)
    d = field.domain_dim
    ranks = np.zeros(d + 1, dtype=int)
    if ids.size == 0:
        return ranks
    pos = np.full(field.n_cells, -1, dtype=np.int64)
    pos[ids] = np.arange(ids.size, dtype=np.int64)
    qcap = int((2 * d + 2) * ids.size + 16)
    alive = _collapse(ids, pos, field.mshape, field.strides, qcap)
    core_ids = ids[alive.astype(bool)]
    if core_ids.size == 0:
        return ranks
    pos_core = np.full(field.n_cells, -1, dtype=np.int64)
    pos_core[core_ids] = np.arange(core_ids.size, dtype=np.int64)
    dims = _cell_dims(core_ids, field.strides, field.mshape)
    # assemble facet bitmask columns per degree and eliminate
    bnd = _facet_lists(core_ids, pos_core, field.strides, field.mshape)
    n_by_dim = np.bincount(dims, minlength=d + 2)
    rank_bnd = np.zeros(d + 2, dtype=int)
    for k in range(1, d + 1):
        cols = []
        for i in np.flatnonzero(dims == k):
            colmask = 0
            for j in bnd[i]:
                if j >= 0:
                    colmask |= 1 << int(j)
            if colmask:
                cols.append(colmask)
        rank_bnd[k] = _gf2_rank(cols)
    for k in range(d + 1):
        ranks[k] = int(n_by_dim[k]) - rank_bnd[k] - rank_bnd[k + 1]
    return ranks


def _facet_lists(core_ids, pos_core, strides, mshape):
    n = core_ids.shape[0]
    d = mshape.shape[0]
    out = np.full((n, 2 * d), -1, dtype=np.int64)
    for i in range(n):
        cid = int(core_ids[i])
        rem = cid
        nn = 0
        for k in range(d):
            c = rem // int(strides[k])
            rem -= c * int(strides[k])
            if c & 1:
                for sidestep in (-int(strides[k]), int(strides[k])):
                    j = pos_core[cid + sidestep]
                    if j >= 0:
                        out[i, nn] = j
                        nn += 1
    return out


# ---------------------------------------------------------------------------
# sweeps

@dataclass
class RankSweep:
    """Per-level ranks of the lower and upper split pairs.

    Lower pairs are (Delta^{-eta}, Delta^lambda) with lambda < -eta and
    upper pairs (Delta^Lambda, Delta^eta) with Lambda > eta, each for the
    unsplit complex and both closed halves.
    """

    eta: float
    levels: np.ndarray
    ranks: dict  # (kind, half) -> {level: ndarray of ranks per degree}
    domain_dim: int
    fiber_dim: int
    field: Optional[CubicalField] = None

    def rank(self, kind: str, half: str, level: float) -> np.ndarray:
        return self.ranks[(kind, half)][level]

    def rows(self):
        for (kind, half), per_level in sorted(self.ranks.items()):
            for level in sorted(per_level):
                for deg, r in enumerate(per_level[level]):
                    yield (level, kind, half, deg, int(r))


def rank_sweep(field: CubicalField, eta: float, levels: Iterable[float]) -> RankSweep:
    """Ranks of all six pair families at the requested filtration levels.

    eta must separate 0 from every nonzero critical value (checked
    against the field's known critical values when present) and exceed
    the diagonal band's sampled amplitude, else BadEtaError.
    """
    if eta <= 0:
        raise BadEtaError(f"eta must be positive, got {eta}")
    if field.critical_values is not None and field.critical_values.size:
        nz = np.abs(field.critical_values[np.abs(field.critical_values) > 1e-12])
        if nz.size and eta >= float(np.min(nz)):
            raise BadEtaError(
                f"eta={eta:g} does not separate 0 from the smallest nonzero "
                f"critical value {float(np.min(nz)):g}"
            )
    band = field.band_amplitude()
    if eta <= band:
        raise BadEtaError(
            f"eta={eta:g} is below the diagonal band amplitude {band:g}; "
            f"increase the resolution or eta"
        )
    levels = np.asarray(sorted(set(float(v) for v in levels)))
    if np.any(np.abs(levels) <= eta):
        raise InvalidParamsError("sweep levels must satisfy |level| > eta")
    ranks = {}
    for half in _HALves:
        lower = {}
        upper = {}
        for lam in levels[levels < 0]:
            lower[float(lam)] = window_ranks(field, float(lam), -eta, half)
        for Lam in levels[levels > 0]:
            upper[float(Lam)] = window_ranks(field, eta, float(Lam), half)
        ranks[("lower", half)] = lower
        ranks[("upper", half)] = upper
    return RankSweep(
        eta=eta,
        levels=levels,
        ranks=ranks,
        domain_dim=field.domain_dim,
        fiber_dim=field.fiber_dim,
        field=field,
    )


def filtered_groups(sweep: RankSweep, N: int) -> dict:
    """Rank functions of the filtered cohomology groups in slice degrees.

    Lower groups are re-indexed by N+1, upper groups by N+2; returns
    {(kind, half, slice_degree): list of (level, rank)} sorted by level.
    """
    out = {}
    for (kind, half), per_level in sweep.ranks.items():
        shift = N + 1 if kind == "lower" else N + 2
        for level in sorted(per_level):
            arr = per_level[level]
            for deg in range(len(arr)):
                sd = deg - shift
                key = (kind, half, sd)
                out.setdefault(key, []).append((float(level), int(arr[deg])))
    return out


def sweep_to_csv(sweep: RankSweep) -> str:
    lines = ["level,pair,half,degree,rank"]
    for level, kind, half, deg, r in sweep.rows():
        lines.append(f"{level:.12g},{kind},{half},{deg},{r}")
    return "\n".join(lines) + "\n"
