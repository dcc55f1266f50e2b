"""Slice extraction and planar diagram data.

A slice at height a is the 1-manifold (n=2) or 2-manifold (n=3) cut out
by dF/dx_n = a, dF/de = 0.  Components are traced by predictor-corrector
continuation and projected to (x, y) = (x, dF/dx); the diagram records
double points with signs, per-crossing loop integrals of y dx (the lobe
areas), writhe and turning number.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import (
    DegenerateCrossingError,
    InvalidParamsError,
    NonTransverseSliceError,
)
from .family import GeneratingFamily

__all__ = [
    "GridSpec",
    "FiberCriticalPoint",
    "Crossing",
    "Component",
    "SliceDiagram",
    "extract_slice",
    "double_points",
    "writhe",
    "euler_obstruction",
    "embedded_circle_diagram",
    "diagram_to_csv",
    "diagram_to_svg",
]


@dataclass(frozen=True)
class GridSpec:
    """Resolution knobs for seeding and tracing."""

    scan_points: int = 48
    box: Optional[float] = None  # half-width of the seed box; default from family
    step: Optional[float] = None  # arc-length step; default box-scaled
    tol: float = 1e-11
    meridians: int = 12  # section planes for n = 3
    max_steps: int = 20000


@dataclass(frozen=True)
class FiberCriticalPoint:
    """A point of the fiber-critical locus with its projection data."""

    x: np.ndarray
    x_n: float
    e: np.ndarray
    y: np.ndarray

    @property
    def z(self) -> np.ndarray:
        """Packed family coordinates (x, x_n, e)."""
        return np.concatenate([self.x, [self.x_n], self.e])

    @property
    def proj(self) -> np.ndarray:
        """Projection to R^{2(n-1)}: (x, y)."""
        return np.concatenate([self.x, self.y])


@dataclass(frozen=True)
class Crossing:
    """A transverse double point of the projected slice."""

    position: np.ndarray  # (2(n-1),)
    sign: Optional[int]  # +-1 for n = 2, None for n > 2
    component: int
    params: tuple  # arclength parameters of the two branches (s_under, s_over)
    under: FiberCriticalPoint  # smaller x_n
    over: FiberCriticalPoint  # larger x_n
    under_ptan: Optional[np.ndarray] = None  # traversal-oriented unit tangents
    over_ptan: Optional[np.ndarray] = None

    @property
    def xn_separation(self) -> float:
        return self.over.x_n - self.under.x_n


@dataclass(frozen=True)
class Component:
    """One closed traced component.

    vertices[k] holds packed coordinates (x, x_n, e); proj[k] the planar
    image (x, y); ptan[k] the unit tangent of the projected curve; s[k]
    the cumulative arclength of the projection.  The polyline is cyclic:
    the segment after vertices[-1] returns to vertices[0].
    """

    vertices: np.ndarray
    proj: np.ndarray
    s: np.ndarray
    tangents: Optional[np.ndarray] = None  # unit tangents in packed z-space
    ptan: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return self.vertices.shape[0]

    @property
    def length(self) -> float:
        return float(self.s[-1])

    def point(self, k: int, base_dim: int, fiber_dim: int) -> FiberCriticalPoint:
        m = base_dim - 1
        z = self.vertices[k % len(self)]
        return FiberCriticalPoint(
            x=z[:m], x_n=float(z[m]), e=z[m + 1:], y=self.proj[k % len(self)][m:]
        )


def hermite_segment_integral(p0, p1, m0, m1) -> float:
    """Integral of y dx over one cubic-Hermite segment of a planar curve.

    p0, p1 are endpoints; m0, m1 the curve derivatives there (already
    scaled to the segment parameter).  Exact for the degree-5 integrand
    via 3-point Gauss-Legendre.
    """
    nodes = (0.5 - np.sqrt(15.0) / 10.0, 0.5, 0.5 + np.sqrt(15.0) / 10.0)
    weights = (5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0)
    total = 0.0
    for t, w in zip(nodes, weights):
        h00 = 2 * t**3 - 3 * t**2 + 1
        h10 = t**3 - 2 * t**2 + t
        h01 = -2 * t**3 + 3 * t**2
        h11 = t**3 - t**2
        d00 = 6 * t**2 - 6 * t
        d10 = 3 * t**2 - 4 * t + 1
        d01 = -6 * t**2 + 6 * t
        d11 = 3 * t**2 - 2 * t
        y = h00 * p0[1] + h10 * m0[1] + h01 * p1[1] + h11 * m1[1]
        dx = d00 * p0[0] + d10 * m0[0] + d01 * p1[0] + d11 * m1[0]
        total += w * y * dx
    return float(total)


def hermite_loop_integral(P: np.ndarray, T: np.ndarray, closed: bool = True) -> float:
    """Integral of y dx along a polyline with unit tangents at the vertices."""
    n = P.shape[0]
    total = 0.0
    last = n if closed else n - 1
    for k in range(last):
        k1 = (k + 1) % n
        chord = float(np.linalg.norm(P[k1] - P[k]))
        if chord == 0.0:
            continue
        total += hermite_segment_integral(P[k], P[k1], T[k] * chord, T[k1] * chord)
    return total


@dataclass
class SliceDiagram:
    """Diagram data of one slice: components, crossings, areas, writhe."""

    height: float
    base_dim: int
    fiber_dim: int
    components: list = field(default_factory=list)
    double_points: list = field(default_factory=list)
    lobe_areas: list = field(default_factory=list)
    writhe: int = 0
    winding: int = 0
    total_signed_area: float = 0.0
    exactness_defect: float = 0.0

    @property
    def is_empty(self) -> bool:
        return not self.components


# ---------------------------------------------------------------------------
# continuation tracer

class _SliceSystem:
    """Constraint system for the fiber-critical locus of a sheared family."""

    def __init__(self, f: GeneratingFamily, a: float, section: Optional[np.ndarray] = None):
        self.f = f
        self.a = a
        self.m = f.base_dim - 1
        self.dim = f.dim
        self.fiber_idx = np.arange(self.m, self.dim)
        # optional affine section row (used to cut meridians for n = 3)
        self.section = section

    def residual(self, z: np.ndarray) -> np.ndarray:
        g = self.f.grad(z)
        r = g[self.fiber_idx].copy()
        r[0] -= self.a
        if self.section is not None:
            r = np.append(r, self.section @ np.append(z, 1.0))
        return r

    def jacobian(self, z: np.ndarray) -> np.ndarray:
        H = self.f.hess(z)
        J = H[self.fiber_idx, :]
        if self.section is not None:
            J = np.vstack([J, self.section[: self.dim]])
        return J

    def proj(self, z: np.ndarray) -> np.ndarray:
        g = self.f.grad(z)
        return np.concatenate([z[: self.m], g[: self.m]])

    def proj_tangent(self, z: np.ndarray, t: np.ndarray) -> np.ndarray:
        """Unit tangent of the projected curve pushed forward from z-space."""
        H = self.f.hess(z)
        v = np.concatenate([t[: self.m], H[: self.m, :] @ t])
        nrm = np.linalg.norm(v)
        return v / nrm if nrm > 0 else v


def _correct(sys: _SliceSystem, z: np.ndarray, tol: float, max_iter: int = 14):
    """Gauss-Newton projection onto the constraint set; returns (z, ok, sigma_min)."""
    sigma_min = np.inf
    for _ in range(max_iter):
        r = sys.residual(z)
        if np.linalg.norm(r) < tol:
            J = sys.jacobian(z)
            sigma = np.linalg.svd(J, compute_uv=False)
            return z, True, float(sigma[-1])
        J = sys.jacobian(z)
        sigma = np.linalg.svd(J, compute_uv=False)
        sigma_min = float(sigma[-1])
        if sigma[-1] < 1e-9 * max(1.0, sigma[0]):
            return z, False, sigma_min
        dz, *_ = np.linalg.lstsq(J, -r, rcond=None)
        z = z + dz
        if not np.all(np.isfinite(z)):
            return z, False, sigma_min
    r = sys.residual(z)
    return z, bool(np.linalg.norm(r) < tol), sigma_min


def _tangent(sys: _SliceSystem, z: np.ndarray, prev: Optional[np.ndarray]) -> np.ndarray:
    J = sys.jacobian(z)
    _, _, vt = np.linalg.svd(J)
    t = vt[-1]
    if prev is not None and np.dot(t, prev) < 0:
        t = -t
    return t


def _trace_component(sys: _SliceSystem, z0: np.ndarray, grid: GridSpec, scale: float):
    """Trace one closed component; returns (points, z-space unit tangents)."""
    h0 = grid.step if grid.step is not None else scale / 400.0
    h_min, h_max = h0 / 50.0, h0 * 2.0
    tol = grid.tol * max(1.0, scale)

    t = _tangent(sys, z0, None)
    pts = [z0.copy()]
    tans = [t.copy()]
    h = h0
    z = z0
    travelled = 0.0
    for _ in range(grid.max_steps):
        z_pred = z + h * t
        z_new, ok, sig = _correct(sys, z_pred, tol)
        if not ok:
            if sig < 1e-8 * max(1.0, scale):
                raise NonTransverseSliceError(
                    sys.a, f"constraint Jacobian rank drop (sigma_min={sig:.2e})"
                )
            if h > h_min:
                h = max(h_min, h / 2.0)
                continue
            raise NonTransverseSliceError(sys.a, "corrector failed at minimal step")
        t_new = _tangent(sys, z_new, t)
        turn = float(np.clip(np.dot(t_new, t), -1.0, 1.0))
        if turn < 0.2 and h > h_min:
            h = max(h_min, h / 2.0)
            continue
        pts.append(z_new)
        tans.append(t_new)
        travelled += float(np.linalg.norm(z_new - z))
        if travelled > 8.0 * h0 and np.linalg.norm(z_new - z0) < 1.2 * h:
            break
        angle = np.arccos(max(turn, -1.0))
        target = 0.05
        h = float(np.clip(h * np.clip(target / max(angle, 1e-4), 0.5, 1.5), h_min, h_max))
        z, t = z_new, t_new
    else:
        raise NonTransverseSliceError(sys.a, "component did not close")
    return np.array(pts), np.array(tans)


def _seed_points(sys: _SliceSystem, grid: GridSpec, box: float) -> list:
    """Coarse lattice scan polished by Gauss-Newton; deduplicated."""
    if sys.section is not None:
        # seed on the section plane itself: z = u * dir + x_n * e_n (+ e = 0)
        nvec = sys.section[: sys.dim]
        direc = np.zeros(sys.dim)
        direc[0], direc[1] = -nvec[1], nvec[0]
        per_axis = max(12, grid.scan_points // 3)
        u = np.linspace(-box, box, per_axis)
        v = np.linspace(-box, box, per_axis)
        base = np.zeros(sys.dim)
        base[sys.m] = 1.0
        mesh = (u[:, None, None] * direc + v[None, :, None] * base).reshape(-1, sys.dim)
    else:
        # lattice resolution per axis, shrinking with dimension to cap the budget
        per_axis = {2: grid.scan_points, 3: 18, 4: 12}.get(sys.dim, 8)
        axes = [np.linspace(-box, box, per_axis) for _ in range(sys.dim)]
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, sys.dim)
    res = np.array([np.linalg.norm(sys.residual(z)) for z in mesh])
    order = np.argsort(res)[: max(60, 3 * per_axis)]
    tol = grid.tol * max(1.0, box)
    seeds = []
    for idx in order:
        z, ok, _ = _correct(sys, mesh[idx].copy(), tol)
        if not ok or np.max(np.abs(z)) > box * 1.5:
            continue
        if any(np.linalg.norm(z - s) < 0.05 * box for s in seeds):
            continue
        seeds.append(z)
    return seeds


def _polyline_arclength(proj: np.ndarray) -> np.ndarray:
    d = np.linalg.norm(np.diff(proj, axis=0), axis=1)
    return np.concatenate([[0.0], np.cumsum(d)])


def _trace_all(f: GeneratingFamily, a: float, grid: GridSpec, section=None) -> list:
    sys = _SliceSystem(f, a, section)
    box = grid.box if grid.box is not None else f.support_radius + 0.5
    seeds = _seed_points(sys, grid, box)
    comps = []
    for z0 in seeds:
        if any(np.min(np.linalg.norm(c.vertices - z0, axis=1)) < 0.08 * box for c in comps):
            continue
        pts, tans = _trace_component(sys, z0, grid, scale=box)
        proj = np.array([sys.proj(z) for z in pts])
        ptan = np.array([sys.proj_tangent(z, t) for z, t in zip(pts, tans)])
        comps.append(
            Component(vertices=pts, proj=proj, s=_polyline_arclength(proj),
                      tangents=tans, ptan=ptan)
        )
    return comps


# ---------------------------------------------------------------------------
# crossings, lobes, writhe

def _segment_intersections(P: np.ndarray):
    """All transverse self-intersections of the closed planar polyline P.

    Returns a list of (i, ti, j, tj, point); segments are P[k] -> P[k+1]
    cyclically.  Adjacent segments are skipped.
    """
    Q = np.vstack([P, P[:1]])
    A = Q[:-1]
    B = Q[1:]
    M = A.shape[0]
    lo = np.minimum(A, B)
    hi = np.maximum(A, B)
    hits = []
    for i in range(M):
        # bounding-box prefilter against all later segments
        j_idx = np.arange(i + 2, M)
        if i == 0:
            j_idx = j_idx[j_idx != M - 1]
        if j_idx.size == 0:
            continue
        mask = np.all(lo[j_idx] <= hi[i], axis=1) & np.all(hi[j_idx] >= lo[i], axis=1)
        for j in j_idx[mask]:
            r = B[i] - A[i]
            q = B[j] - A[j]
            denom = r[0] * q[1] - r[1] * q[0]
            if abs(denom) < 1e-15:
                continue
            dd = A[j] - A[i]
            ti = (dd[0] * q[1] - dd[1] * q[0]) / denom
            tj = (dd[0] * r[1] - dd[1] * r[0]) / denom
            if -1e-12 <= ti <= 1 + 1e-12 and -1e-12 <= tj <= 1 + 1e-12:
                hits.append((i, float(ti), int(j), float(tj), A[i] + ti * r))
    return hits


def _refine_crossing(f: GeneratingFamily, a: float, z1: np.ndarray, z2: np.ndarray):
    """Newton-polish a pair of fiber-critical points with equal projection."""
    sys = _SliceSystem(f, a)
    m = f.base_dim - 1
    d = f.dim

    def full_residual(w):
        za, zb = w[:d], w[d:]
        return np.concatenate(
            [sys.residual(za), sys.residual(zb), sys.proj(za) - sys.proj(zb)]
        )

    def full_jac(w):
        za, zb = w[:d], w[d:]
        Ja, Jb = sys.jacobian(za), sys.jacobian(zb)
        Ha, Hb = f.hess(za), f.hess(zb)
        Pa = np.zeros((2 * m, d))
        Pa[:m, :m] = np.eye(m)
        Pa[m:, :] = Ha[:m, :]
        Pb = np.zeros((2 * m, d))
        Pb[:m, :m] = np.eye(m)
        Pb[m:, :] = Hb[:m, :]
        top = np.hstack([Ja, np.zeros_like(Jb)])
        mid = np.hstack([np.zeros_like(Ja), Jb])
        bot = np.hstack([Pa, -Pb])
        return np.vstack([top, mid, bot])

    w = np.concatenate([z1, z2])
    for _ in range(30):
        r = full_residual(w)
        if np.linalg.norm(r) < 1e-12 * (1.0 + np.linalg.norm(w)):
            break
        J = full_jac(w)
        dw, *_ = np.linalg.lstsq(J, -r, rcond=None)
        w = w + dw
    return w[:d], w[d:]


def double_points(diagram: SliceDiagram, family: Optional[GeneratingFamily] = None,
                  angle_floor: float = 1e-3) -> list:
    """Detect and sign the transverse self-intersections of a diagram.

    For n = 2 each crossing carries the blackboard-framing sign
    det[t_over, t_under] where the over-strand has the larger x_n.  For
    n > 2 crossings are located by proximity search and reported
    unsigned.  Raises DegenerateCrossingError for near-tangential
    intersections or x_n-coincident branches.
    """
    m = diagram.base_dim - 1
    out = []
    if diagram.base_dim == 2:
        sys = _SliceSystem(family, diagram.height) if family is not None else None
        for ci, comp in enumerate(diagram.components):
            P = comp.proj
            for (i, ti, j, tj, pos) in _segment_intersections(P):
                n_seg = len(comp)
                z1 = comp.vertices[i] + ti * (comp.vertices[(i + 1) % n_seg] - comp.vertices[i])
                z2 = comp.vertices[j] + tj * (comp.vertices[(j + 1) % n_seg] - comp.vertices[j])
                t1 = comp.proj[(i + 1) % n_seg] - comp.proj[i]
                t2 = comp.proj[(j + 1) % n_seg] - comp.proj[j]
                t1 = t1 / np.linalg.norm(t1)
                t2 = t2 / np.linalg.norm(t2)
                if sys is not None:
                    z1, z2 = _refine_crossing(family, diagram.height, z1, z2)
                    pos = sys.proj(z1)[:2 * m] * 0.5 + sys.proj(z2)[:2 * m] * 0.5
                    tz1 = _tangent(sys, z1, None)
                    tz2 = _tangent(sys, z2, None)
                    pt1 = sys.proj_tangent(z1, tz1)
                    pt2 = sys.proj_tangent(z2, tz2)
                    t1 = pt1 if np.dot(pt1, t1) >= 0 else -pt1
                    t2 = pt2 if np.dot(pt2, t2) >= 0 else -pt2
                sin_angle = abs(t1[0] * t2[1] - t1[1] * t2[0])
                if sin_angle < angle_floor:
                    raise DegenerateCrossingError(
                        f"crossing angle too small (sin={sin_angle:.2e}); refine the "
                        f"grid or perturb the height"
                    )
                if abs(z1[m] - z2[m]) <= 1e-6:
                    raise DegenerateCrossingError(
                        f"double point branches share x_n within 1e-6 at height "
                        f"{diagram.height!r}"
                    )
                seg_i = float(np.linalg.norm(comp.proj[(i + 1) % n_seg] - comp.proj[i]))
                seg_j = float(np.linalg.norm(comp.proj[(j + 1) % n_seg] - comp.proj[j]))
                s1 = float(comp.s[i] + ti * seg_i)
                s2 = float(comp.s[j] + tj * seg_j)
                if z1[m] > z2[m]:
                    over_z, under_z = z1, z2
                    t_over, t_under = t1, t2
                    s_over, s_under = s1, s2
                else:
                    over_z, under_z = z2, z1
                    t_over, t_under = t2, t1
                    s_over, s_under = s2, s1
                sign = 1 if (t_over[0] * t_under[1] - t_over[1] * t_under[0]) > 0 else -1

                def _fcp(z):
                    if family is not None:
                        y = family.grad(z)[:m]
                    else:
                        y = pos[m:]
                    return FiberCriticalPoint(x=z[:m], x_n=float(z[m]), e=z[m + 1:], y=np.atleast_1d(y))

                out.append(
                    Crossing(
                        position=pos,
                        sign=sign,
                        component=ci,
                        params=(s_under, s_over),
                        under=_fcp(under_z),
                        over=_fcp(over_z),
                        under_ptan=t_under,
                        over_ptan=t_over,
                    )
                )
    else:
        out = _proximity_double_points(diagram, family)
    return out


def _proximity_double_points(diagram: SliceDiagram, family) -> list:
    """Double points of a higher-dimensional immersion by proximity search."""
    m = diagram.base_dim - 1
    allv = np.vstack([c.vertices for c in diagram.components])
    allp = np.vstack([c.proj for c in diagram.components])
    n_pts = allv.shape[0]
    scale = float(np.max(np.abs(allp))) + 1e-12
    pairs = []
    d2 = np.sum((allp[:, None, :] - allp[None, :, :]) ** 2, axis=-1)
    sep = np.abs(allv[:, None, m] - allv[None, :, m])
    cand = np.argwhere((d2 < (0.05 * scale) ** 2) & (sep > 0.2 * scale))
    used = np.zeros(n_pts, dtype=bool)
    for i, j in cand:
        if i >= j or used[i] or used[j]:
            continue
        z1, z2 = allv[i].copy(), allv[j].copy()
        if family is not None:
            z1, z2 = _refine_crossing(family, diagram.height, z1, z2)
        if abs(z1[m] - z2[m]) <= 1e-6:
            continue
        dup = any(np.linalg.norm(c.position - np.concatenate([z1[:m], family.grad(z1)[:m]]))
                  < 1e-4 * scale for c in pairs) if family is not None else False
        if dup:
            continue
        near = (np.linalg.norm(allv - z1, axis=1) < 0.15 * scale) | (
            np.linalg.norm(allv - z2, axis=1) < 0.15 * scale
        )
        used |= near
        y1 = family.grad(z1)[:m] if family is not None else allp[i][m:]
        under_z, over_z = (z1, z2) if z1[m] < z2[m] else (z2, z1)
        pairs.append(
            Crossing(
                position=np.concatenate([z1[:m], np.atleast_1d(y1)]),
                sign=None,
                component=-1,
                params=(0.0, 0.0),
                under=FiberCriticalPoint(under_z[:m], float(under_z[m]), under_z[m + 1:],
                                         np.atleast_1d(family.grad(under_z)[:m]) if family is not None else allp[i][m:]),
                over=FiberCriticalPoint(over_z[:m], float(over_z[m]), over_z[m + 1:],
                                        np.atleast_1d(family.grad(over_z)[:m]) if family is not None else allp[j][m:]),
            )
        )
    return pairs


def _loop_integral_y_dx(proj: np.ndarray) -> float:
    """Trapezoid integral of y dx around a closed planar polyline."""
    x = np.append(proj[:, 0], proj[0, 0])
    y = np.append(proj[:, 1], proj[0, 1])
    return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(x)))


def _arc_indices(comp: Component, s_from: float, s_to: float) -> np.ndarray:
    """Vertex indices of the cyclic arc from arclength s_from to s_to."""
    s = comp.s
    n = len(comp)
    i0 = int(np.searchsorted(s, s_from))
    i1 = int(np.searchsorted(s, s_to))
    if s_from <= s_to:
        return np.arange(i0, i1) % n
    return np.concatenate([np.arange(i0, n), np.arange(0, i1)]) % n


def crossing_loop(diagram: SliceDiagram, crossing: Crossing, start: str = "under"):
    """Planar loop leaving a crossing along one branch and returning on the other.

    Returns (P, T): points and unit tangents, with the exact crossing
    position and branch tangents at both ends.  start="under" departs
    along the branch with smaller x_n.
    """
    comp = diagram.components[crossing.component]
    s_under, s_over = crossing.params
    if start == "under":
        s_a, s_b = s_under, s_over
        t_a, t_b = crossing.under_ptan, crossing.over_ptan
    else:
        s_a, s_b = s_over, s_under
        t_a, t_b = crossing.over_ptan, crossing.under_ptan
    idx = _arc_indices(comp, s_a, s_b)
    P = np.vstack([crossing.position, comp.proj[idx], crossing.position])
    T = np.vstack([t_a, comp.ptan[idx], t_b])
    return P, T


def _turning_number(proj: np.ndarray) -> int:
    t = np.diff(np.vstack([proj, proj[:1]]), axis=0)
    ang = np.arctan2(t[:, 1], t[:, 0])
    d = np.diff(np.append(ang, ang[0]))
    d = (d + np.pi) % (2 * np.pi) - np.pi
    return int(round(float(np.sum(d) / (2 * np.pi))))


def extract_slice(f: GeneratingFamily, a: float, grid: Optional[GridSpec] = None) -> SliceDiagram:
    """Trace the slice at height a and assemble its diagram.

    Empty slices give an empty diagram; non-transverse heights raise
    NonTransverseSliceError.  Built-in support covers base dimensions 2
    and 3 (meridian sections for the latter).
    """
    grid = grid or GridSpec()
    if f.base_dim not in (2, 3):
        raise InvalidParamsError(f"slice tracing supports n in {{2, 3}}, got n={f.base_dim}")
    diagram = SliceDiagram(height=a, base_dim=f.base_dim, fiber_dim=f.fiber_dim)
    if f.base_dim == 2:
        comps = _trace_all(f, a, grid)
    else:
        comps = []
        for k in range(grid.meridians):
            phi = np.pi * k / grid.meridians
            row = np.zeros(f.dim + 1)
            row[0], row[1] = np.sin(phi), -np.cos(phi)
            comps.extend(_trace_all(f, a, grid, section=row))
    if not comps:
        return diagram
    diagram.components = comps
    diagram.double_points = double_points(diagram, family=f)
    if f.base_dim == 2:
        # per-crossing loops between the two branch parameters
        areas = []
        for cr in diagram.double_points:
            for start in ("under", "over"):
                P, T = crossing_loop(diagram, cr, start)
                areas.append(hermite_loop_integral(P, T, closed=False))
        diagram.lobe_areas = areas
        totals = [hermite_loop_integral(c.proj, c.ptan, closed=True) for c in comps]
        diagram.exactness_defect = max(abs(t) for t in totals) if totals else 0.0
        diagram.total_signed_area = float(sum(totals))
        diagram.winding = int(sum(_turning_number(c.proj) for c in comps))
        diagram.writhe = int(sum(cr.sign for cr in diagram.double_points))
    return diagram


def writhe(diagram: SliceDiagram) -> int:
    """Sum of crossing signs under the blackboard framing."""
    if any(cr.sign is None for cr in diagram.double_points):
        raise InvalidParamsError("writhe needs signed crossings (n = 2 only)")
    return int(sum(cr.sign for cr in diagram.double_points))


def euler_obstruction(d_low: SliceDiagram, d_high: SliceDiagram, chi: int) -> bool:
    """Whether writhe(top) - writhe(bottom) matches the cobordism's Euler number."""
    return writhe(d_high) - writhe(d_low) == chi


def embedded_circle_diagram(radius: float = 1.0, height: float = 0.0,
                            n_points: int = 256) -> SliceDiagram:
    """Synthetic embedded-circle diagram (no crossings) for obstruction checks."""
    th = np.linspace(0.0, 2 * np.pi, n_points, endpoint=False)
    proj = np.column_stack([radius * np.cos(th), radius * np.sin(th)])
    verts = np.column_stack([radius * np.cos(th), radius * np.sin(th)])
    comp = Component(vertices=verts, proj=proj, s=_polyline_arclength(proj))
    return SliceDiagram(
        height=height,
        base_dim=2,
        fiber_dim=0,
        components=[comp],
        double_points=[],
        lobe_areas=[],
        writhe=0,
        winding=1,
        total_signed_area=float(np.pi * radius**2),
    )


# ---------------------------------------------------------------------------
# serialization

def diagram_to_csv(diagram: SliceDiagram) -> str:
    """Vertex rows: component, index, arclength, projection coords, x_n, e."""
    m = diagram.base_dim - 1
    buf = io.StringIO()
    cols = (
        ["component", "index", "s"]
        + [f"x{i+1}" for i in range(m)]
        + [f"y{i+1}" for i in range(m)]
        + ["x_n"]
        + [f"e{i+1}" for i in range(diagram.fiber_dim)]
    )
    buf.write(",".join(cols) + "\n")
    for ci, comp in enumerate(diagram.components):
        for k in range(len(comp)):
            z = comp.vertices[k]
            row = [str(ci), str(k), f"{comp.s[k]:.12g}"]
            row += [f"{v:.12g}" for v in comp.proj[k]]
            row += [f"{z[m]:.12g}"]
            row += [f"{v:.12g}" for v in z[m + 1:]]
            buf.write(",".join(row) + "\n")
    return buf.getvalue()


def diagram_to_svg(diagram: SliceDiagram, size: int = 480) -> str:
    """Static SVG rendering of the planar projection with signed crossings."""
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
    ]
    if diagram.components and diagram.base_dim == 2:
        allp = np.vstack([c.proj for c in diagram.components])
        lo = allp.min(axis=0)
        hi = allp.max(axis=0)
        span = float(max(hi - lo)) or 1.0
        pad = 0.1 * span

        def to_px(p):
            q = (p - (lo + hi) / 2.0) / (span + 2 * pad) * size
            return q[0] + size / 2.0, size / 2.0 - q[1]

        # shade per-crossing loops before stroking the curve
        for cr in diagram.double_points:
            comp = diagram.components[cr.component]
            s1, s2 = sorted(cr.params)
            for arc, color in ((_arc_indices(comp, s1, s2), "#aaccee"),
                               (_arc_indices(comp, s2, s1), "#eeccaa")):
                if len(arc) < 3:
                    continue
                pts = " ".join("%.2f,%.2f" % to_px(p) for p in comp.proj[arc])
                parts.append(f'<polygon points="{pts}" fill="{color}" fill-opacity="0.5" stroke="none"/>')
        for comp in diagram.components:
            pts = " ".join("%.2f,%.2f" % to_px(p) for p in np.vstack([comp.proj, comp.proj[:1]]))
            parts.append(f'<polyline points="{pts}" fill="none" stroke="black" stroke-width="1.5"/>')
        for cr in diagram.double_points:
            cx, cy = to_px(cr.position)
            color = "#cc2222" if (cr.sign or 0) < 0 else "#22aa22"
            parts.append(f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="5" fill="none" stroke="{color}" stroke-width="2"/>')
            label = "-" if (cr.sign or 0) < 0 else "+"
            parts.append(
                f'<text x="{cx + 8:.2f}" y="{cy - 8:.2f}" font-size="16" fill="{color}">{label}</text>'
            )
    parts.append(
        f'<text x="8" y="{size - 10}" font-size="12" fill="#444">height={diagram.height:g} '
        f"writhe={diagram.writhe} winding={diagram.winding}</text>"
    )
    parts.append("</svg>")
    return "\n".join(parts)
