"""Morse data of the difference function of a sheared family.

Delta_a(x, x_n, e, xt_n, et) = F_a(x, x_n, e) - F_a(x, xt_n, et).  Its
isolated critical points sit over double points of the projected slice
(two per crossing, swap-images with opposite values); the diagonal copy
of the fiber-critical locus is a Morse-Bott submanifold at value 0.
Critical values and indices are computed both from the Hessian and from
the diagram geometry (path integrals, tangent-line winding) so each
route checks the other.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import (
    InvalidParamsError,
    InvalidPathError,
    MissingCriticalPointError,
    NonGenericFamilyError,
    UndersampledPathError,
)
from .family import GeneratingFamily, ShearedFamily
from .slicing import Crossing, SliceDiagram, crossing_loop, hermite_loop_integral

__all__ = [
    "DifferenceFunction",
    "CriticalDatum",
    "CrossingPath",
    "critical_points",
    "bott_samples",
    "critical_value_via_path",
    "morse_index_hessian",
    "morse_index_maslov",
    "build_crossing_path",
    "critical_data_to_csv",
]


class DifferenceFunction:
    """Difference of a sheared family with itself over a shared base point.

    Packed domain coordinates are (x, x_n, e, xt_n, et) with
    dimension (n-1) + 2(1+N).
    """

    def __init__(self, parent: ShearedFamily):
        self.parent = parent
        self.m = parent.base_dim - 1
        self.fiber = 1 + parent.fiber_dim
        self.domain_dim = self.m + 2 * self.fiber

    @property
    def height(self) -> float:
        return self.parent.height

    def split(self, z: np.ndarray):
        """Split packed coordinates into the two family arguments."""
        z = np.asarray(z, dtype=float)
        x = z[..., : self.m]
        z1 = np.concatenate([x, z[..., self.m: self.m + self.fiber]], axis=-1)
        z2 = np.concatenate([x, z[..., self.m + self.fiber:]], axis=-1)
        return z1, z2

    def swap(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        return np.concatenate(
            [z[..., : self.m], z[..., self.m + self.fiber:], z[..., self.m: self.m + self.fiber]],
            axis=-1,
        )

    def s_coord(self, z: np.ndarray) -> np.ndarray:
        """The half-space coordinate xt_n - x_n."""
        z = np.asarray(z, dtype=float)
        return z[..., self.m + self.fiber] - z[..., self.m]

    def eval(self, z: np.ndarray) -> np.ndarray:
        z1, z2 = self.split(z)
        return self.parent.eval(z1) - self.parent.eval(z2)

    def grad(self, z: np.ndarray) -> np.ndarray:
        z1, z2 = self.split(z)
        g1 = self.parent.grad(z1)
        g2 = self.parent.grad(z2)
        m = self.m
        return np.concatenate([g1[:m] - g2[:m], g1[m:], -g2[m:]])

    def hess(self, z: np.ndarray) -> np.ndarray:
        z1, z2 = self.split(z)
        H1 = self.parent.hess(z1)
        H2 = self.parent.hess(z2)
        m, f = self.m, self.fiber
        H = np.zeros((self.domain_dim, self.domain_dim))
        H[:m, :m] = H1[:m, :m] - H2[:m, :m]
        H[:m, m:m + f] = H1[:m, m:]
        H[m:m + f, :m] = H1[m:, :m]
        H[:m, m + f:] = -H2[:m, m:]
        H[m + f:, :m] = -H2[m:, :m]
        H[m:m + f, m:m + f] = H1[m:, m:]
        H[m + f:, m + f:] = -H2[m:, m:]
        return H

    def pack(self, x, x_n, e, xt_n, et) -> np.ndarray:
        return np.concatenate(
            [np.atleast_1d(x).astype(float), [float(x_n)], np.atleast_1d(e).astype(float)[:self.fiber - 1],
             [float(xt_n)], np.atleast_1d(et).astype(float)[:self.fiber - 1]]
        )


@dataclass(frozen=True)
class CriticalDatum:
    """One critical point (or Bott submanifold) of Delta_a."""

    point: np.ndarray
    value: float
    index: int
    half_space: str  # "P+", "P-", or "P0"
    kind: str  # "isolated" or "bott_submanifold"
    manifold_dim: int = 0
    grad_norm: float = 0.0
    min_abs_eig: float = 0.0
    source_crossing: Optional[int] = None
    samples: Optional[np.ndarray] = None  # for the Bott submanifold


def _newton(delta: DifferenceFunction, z0: np.ndarray, tol: float, max_iter: int = 60):
    z = np.asarray(z0, dtype=float).copy()
    for _ in range(max_iter):
        g = delta.grad(z)
        if np.linalg.norm(g) < tol:
            return z, True
        H = delta.hess(z)
        try:
            dz = np.linalg.solve(H, -g)
        except np.linalg.LinAlgError:
            dz, *_ = np.linalg.lstsq(H, -g, rcond=None)
        if not np.all(np.isfinite(dz)):
            return z, False
        # trust-region style cap keeps the iterate near its seed
        cap = 0.5 * (1.0 + np.linalg.norm(z))
        step = np.linalg.norm(dz)
        if step > cap:
            dz *= cap / step
        z = z + dz
    return z, bool(np.linalg.norm(delta.grad(z)) < tol)


def _eig_classify(delta: DifferenceFunction, z: np.ndarray):
    H = delta.hess(z)
    eig = np.linalg.eigvalsh(H)
    radius = float(np.max(np.abs(eig))) if eig.size else 0.0
    thresh = 1e-7 * (1.0 + radius)
    n_neg = int(np.sum(eig < -thresh))
    n_zero = int(np.sum(np.abs(eig) <= thresh))
    return eig, n_neg, n_zero, float(np.min(np.abs(eig)))


def bott_samples(delta: DifferenceFunction, diagram: SliceDiagram, n_samples: int = 12) -> np.ndarray:
    """Diagonal points of the fiber-critical locus, sampled from the trace."""
    allv = np.vstack([c.vertices for c in diagram.components])
    stride = max(1, allv.shape[0] // n_samples)
    picks = allv[::stride][:n_samples]
    out = []
    for z in picks:
        fib = z[delta.m:]
        out.append(np.concatenate([z[: delta.m], fib, fib]))
    return np.array(out)


def critical_points(delta: DifferenceFunction, diagram: SliceDiagram,
                    tol: float = 1e-10) -> list:
    """All critical data of Delta_a: two isolated points per crossing plus
    the Bott submanifold (reported once, sampled along the traced slice).

    Raises MissingCriticalPointError if Newton fails from every seed of a
    crossing and NonGenericFamilyError on a degenerate isolated Hessian.
    """
    scale = 1.0 + abs(delta.height)
    out = []
    for ci, cr in enumerate(diagram.double_points):
        found = []
        x_mid = 0.5 * (cr.under.x + cr.over.x)
        seeds = [
            np.concatenate([x_mid, [cr.under.x_n], cr.under.e, [cr.over.x_n], cr.over.e]),
            np.concatenate([x_mid, [cr.over.x_n], cr.over.e, [cr.under.x_n], cr.under.e]),
        ]
        for z0 in seeds:
            z, ok = _newton(delta, z0, tol * scale)
            if not ok:
                continue
            if any(np.linalg.norm(z - w) < 1e-7 * (1.0 + np.linalg.norm(z)) for w in found):
                continue
            found.append(z)
        if not found:
            raise MissingCriticalPointError(
                f"no isolated critical point converged for crossing {ci} at height "
                f"{delta.height!r}"
            )
        for z in found:
            eig, n_neg, n_zero, min_eig = _eig_classify(delta, z)
            if n_zero > 0:
                raise NonGenericFamilyError(
                    f"degenerate Hessian at isolated critical point (|lambda|_min="
                    f"{min_eig:.2e}) for crossing {ci}"
                )
            s = float(delta.s_coord(z))
            half = "P+" if s > 0 else ("P-" if s < 0 else "P0")
            out.append(
                CriticalDatum(
                    point=z,
                    value=float(delta.eval(z)),
                    index=n_neg,
                    half_space=half,
                    kind="isolated",
                    grad_norm=float(np.linalg.norm(delta.grad(z))),
                    min_abs_eig=min_eig,
                    source_crossing=ci,
                )
            )
    if diagram.components:
        samples = bott_samples(delta, diagram)
        worst_val = 0.0
        worst_grad = 0.0
        idx_tr = None
        kdim_expected = delta.m
        min_eig_all = np.inf
        for z in samples:
            worst_val = max(worst_val, abs(float(delta.eval(z))))
            worst_grad = max(worst_grad, float(np.linalg.norm(delta.grad(z))))
            eig, n_neg, n_zero, min_eig = _eig_classify(delta, z)
            min_eig_all = min(min_eig_all, min_eig)
            if idx_tr is None:
                idx_tr = n_neg
        out.append(
            CriticalDatum(
                point=samples[0],
                value=0.0,
                index=int(idx_tr),
                half_space="P0",
                kind="bott_submanifold",
                manifold_dim=kdim_expected,
                grad_norm=worst_grad,
                min_abs_eig=float(min_eig_all),
                samples=samples,
            )
        )
    return out


def morse_index_hessian(delta: DifferenceFunction, cd: CriticalDatum) -> int:
    """Number of negative Hessian eigenvalues at an isolated critical point."""
    if cd.kind != "isolated":
        raise InvalidParamsError("morse_index_hessian applies to isolated points")
    eig, n_neg, n_zero, min_eig = _eig_classify(delta, cd.point)
    if n_zero > 0:
        raise NonGenericFamilyError(
            f"eigenvalue within degeneracy threshold of 0 (|lambda|_min={min_eig:.2e})"
        )
    return n_neg


# ---------------------------------------------------------------------------
# diagram-side computations (Lemma-style cross-checks)

@dataclass(frozen=True)
class CrossingPath:
    """A path along the traced slice between the two preimages of a crossing.

    P/T are planar points and unit tangents from the start preimage
    (x, xt_n, et) to the end preimage (x, x_n, e) of the critical point
    it certifies.
    """

    diagram: SliceDiagram
    crossing: Crossing
    start: str  # "under" or "over": which branch the path leaves along
    P: np.ndarray
    T: np.ndarray

    @property
    def maslov_samples(self) -> np.ndarray:
        return self.T


def build_crossing_path(diagram: SliceDiagram, cd: CriticalDatum,
                        delta: DifferenceFunction) -> CrossingPath:
    """Path of Lemma type for an isolated critical point: from the
    (x, xt_n, et) preimage to the (x, x_n, e) preimage along the slice."""
    if cd.kind != "isolated" or cd.source_crossing is None:
        raise InvalidPathError("paths exist only for crossing-borne critical points")
    cr = diagram.double_points[cd.source_crossing]
    xt_n = float(cd.point[delta.m + delta.fiber])
    # the path starts at the branch matching xt_n
    start = "under" if abs(xt_n - cr.under.x_n) <= abs(xt_n - cr.over.x_n) else "over"
    P, T = crossing_loop(diagram, cr, start=start)
    return CrossingPath(diagram=diagram, crossing=cr, start=start, P=P, T=T)


def critical_value_via_path(path: CrossingPath, check_tol: float = 1e-8) -> float:
    """Quadrature of the action integral y dx along the path.

    The value must agree with Delta_a at the corresponding critical point
    (relative tolerance 1e-5 downstream).  Raises InvalidPathError when
    the endpoints do not project to the same double point.
    """
    mismatch = float(np.linalg.norm(path.P[0] - path.P[-1]))
    scale = float(np.max(np.abs(path.P))) + 1e-30
    if mismatch > max(check_tol * scale, 1e-9):
        raise InvalidPathError(
            f"path endpoints project {mismatch:.2e} apart (tol {check_tol:.0e})"
        )
    return hermite_loop_integral(path.P, path.T, closed=False)


def morse_index_maslov(path: CrossingPath, N: int) -> int:
    """Morse index from the tangent-line winding of the path.

    Tracks the projected tangent direction as an angle mod pi, closes the
    line path by a clockwise rotation, and returns -mu + (N + 1).  Only
    planar diagrams (base dimension 2) are supported.
    """
    if path.diagram.base_dim != 2:
        raise InvalidParamsError("Maslov index tracking is implemented for n = 2 only")
    T = path.T
    if T.shape[0] < 4:
        raise UndersampledPathError("path has too few samples to track the tangent line")
    # consecutive line-angle increments, wrapped into (-pi/2, pi/2]
    ang = np.arctan2(T[:, 1], T[:, 0])
    d = np.diff(ang)
    d = (d + np.pi / 2.0) % np.pi - np.pi / 2.0
    cos_between = np.abs(np.cos(np.diff(np.arctan2(T[:, 1], T[:, 0]))))
    if np.any(np.abs(np.abs(d) - np.pi / 2.0) < 1e-6):
        raise UndersampledPathError("tangent line jumps by ~pi/2 between samples")
    theta = float(np.sum(d))
    # close up clockwise: subtract the residue mod pi
    residue = theta % np.pi
    mu = int(round((theta - residue) / np.pi))
    return -mu + (N + 1)


def critical_data_to_csv(data: Sequence[CriticalDatum], height: float) -> str:
    """CSV rows: height, kind, value, index, half_space, coordinates."""
    lines = ["height,kind,value,index,manifold_dim,half_space,coords"]
    for cd in data:
        coords = ";".join(f"{v:.12g}" for v in np.asarray(cd.point).ravel())
        lines.append(
            f"{height:.12g},{cd.kind},{cd.value:.12g},{cd.index},{cd.manifold_dim},"
            f"{cd.half_space},{coords}"
        )
    return "\n".join(lines) + "\n"
