"""Generating families for flat-at-infinity planar Lagrangians.

A family is a smooth function F(x, x_n, e) on base x fiber coordinates,
packed into a single vector z = (x_1..x_{n-1}, x_n, e_1..e_N).  The
Lagrangian it generates is swept out by (x, dF/dx) over the fiber-critical
locus {dF/de = 0}.  Everything downstream (slice tracing, Morse data,
rank sweeps) consumes the eval/grad/hess callables stored here, so
families built by this module carry exact piecewise-polynomial
derivatives; user-supplied families fall back to central differences.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import InvalidParamsError

__all__ = [
    "GeneratingFamily",
    "ShearedFamily",
    "ExampleFamilyParams",
    "build_example_family",
    "stabilize",
    "dilate",
    "fd_gradient",
    "fd_hessian",
    "validate_family",
]


# ---------------------------------------------------------------------------
# finite-difference fallbacks

def fd_gradient(fun: Callable[[np.ndarray], float], z: np.ndarray, step: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of a scalar function at z."""
    z = np.asarray(z, dtype=float)
    h = step * (1.0 + np.abs(z))
    g = np.empty_like(z)
    for i in range(z.size):
        zp = z.copy()
        zm = z.copy()
        zp[i] += h[i]
        zm[i] -= h[i]
        g[i] = (fun(zp) - fun(zm)) / (2.0 * h[i])
    return g


def fd_hessian(fun: Callable[[np.ndarray], float], z: np.ndarray, step: float = 1e-4) -> np.ndarray:
    """Central-difference Hessian (5-point stencils), symmetrized exactly."""
    z = np.asarray(z, dtype=float)
    n = z.size
    h = step * (1.0 + np.abs(z))
    H = np.empty((n, n))
    f0 = fun(z)
    for i in range(n):
        zp = z.copy()
        zm = z.copy()
        zp[i] += h[i]
        zm[i] -= h[i]
        H[i, i] = (fun(zp) - 2.0 * f0 + fun(zm)) / (h[i] * h[i])
        for j in range(i + 1, n):
            zpp = zp.copy()
            zpm = zp.copy()
            zmp = zm.copy()
            zmm = zm.copy()
            zpp[j] += h[j]
            zpm[j] -= h[j]
            zmp[j] += h[j]
            zmm[j] -= h[j]
            H[i, j] = H[j, i] = (fun(zpp) - fun(zpm) - fun(zmp) + fun(zmm)) / (4.0 * h[i] * h[j])
    return H


# ---------------------------------------------------------------------------
# family containers

@dataclass(frozen=True)
class GeneratingFamily:
    """F: R^{n-1} x R x R^N -> R, quadratic-at-infinity in the fiber.

    Outside the coordinate box max(|x|, |x_n|, |e|) > support_radius the
    family equals the nondegenerate quadratic e -> e.Q.e given by
    ``infinity_form`` (the empty form when N = 0).  Instances are
    immutable; eval/grad/hess are safe to call concurrently.
    """

    base_dim: int
    fiber_dim: int
    support_radius: float
    infinity_form: np.ndarray
    eval_fn: Callable[[np.ndarray], np.ndarray]
    grad_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None
    hess_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = "family"

    def __post_init__(self):
        if self.base_dim < 2:
            raise InvalidParamsError(f"base_dim must be >= 2, got {self.base_dim}")
        if self.fiber_dim < 0:
            raise InvalidParamsError(f"fiber_dim must be >= 0, got {self.fiber_dim}")
        if not self.support_radius > 0:
            raise InvalidParamsError("support_radius must be positive")
        q = np.atleast_2d(np.asarray(self.infinity_form, dtype=float))
        if self.fiber_dim == 0:
            q = np.zeros((0, 0))
        elif q.shape != (self.fiber_dim, self.fiber_dim):
            raise InvalidParamsError(
                f"infinity_form must be {self.fiber_dim}x{self.fiber_dim}, got {q.shape}"
            )
        object.__setattr__(self, "infinity_form", q)

    @property
    def dim(self) -> int:
        """Total packed dimension n + N."""
        return self.base_dim + self.fiber_dim

    def eval(self, z: np.ndarray) -> np.ndarray:
        """Evaluate F; broadcasts over leading axes of z with shape (..., dim)."""
        return self.eval_fn(np.asarray(z, dtype=float))

    def grad(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if self.grad_fn is not None:
            return np.asarray(self.grad_fn(z), dtype=float)
        return fd_gradient(lambda w: float(self.eval_fn(w)), z)

    def hess(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if self.hess_fn is not None:
            return np.asarray(self.hess_fn(z), dtype=float)
        return fd_hessian(lambda w: float(self.eval_fn(w)), z)

    def infinity_value(self, e: np.ndarray) -> np.ndarray:
        """The quadratic Q(e) the family equals outside its support box."""
        if self.fiber_dim == 0:
            return np.zeros(np.shape(e)[:-1] if np.ndim(e) > 1 else ())
        e = np.asarray(e, dtype=float)
        return np.einsum("...i,ij,...j->...", e, self.infinity_form, e)


@dataclass(frozen=True)
class ShearedFamily:
    """F_a(x, x_n, e) = F(x, x_n, e) - a * x_n, with x_n and e as fiber.

    Shearing by the height a turns a family for L into a
    linear-quadratic-at-infinity family for the projected slice pi(L_a).
    """

    parent: GeneratingFamily
    height: float

    @property
    def dim(self) -> int:
        return self.parent.dim

    @property
    def base_dim(self) -> int:
        return self.parent.base_dim

    @property
    def fiber_dim(self) -> int:
        return self.parent.fiber_dim

    def eval(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        return self.parent.eval(z) - self.height * z[..., self.parent.base_dim - 1]

    def grad(self, z: np.ndarray) -> np.ndarray:
        g = self.parent.grad(z).copy()
        g[self.parent.base_dim - 1] -= self.height
        return g

    def hess(self, z: np.ndarray) -> np.ndarray:
        return self.parent.hess(z)


# ---------------------------------------------------------------------------
# C^2 cutoff profiles for the explicit figure-eight family

def _smoothstep_quintic():
    # 6u^5 - 15u^4 + 10u^3: value/slope/curvature polynomials on [0, 1]
    P = np.polynomial.Polynomial
    s = P([0.0, 0.0, 0.0, 10.0, -15.0, 6.0])
    return s, s.deriv(), s.deriv(2)


def _smoothstep_septic():
    # 35u^4 - 84u^5 + 70u^6 - 20u^7: a C^3 alternative blend shape
    P = np.polynomial.Polynomial
    s = P([0.0, 0.0, 0.0, 0.0, 35.0, -84.0, 70.0, -20.0])
    return s, s.deriv(), s.deriv(2)


_BLENDS = {"quintic": _smoothstep_quintic, "septic": _smoothstep_septic}


class _Cutoff:
    """Even C^2 bump: 1 on [0, r0], smoothstep decay to 0 on [r0, r1]."""

    def __init__(self, r0: float, r1: float, blend: str):
        self.r0 = r0
        self.r1 = r1
        self.w = r1 - r0
        self.s, self.s1, self.s2 = _BLENDS[blend]()

    def _u(self, t):
        return np.clip((np.abs(t) - self.r0) / self.w, 0.0, 1.0)

    def val(self, t):
        return 1.0 - self.s(self._u(t))

    def d1(self, t):
        t = np.asarray(t, dtype=float)
        u = (np.abs(t) - self.r0) / self.w
        inside = (u > 0.0) & (u < 1.0)
        return np.where(inside, -self.s1(np.clip(u, 0.0, 1.0)) / self.w * np.sign(t), 0.0)

    def d2(self, t):
        t = np.asarray(t, dtype=float)
        u = (np.abs(t) - self.r0) / self.w
        inside = (u > 0.0) & (u < 1.0)
        return np.where(inside, -self.s2(np.clip(u, 0.0, 1.0)) / self.w**2, 0.0)


class _PiecewisePoly1D:
    """Odd or even C^2 function given by polynomial pieces in |t|."""

    def __init__(self, breaks, polys, parity: str):
        # breaks: [b0, b1, ..., bk]; polys[i] on [b_i, b_{i+1}] in the local
        # variable u = (t - b_i) / (b_{i+1} - b_i); identically 0 beyond b_k.
        self.breaks = np.asarray(breaks, dtype=float)
        self.polys = polys
        self.d1s = [p.deriv() for p in polys]
        self.d2s = [p.deriv(2) for p in polys]
        self.widths = np.diff(self.breaks)
        self.parity = parity

    def _eval(self, t, which: int):
        a = np.abs(np.asarray(t, dtype=float))
        out = np.zeros_like(a)
        for i, (b0, w) in enumerate(zip(self.breaks[:-1], self.widths)):
            m = (a >= b0) & (a < b0 + w) if i + 1 < len(self.polys) else (a >= b0) & (a <= b0 + w)
            if not np.any(m):
                continue
            u = (a[m] - b0) / w
            if which == 0:
                out[m] = self.polys[i](u)
            elif which == 1:
                out[m] = self.d1s[i](u) / w
            else:
                out[m] = self.d2s[i](u) / (w * w)
        return out

    def val(self, t):
        v = self._eval(t, 0)
        return v * np.sign(t) if self.parity == "odd" else v

    def d1(self, t):
        v = self._eval(t, 1)
        return v if self.parity == "odd" else v * np.sign(t)

    def d2(self, t):
        v = self._eval(t, 2)
        return v * np.sign(t) if self.parity == "odd" else v


def _build_ell(r0: float, blend: str) -> _PiecewisePoly1D:
    # ell(t) = t on [-r0, r0], then t * chi(t); chi <= 1 and t*chi' <= 0 keep
    # ell' < 1 strictly outside the core.
    P = np.polynomial.Polynomial
    w = 1.5
    s, _, _ = _BLENDS[blend]()
    u = P([0.0, 1.0])
    core = P([0.0, r0])  # t = r0 * u on [0, r0]
    tail = (P([r0, w])) * (1.0 - s(u))  # t * chi on [r0, r0 + w]
    return _PiecewisePoly1D([0.0, r0, r0 + w], [core, tail], parity="odd")


def _build_cubic_cap(r0: float, kappa: float, blend: str) -> _PiecewisePoly1D:
    """c(t) = t^3/3 on the core, then a slope-limited C^2 descent to 0.

    The descent keeps c' > -kappa everywhere, which realizes the exterior
    bound -c' < beta - eps with margin; the final ramp lands c exactly at 0.
    """
    P = np.polynomial.Polynomial
    s, _, _ = _BLENDS[blend]()
    u = P([0.0, 1.0])

    # piece 0: core, c = (r0 u)^3 / 3
    core = P([0.0, 0.0, 0.0, r0**3 / 3.0])

    # piece 1 (width wA): c' = r0^2 (1-u)^2 (1 + a u) - kappa * S(u),
    # which matches value/slope/curvature of the cubic at u=0 and lands on
    # the constant slope -kappa with zero curvature at u=1.
    wA = 0.5
    a = 2.0 + 2.0 * wA / r0
    cp1 = r0**2 * (1.0 - u) ** 2 * (1.0 + a * u) - kappa * s(u)
    p1 = cp1.integ() * wA + r0**3 / 3.0
    cA = float(p1(1.0))

    # piece 3 shape (ramp back to slope 0): c' = -kappa (1 - S(u));
    # integral of (1 - S) over [0,1] is 1/2 for both blends
    wD = min(1.0, cA / kappa)
    dropD = kappa * wD * 0.5

    # piece 2: constant slope -kappa long enough that the ramp ends at 0
    wC = max((cA - dropD) / kappa, 1e-9)
    p2 = P([cA, -kappa * wC])
    cC = float(p2(1.0))
    cp3 = -kappa * (1.0 - s(u))
    p3 = cp3.integ() * wD + cC

    breaks = [0.0, r0, r0 + wA, r0 + wA + wC, r0 + wA + wC + wD]
    return _PiecewisePoly1D(breaks, [core, p1, p2, p3], parity="odd")


# ---------------------------------------------------------------------------
# the explicit example family

@dataclass(frozen=True)
class ExampleFamilyParams:
    """Parameters of the explicit figure-eight family.

    Requires 0 < eps < beta < tau < K; slices at heights between beta and
    K are the figure-eight of radius sqrt(K - a) (mirrored to negative
    heights for the sign-flipped build).
    """

    K: float = 5.0
    eps: float = 0.25
    beta: float = 1.0
    tau: float = 4.0
    dim: int = 2
    blend: str = "quintic"

    def __post_init__(self):
        if not (0.0 < self.eps < self.beta < self.tau < self.K):
            raise InvalidParamsError(
                f"need 0 < eps < beta < tau < K, got eps={self.eps}, "
                f"beta={self.beta}, tau={self.tau}, K={self.K}"
            )
        if self.dim < 2:
            raise InvalidParamsError(f"dim must be >= 2, got {self.dim}")
        if self.blend not in _BLENDS:
            raise InvalidParamsError(f"unknown blend {self.blend!r}")


def build_example_family(params: ExampleFamilyParams, sign: int = -1) -> GeneratingFamily:
    """Build the explicit family ell(x_n) q(x) - d(x) c(x_n) (or its negative).

    sign=-1 gives slices with a negative crossing at heights in
    (beta, K); sign=+1 gives the mirrored family  with positive crossings
    at heights in (-K, -beta).  Fiber dimension is 0: the Lagrangian is
    the graph of dF.
    """
    if sign not in (-1, +1):
        raise InvalidParamsError(f"sign must be -1 or +1, got {sign}")
    K, eps = params.K, params.eps
    n = params.dim
    m = n - 1
    r0 = np.sqrt(K - eps)
    rq = np.sqrt(K)

    chi_q = _Cutoff(r0, rq, params.blend)
    chi_d = _Cutoff(r0, rq, params.blend)
    ell = _build_ell(r0, params.blend)
    kappa = 0.9 * (params.beta - params.eps)
    cap = _build_cubic_cap(r0, kappa, params.blend)

    # sign=-1 is the paper's F itself; sign=+1 is the mirrored G = -F
    sgn = -float(sign)
    support = float(max(rq, ell.breaks[-1], cap.breaks[-1]) + 1e-9)

    def q_parts(rho):
        # radial profile of q = (K - rho^2) * chi and its rho-derivatives;
        # returns (q, q'/rho, q'' ) with the q'/rho ratio finite at rho=0
        chi = chi_q.val(rho)
        chi1 = chi_q.d1(rho)
        chi2 = chi_q.d2(rho)
        par = K - rho * rho
        qv = par * chi
        q1_over = -2.0 * chi + np.where(rho > 0, par * chi1 / np.where(rho > 0, rho, 1.0), 0.0)
        q2 = -2.0 * chi - 4.0 * rho * chi1 + par * chi2
        return qv, q1_over, q2

    def d_parts(rho):
        dv = chi_d.val(rho)
        d1_over = np.where(rho > 0, chi_d.d1(rho) / np.where(rho > 0, rho, 1.0), 0.0)
        d2 = chi_d.d2(rho)
        return dv, d1_over, d2

    def eval_fn(z):
        z = np.asarray(z, dtype=float)
        x = z[..., :m]
        xn = z[..., m]
        rho = np.sqrt(np.sum(x * x, axis=-1))
        qv, _, _ = q_parts(rho)
        dv, _, _ = d_parts(rho)
        return sgn * (ell.val(xn) * qv - dv * cap.val(xn))

    def grad_fn(z):
        z = np.asarray(z, dtype=float)
        x = z[:m]
        xn = z[m]
        rho = float(np.sqrt(np.dot(x, x)))
        qv, q1o, _ = q_parts(rho)
        dv, d1o, _ = d_parts(rho)
        lv, l1 = float(ell.val(xn)), float(ell.d1(xn))
        cv, c1 = float(cap.val(xn)), float(cap.d1(xn))
        g = np.empty(n)
        g[:m] = (lv * q1o - d1o * cv) * x
        g[m] = l1 * qv - dv * c1
        return sgn * g

    def hess_fn(z):
        z = np.asarray(z, dtype=float)
        x = z[:m]
        xn = z[m]
        rho = float(np.sqrt(np.dot(x, x)))
        qv, q1o, q2 = q_parts(rho)
        dv, d1o, d2 = d_parts(rho)
        lv, l1, l2 = float(ell.val(xn)), float(ell.d1(xn)), float(ell.d2(xn))
        cv, c1, c2 = float(cap.val(xn)), float(cap.d1(xn)), float(cap.d2(xn))
        H = np.empty((n, n))
        if rho > 0:
            xx = np.outer(x, x) / (rho * rho)
            rad = lv * (q2 - q1o) - (d2 - d1o) * cv
        else:
            xx = np.zeros((m, m))
            rad = 0.0
        H[:m, :m] = rad * xx + (lv * q1o - d1o * cv) * np.eye(m)
        H[:m, m] = H[m, :m] = (l1 * q1o - d1o * c1) * x
        H[m, m] = l2 * qv - dv * c2
        return sgn * H

    tag = "fig8-neg" if sign == -1 else "fig8-pos"
    return GeneratingFamily(
        base_dim=n,
        fiber_dim=0,
        support_radius=support,
        infinity_form=np.zeros((0, 0)),
        eval_fn=eval_fn,
        grad_fn=grad_fn,
        hess_fn=hess_fn,
        name=f"{tag}(K={params.K},n={n})",
    )


# ---------------------------------------------------------------------------
# algebraic modifications

def _as_quadratic_matrix(q_coeffs) -> np.ndarray:
    q = np.asarray(q_coeffs, dtype=float)
    if q.ndim == 0:
        q = q.reshape(1, 1)
    elif q.ndim == 1:
        q = np.diag(q)
    if q.ndim != 2 or q.shape[0] != q.shape[1]:
        raise InvalidParamsError(f"quadratic form must be square, got shape {q.shape}")
    return 0.5 * (q + q.T)


def stabilize(f: GeneratingFamily, q_coeffs) -> GeneratingFamily:
    """F + Q(e') on an enlarged fiber; the generated Lagrangian is unchanged.

    q_coeffs is a k x k symmetric matrix, a vector of diagonal entries, or
    a scalar; k = 0 returns the family itself.
    """
    Q = _as_quadratic_matrix(q_coeffs)
    k = Q.shape[0]
    if k == 0:
        return f
    eig = np.linalg.eigvalsh(Q)
    if np.min(np.abs(eig)) < 1e-12 * max(1.0, np.max(np.abs(eig))):
        raise InvalidParamsError("stabilizing quadratic form is degenerate")
    d_old = f.dim

    def eval_fn(z):
        z = np.asarray(z, dtype=float)
        e2 = z[..., d_old:]
        return f.eval(z[..., :d_old]) + np.einsum("...i,ij,...j->...", e2, Q, e2)

    def grad_fn(z):
        z = np.asarray(z, dtype=float)
        g = np.empty(d_old + k)
        g[:d_old] = f.grad(z[:d_old])
        g[d_old:] = 2.0 * Q @ z[d_old:]
        return g

    def hess_fn(z):
        z = np.asarray(z, dtype=float)
        H = np.zeros((d_old + k, d_old + k))
        H[:d_old, :d_old] = f.hess(z[:d_old])
        H[d_old:, d_old:] = 2.0 * Q
        return H

    n_f = f.fiber_dim
    inf_form = np.zeros((n_f + k, n_f + k))
    if n_f:
        inf_form[:n_f, :n_f] = f.infinity_form
    inf_form[n_f:, n_f:] = Q
    return GeneratingFamily(
        base_dim=f.base_dim,
        fiber_dim=n_f + k,
        support_radius=f.support_radius,
        infinity_form=inf_form,
        eval_fn=eval_fn,
        grad_fn=grad_fn if f.grad_fn is not None else None,
        hess_fn=hess_fn if f.hess_fn is not None else None,
        name=f.name + "+Q",
    )


def dilate(f: GeneratingFamily, beta: float) -> GeneratingFamily:
    """Family beta^2 F(x/beta, x_n/beta, e) generating the dilated Lagrangian."""
    if not beta > 0:
        raise InvalidParamsError(f"dilation factor must be positive, got {beta}")
    if beta == 1.0:
        return f
    nb = f.base_dim
    d = f.dim
    scale = np.ones(d)
    scale[:nb] = 1.0 / beta

    def eval_fn(z):
        return beta**2 * f.eval(np.asarray(z, dtype=float) * scale)

    def grad_fn(z):
        g = f.grad(np.asarray(z, dtype=float) * scale)
        return beta**2 * g * scale

    def hess_fn(z):
        H = f.hess(np.asarray(z, dtype=float) * scale)
        return beta**2 * H * np.outer(scale, scale)

    if f.fiber_dim == 0:
        support = f.support_radius * beta
    else:
        support = f.support_radius * max(1.0, beta)
    return GeneratingFamily(
        base_dim=nb,
        fiber_dim=f.fiber_dim,
        support_radius=support,
        infinity_form=beta**2 * f.infinity_form,
        eval_fn=eval_fn,
        grad_fn=grad_fn if f.grad_fn is not None else None,
        hess_fn=hess_fn if f.hess_fn is not None else None,
        name=f"{f.name}*{beta:g}",
    )


# ---------------------------------------------------------------------------
# probe-based validation

def validate_family(f: GeneratingFamily, seed: int = 0, n_probes: int = 120) -> dict:
    """Probe-check derivative consistency and the quadratic-at-infinity tail.

    Returns a dict of worst-case errors; callers assert against the
    documented tolerances (grad 1e-6 relative, hess 1e-4 relative,
    tail 1e-12 absolute).
    """
    rng = np.random.default_rng(seed)
    d = f.dim
    R = f.support_radius
    pts_in = rng.uniform(-0.95 * R, 0.95 * R, size=(n_probes // 2, d))
    pts_out = rng.uniform(1.05 * R, 2.5 * R, size=(n_probes - n_probes // 2, d))
    pts_out *= rng.choice([-1.0, 1.0], size=pts_out.shape)
    errs = {"grad_rel": 0.0, "hess_rel": 0.0, "hess_asym": 0.0, "tail_abs": 0.0}
    for z in np.vstack([pts_in, pts_out]):
        g = f.grad(z)
        g_fd = fd_gradient(lambda w: float(f.eval(w)), z)
        scale = max(1.0, float(np.max(np.abs(g))), float(np.max(np.abs(g_fd))))
        errs["grad_rel"] = max(errs["grad_rel"], float(np.max(np.abs(g - g_fd))) / scale)
        H = f.hess(z)
        errs["hess_asym"] = max(errs["hess_asym"], float(np.max(np.abs(H - H.T))))
        H_fd = fd_hessian(lambda w: float(f.eval(w)), z)
        hscale = max(1.0, float(np.max(np.abs(H))))
        errs["hess_rel"] = max(errs["hess_rel"], float(np.max(np.abs(H - H_fd))) / hscale)
    for z in pts_out:
        tail = abs(float(f.eval(z)) - float(f.infinity_value(z[f.base_dim:])))
        errs["tail_abs"] = max(errs["tail_abs"], tail)
    return errs
