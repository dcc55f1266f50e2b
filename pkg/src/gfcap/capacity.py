"""Capacities of a slice, their property suites, and application checkers.

Four numbers per cohomology degree: lower capacities c+/- <= 0 and upper
capacities C+/- >= 0.  Two independent routes compute them: the fast
single-crossing rule (lobe area + crossing sign) and rank-change
thresholds of the cubical sweep.  On top sit the monotonicity /
continuity / invariance / non-vanishing / conformality suites and the
cobordism and non-squeezing verdict checkers.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import (
    InsufficientSweepError,
    InvalidBoxError,
    InvalidParamsError,
    NonTransverseSliceError,
    RuleNotApplicableError,
)
from .family import GeneratingFamily, ShearedFamily, dilate
from .homology import CubicalField, RankSweep, build_field, rank_sweep, window_ranks
from .morse import CriticalDatum, DifferenceFunction, critical_points
from .slicing import GridSpec, SliceDiagram, extract_slice

__all__ = [
    "CapacityTable",
    "CapacityCurve",
    "capacities_single_crossing",
    "capacities_from_sweep",
    "sweep_capacity_pipeline",
    "monotonicity_scan",
    "cobordism_obstruction",
    "nonsqueezing_check",
    "measure_disk_box",
    "Verdict",
    "table_to_csv",
    "curve_to_csv",
]

_KINDS = ("c_plus", "c_minus", "C_plus", "C_minus")


@dataclass
class CapacityTable:
    """The four capacities per tracked cohomology degree of one slice."""

    height: float
    base_dim: int
    fiber_dim: int
    entries: dict  # degree -> {c_plus, c_minus, C_plus, C_minus}
    method: str  # "single_crossing_rule" or "rank_sweep"
    ambiguous: dict = field(default_factory=dict)  # degree -> bool
    provenance: dict = field(default_factory=dict)

    @property
    def degrees(self):
        return sorted(self.entries)

    def get(self, degree: int, kind: str) -> float:
        return self.entries.get(degree, dict.fromkeys(_KINDS, 0.0))[kind]

    def max_abs(self) -> float:
        vals = [abs(v) for row in self.entries.values() for v in row.values()]
        return max(vals) if vals else 0.0

    def check_signs(self) -> bool:
        for row in self.entries.values():
            if row["c_plus"] > 0 or row["c_minus"] > 0:
                return False
            if row["C_plus"] < 0 or row["C_minus"] < 0:
                return False
        return True


def _empty_entries(degrees):
    return {k: {kind: 0.0 for kind in _KINDS} for k in degrees}


def capacities_single_crossing(diagram: SliceDiagram,
                               morse_data: Sequence[CriticalDatum]) -> CapacityTable:
    """Fast capacity table for a slice with exactly one double point.

    A negative crossing puts the lobe area A into (c+, C-) of degrees
    (0, n-1); a positive crossing mirrors it into (c-, C+).  The crossing
    sign is cross-checked against the Morse data: the critical point in
    the x_n > xt_n half has value +A exactly when the crossing is
    negative.
    """
    if len(diagram.double_points) != 1:
        raise RuleNotApplicableError(
            f"single-crossing rule needs exactly 1 double point, found "
            f"{len(diagram.double_points)}"
        )
    iso = [cd for cd in morse_data if cd.kind == "isolated"]
    if len(iso) != 2:
        raise RuleNotApplicableError(
            f"expected 2 isolated critical points, found {len(iso)}"
        )
    areas = [abs(v) for v in diagram.lobe_areas]
    if areas:
        A = 0.5 * (max(areas) + min(areas))
    else:
        A = max(abs(cd.value) for cd in iso)
    minus_side = [cd for cd in iso if cd.half_space == "P-"]
    if len(minus_side) != 1:
        raise RuleNotApplicableError("isolated points do not split across the halves")
    sign_from_morse = -1 if minus_side[0].value > 0 else +1
    cr = diagram.double_points[0]
    if cr.sign is not None and cr.sign != sign_from_morse:
        raise InvalidParamsError(
            f"diagram crossing sign {cr.sign} disagrees with Morse data "
            f"({sign_from_morse})"
        )
    n = diagram.base_dim
    degrees = sorted({0, n - 1})
    entries = _empty_entries(degrees)
    if sign_from_morse < 0:
        entries[0]["c_plus"] = -A
        entries[n - 1]["C_minus"] = A
    else:
        entries[0]["c_minus"] = -A
        entries[n - 1]["C_plus"] = A
    return CapacityTable(
        height=diagram.height,
        base_dim=n,
        fiber_dim=diagram.fiber_dim,
        entries=entries,
        method="single_crossing_rule",
        ambiguous={k: False for k in degrees},
        provenance={"crossing_sign": sign_from_morse, "lobe_area": A,
                    "critical_values": sorted(cd.value for cd in iso)},
    )


# ---------------------------------------------------------------------------
# sweep route

def _jump_brackets(levels, ranks_by_level, degree):
    """(lo, hi) intervals between consecutive levels where the rank changes."""
    out = []
    for lo, hi in zip(levels[:-1], levels[1:]):
        if ranks_by_level[lo][degree] != ranks_by_level[hi][degree]:
            out.append((lo, hi))
    return out


def capacities_from_sweep(sweep: RankSweep) -> CapacityTable:
    """Capacity table read off rank-change thresholds of a sweep.

    Lower capacity in slice degree k for half s: the largest negative
    level bracket across which the lower s-pair rank in pair degree k+N
    changes (the killing handle has index k+N).  Upper capacity: the
    smallest positive bracket where the upper s-pair rank in degree
    k+N+2 becomes nonzero.  Zero when no change occurs.  Brackets are
    reported by midpoint; refine against the field for tighter values.
    """
    N = sweep.fiber_dim
    d = sweep.domain_dim
    n = d - 2 * (1 + N) + 1
    lowers = {h: sweep.ranks[("lower", h)] for h in ("+", "-")}
    uppers = {h: sweep.ranks[("upper", h)] for h in ("+", "-")}
    neg_levels = sorted(l for l in sweep.levels if l < 0)
    pos_levels = sorted(l for l in sweep.levels if l > 0)
    if len(neg_levels) < 2 or len(pos_levels) < 2:
        raise InsufficientSweepError("sweep needs at least two levels on each side")
    if sweep.field is not None and sweep.field.critical_values is not None:
        vmax = float(np.max(np.abs(sweep.field.critical_values)))
        if -neg_levels[0] <= vmax or pos_levels[-1] <= vmax:
            raise InsufficientSweepError(
                f"sweep [{neg_levels[0]:g}, {pos_levels[-1]:g}] does not extend "
                f"past the largest critical value {vmax:g}"
            )
    degrees = sorted({0, n - 1})
    entries = _empty_entries(degrees)
    ambiguous = {k: False for k in degrees}
    prov = {}
    for k in degrees:
        for half, tag_lower, tag_upper in (("+", "c_plus", "C_plus"), ("-", "c_minus", "C_minus")):
            D_low = k + N
            if 0 <= D_low <= d:
                br = _jump_brackets(neg_levels, lowers[half], D_low)
                if br:
                    lo, hi = br[-1]
                    entries[k][tag_lower] = 0.5 * (lo + hi)
                    prov[(k, tag_lower)] = {"bracket": (lo, hi), "degree": D_low}
                    if len(br) > 1:
                        ambiguous[k] = True
            D_up = k + N + 2
            if 0 <= D_up <= d:
                prev = 0
                for lo, hi in zip(pos_levels[:-1], pos_levels[1:]):
                    r_lo = uppers[half][lo][D_up]
                    r_hi = uppers[half][hi][D_up]
                    if r_lo == 0 and r_hi != 0:
                        entries[k][tag_upper] = 0.5 * (lo + hi)
                        prov[(k, tag_upper)] = {"bracket": (lo, hi), "degree": D_up}
                        extra = _jump_brackets(pos_levels, uppers[half], D_up)
                        if len(extra) > 1:
                            ambiguous[k] = True
                        break
    return CapacityTable(
        height=float("nan"),
        base_dim=n,
        fiber_dim=N,
        entries=entries,
        method="rank_sweep",
        ambiguous=ambiguous,
        provenance=prov,
    )


def _refine_bracket(field: CubicalField, half: str, degree: int,
                    lo: float, hi: float, passes: int = 6) -> tuple:
    """Bisect a jump bracket using thin-window contents."""
    for _ in range(passes):
        mid = 0.5 * (lo + hi)
        content = window_ranks(field, lo, mid, half)
        if content[degree] != 0:
            hi = mid
        else:
            lo = mid
    return lo, hi


def sweep_capacity_pipeline(delta: DifferenceFunction, diagram: SliceDiagram,
                            morse_data: Sequence[CriticalDatum],
                            resolution: int = 48, refine: bool = True,
                            field: Optional[CubicalField] = None) -> CapacityTable:
    """Full rank-sweep route: field, eta, bracketing levels, extraction.

    Sweep levels bracket each nonzero critical value at the local
    one-cell variation; optional bisection narrows each detected jump.
    The returned table's nonzero entries sit within one-cell variation
    of the corresponding critical values.
    """
    if field is None:
        field = build_field(delta, resolution, critical_data=morse_data)
    nz = [cd for cd in morse_data if cd.kind == "isolated" and abs(cd.value) > 1e-12]
    if not nz:
        n = diagram.base_dim
        return CapacityTable(
            height=diagram.height, base_dim=n, fiber_dim=field.fiber_dim,
            entries=_empty_entries(sorted({0, n - 1})), method="rank_sweep",
        )
    vmax = max(abs(cd.value) for cd in nz)
    vmin = min(abs(cd.value) for cd in nz)
    band = field.band_amplitude()
    eta = max(1.3 * band, min(0.35 * vmin, 0.8 * vmin - band))
    if not band < eta < vmin:
        raise InsufficientSweepError(
            f"no admissible eta between band amplitude {band:g} and smallest "
            f"critical value {vmin:g}; increase the resolution"
        )
    theta = 1.2 * vmax
    levels = {-theta, theta, -1.07 * eta, 1.07 * eta}
    spreads = {}
    for cd in nz:
        dv = max(1.5 * field.variation_at(cd.point), 0.02 * abs(cd.value))
        dv = min(dv, 0.45 * (abs(cd.value) - eta))
        spreads[cd.value] = dv
        levels.add(cd.value - dv)
        levels.add(cd.value + dv)
    sweep = rank_sweep(field, eta, sorted(levels))
    table = capacities_from_sweep(sweep)
    table.height = diagram.height
    if refine:
        for (k, tag), info in list(table.provenance.items()):
            lo, hi = info["bracket"]
            deg = info["degree"]
            half = "+" if tag.endswith("plus") else "-"
            lo2, hi2 = _refine_bracket(field, half, deg, lo, hi)
            table.entries[k][tag] = 0.5 * (lo2 + hi2)
            info["bracket"] = (lo2, hi2)
    table.provenance["eta"] = eta
    table.provenance["theta"] = theta
    table.provenance["resolution"] = resolution
    return table


# ---------------------------------------------------------------------------
# height scans

@dataclass
class CapacityCurve:
    """Capacity tables over a family of heights plus derivative diagnostics."""

    heights: list
    tables: list
    warnings: list = field(default_factory=list)
    derivative_records: list = field(default_factory=list)
    crossing_spans: list = field(default_factory=list)  # max |x_n - xt_n| per height

    def values(self, degree: int, kind: str) -> np.ndarray:
        return np.array([t.get(degree, kind) for t in self.tables])

    def check_monotone(self, strict_tol: float = 1e-9):
        """Thm-style monotonicity along increasing heights of one sign.

        c_plus and C_plus must be non-decreasing, c_minus and C_minus
        non-increasing; equality is allowed only when both values vanish.
        Returns (ok, violations).
        """
        violations = []
        hs = self.heights
        for k in sorted({d for t in self.tables for d in t.degrees}):
            for kind in _KINDS:
                vals = self.values(k, kind)
                increasing = kind.endswith("plus")
                for i in range(len(hs) - 1):
                    a, b = vals[i], vals[i + 1]
                    diff = (b - a) if increasing else (a - b)
                    if diff < -strict_tol:
                        violations.append((hs[i], hs[i + 1], k, kind, a, b, "order"))
                    elif abs(diff) <= strict_tol and (abs(a) > strict_tol or abs(b) > strict_tol):
                        violations.append((hs[i], hs[i + 1], k, kind, a, b, "strictness"))
        return (not violations), violations

    def check_continuity(self, tol: float = 1e-6):
        """Jump bound |c(t2) - c(t1)| <= L * (t2 - t1) with L the largest
        x_n-separation across tracked crossings."""
        violations = []
        for i in range(len(self.heights) - 1):
            dt = abs(self.heights[i + 1] - self.heights[i])
            L = max(self.crossing_spans[i], self.crossing_spans[i + 1])
            for k in sorted(self.tables[i].entries):
                for kind in _KINDS:
                    jump = abs(self.tables[i + 1].get(k, kind) - self.tables[i].get(k, kind))
                    if jump > L * dt * (1.0 + 1e-6) + tol:
                        violations.append((self.heights[i], k, kind, jump, L * dt))
        return (not violations), violations


def _height_analysis(f: GeneratingFamily, a: float, grid: Optional[GridSpec] = None):
    diagram = extract_slice(f, a, grid)
    delta = DifferenceFunction(ShearedFamily(f, a))
    data = critical_points(delta, diagram) if not diagram.is_empty else []
    return diagram, delta, data


def monotonicity_scan(f: GeneratingFamily, heights: Sequence[float],
                      grid: Optional[GridSpec] = None) -> CapacityCurve:
    """Fast-path capacity tables over a sorted run of same-sign heights.

    Non-generic heights are skipped with a warning record.  Each height
    also records max |x_n - xt_n| over crossings (the continuity
    Lipschitz bound) and the curve carries numerically differentiated
    capacity values for the derivative law dv/dt = xt_n - x_n.
    """
    heights = sorted(float(t) for t in heights)
    if heights and (heights[0] < 0 < heights[-1] or 0 in heights):
        raise InvalidParamsError("scan heights must all have one sign (0 excluded)")
    curve = CapacityCurve(heights=[], tables=[])
    per_height = {}
    for t in heights:
        try:
            diagram, delta, data = _height_analysis(f, t, grid)
        except NonTransverseSliceError as exc:
            curve.warnings.append((t, str(exc)))
            continue
        if diagram.is_empty:
            n = f.base_dim
            table = CapacityTable(height=t, base_dim=n, fiber_dim=f.fiber_dim,
                                  entries=_empty_entries(sorted({0, n - 1})),
                                  method="single_crossing_rule")
            span = 0.0
        else:
            table = capacities_single_crossing(diagram, data)
            span = max((abs(cd.point[delta.m + delta.fiber] - cd.point[delta.m])
                        for cd in data if cd.kind == "isolated"), default=0.0)
        curve.heights.append(t)
        curve.tables.append(table)
        curve.crossing_spans.append(span)
        per_height[t] = (diagram, delta, data)
    # derivative law: central differences of each nonzero capacity branch
    # against the geometric rate xt_n - x_n at the supporting critical point
    hs = curve.heights
    for i in range(1, len(hs) - 1):
        t0, t1, t2 = hs[i - 1], hs[i], hs[i + 1]
        diagram, delta, data = per_height[t1]
        for k in curve.tables[i].degrees:
            for kind in _KINDS:
                v0, v1, v2 = (curve.tables[j].get(k, kind) for j in (i - 1, i, i + 1))
                if abs(v1) < 1e-12:
                    continue
                dnum = (v2 - v0) / (t2 - t0)
                cd = min(
                    (c for c in data if c.kind == "isolated"),
                    key=lambda c: abs(abs(c.value) - abs(v1)),
                )
                sgn = 1.0 if cd.value * v1 > 0 else -1.0
                # rate of the critical value generating this entry
                rate = sgn * (cd.point[delta.m + delta.fiber] - cd.point[delta.m])
                curve.derivative_records.append(
                    {"height": t1, "degree": k, "kind": kind,
                     "numeric": dnum, "geometric": rate,
                     "mismatch": abs(dnum - rate)}
                )
    return curve


# ---------------------------------------------------------------------------
# application checkers

@dataclass
class Verdict:
    """Outcome of an obstruction / squeezing check; never an existence claim."""

    verdict: str
    reasons: list = field(default_factory=list)
    data: dict = field(default_factory=dict)

    def __bool__(self):  # truthy when something is obstructed/excluded
        return self.verdict in ("OBSTRUCTED", "EXCLUDED")


def cobordism_obstruction(bottom: CapacityTable, top: CapacityTable, chi: int,
                          writhe_pair: Optional[tuple] = None,
                          strict_tol: float = 1e-9) -> Verdict:
    """Check a candidate cobordism from the bottom slice up to the top one.

    OBSTRUCTED when the four monotonicity inequalities fail (with
    strictness at nonzero values) or when the writhe balance
    writhe(top) - writhe(bottom) != chi.  NOT-OBSTRUCTED otherwise; the
    checkers prove non-existence only, never existence.
    """
    reasons = []
    if writhe_pair is not None:
        w_b, w_t = writhe_pair
        if w_t - w_b != chi:
            reasons.append(
                f"euler: writhe(top) - writhe(bottom) = {w_t - w_b} != chi = {chi}"
            )
    for k in sorted(set(bottom.degrees) | set(top.degrees)):
        for kind in _KINDS:
            vb = bottom.get(k, kind)
            vt = top.get(k, kind)
            increasing = kind.endswith("plus")
            diff = (vt - vb) if increasing else (vb - vt)
            if diff < -strict_tol:
                reasons.append(
                    f"monotonicity: {kind}[deg {k}] must be "
                    f"{'non-decreasing' if increasing else 'non-increasing'} upward, "
                    f"got {vb:.6g} -> {vt:.6g}"
                )
            elif abs(diff) <= strict_tol and (abs(vb) > strict_tol or abs(vt) > strict_tol):
                reasons.append(
                    f"strictness: {kind}[deg {k}] equal nonzero values {vb:.6g}"
                )
    return Verdict(verdict="OBSTRUCTED" if reasons else "NOT-OBSTRUCTED",
                   reasons=reasons,
                   data={"chi": chi, "writhe_pair": writhe_pair})


def measure_disk_box(f: GeneratingFamily, a: float, side: str = "above",
                     n_heights: int = 24, grid: Optional[GridSpec] = None) -> tuple:
    """(x_n, y_n) bounding box of the Lagrangian disk cut off at height a.

    Traces slices at heights from a toward the empty range and records
    the x_n extents; the y_n extent is the traversed height interval.
    """
    if side not in ("above", "below"):
        raise InvalidParamsError("side must be 'above' or 'below'")
    K_guess = []
    lo, hi = (a, a) if side == "above" else (a, a)
    step = 0.25 * (1.0 + abs(a))
    xn_lo, xn_hi = np.inf, -np.inf
    t = a
    last_nonempty = a
    for _ in range(n_heights * 4):
        try:
            diagram = extract_slice(f, t, grid)
        except NonTransverseSliceError:
            t += step if side == "above" else -step
            continue
        if diagram.is_empty:
            break
        last_nonempty = t
        for comp in diagram.components:
            xn_vals = comp.vertices[:, f.base_dim - 1]
            xn_lo = min(xn_lo, float(np.min(xn_vals)))
            xn_hi = max(xn_hi, float(np.max(xn_vals)))
        t = t + step if side == "above" else t - step
    length = xn_hi - xn_lo
    width = abs(last_nonempty - a) + step
    return length, width


def nonsqueezing_check(f: GeneratingFamily, a: float, box: tuple,
                       table: Optional[CapacityTable] = None,
                       grid: Optional[GridSpec] = None) -> Verdict:
    """Can the Lagrangian disk bounded by the slice fit the cylinder box?

    box = ((xn_lo, xn_hi), (yn_lo, yn_hi)).  EXCLUDED when
    length * width < max |capacity| of the boundary slice; the slice
    itself must fit inside the box, else InvalidBoxError.
    """
    (xlo, xhi), (ylo, yhi) = box
    if not (xhi > xlo and yhi > ylo):
        raise InvalidBoxError("box intervals must be nondegenerate")
    diagram, delta, data = _height_analysis(f, a, grid)
    if diagram.is_empty:
        raise InvalidParamsError(f"slice at height {a!r} is empty")
    if not (ylo <= a <= yhi):
        raise InvalidBoxError(f"height {a:g} outside the y_n interval ({ylo:g}, {yhi:g})")
    m = f.base_dim - 1
    for comp in diagram.components:
        xn_vals = comp.vertices[:, m]
        if np.min(xn_vals) < xlo - 1e-9 or np.max(xn_vals) > xhi + 1e-9:
            raise InvalidBoxError(
                f"slice x_n range [{np.min(xn_vals):.4g}, {np.max(xn_vals):.4g}] "
                f"exceeds the x_n interval ({xlo:g}, {xhi:g})"
            )
    if table is None:
        table = capacities_single_crossing(diagram, data)
    product = (xhi - xlo) * (yhi - ylo)
    cap = table.max_abs()
    if product < cap:
        return Verdict(
            verdict="EXCLUDED",
            reasons=[f"l*w = {product:.6g} < |capacity| = {cap:.6g}"],
            data={"product": product, "capacity": cap},
        )
    return Verdict(
        verdict="NOT-EXCLUDED",
        reasons=[f"l*w = {product:.6g} >= |capacity| = {cap:.6g}"],
        data={"product": product, "capacity": cap},
    )


# ---------------------------------------------------------------------------
# serialization

def table_to_csv(tables) -> str:
    if isinstance(tables, CapacityTable):
        tables = [tables]
    lines = ["height,degree,c_plus,c_minus,C_plus,C_minus,method,ambiguous"]
    for t in tables:
        for k in t.degrees:
            row = t.entries[k]
            lines.append(
                f"{t.height:.12g},{k},{row['c_plus']:.12g},{row['c_minus']:.12g},"
                f"{row['C_plus']:.12g},{row['C_minus']:.12g},{t.method},"
                f"{int(t.ambiguous.get(k, False))}"
            )
    return "\n".join(lines) + "\n"


def curve_to_csv(curve: CapacityCurve) -> str:
    return table_to_csv(curve.tables)
