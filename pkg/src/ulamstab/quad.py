"""Integration machinery.

Provides adaptive Gauss-Kronrod quadrature with tanh-sinh handling of
endpoint singularities and infinite endpoints, cached cumulative
antiderivatives with per-panel polynomial interpolants, graded evaluation
grids, and sup-over-interval search with endpoint limit extrapolation.

Everything here is pure; `CumulativeIntegral` objects are built once and
read-only afterwards, so they can be shared freely between threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import legendre as npleg

__all__ = [
    "IntegralResult",
    "Divergent",
    "MaxDepthExceeded",
    "CoverageError",
    "integrate",
    "CumulativeIntegral",
    "cumulative",
    "SupResult",
    "sup_over",
    "graded_grid",
]


class Divergent(Exception):
    """Integral grows without bound under refinement."""

    def __init__(self, message, trace=()):
        super().__init__(message)
        self.trace = list(trace)


class MaxDepthExceeded(Exception):
    pass


class CoverageError(Exception):
    """Query point outside the covered range of a cumulative cache."""


@dataclass(frozen=True)
class IntegralResult:
    value: complex
    error_bound: float


# ---------------------------------------------------------------------------
# Gauss-Kronrod 15(7) rule on [-1, 1]

_XGK = np.array(
    [
        -0.991455371120813,
        -0.949107912342759,
        -0.864864423359769,
        -0.741531185599394,
        -0.586087235467691,
        -0.405845151377397,
        -0.207784955007898,
        0.0,
        0.207784955007898,
        0.405845151377397,
        0.586087235467691,
        0.741531185599394,
        0.864864423359769,
        0.949107912342759,
        0.991455371120813,
    ]
)
_WGK = np.array(
    [
        0.022935322010529,
        0.063092092629979,
        0.104790010322250,
        0.140653259715525,
        0.169004726639267,
        0.190350578064785,
        0.204432940075298,
        0.209482141084728,
        0.204432940075298,
        0.190350578064785,
        0.169004726639267,
        0.140653259715525,
        0.104790010322250,
        0.063092092629979,
        0.022935322010529,
    ]
)
_WG = np.array(
    [
        0.129484966168870,
        0.279705391489277,
        0.381830050505119,
        0.417959183673469,
        0.381830050505119,
        0.279705391489277,
        0.129484966168870,
    ]
)


def _gk15(g, a, b):
    """Return (kronrod value, error estimate, node values) on [a, b]."""
    mid = 0.5 * (a + b)
    hw = 0.5 * (b - a)
    x = mid + hw * _XGK
    y = np.asarray(g(x), dtype=complex)
    k = hw * np.sum(_WGK * y)
    gauss = hw * np.sum(_WG * y[1::2])
    err = abs(k - gauss)
    # standard sharper error model
    resabs = hw * np.sum(_WGK * np.abs(y))
    if resabs > 0 and err > 0:
        err = min(err, resabs * (200.0 * err / resabs) ** 1.5) if err / resabs < 1 else err
    return k, err, y


# ---------------------------------------------------------------------------
# tanh-sinh rule for panels touching a (possibly singular) endpoint


def _tanh_sinh(g, a, b, tol, max_level=11):
    """Double-exponential quadrature on the open panel (a, b).

    Returns (value, error, status) with status in {"converged",
    "not_converged", "diverging"}.  Abscissas are formed via their distance
    to the nearest endpoint so singular endpoints are never hit exactly.
    """
    mid = 0.5 * (a + b)
    hw = 0.5 * (b - a)
    total = 0.0 + 0.0j
    prev = None
    deltas = []
    h = 1.0
    for level in range(max_level + 1):
        if level == 0:
            js = np.arange(0.0, 7.0, 1.0)
            js = np.concatenate([-js[1:][::-1], js])
        else:
            # trapezoid doubling: only the new (odd-multiple) nodes
            js = np.arange(1.0, 7.0 / h, 2.0) * h
            js = np.concatenate([-js[::-1], js])
        js = js[np.abs(np.pi / 2 * np.sinh(js)) < 350.0]
        u = js
        v = 0.5 * np.pi * np.sinh(u)
        w = hw * h * 0.5 * np.pi * np.cosh(u) / np.cosh(v) ** 2
        # distance to the nearer endpoint: hw * (1 - |tanh(v)|)
        d = hw * 2.0 / (np.exp(2.0 * np.abs(v)) + 1.0)
        x = np.where(v >= 0, b - d, a + d)
        keep = (x > a) & (x < b)
        if not np.any(keep):
            vals = np.zeros(0, dtype=complex)
            w = w[:0]
        else:
            x, w = x[keep], w[keep]
            with np.errstate(all="ignore"):
                vals = np.asarray(g(x), dtype=complex)
        finite = np.isfinite(vals.real) & np.isfinite(vals.imag)
        terms = w[finite] * vals[finite]
        if terms.size and not np.all(np.isfinite(terms)):
            return total, math.inf, "diverging"
        contrib = np.sum(terms)
        if level == 0:
            total = contrib
        else:
            total = 0.5 * total + contrib
        if not np.isfinite(abs(total)):
            return total, math.inf, "diverging"
        if prev is not None:
            delta = abs(total - prev)
            deltas.append(delta)
            if delta <= tol * max(1.0, abs(total)):
                return total, delta, "converged"
        prev = total
        h *= 0.5
    status = "not_converged"
    if len(deltas) >= 3 and deltas[-1] > deltas[-2] > deltas[-3] and deltas[-1] > 10 * tol:
        status = "diverging"
    return total, deltas[-1] if deltas else math.inf, status


# ---------------------------------------------------------------------------
# integrate()


def integrate(g, a, b, tol=1e-9, max_depth=60):
    """Integrate ``g`` over the open interval (a, b).

    ``a``/``b`` may be +-inf (mapped through a rational transform).  Panels
    touching an endpoint use tanh-sinh; interior panels use adaptive
    Gauss-Kronrod 15(7).  Raises `Divergent` when refinement toward an
    endpoint keeps growing, `MaxDepthExceeded` on interior non-convergence.
    """
    if not a < b:
        raise ValueError("integrate requires a < b")
    if math.isinf(a) and math.isinf(b):
        left = integrate(g, a, 0.0, tol=0.5 * tol, max_depth=max_depth)
        right = integrate(g, 0.0, b, tol=0.5 * tol, max_depth=max_depth)
        return IntegralResult(left.value + right.value, left.error_bound + right.error_bound)
    if math.isinf(b):

        def gt(u):
            s = a + u / (1.0 - u)
            return np.asarray(g(s), dtype=complex) / (1.0 - u) ** 2

        return _integrate_finite(gt, 0.0, 1.0, tol, max_depth)
    if math.isinf(a):

        def gt(u):
            s = b - (1.0 - u) / u
            return np.asarray(g(s), dtype=complex) / u**2

        return _integrate_finite(gt, 0.0, 1.0, tol, max_depth)
    return _integrate_finite(lambda x: np.asarray(g(x), dtype=complex), a, b, tol, max_depth)


def _integrate_finite(g, A, B, tol, max_depth):
    span = B - A
    total = 0.0 + 0.0j
    err_total = 0.0
    # panel stack: (lo, hi, depth)
    init = np.linspace(A, B, 5)
    stack = [(init[i], init[i + 1], 0) for i in range(4)]
    trace = []
    while stack:
        lo, hi, depth = stack.pop()
        width = hi - lo
        share = tol * max(width / span, 1e-3)
        touches_end = (lo == A) or (hi == B)
        if touches_end:
            val, err, status = _tanh_sinh(g, lo, hi, share)
            if status == "converged":
                total += val
                err_total += err
                trace.append((lo, hi, val))
                continue
            if status == "diverging":
                raise Divergent(
                    f"integral appears divergent near endpoint of ({lo}, {hi})",
                    trace=[(lo, hi, val)],
                )
            # shrink toward the endpoint and retry
            if depth >= max_depth or width < 1e-14 * span:
                raise Divergent(
                    "no convergence while refining toward endpoint",
                    trace=[(lo, hi, val)],
                )
            mid = 0.5 * (lo + hi)
            stack.append((lo, mid, depth + 1))
            stack.append((mid, hi, depth + 1))
            continue
        val, err, _ = _gk15(g, lo, hi)
        if not np.isfinite(abs(val)):
            if depth >= max_depth:
                raise Divergent("non-finite interior panel", trace=[(lo, hi, val)])
            mid = 0.5 * (lo + hi)
            stack.append((lo, mid, depth + 1))
            stack.append((mid, hi, depth + 1))
            continue
        if err <= share or err <= 1e-15 * abs(val):
            total += val
            err_total += err
            trace.append((lo, hi, val))
            continue
        if depth >= max_depth:
            raise MaxDepthExceeded(f"panel ({lo}, {hi}) did not converge")
        mid = 0.5 * (lo + hi)
        stack.append((lo, mid, depth + 1))
        stack.append((mid, hi, depth + 1))
    return IntegralResult(total, err_total)


# ---------------------------------------------------------------------------
# cumulative antiderivative cache

_LEG_DEG = 12


@dataclass
class SideInfo:
    status: str  # "resolved" | "converged" | "budget" | "range_cap" | "diverging" | "singular"
    tail_bound: float = 0.0

    @property
    def usable_as_limit(self):
        # the cache edge can stand in for the (improper) endpoint value
        return self.status in ("resolved", "converged")


@dataclass
class CumulativeIntegral:
    """Cached antiderivative P(t) = int_{t_ref}^t g with panel interpolants.

    Values are queried as differences anchored at an edge or at ``t_ref``;
    differences anchored at an edge accumulate the tiny near-edge panel
    contributions first, preserving relative accuracy of small tails.
    """

    t_ref: float
    bps: np.ndarray
    panel_vals: np.ndarray  # complex, per panel
    panel_errs: np.ndarray
    antider: np.ndarray  # (deg+1, n_panels) Legendre coeffs, zero at panel start
    lower_info: SideInfo = field(default_factory=lambda: SideInfo("resolved"))
    upper_info: SideInfo = field(default_factory=lambda: SideInfo("resolved"))

    def __post_init__(self):
        self._left = np.concatenate([[0.0 + 0.0j], np.cumsum(self.panel_vals)])
        self._right = np.concatenate([np.cumsum(self.panel_vals[::-1])[::-1], [0.0 + 0.0j]])
        # accumulation anchored at the reference panel: differences near
        # t_ref must not be formed by cancelling huge edge-anchored sums
        k = int(np.clip(np.searchsorted(self.bps, self.t_ref, side="right") - 1, 0, len(self.panel_vals) - 1))
        anch = np.empty(len(self.panel_vals) + 1, dtype=complex)
        anch[k] = 0.0
        anch[k + 1 :] = np.cumsum(self.panel_vals[k:])
        anch[:k] = -np.cumsum(self.panel_vals[:k][::-1])[::-1]
        self._anch = anch
        self._ref_offset = complex(self._anch_prefix(np.array([self.t_ref]))[0])
        self.error_bound = float(np.sum(self.panel_errs))

    @property
    def lo(self):
        return float(self.bps[0])

    @property
    def hi(self):
        return float(self.bps[-1])

    def covers(self, t):
        t = np.asarray(t, float)
        return (t >= self.bps[0]) & (t <= self.bps[-1])

    def _locate(self, t):
        t = np.asarray(t, float)
        if np.any(t < self.bps[0]) or np.any(t > self.bps[-1]):
            raise CoverageError(
                f"query outside coverage [{self.bps[0]}, {self.bps[-1]}]"
            )
        idx = np.searchsorted(self.bps, t, side="right") - 1
        return t, np.clip(idx, 0, len(self.panel_vals) - 1)

    def _interp_prefix(self, t):
        """int from bps[0] to t, anchored at the lower edge."""
        t, idx = self._locate(t)
        x0 = self.bps[idx]
        x1 = self.bps[idx + 1]
        xi = 2.0 * (t - x0) / (x1 - x0) - 1.0
        part_re = npleg.legval(xi, self.antider.real[:, idx], tensor=False)
        part_im = npleg.legval(xi, self.antider.imag[:, idx], tensor=False)
        return self._left[idx] + part_re + 1j * part_im

    def _anch_prefix(self, t):
        """int from the reference panel start to t."""
        t, idx = self._locate(t)
        x0 = self.bps[idx]
        x1 = self.bps[idx + 1]
        xi = 2.0 * (t - x0) / (x1 - x0) - 1.0
        part_re = npleg.legval(xi, self.antider.real[:, idx], tensor=False)
        part_im = npleg.legval(xi, self.antider.imag[:, idx], tensor=False)
        return self._anch[idx] + part_re + 1j * part_im

    def from_lower(self, t):
        """int over (lower edge, t]; accurate for t near the lower edge."""
        return self._interp_prefix(t)

    def from_upper(self, t):
        """int over [t, upper edge); accurate for t near the upper edge."""
        t, idx = self._locate(t)
        x0 = self.bps[idx]
        x1 = self.bps[idx + 1]
        xi = 2.0 * (t - x0) / (x1 - x0) - 1.0
        part_re = npleg.legval(xi, self.antider.real[:, idx], tensor=False)
        part_im = npleg.legval(xi, self.antider.imag[:, idx], tensor=False)
        partial = part_re + 1j * part_im
        return self._right[idx] - partial

    def value(self, t):
        """P(t) with P(t_ref) = 0."""
        return self._anch_prefix(t) - self._ref_offset

    def between(self, a, b):
        """int over (a, b) for covered a, b."""
        return self._anch_prefix(np.asarray(b, float)) - self._anch_prefix(np.asarray(a, float))

    @property
    def total(self):
        return complex(self._left[-1])


def _leaf(g, lo, hi, leaf_tol, leaf_rel=1e-13, max_depth=28):
    """Adaptively split [lo, hi] into converged leaves with interpolants."""
    out = []
    stack = [(lo, hi, 0)]
    while stack:
        a, b, depth = stack.pop()
        val, err, y = _gk15(g, a, b)
        finite = np.all(np.isfinite(y.real)) and np.all(np.isfinite(y.imag))
        # relative scale: panel value, or sample magnitude when it cancels
        mag = max(abs(val), (b - a) * float(np.max(np.abs(y))) if y.size else 0.0)
        if finite and (err <= leaf_tol + leaf_rel * mag or depth >= max_depth):
            coef = npleg.legfit(_XGK, y, _LEG_DEG)
            resid = float(np.max(np.abs(npleg.legval(_XGK, coef) - y))) * (b - a)
            # interior value() queries read the interpolant, so the fit must
            # meet the same budget as the integral before the leaf is kept;
            # node abscissas are rounded to ulp(|t|), which floors the
            # attainable residual of steep narrow panels far from 0
            ymax = float(np.max(np.abs(y))) if y.size else 0.0
            pos_noise = 64.0 * np.finfo(float).eps * max(abs(a), abs(b)) * ymax
            if resid > leaf_tol + leaf_rel * mag + pos_noise and depth < max_depth:
                mid = 0.5 * (a + b)
                stack.append((a, mid, depth + 1))
                stack.append((mid, b, depth + 1))
                continue
            anti = npleg.legint(coef) * (0.5 * (b - a))
            anti[0] -= npleg.legval(-1.0, anti)
            out.append((a, b, val, err + 0.1 * resid, anti))
            continue
        if depth >= max_depth:
            # non-finite leaf that refuses to resolve; signal to caller
            raise FloatingPointError("non-finite integrand inside panel")
        mid = 0.5 * (a + b)
        stack.append((a, mid, depth + 1))
        stack.append((mid, b, depth + 1))
    out.sort(key=lambda leaf: leaf[0])
    return out


def _finite_skeleton(t_ref, endpoint, sign):
    """Breakpoints from the anchor toward a finite endpoint.

    Gaps double away from the anchor, then halve toward the endpoint.  The
    width of every panel stays comparable to its distance from the nearer
    end, which bounds the per-panel dynamic range of growing integrands --
    a single panel spanning most of a huge range would pass the integral
    tolerance yet leave interior interpolant queries with absolute error
    on the scale of the whole panel mass.  Returns (points, n_grow) where
    the first ``n_grow`` points belong to the doubling phase.
    """
    span = abs(endpoint - t_ref)
    half = 0.5 * span
    h0 = min(1.0, 0.05 * span)
    pts = []
    k = 1
    while True:
        d = h0 * (2.0**k - 1.0)
        if d >= half:
            break
        pts.append(t_ref + sign * d)
        k += 1
    n_grow = len(pts)
    gap = half
    eps_gap = 1e-13 * max(abs(endpoint), 1.0)
    while gap >= eps_gap:
        pts.append(endpoint - sign * gap)
        gap *= 0.5
    return pts, n_grow


def cumulative(
    g,
    t_ref,
    lower,
    upper,
    tol=1e-10,
    log_budget=300.0,
    range_cap=1e8,
    tail_mode=False,
    tail_tol=None,
    leaf_rel=1e-13,
    max_panels=4000,
):
    """Build a `CumulativeIntegral` of ``g`` anchored at ``t_ref``.

    Coverage expands from ``t_ref`` toward each endpoint with geometrically
    graded skeleton panels until the endpoint is resolved, the real part of
    the accumulated value exceeds ``log_budget``, the range cap is hit, or
    (with ``tail_mode``) the endpoint tail has converged or is evidently
    diverging.  Coverage limits are recorded as data, never raised.
    """
    if tail_tol is None:
        tail_tol = tol
    # tail caches serve edge-anchored partial sums over exponential dynamic
    # range: an absolute tolerance floor would let deep-decay panels carry
    # huge relative errors that downstream prefactors amplify
    leaf_tol = 0.0 if tail_mode else tol * 1e-2

    leaves = []
    infos = {}
    for side, endpoint in (("upper", upper), ("lower", lower)):
        sign = 1 if side == "upper" else -1
        cum = 0.0 + 0.0j
        contribs = []
        edge = t_ref
        status = None
        tail_bound = 0.0
        diverging = False
        k = 0
        if math.isinf(endpoint):
            pts, n_grow = None, 0
        else:
            pts, n_grow = _finite_skeleton(t_ref, endpoint, sign)
        while True:
            k += 1
            if k > max_panels:
                status = "range_cap"
                break
            if pts is None:
                h0 = max(1.0, 0.05 * abs(t_ref))
                nxt = t_ref + sign * h0 * (2.0**k - 1.0)
                if abs(nxt) > range_cap:
                    status = "range_cap"
                    break
            else:
                if k > len(pts):
                    status = "resolved"
                    break
                nxt = pts[k - 1]
            lo_, hi_ = (edge, nxt) if sign > 0 else (nxt, edge)
            try:
                new = _leaf(g, lo_, hi_, leaf_tol, leaf_rel)
            except FloatingPointError:
                status = "singular"
                break
            pv = sum(leaf[2] for leaf in new)
            cum += pv
            # only the endpoint-approach phase feeds the tail heuristics;
            # panels still growing away from the anchor carry growing mass
            # for perfectly integrable functions
            if k > n_grow:
                contribs.append(abs(pv))
            leaves.extend(new)
            edge = nxt
            if tail_mode:
                if len(contribs) >= 3:
                    c1, c2, c3 = contribs[-3], contribs[-2], contribs[-1]
                    # divergence is flagged but never stops the expansion:
                    # truncating coverage early would poison edge-anchored
                    # queries whose prefactor amplifies the missing mass
                    if len(contribs) > 6 and c3 >= c2 >= c1 and c3 > 10.0 * (contribs[0] + tail_tol):
                        diverging = True
                    # log-type endpoint divergence: halved panels keep
                    # contributing the same mass instead of decaying
                    if (
                        len(contribs) > 8
                        and math.isfinite(endpoint)
                        and c3 > tail_tol
                        and c3 >= 0.999 * c2
                        and c2 >= 0.999 * c1
                    ):
                        diverging = True
                # tail caches hold exponential-scale values; budget their log
                if abs(cum) > math.exp(min(log_budget, 700.0)):
                    status = "budget"
                    break
            elif abs(cum.real) > log_budget:
                status = "budget"
                break
        if tail_mode and len(contribs) >= 3:
            c1, c2, c3 = contribs[-3], contribs[-2], contribs[-1]
            if diverging:
                status = "diverging"
            elif status in ("budget", "range_cap"):
                if c3 <= tail_tol and c2 <= tail_tol and c1 <= tail_tol and c3 <= c2 <= c1:
                    # cut off by range only after the tail had already died
                    ratio = c3 / c2 if c2 > 0 else 0.0
                    tail_bound = c3 * ratio / (1.0 - ratio) if ratio < 1 else c3
                    status = "converged"
                elif c3 > tail_tol and c3 >= 0.7 * c2:
                    # tail not decaying by the time expansion was cut off
                    status = "diverging"
        infos[side] = SideInfo(status or "resolved", tail_bound)

    leaves.sort(key=lambda leaf: leaf[0])
    if not leaves:
        raise ValueError("empty coverage; t_ref too close to both endpoints")
    bps = np.array([leaf[0] for leaf in leaves] + [leaves[-1][1]])
    vals = np.array([leaf[2] for leaf in leaves], dtype=complex)
    errs = np.array([leaf[3] for leaf in leaves], dtype=float)
    deg = max(leaf[4].shape[0] for leaf in leaves)
    anti = np.zeros((deg, len(leaves)), dtype=complex)
    for j, leaf in enumerate(leaves):
        anti[: leaf[4].shape[0], j] = leaf[4]
    return CumulativeIntegral(
        t_ref=float(t_ref),
        bps=bps,
        panel_vals=vals,
        panel_errs=errs,
        antider=anti,
        lower_info=infos["lower"],
        upper_info=infos["upper"],
    )


# ---------------------------------------------------------------------------
# graded grids and sup search


def graded_grid(lo, hi, n, include_lo=False, include_hi=False):
    """Points in [lo, hi] clustered geometrically toward both ends.

    Used for probe grids and sup scans; endpoints are included only when
    the corresponding flag is set (closed endpoint).
    """
    span = hi - lo
    if span <= 0:
        raise ValueError("empty grid range")
    n_uni = max(n // 2, 8)
    n_geo = max(n // 4, 8)
    pts = [np.linspace(lo, hi, n_uni + 2)[1:-1]]
    ratios = np.exp(np.linspace(math.log(0.25), math.log(1e-12), n_geo))
    pts.append(lo + span * ratios)
    pts.append(hi - span * ratios)
    grid = np.concatenate(pts)
    eps_lo = max(abs(lo), abs(hi), 1.0) * 1e-14
    grid = grid[(grid > lo + (0 if include_lo else eps_lo * 0)) & (grid < hi)]
    grid = grid[(grid > lo) & (grid < hi)]
    if include_lo:
        grid = np.append(grid, lo)
    if include_hi:
        grid = np.append(grid, hi)
    return np.unique(grid)


@dataclass
class SupResult:
    sup_value: float
    attained_near: float | str
    unbounded: bool = False
    trace: list = field(default_factory=list)


def _golden_refine(h, a, b, iters=80):
    phi = (math.sqrt(5.0) - 1.0) / 2.0
    x1 = b - phi * (b - a)
    x2 = a + phi * (b - a)
    f1 = float(np.real(h(np.array([x1]))[0]))
    f2 = float(np.real(h(np.array([x2]))[0]))
    for _ in range(iters):
        if b - a < 1e-13 * max(1.0, abs(a), abs(b)):
            break
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + phi * (b - a)
            f2 = float(np.real(h(np.array([x2]))[0]))
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - phi * (b - a)
            f1 = float(np.real(h(np.array([x1]))[0]))
    if f1 >= f2:
        return x1, f1
    return x2, f2


def _richardson(values, ratio):
    """Extrapolate v_j = v* + O(d_j), d_{j+1} = ratio * d_j."""
    table = [list(values)]
    best = values[-1]
    for m in range(1, min(len(values), 6)):
        prev = table[-1]
        row = []
        rm = ratio**m
        for j in range(1, len(prev)):
            row.append((prev[j] - rm * prev[j - 1]) / (1.0 - rm))
        table.append(row)
        if row:
            best = row[-1]
    return best


def sup_over(
    h,
    lo,
    hi,
    lo_open=True,
    hi_open=True,
    n_scan=257,
    threshold=1e6,
    tail_k=8,
    n_approach=28,
):
    """Supremum of real-valued ``h`` over (lo, hi) within the covered range.

    Coarse graded scan, golden-section refinement around the top five scan
    maxima, then endpoint limit handling: a geometric approach sequence per
    open endpoint, flagged as unbounded evidence if its tail is strictly
    increasing past ``threshold``, otherwise Richardson-extrapolated.
    """
    grid = graded_grid(lo, hi, n_scan, include_lo=not lo_open, include_hi=not hi_open)
    with np.errstate(all="ignore"):
        vals = np.real(np.asarray(h(grid), dtype=complex))
    ok = np.isfinite(vals)
    grid, vals = grid[ok], vals[ok]
    if grid.size == 0:
        raise ValueError("sup_over: no evaluable points")
    trace = list(zip(grid.tolist(), vals.tolist()))

    order = np.argsort(vals)[::-1]
    best_val = float(vals[order[0]])
    best_t = float(grid[order[0]])
    # local refinement around top-5 scan maxima
    for idx in order[:5]:
        i = int(idx)
        a = grid[i - 1] if i > 0 else grid[0]
        b = grid[i + 1] if i < grid.size - 1 else grid[-1]
        if b > a:
            t_loc, v_loc = _golden_refine(h, float(a), float(b))
            if v_loc > best_val:
                best_val, best_t = v_loc, t_loc

    span = hi - lo
    ratio = 0.5
    for side, endpoint, is_open in (("lower", lo, lo_open), ("upper", hi, hi_open)):
        if not is_open:
            continue
        sign = 1.0 if side == "lower" else -1.0
        d0 = 0.25 * span
        ds = d0 * ratio ** np.arange(n_approach)
        pts = endpoint + sign * ds
        pts = pts[(pts > lo) & (pts < hi) & (pts != endpoint)]
        if pts.size < 4:
            continue
        with np.errstate(all="ignore"):
            seq = np.real(np.asarray(h(pts), dtype=complex))
        ok = np.isfinite(seq)
        pts, seq = pts[ok], seq[ok]
        if seq.size < 4:
            continue
        trace.extend(zip(pts.tolist(), seq.tolist()))
        tail = seq[-tail_k:]
        incr = np.diff(tail)
        if tail.size >= tail_k and np.all(incr > 0):
            if tail[-1] >= threshold:
                return SupResult(math.inf, endpoint, unbounded=True, trace=trace)
            # slow (power/log) divergence: increments along a geometric
            # approach keep their size instead of decaying with the gap
            noise = 1e-9 * (1.0 + np.abs(tail[-1]))
            if np.all(incr > noise) and np.all(incr[1:] >= 0.95 * incr[:-1]):
                return SupResult(math.inf, endpoint, unbounded=True, trace=trace)
        limit = _richardson(list(seq[-6:]), ratio)
        if np.isfinite(limit) and limit > best_val:
            # never report below a sampled value
            best_val = max(limit, float(np.max(seq)))
            best_t = endpoint
        elif float(np.max(seq)) > best_val:
            best_val = float(np.max(seq))
            best_t = float(pts[int(np.argmax(seq))])
    return SupResult(best_val, best_t, unbounded=False, trace=trace)
