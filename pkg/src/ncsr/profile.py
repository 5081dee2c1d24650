"""Profile curves: validation, critical points, topology intervals, tau/omega.

A profile is a C^1 piecewise polynomial rho(z) tending to +inf at both ends.
Every coefficient used by the algebras and lattices is computed from it.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import kernels

log = logging.getLogger(__name__)

C1_RTOL = 1e-10
LEVEL_TOL = 1e-9
CRIT_TOL = 1e-10


class ProfileError(ValueError):
    """Raised when a profile violates one of the standing assumptions."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


def _fmt(z):
    return f"{z:g}"


def _poly_derivative(c):
    c = np.asarray(c, dtype=float)
    if len(c) <= 1:
        return np.zeros(1)
    return c[1:] * np.arange(1, len(c))


def _poly_eval(c, z):
    out = 0.0
    for a in c[::-1]:
        out = out * z + a
    return out


@dataclass(frozen=True)
class CriticalPoint:
    z: float
    value: float
    kind: str  # "minimum" or "maximum"


@dataclass(frozen=True)
class TopologyInterval:
    id: int
    z1: float
    z2: float
    z3: float
    z4: float
    z5: float | None
    parent: int | None  # None is the sentinel for pi_T(t) = infinity
    bottom: float  # level rho(z2)
    top: float  # level rho(z1), inf for the root
    children: tuple = ()
    minima: tuple = ()

    @property
    def is_root(self):
        return self.parent is None

    def width_range(self):
        lo = self.z3 - self.z2
        hi = self.z4 - self.z1 if math.isfinite(self.z1) and math.isfinite(self.z4) else math.inf
        return lo, hi


@dataclass(frozen=True)
class RepInterval:
    id: int
    z_min: float
    z_max: float
    dim: int
    parent: int | None
    t: int
    level: float

    @property
    def width(self):
        return self.z_max - self.z_min


@dataclass
class RepIntervalSet:
    intervals: list
    skipped: list = field(default_factory=list)  # (t, reason)

    def __iter__(self):
        return iter(self.intervals)

    def __len__(self):
        return len(self.intervals)

    def by_id(self, s):
        for J in self.intervals:
            if J.id == s:
                return J
        raise KeyError(s)

    def children(self, s):
        return [J for J in self.intervals if J.parent == s]


class ProfileCurve:
    """Piecewise polynomial rho.

    ``pieces`` is a list of (breakpoint, coefficients) with coefficients in
    ascending powers of z. Piece i is used on [b_i, b_{i+1}). Without a
    ``domain`` the first and last pieces extend to -inf and +inf. With a
    domain (z_lo, z_hi) the curve is continued outside it by a quadratic
    matching value and slope (linear if the end curvature is not positive).
    Use :func:`validate_profile` to build one with the assumption checks.
    """

    def __init__(self, pieces, domain=None):
        pieces = [(float(b), np.trim_zeros(np.asarray(c, dtype=float), "b")) for b, c in pieces]
        pieces = [(b, c if len(c) else np.zeros(1)) for b, c in pieces]
        self.pieces = pieces
        self.domain = None if domain is None else (float(domain[0]), float(domain[1]))
        self._build()
        self._crit = None
        self._topology = None

    # construction of the evaluation tables
    def _build(self):
        breaks = [b for b, _ in self.pieces]
        polys = [c for _, c in self.pieces]
        if self.domain is not None:
            z_lo, z_hi = self.domain
            breaks[0] = z_lo
            left = self._continuation(polys[0], z_lo, -1)
            right = self._continuation(polys[-1], z_hi, +1)
            breaks = [-np.inf] + breaks + [z_hi]
            polys = [left] + polys + [right]
        deg = max(2, max(len(c) for c in polys) - 1)
        k = len(polys)
        self._breaks = np.array(breaks, dtype=float)
        self._breaks[0] = -np.inf
        self._polys = polys
        self._tables = []
        cur = [np.pad(c, (0, deg + 1 - len(c))) for c in polys]
        for _ in range(deg + 1):
            self._tables.append(np.array(cur).reshape(k, deg + 1))
            cur = [np.pad(_poly_derivative(c), (0, 1)) for c in cur]
        self.degree = deg

    @staticmethod
    def _continuation(c, ze, direction):
        v = _poly_eval(c, ze)
        s = _poly_eval(_poly_derivative(c), ze)
        q = 0.5 * _poly_eval(_poly_derivative(_poly_derivative(c)), ze)
        if q <= 0:
            q = 0.0
        # v + s (z - ze) + q (z - ze)^2 in absolute powers
        return np.array([v - s * ze + q * ze * ze, s - 2 * q * ze, q])

    # evaluation
    def __call__(self, z, deriv=0):
        if deriv >= len(self._tables):
            return np.zeros_like(np.asarray(z, dtype=float))
        z_arr = np.asarray(z, dtype=float)
        out = kernels.ppoly_eval(z_arr, self._breaks, self._tables[deriv])
        if np.ndim(z) == 0:
            return float(np.asarray(out).reshape(-1)[0])
        return out

    def derivative(self, z, k=1):
        return self(z, deriv=k)

    @property
    def breaks(self):
        return self._breaks

    @property
    def coefs(self):
        return self._tables[0]

    def segments(self):
        """(lo, hi, coeffs) for every polynomial piece incl. continuations."""
        out = []
        b = list(self._breaks) + [np.inf]
        for i, c in enumerate(self._polys):
            out.append((b[i], b[i + 1], c))
        return out

    def scale(self):
        finite = [abs(x) for x in self._breaks if np.isfinite(x)]
        return max([1.0] + finite)

    # critical points
    def critical_points(self):
        if self._crit is None:
            self._crit = self._find_critical_points()
        return list(self._crit)

    def _find_critical_points(self):
        cands = []
        for lo, hi, c in self.segments():
            dc = _poly_derivative(c)
            dc = np.trim_zeros(dc, "b")
            if len(dc) <= 1:
                continue
            for r in np.roots(dc[::-1]):
                if abs(r.imag) > 1e-6 * max(1.0, abs(r.real)):
                    continue
                z = r.real
                ddc = _poly_derivative(dc)
                for _ in range(30):
                    d1 = _poly_eval(dc, z)
                    d2 = _poly_eval(ddc, z) if len(ddc) else 0.0
                    if d2 == 0 or abs(d1) < 1e-300:
                        break
                    step = d1 / d2
                    z -= step
                    if abs(step) < 1e-16 * max(1.0, abs(z)):
                        break
                tol = 1e-9 * max(1.0, abs(z))
                if lo - tol <= z < hi + tol:
                    cands.append(z)
        cands.sort()
        merged = []
        for z in cands:
            if merged and abs(z - merged[-1]) < 1e-7 * max(1.0, abs(z)):
                continue
            merged.append(z)
        if not merged:
            return []
        # keep only sign changes of rho'; probe between candidates
        probes = [merged[0] - max(1.0, abs(merged[0]))]
        for a, b in zip(merged[:-1], merged[1:]):
            probes.append(0.5 * (a + b))
        probes.append(merged[-1] + max(1.0, abs(merged[-1])))
        signs = np.sign(self(np.array(probes), deriv=1))
        out = []
        for i, z in enumerate(merged):
            sl, sr = signs[i], signs[i + 1]
            if sl < 0 < sr:
                out.append(CriticalPoint(float(z), float(self(z)), "minimum"))
            elif sl > 0 > sr:
                out.append(CriticalPoint(float(z), float(self(z)), "maximum"))
        return out

    def minima(self):
        return [c for c in self.critical_points() if c.kind == "minimum"]

    def maxima(self):
        return [c for c in self.critical_points() if c.kind == "maximum"]

    def is_trivial(self):
        return len(self.critical_points()) == 1

    # level-set helpers
    def level_crossing(self, y, a, b):
        """Root of rho(z) = y on [a, b] where rho is monotone on [a, b]."""
        fa, fb = self(a) - y, self(b) - y
        if fa == 0:
            return a
        if fb == 0:
            return b
        if fa * fb > 0:
            raise ValueError(f"level {y} not bracketed on [{a}, {b}]")
        return brentq(lambda z: self(z) - y, a, b, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500)

    def _outward_bracket(self, z, y, direction):
        step = 1.0
        while self(z + direction * step) < y:
            step *= 2.0
            if step > 1e12:
                raise ValueError("profile does not reach level")
        return z + direction * step

    def level_components(self, y):
        """Connected components [l, r] of the sublevel set {rho <= y}."""
        crit = self.critical_points()
        mins = [c for c in crit if c.kind == "minimum"]
        maxs = [c for c in crit if c.kind == "maximum"]
        comps = []
        cur = None
        for i, mn in enumerate(mins):
            if mn.value > y:
                continue
            left_max = maxs[i - 1] if i > 0 else None
            right_max = maxs[i] if i < len(maxs) else None
            if cur is None:
                if left_max is None:
                    a = self._outward_bracket(mn.z, y, -1)
                    l = self.level_crossing(y, a, mn.z)
                elif left_max.value <= y:
                    l = left_max.z  # only if nothing to the left joins, handled below
                else:
                    l = self.level_crossing(y, left_max.z, mn.z)
                cur = [l, None]
            if right_max is not None and right_max.value <= y:
                continue  # joins the next basin
            if right_max is None:
                b = self._outward_bracket(mn.z, y, +1)
                r = self.level_crossing(y, mn.z, b)
            else:
                r = self.level_crossing(y, mn.z, right_max.z)
            cur[1] = r
            comps.append(tuple(cur))
            cur = None
        return comps

    # topology forest
    def topology_intervals(self):
        if self._topology is None:
            self._topology = _merge_tree(self)
        return list(self._topology)

    def tau_omega(self):
        return tau_omega(self)

    def __repr__(self):
        return f"ProfileCurve({len(self.pieces)} pieces, domain={self.domain})"


def validate_profile(pieces, domain=None):
    """Build a ProfileCurve, raising ProfileError listing violated assumptions."""
    violations = []
    if not pieces:
        raise ProfileError(["no pieces"])
    bps = [float(b) for b, _ in pieces]
    for a, b in zip(bps[:-1], bps[1:]):
        if not b > a:
            violations.append(f"breakpoints not strictly increasing at z={_fmt(b)}")
    if violations:
        raise ProfileError(violations)
    for b, c in pieces:
        c = np.trim_zeros(np.asarray(c, dtype=float), "b")
        if len(c) <= 1:
            violations.append(f"constant piece at z={_fmt(float(b))}")
    for i in range(1, len(pieces)):
        b = bps[i]
        c0 = np.asarray(pieces[i - 1][1], dtype=float)
        c1 = np.asarray(pieces[i][1], dtype=float)
        v0, v1 = _poly_eval(c0, b), _poly_eval(c1, b)
        d0, d1 = _poly_eval(_poly_derivative(c0), b), _poly_eval(_poly_derivative(c1), b)
        if abs(v0 - v1) > C1_RTOL * max(1.0, abs(v0), abs(v1)):
            violations.append(f"C0 violation at z={_fmt(b)}")
        if abs(d0 - d1) > C1_RTOL * max(1.0, abs(d0), abs(d1)):
            violations.append(f"C¹ violation at z={_fmt(b)}")
    if domain is None:
        for side, c in (("left", pieces[0][1]), ("right", pieces[-1][1])):
            c = np.trim_zeros(np.asarray(c, dtype=float), "b")
            d = len(c) - 1
            if d < 1:
                continue
            lead = c[-1] * ((-1) ** d if side == "left" else 1)
            if lead <= 0:
                where = bps[0] if side == "left" else bps[-1]
                violations.append(f"non-divergent {side} tail beyond z={_fmt(where)}")
    else:
        z_lo, z_hi = float(domain[0]), float(domain[1])
        if not z_lo < z_hi:
            violations.append("empty working domain")
        c_l = np.asarray(pieces[0][1], dtype=float)
        c_r = np.asarray(pieces[-1][1], dtype=float)
        q_l = _poly_eval(_poly_derivative(_poly_derivative(c_l)), z_lo)
        q_r = _poly_eval(_poly_derivative(_poly_derivative(c_r)), z_hi)
        s_l = _poly_eval(_poly_derivative(c_l), z_lo)
        s_r = _poly_eval(_poly_derivative(c_r), z_hi)
        if q_l <= 0 and not s_l < 0:
            violations.append(f"non-divergent left tail beyond z={_fmt(z_lo)}")
        if q_r <= 0 and not s_r > 0:
            violations.append(f"non-divergent right tail beyond z={_fmt(z_hi)}")
    if violations:
        raise ProfileError(violations)
    curve = ProfileCurve(pieces, domain)
    if not curve.critical_points():
        raise ProfileError(["no critical points found"])
    return curve


def polynomial_profile(coeffs, domain=None):
    """Single-piece profile from ascending coefficients."""
    lo = -1.0 if domain is None else domain[0]
    return validate_profile([(lo, list(coeffs))], domain)


# merge tree of sublevel sets


def _merge_tree(rho):
    crit = rho.critical_points()
    mins = [c for c in crit if c.kind == "minimum"]
    maxs = [c for c in crit if c.kind == "maximum"]
    nb = len(mins)
    parent_uf = list(range(nb))

    def find(i):
        while parent_uf[i] != i:
            parent_uf[i] = parent_uf[parent_uf[i]]
            i = parent_uf[i]
        return i

    # node records: dict with basins (lo, hi) index range, bottom, children, z5
    nodes = []
    comp_node = {}
    for i, mn in enumerate(mins):
        nodes.append({"lo": i, "hi": i, "bottom": mn.value, "children": (), "z5": None, "leaf": True})
        comp_node[i] = i
    order = sorted(range(len(maxs)), key=lambda j: (maxs[j].value, maxs[j].z))
    groups = []
    for j in order:
        y = maxs[j].value
        if groups and abs(y - groups[-1][0]) <= LEVEL_TOL * max(1.0, abs(y)):
            groups[-1][1].append(j)
        else:
            groups.append([y, [j]])
    parent_of = {}
    top_of = {}
    for y, js in groups:
        if len(js) > 1:
            log.info("degenerate coalescence: %d maxima at level %g", len(js), y)
        before = {}
        for j in js:
            for b in (j, j + 1):
                r = find(b)
                before[r] = comp_node[r]
        for j in js:
            ra, rb = find(j), find(j + 1)
            if ra != rb:
                parent_uf[max(ra, rb)] = min(ra, rb)
        new_roots = {}
        for r0, nid in before.items():
            new_roots.setdefault(find(r0), []).append(nid)
        for root, kids in new_roots.items():
            kids = sorted(set(kids), key=lambda k: nodes[k]["lo"])
            lo = min(nodes[k]["lo"] for k in kids)
            hi = max(nodes[k]["hi"] for k in kids)
            z5 = min(maxs[j].z for j in js if lo <= j < hi)
            nid = len(nodes)
            nodes.append({"lo": lo, "hi": hi, "bottom": y, "children": tuple(kids), "z5": z5, "leaf": False})
            for k in kids:
                parent_of[k] = nid
                top_of[k] = y
            comp_node[root] = nid

    # ids: leaves by z first, then internal nodes by creation order; 1-based
    ids = {k: k + 1 for k in range(len(nodes))}

    def crossing_left(y, basin):
        mn = mins[basin]
        if basin == 0:
            a = rho._outward_bracket(mn.z, y, -1)
            return rho.level_crossing(y, a, mn.z)
        mx = maxs[basin - 1]
        if mx.value <= y + LEVEL_TOL * max(1.0, abs(y)):
            return mx.z
        return rho.level_crossing(y, mx.z, mn.z)

    def crossing_right(y, basin):
        mn = mins[basin]
        if basin == nb - 1:
            b = rho._outward_bracket(mn.z, y, +1)
            return rho.level_crossing(y, mn.z, b)
        mx = maxs[basin]
        if mx.value <= y + LEVEL_TOL * max(1.0, abs(y)):
            return mx.z
        return rho.level_crossing(y, mn.z, mx.z)

    out = []
    for k, nd in enumerate(nodes):
        if nd["leaf"]:
            z2 = z3 = mins[nd["lo"]].z
        else:
            z2 = crossing_left(nd["bottom"], nd["lo"])
            z3 = crossing_right(nd["bottom"], nd["hi"])
        if k in parent_of:
            top = top_of[k]
            z1 = crossing_left(top, nd["lo"])
            z4 = crossing_right(top, nd["hi"])
            par = ids[parent_of[k]]
        else:
            top = math.inf
            z1, z4 = -math.inf, math.inf
            par = None
        kids = tuple(ids[c] for c in nd["children"])
        mz = tuple(mins[b].z for b in range(nd["lo"], nd["hi"] + 1))
        out.append(TopologyInterval(ids[k], z1, z2, z3, z4, nd["z5"], par, nd["bottom"], top, kids, mz))
    return out


def topology_intervals(profile):
    return profile.topology_intervals()


# representation intervals


WIDTH_TOL = 1e-9


def rep_interval_for_width(rho, t: TopologyInterval, w):
    """Left endpoint and level of the width-w interval with equal rho-ends in t."""
    lo, hi = t.width_range()
    tol = WIDTH_TOL * max(1.0, w)
    # the width bounds are attained at the critical levels
    if abs(w - lo) <= tol:
        return t.z2, rho(t.z2)
    if math.isfinite(hi) and abs(w - hi) <= tol:
        return t.z1, rho(t.z1)
    a = max(t.z1, t.z3 - w)
    b = min(t.z2, t.z4 - w)
    if not a <= b:
        return None
    h = lambda z: rho(z) - rho(z + w)
    ha, hb = h(a), h(b)
    if ha < 0 or hb > 0:
        if abs(ha) < 1e-13:
            return a, rho(a)
        if abs(hb) < 1e-13:
            return b, rho(b)
        return None
    if ha == 0:
        z = a
    elif hb == 0:
        z = b
    else:
        z = brentq(h, a, b, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500)
    return z, rho(z)


def enumerate_rep_intervals(profile, eps, y_max=None):
    """All J_s: one per (topology interval, integer width n*eps) inside it."""
    if not eps > 0:
        raise ValueError("epsilon must be positive")
    tops = profile.topology_intervals()
    raw = []
    skipped = []
    for t in sorted(tops, key=lambda t: t.id):
        lo, hi = t.width_range()
        n = max(1, int(math.floor(lo / eps)))
        found = 0
        while True:
            w = n * eps
            tol = WIDTH_TOL * max(1.0, w)
            if w > hi + tol:
                break
            if w >= lo - tol:
                res = rep_interval_for_width(profile, t, w)
                if res is not None:
                    z, y = res
                    if t.is_root and y_max is not None and y > y_max:
                        if found:
                            break
                        # keep the lowest root interval so every chain has a parent
                        log.info("lowest root interval (level %g) kept above y_max=%g", y, y_max)
                    raw.append((t.id, n, z, z + w, y))
                    found += 1
            n += 1
            if t.is_root and y_max is None and found >= 64:
                log.warning("root chain capped at 64 intervals; pass y_max")
                break
        if found == 0:
            skipped.append((t.id, f"no interval of width multiple of {eps:g} inside ({lo:g}, {hi:g})"))
    raw.sort(key=lambda r: (r[0], r[1]))
    intervals = []
    for i, (tid, n, a, b, y) in enumerate(raw):
        intervals.append([i + 1, a, b, n, None, tid, y])
    # parent: smallest strictly containing interval
    for rec in intervals:
        best = None
        for other in intervals:
            if other is rec:
                continue
            if other[1] <= rec[1] + 1e-12 and other[2] >= rec[2] - 1e-12 and other[3] > rec[3]:
                if best is None or other[3] < best[3]:
                    best = other
        rec[4] = None if best is None else best[0]
    out = [RepInterval(s, a, b, n, p, t, y) for s, a, b, n, p, t, y in intervals]
    for s_id, reason in skipped:
        log.info("topology interval %s: %s", s_id, reason)
    return RepIntervalSet(out, skipped)


def epsilon0(profile, compromise="merge"):
    tops = profile.topology_intervals()
    vals = []
    for t in tops:
        lo, hi = t.width_range()
        vals.append(hi - lo)
    e0 = min(vals)
    if compromise == "remove":
        e0 = e0 / len(tops)
    return e0


# surface


def surface_points(profile, R, grid):
    """Points (x1, x2, x3, component) on the surface at level rho(R)."""
    yR = profile(R)
    for c in profile.critical_points():
        if abs(c.value - yR) <= LEVEL_TOL * max(1.0, abs(yR)):
            raise ValueError(f"singular R: rho(R)={yR:g} is the critical value of the {c.kind} at z={c.z:g}")
    phis, zs = grid
    comps = profile.level_components(yR)
    out = []
    for z in np.atleast_1d(zs):
        r2 = yR - profile(float(z))
        if r2 < 0:
            continue
        k = next((i for i, (l, r) in enumerate(comps) if l - 1e-12 <= z <= r + 1e-12), -1)
        r = math.sqrt(r2)
        for phi in np.atleast_1d(phis):
            out.append((r * math.cos(phi), r * math.sin(phi), float(z), k))
    return out


# trivial profiles


class TrivialProfileData:
    """tau, omega and their inverses for a profile with a single minimum."""

    def __init__(self, profile):
        crit = profile.critical_points()
        if len(crit) != 1:
            extra = ", ".join(f"{c.kind} at z={c.z:g}" for c in crit)
            raise ProfileError([f"profile is not trivial: critical points {extra}"])
        self.profile = profile
        self.z0 = crit[0].z
        self.D = crit[0].value
        if abs(profile(self.z0, deriv=2)) < 1e-12:
            log.info("degenerate minimum at z=%g (rho''=0); tau remains strictly decreasing", self.z0)
        self.even = self._check_even()

    def _check_even(self):
        x = np.linspace(0.05, 3.0, 41) * max(1.0, abs(self.z0))
        a = self.profile(self.z0 + x)
        b = self.profile(self.z0 - x)
        return bool(np.all(np.abs(a - b) <= 1e-13 * np.maximum(1.0, np.abs(a))))

    def rho(self, x):
        return self.profile(x)

    def tau(self, x):
        x = np.asarray(x, dtype=float)
        v = np.sqrt(np.maximum(self.profile(x) - self.D, 0.0))
        out = np.where(x < self.z0, v, -v)
        return float(out) if out.ndim == 0 else out

    def tauinv(self, v):
        out = kernels.tauinv(np.asarray(v, dtype=float), self.z0, self.D, self.profile.breaks, self.profile.coefs)
        return float(np.asarray(out).reshape(-1)[0]) if np.ndim(v) == 0 else out

    def omega(self, x):
        x = np.asarray(x, dtype=float)
        if self.even:
            out = self.z0 - 0.5 * x
        else:
            out = kernels.omega(x, self.z0, self.profile.breaks, self.profile.coefs)
            if np.ndim(x) == 0:
                return float(np.asarray(out).reshape(-1)[0])
        return float(out) if np.ndim(out) == 0 else out

    def omegainv(self, z):
        z = np.asarray(z, dtype=float)
        if self.even:
            out = 2.0 * (self.z0 - z)
        else:
            out = np.asarray(self.tauinv(-np.asarray(self.tau(z)))) - z
        return float(out) if np.ndim(out) == 0 else out

    def interval(self, n, eps):
        a = self.omega(eps * n)
        return a, a + eps * n


def tau_omega(profile):
    return TrivialProfileData(profile)
