"""Multi-topology lattices for profiles with several minima.

The lattice G0 stacks one space V_s per representation interval J_s, with
labels (n_s, m) fixed by the interval forest. Over- and under-hopping
operators are built from the coefficient tables C_s, S(s, m). The four
compromises adjust G0 where the dimension conditions fail.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .profile import RepInterval, enumerate_rep_intervals
from .representation import BlockOperator, Lattice

log = logging.getLogger(__name__)

COMPROMISES = ("merge", "split", "remove", "add")
MODE_OF = {"merge": "over", "remove": "over", "split": "under", "add": "under"}
TOL = 1e-9


class LatticeError(ValueError):
    pass


@dataclass
class Space:
    s: int
    n: int
    m_min: int
    dim: int
    z_min: float
    z_max: float
    parent: int | None
    t: int | None
    level: float
    D: float = 0.0
    C: float = 0.0
    S: np.ndarray = None  # S(s, m) for m = m_min .. m_max + 1

    @property
    def m_max(self):
        return self.m_min + self.dim - 1

    def labels(self):
        return [(self.n, m) for m in range(self.m_min, self.m_max + 1)]

    def S_at(self, m):
        return float(self.S[m - self.m_min])

    def x_at(self, m, eps):
        return self.z_min + eps * (m - self.m_min)


@dataclass
class ViolationReport:
    mode: str
    parents: list = field(default_factory=list)

    def violating(self):
        return [p["s"] for p in self.parents if p["classification"].endswith("violating")]

    def to_json(self):
        return {"mode": self.mode, "parents": self.parents}


class MultiLattice(Lattice):
    """Direct sum of spaces V_s with hopping operators."""

    def __init__(self, spaces, eps, profile=None, root_t=None, compromise="none"):
        self.spaces = {sp.s: sp for sp in spaces}
        self.profile = profile
        self.root_t = root_t
        self.compromise = compromise
        self.added = []  # [(label, parent s, x0, n0)]
        self.removed = []
        self.seams = []
        self.splits = []
        self.truncated = []
        self.collisions = []
        self.posn_failures = []
        self._rebuild_basis(eps)

    def _rebuild_basis(self, eps):
        labels, owner = [], []
        for s in sorted(self.spaces):
            for lab in self.spaces[s].labels():
                labels.append(lab)
                owner.append(s)
        for lab, s, _, _ in self.added:
            labels.append(lab)
            owner.append(-1)
        seen = {}
        for lab, s in zip(labels, owner):
            if lab in seen:
                self.collisions.append((lab, seen[lab], s))
            seen[lab] = s
        if self.collisions:
            raise LatticeError(f"label collisions between spaces: {self.collisions[:3]}")
        super().__init__(labels, owner, eps)
        self.owner = dict(zip(labels, owner))
        x0, n0 = [], []
        added = {lab: (x, z) for lab, _, x, z in self.added}
        for lab, s in zip(labels, owner):
            if s == -1:
                x, z = added[lab]
            else:
                sp = self.spaces[s]
                x, z = sp.x_at(lab[1], eps), sp.z_min
            x0.append(x)
            n0.append(z)
        self.x0 = np.array(x0)
        self.n0 = np.array(n0)
        self.operators = {}

    # structure

    def children(self, s):
        return sorted((c for c in self.spaces.values() if c.parent == s), key=lambda c: c.z_min)

    def space_of_label(self, label):
        s = self.owner.get(tuple(label))
        return None if s is None or s == -1 else self.spaces[s]

    def dims(self):
        return {s: sp.dim for s, sp in sorted(self.spaces.items())}

    def hop_parent(self, label):
        """Space whose table drives under-hops out of ``label``."""
        s = self.owner.get(tuple(label))
        if s == -1:
            for lab, p, _, _ in self.added:
                if lab == tuple(label):
                    return self.spaces[p]
        sp = self.spaces[s]
        return None if sp.parent is None else self.spaces[sp.parent]

    def op(self, name):
        if not self.operators:
            self.operators = _build_operators(self)
        return self.operators[name]

    def hops(self, mode="over"):
        if not self.operators:
            self.operators = _build_operators(self)
        names = ("a+", "a-", "b+", "b-") if mode == "over" else ("a'+", "a'-", "b'+", "b'-")
        return {k: self.operators[k] for k in names + ("X+", "X-", "X0", "N0")}

    def ladder_from_hops(self, mode):
        h = self.hops(mode)
        if mode == "over":
            Xp = h["b-"].matrix @ h["a+"].matrix
            Xm = h["a-"].matrix @ h["b+"].matrix
        else:
            Xp = h["a'+"].matrix @ h["b'-"].matrix
            Xm = h["b'+"].matrix @ h["a'-"].matrix
        return Xp, Xm

    def to_gmtl_dict(self):
        return {
            "epsilon": self.eps,
            "spaces": [
                {"s": sp.s, "n": sp.n, "m_min": sp.m_min, "m_max": sp.m_max, "C": sp.C, "S": [float(v) for v in sp.S]}
                for sp in self.spaces.values()
            ],
        }

    def to_archive(self):
        from .representation import profile_hash

        ops = {}
        for name, op in sorted(self.hops("over").items()) + sorted(self.hops("under").items()):
            ops[name] = [
                {"source": list(map(int, self.labels[j])), "target": list(map(int, self.labels[i])), "value": [float(op.matrix[i, j].real), float(op.matrix[i, j].imag)]}
                for i, j in zip(*np.nonzero(op.matrix))
            ]
        return {
            "profile_hash": None if self.profile is None else profile_hash(self.profile),
            "epsilon": self.eps,
            "compromise": self.compromise,
            "spaces": [
                {"s": sp.s, "n": sp.n, "m_min": sp.m_min, "m_max": sp.m_max, "z_min": sp.z_min, "parent": sp.parent, "C": sp.C, "S": [float(v) for v in sp.S]}
                for sp in self.spaces.values()
            ],
            "operators": ops,
            "annotations": {
                "seams": self.seams,
                "splits": self.splits,
                "removed": self.removed,
                "added": [list(lab) for lab, *_ in self.added],
                "truncated": self.truncated,
                "posn_failures": self.posn_failures,
            },
        }


# construction


def _parents(intervals):
    par = {}
    for J in intervals:
        best = None
        for K in intervals:
            if K is J or K.dim <= J.dim:
                continue
            if K.z_min <= J.z_min + 1e-12 and K.z_max >= J.z_max - 1e-12:
                if best is None or K.dim < best.dim:
                    best = K
        par[J.id] = None if best is None else best.id
    return par


def _layout(intervals, eps, root_t, gap=False):
    """Assign (n_s, m_min_s) per the anchoring rules; returns Space list."""
    par = _parents(intervals)
    by_id = {J.id: J for J in intervals}
    n, mmin = {}, {}
    chain = sorted((J for J in intervals if J.t == root_t), key=lambda J: J.dim)
    for k, J in enumerate(chain):
        n[J.id], mmin[J.id] = k, 0
    if not chain:
        # no unbounded chain survives; anchor each parentless interval on its own
        z_ref = min(J.z_min for J in intervals)
        for J in intervals:
            if par[J.id] is None:
                n[J.id] = 0
                mmin[J.id] = int(math.floor((J.z_min - z_ref) / eps + 1e-9))
    pending = sorted((J for J in intervals if J.id not in n), key=lambda J: (-J.dim, J.z_min))
    while pending:
        progressed = False
        rest = []
        for J in pending:
            p = par[J.id]
            if p is None:
                n[J.id], mmin[J.id] = 0, int(math.floor((J.z_min - min(K.z_min for K in intervals)) / eps + 1e-9))
                progressed = True
            elif p in n:
                P = by_id[p]
                n[J.id] = n[p] - 1
                mmin[J.id] = int(math.floor((J.z_min - P.z_min) / eps + 1e-9)) + mmin[p]
                progressed = True
            else:
                rest.append(J)
        if not progressed:
            raise LatticeError("interval forest has a cycle")
        pending = rest
    if gap:
        # keep a one-vector gap between sibling blocks; descendants move along
        def place(p):
            kids = sorted((J for J in intervals if par[J.id] == p), key=lambda J: J.z_min)
            prev = None
            for J in kids:
                if prev is not None and mmin[J.id] <= mmin[prev.id] + prev.dim:
                    shift = mmin[prev.id] + prev.dim + 1 - mmin[J.id]
                    _shift_subtree(J.id, shift, par, mmin)
                prev = J
            for J in kids:
                place(J.id)

        for J in intervals:
            if par[J.id] is None:
                place(J.id)
    lo = min(n.values())
    spaces = []
    for J in intervals:
        spaces.append(Space(J.id, n[J.id] - lo + 1, mmin[J.id], J.dim, J.z_min, J.z_max, par[J.id], J.t, J.level))
    return spaces


def _shift_subtree(s, shift, par, mmin):
    mmin[s] += shift
    for c, p in par.items():
        if p == s:
            _shift_subtree(c, shift, par, mmin)


def _fill_tables(spaces, profile, eps):
    minima = [c for c in profile.critical_points() if c.kind == "minimum"]
    for sp in spaces:
        a, b = sp.z_min, sp.z_max
        cands = [(profile(a), a), (profile(b), b)] + [(c.value, c.z) for c in minima if a < c.z < b]
        D = min(v for v, _ in cands)
        tol = 1e-12 * max(1.0, abs(D))
        xstar = min(z for v, z in cands if v <= D + tol)
        top = profile(a)
        C = math.sqrt(max(top - D, 0.0))
        x = a + eps * np.arange(sp.dim + 1)
        mag = np.sqrt(np.maximum(profile(x) - D, 0.0))
        S = np.where(x < xstar - 1e-12, mag, -mag)
        S = np.clip(S, -C, C)
        S[0], S[-1] = C, -C
        sp.D, sp.C, sp.S = D, C, S


def _root_t(profile):
    return next(t.id for t in profile.topology_intervals() if t.is_root)


def build_G0(profile, eps, y_max=None, intervals=None):
    """Multi-topology lattice G0 for a validated profile."""
    if intervals is None:
        intervals = enumerate_rep_intervals(profile, eps, y_max).intervals
    intervals = list(intervals)
    if not intervals:
        raise LatticeError(f"no representation intervals for epsilon={eps:g}")
    root_t = _root_t(profile)
    spaces = _layout(intervals, eps, root_t)
    _fill_tables(spaces, profile, eps)
    G = MultiLattice(spaces, eps, profile, root_t)
    G.intervals = intervals
    G.truncated = [sp.s for sp in spaces if sp.parent is None]
    return G


def _sqrt0(v, where):
    if v < -1e-12 * max(1.0, abs(v)):
        raise LatticeError(f"negative hopping radicand {v:g} at {where}")
    return math.sqrt(max(v, 0.0))


def _build_operators(G):
    idx = G.index
    N = G.dim
    ap, bp, app, bpp = (np.zeros((N, N)) for _ in range(4))
    for j, lab in enumerate(G.labels):
        n, m = lab
        sp = G.space_of_label(lab)
        if sp is not None:
            if G.has((n + 1, m + 1)):
                ap[idx((n + 1, m + 1)), j] = _sqrt0(sp.C - sp.S_at(m + 1), (sp.s, m + 1))
            if G.has((n + 1, m)):
                bp[idx((n + 1, m)), j] = _sqrt0(sp.C + sp.S_at(m), (sp.s, m))
        t = G.hop_parent(lab)
        if t is not None and t.m_min <= m + 1 <= t.m_max + 1:
            # under-hops use the parent's table at m + 1 for both a' and b'
            if G.has((n + 1, m + 1)):
                app[idx((n + 1, m + 1)), j] = _sqrt0(t.C - t.S_at(m + 1), (t.s, m + 1))
            if G.has((n + 1, m)):
                bpp[idx((n + 1, m)), j] = _sqrt0(t.C + t.S_at(m + 1), (t.s, m + 1))
    xp = np.zeros((N, N))
    rho = G.profile
    for sp in G.spaces.values():
        for m in range(sp.m_min, sp.m_max):
            v = sp.C ** 2 - sp.S_at(m + 1) ** 2
            xp[idx((sp.n, m + 1)), idx((sp.n, m))] = _sqrt0(v, (sp.s, m))
    ops = {}
    for name, M in (("a+", ap), ("b+", bp), ("a'+", app), ("b'+", bpp), ("X+", xp)):
        ops[name] = BlockOperator(M, G, name)
        low = name[:-1] + "-"
        ops[low] = BlockOperator(M.T.copy(), G, low)
    ops["X0"] = BlockOperator(np.diag(G.x0), G, "X0")
    ops["N0"] = BlockOperator(np.diag(G.n0), G, "N0")
    return ops


def hopping_operators(G, mode="over"):
    if mode not in ("over", "under"):
        raise ValueError(f"unknown hopping mode {mode!r}")
    return G.hops(mode)


def violations(G, mode="over"):
    rep = ViolationReport(mode)
    for s, sp in sorted(G.spaces.items()):
        kids = G.children(s)
        if not kids:
            continue
        cd = [c.dim for c in kids]
        over = sp.dim >= sum(d + 1 for d in cd)
        under = sp.dim == sum(cd) + 1
        if mode == "over":
            cls = "over-ok" if over else "merge-violating"
        else:
            cls = "under-ok" if under else "split-violating"
        rep.parents.append(
            {"s": s, "children": [c.s for c in kids], "children_dims": cd, "dim": sp.dim, "over": over, "under": under, "classification": cls}
        )
    return rep


def _seams(G):
    out = []
    by_n = {}
    for sp in G.spaces.values():
        by_n.setdefault(sp.n, []).append(sp)
    for n, group in by_n.items():
        group.sort(key=lambda sp: sp.m_min)
        for a, b in zip(group, group[1:]):
            if a.m_max + 1 == b.m_min:
                coef = math.sqrt(4 * a.C * b.C)
                out.append({"left": a.s, "right": b.s, "label": [n, a.m_max], "coefficient": coef, "commutator": coef * (b.z_min - a.z_min)})
    return out


def _posn_failures(G):
    bad = []
    for j, (n, m) in enumerate(G.labels):
        x = G.x0[j]
        for lab, sign in (((n + 1, m), 1), ((n + 1, m + 1), -1)):
            if G.has(lab):
                y = G.x0[G.index(lab)]
                if sign * (y - x) > 1e-12:
                    bad.append([n, m])
    return bad


def apply_compromise(G, kind, mode=None):
    """Lattice G for one of the four compromises."""
    if kind not in COMPROMISES:
        raise ValueError(f"unknown compromise {kind!r}")
    need = MODE_OF[kind]
    if mode is not None and mode != need:
        raise ValueError(f"compromise {kind} uses {need}-hopping operators, not {mode}")
    profile, eps = G.profile, G.eps
    if kind in ("merge", "split"):
        H = MultiLattice(list(G.spaces.values()), eps, profile, G.root_t, kind)
        H.intervals = G.intervals
        H.truncated = list(G.truncated)
        if kind == "merge":
            H.seams = _seams(H)
        else:
            Xp, _ = H.ladder_from_hops("under")
            for s, sp in sorted(H.spaces.items()):
                if not H.children(s):
                    continue
                for m in range(sp.m_min, sp.m_max):
                    j = H.index((sp.n, m))
                    if np.abs(Xp[:, j]).max() < TOL:
                        H.splits.append({"s": s, "label": [sp.n, m]})
        return H
    if kind == "remove":
        keep = list(G.intervals)
        removed = []
        while True:
            spaces = _layout(keep, eps, G.root_t, gap=True)
            _fill_tables(spaces, profile, eps)
            H = MultiLattice(spaces, eps, profile, G.root_t, kind)
            bad = violations(H, "over").violating()
            if not bad:
                break
            removed.extend(bad)
            keep = [J for J in keep if J.id not in bad]
            if not keep:
                raise LatticeError("every space was removed")
        H.intervals = keep
        H.removed = sorted(removed)
        H.truncated = [sp.s for sp in spaces if sp.parent is None]
        H.posn_failures = _posn_failures(H)
        return H
    # add: fill the missing child-level slots under each split-violating parent
    H = MultiLattice(list(G.spaces.values()), eps, profile, G.root_t, kind)
    added = []
    for s in violations(G, "under").violating():
        sp = G.spaces[s]
        for m in range(sp.m_min, sp.m_max):
            lab = (sp.n - 1, m)
            if not G.has(lab):
                x = sp.x_at(m, eps) + 0.5 * eps
                added.append((lab, s, x, x))
    H.added = added
    H._rebuild_basis(eps)
    H.intervals = G.intervals
    H.truncated = list(G.truncated)
    H.posn_failures = _posn_failures(H)
    return H


def is_AN_representation(G, mode="over", tol=TOL):
    """Per-space check that the hopping-defined ladder represents A^N."""
    if G.profile is None:
        raise LatticeError("lattice has no profile")
    Xp, Xm = G.ladder_from_hops(mode)
    X0 = np.diag(G.x0)
    N0 = np.diag(G.n0)
    rho = G.profile
    comm = N0 @ Xp - Xp @ N0
    prod = Xp @ Xm - np.diag(rho(G.n0) - rho(G.x0))
    exch = X0 @ Xp - Xp @ (X0 + G.eps * np.eye(G.dim))
    report = {}
    for s, sp in sorted(G.spaces.items()):
        fails = []
        for m in range(sp.m_min, sp.m_max + 1):
            j = G.index((sp.n, m))
            lab = [sp.n, m]
            for name, M in (("[N0,X+]=0", comm), ("X+X-=rho(N0)-rho(X0)", prod), ("X0 X+ = X+ (X0+eps)", exch)):
                d = float(np.abs(M[:, j]).max())
                if d > tol:
                    fails.append({"check": name, "label": lab, "deviation": d})
            killed = float(np.abs(Xp[:, j]).max()) < tol
            if killed != (m == sp.m_max):
                fails.append({"check": "X+ annihilates exactly the top vector", "label": lab, "deviation": float(np.abs(Xp[:, j]).max())})
        status = "pass" if not fails else "fail"
        if fails and mode == "over" and s in G.truncated:
            status = "truncated"
        report[s] = {"status": status, "failures": fails}
    return report


def reflects_topology(G, profile=None):
    """The three lattice/topology compatibility conditions with witnesses."""
    profile = profile or G.profile
    tops = {t.id: t for t in profile.topology_intervals()}
    in_t = {}
    for s, sp in G.spaces.items():
        in_t.setdefault(sp.t, []).append(s)
    witnesses = {"missing_topology": [], "bad_parent": [], "crossing": {}}
    for t in tops:
        if t not in in_t:
            witnesses["missing_topology"].append(t)
    for s, sp in G.spaces.items():
        if sp.parent is None:
            continue
        pt = G.spaces[sp.parent].t
        if pt != sp.t and pt != tops[sp.t].parent:
            witnesses["bad_parent"].append(s)
    ok3 = True
    for t, T in tops.items():
        if T.parent is None:
            continue
        cross = [s for s in in_t.get(t, []) if G.spaces[s].parent is not None and G.spaces[G.spaces[s].parent].t == T.parent]
        witnesses["crossing"][t] = cross
        if len(cross) != 1:
            ok3 = False
    ok = not witnesses["missing_topology"] and not witnesses["bad_parent"] and ok3
    return ok, witnesses


@dataclass
class TopologyChangeMaps:
    s: int
    children: list
    A: np.ndarray  # a_+ block: children -> V_s
    B: np.ndarray  # b_+ block
    child_slices: list
    parent_blocks: list

    def _plus(self, H, f):
        D = H.T @ H
        d = np.diag(D)
        return H @ (f / d[:, None]) @ H.T

    def _minus(self, H, F):
        d = np.diag(H.T @ H)
        return (H.T @ F @ H) / d[None, :]

    def A_plus(self, f):
        return self._plus(self.A, f)

    def B_plus(self, f):
        return self._plus(self.B, f)

    def A_minus(self, F):
        return self._minus(self.A, F)

    def B_minus(self, F):
        return self._minus(self.B, F)


def topo_change_maps(G, s):
    """A_pm, B_pm between L(pi^{-1}(V_s)) and L(V_s) from over-hops."""
    kids = G.children(s)
    if not kids:
        raise LatticeError(f"space {s} has no children")
    h = G.hops("over")
    rows = G.space_indices()[s]
    cols = np.concatenate([G.space_indices()[c.s] for c in kids])
    A = np.real(h["a+"].matrix[np.ix_(rows, cols)])
    B = np.real(h["b+"].matrix[np.ix_(rows, cols)])
    for name, H in (("a-a+", A), ("b-b+", B)):
        off = H.T @ H - np.diag(np.diag(H.T @ H))
        if np.diag(H.T @ H).min() <= 0 or np.abs(off).max() > 1e-12:
            raise LatticeError(f"({name})^-1 is not defined on the children of {s}")
    sp = G.spaces[s]
    slices, blocks, k = [], [], 0
    for c in kids:
        slices.append(slice(k, k + c.dim))
        k += c.dim
        blocks.append((c.m_min - sp.m_min, c.m_max + 1 - sp.m_min))
    return TopologyChangeMaps(s, [c.s for c in kids], A, B, slices, blocks)


# generalised lattices


def build_gmtl(desc):
    """Lattice from arbitrary spaces and coefficient tables (over-hops only)."""
    eps = float(desc.get("epsilon", 1.0))
    spaces = []
    for d in desc["spaces"]:
        s, n, lo, hi = int(d["s"]), int(d["n"]), int(d["m_min"]), int(d["m_max"])
        S = np.asarray(d["S"], dtype=float)
        C = float(d["C"])
        if len(S) != hi - lo + 2:
            raise LatticeError(f"space {s}: S needs {hi - lo + 2} entries (m_min..m_max+1), got {len(S)}")
        for m, v in ((lo, S[0]), (hi + 1, S[-1])):
            if abs(abs(v) - C) > 1e-12 * max(1.0, C):
                raise LatticeError(f"space {s}: C={C:g} differs from |S({s},{m})|={abs(v):g}")
        for k, v in enumerate(S):
            if C - abs(v) < -1e-12:
                raise LatticeError(f"space {s}: negative radicand at (s,m)=({s},{lo + k})")
        sp = Space(s, n, lo, hi - lo + 1, float(d.get("z_min", 0.0)), float(d.get("z_min", 0.0)) + eps * (hi - lo + 1), d.get("parent"), d.get("t"), 0.0)
        sp.C, sp.S, sp.D = C, S, 0.0
        spaces.append(sp)
    G = MultiLattice(spaces, eps, None, None, "gmtl")
    G.intervals = []
    return G
