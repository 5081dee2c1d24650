"""Finite-dimensional unitary representations.

StandardRep is the single-interval representation of AC / AN / AR.
TrivialLattice is the two-dimensional lattice {|n,m>} of a trivial profile
carrying the over-hopping (a, b) and under-hopping (a', b') operators.
Operators are stored as dense complex matrices on the full basis; the
per-space blocks are views derived from the basis partition.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import coeff as C
from .algebra import NormalForm, TagError
from .profile import RepInterval, TrivialProfileData

CLAMP = -1e-12


def _sqrt_clamped(v, where=""):
    v = np.asarray(v, dtype=float)
    if np.any(v < CLAMP * np.maximum(1.0, np.abs(v).max(initial=0.0))):
        bad = float(v.min())
        raise ValueError(f"negative radicand {bad:g} {where}".strip())
    return np.sqrt(np.maximum(v, 0.0))


class BlockOperator:
    """Matrix on a lattice basis; blocks keyed by (source space, target space)."""

    def __init__(self, matrix, lattice, name=None):
        self.matrix = np.asarray(matrix, dtype=complex)
        self.lattice = lattice
        self.name = name

    @property
    def H(self):
        return BlockOperator(self.matrix.conj().T, self.lattice, None if self.name is None else self.name + "^dag")

    def adjoint(self):
        return self.H

    def blocks(self, tol=0.0):
        out = {}
        L = self.lattice
        for s, idx_s in L.space_indices().items():
            for t, idx_t in L.space_indices().items():
                blk = self.matrix[np.ix_(idx_t, idx_s)]
                if np.any(np.abs(blk) > tol):
                    out[(s, t)] = blk
        return out

    def block(self, s, t):
        L = self.lattice
        return self.matrix[np.ix_(L.space_indices()[t], L.space_indices()[s])]

    def apply(self, label):
        """Image of a basis vector as {label: coefficient}."""
        j = self.lattice.index(label)
        col = self.matrix[:, j]
        return {self.lattice.labels[i]: col[i] for i in np.nonzero(col)[0]}

    def entry(self, target, source):
        return self.matrix[self.lattice.index(target), self.lattice.index(source)]

    def __matmul__(self, other):
        return BlockOperator(self.matrix @ _mat(other), self.lattice)

    def __add__(self, other):
        return BlockOperator(self.matrix + _mat(other), self.lattice)

    def __sub__(self, other):
        return BlockOperator(self.matrix - _mat(other), self.lattice)

    def __mul__(self, c):
        return BlockOperator(self.matrix * c, self.lattice)

    __rmul__ = __mul__

    def __neg__(self):
        return BlockOperator(-self.matrix, self.lattice)

    def max_abs(self):
        m = np.abs(self.matrix)
        return float(m.max()) if m.size else 0.0

    def __repr__(self):
        return f"BlockOperator({self.name or ''}, shape={self.matrix.shape})"


def _mat(x):
    return x.matrix if isinstance(x, BlockOperator) else np.asarray(x)


# standard representations


@dataclass
class StandardRep:
    z_min: float
    z_max: float
    eps: float
    dim: int
    x0: np.ndarray
    n0: np.ndarray
    xp: np.ndarray  # X_+ |m> = xp[m] |m+1>, length dim-1
    kind: str
    R: float | None
    rho: object

    @property
    def X0(self):
        return np.diag(self.x0).astype(complex)

    @property
    def N0(self):
        return np.diag(self.n0).astype(complex)

    @property
    def Xp(self):
        return np.diag(self.xp, -1).astype(complex)

    @property
    def Xm(self):
        return self.Xp.conj().T

    def env(self):
        R = self.R if self.R is not None else self.z_min
        return C.Env(self.x0, self.n0, R=R, eps=self.eps, rho=_rho_fn(self.rho))

    def represent(self, f):
        return represent_on(f, self.Xp, self.Xm, self.env())


def _rho_fn(profile):
    return lambda x, k=0: profile(x, deriv=k)


def standard_rep(J, eps, kind="AN", R=None, rho=None):
    """Standard unitary representation on a representation interval."""
    if isinstance(J, RepInterval):
        z_min, z_max = J.z_min, J.z_max
    else:
        z_min, z_max = J
    if rho is None:
        raise ValueError("a profile is required")
    width = z_max - z_min
    dim = int(round(width / eps))
    if abs(dim * eps - width) > 1e-9 * max(eps, 1.0) or dim < 1:
        raise ValueError(f"interval width {width:g} is not a positive multiple of epsilon {eps:g}")
    if abs(rho(z_min) - rho(z_max)) > 1e-9 * max(1.0, abs(rho(z_min))):
        raise ValueError("interval endpoints are not on the same level")
    if kind == "AR":
        if R is None or abs(R - z_min) > 1e-9 * max(1.0, abs(z_min)):
            raise ValueError(f"no standard representation exists for AR with R={R} on an interval with z_min={z_min:g}")
    elif kind not in ("AC", "AN"):
        raise TagError(f"standard representations exist for AC, AN, AR, not {kind}")
    m = np.arange(dim)
    x0 = z_min + eps * m
    top = rho(z_min)
    rad = top - rho(z_min + eps * (m[:-1] + 1))
    xp = _sqrt_clamped(rad, f"in standard representation on [{z_min:g}, {z_max:g}]")
    return StandardRep(z_min, z_max, eps, dim, x0, np.full(dim, z_min), xp, kind, R, rho)


def represent_on(f: NormalForm, Xp, Xm, env):
    """Matrix of an AR/AN/AC/ANC normal form given ladder matrices."""
    dim = Xp.shape[0]
    out = np.zeros((dim, dim), dtype=complex)
    memo = {}
    for sig, c in f.terms.items():
        if f.tag in ("AR", "AN"):
            L = np.linalg.matrix_power(Xp if sig >= 0 else Xm, abs(sig))
        elif f.tag in ("AC", "ANC"):
            L = np.linalg.matrix_power(Xp, sig[0]) @ np.linalg.matrix_power(Xm, sig[1])
        else:
            raise TagError(f"{f.tag} elements need a lattice with hopping operators")
        out += _apply_coeff(L, C.evaluate(c, env, memo))
    return out


def _apply_coeff(L, v):
    live = np.any(L != 0, axis=0)
    v = np.where(live, v, 0.0)
    with np.errstate(invalid="ignore"):
        return L * v[None, :]


# lattices


class Lattice:
    """Labeled basis partitioned into spaces."""

    def __init__(self, labels, space_of, eps):
        self.labels = list(labels)
        self._index = {lab: i for i, lab in enumerate(self.labels)}
        if len(self._index) != len(self.labels):
            raise ValueError("duplicate basis labels")
        self.space_of = np.asarray(space_of)
        self.eps = eps
        self._spaces = None
        self.operators = {}

    def __len__(self):
        return len(self.labels)

    @property
    def dim(self):
        return len(self.labels)

    def index(self, label):
        try:
            return self._index[tuple(label)]
        except KeyError:
            raise KeyError(f"unknown basis label {tuple(label)}") from None

    def has(self, label):
        return tuple(label) in self._index

    def space_indices(self):
        if self._spaces is None:
            sp = {}
            for i, s in enumerate(self.space_of):
                sp.setdefault(int(s), []).append(i)
            self._spaces = {s: np.array(v) for s, v in sp.items()}
        return self._spaces

    def op(self, name):
        return self.operators[name]

    def zero(self):
        return np.zeros((self.dim, self.dim), dtype=complex)

    def hop_matrix(self, entries):
        """Matrix from {(source_label, target_label): value}; absent targets dropped."""
        M = self.zero()
        for (src, tgt), v in entries.items():
            if self.has(tgt) and self.has(src):
                M[self.index(tgt), self.index(src)] = v
        return M


class TrivialLattice(Lattice):
    """Lattice G(rho, eps) for a trivial profile: |n,m>, n_min <= n <= n_max, 0 <= m < n.

    A window with n_min > 1 keeps only the rows needed near a fixed level;
    hops leaving the window are dropped.
    """

    def __init__(self, trivial: TrivialProfileData, eps, n_max, n_min=1):
        if n_max < 1 or n_min < 1 or n_min > n_max:
            raise ValueError("need 1 <= n_min <= n_max")
        labels = [(n, m) for n in range(n_min, n_max + 1) for m in range(n)]
        super().__init__(labels, [n for n, _ in labels], eps)
        self.trivial = trivial
        self.profile = trivial.profile
        self.n_max = n_max
        self.n_min = n_min
        n = np.array([l[0] for l in labels], dtype=float)
        m = np.array([l[1] for l in labels], dtype=float)
        self.n = n.astype(int)
        self.m = m.astype(int)
        self.u = eps * n
        self.n0 = np.asarray(trivial.omega(eps * n), dtype=float)
        self.x0 = self.n0 + eps * m
        self._build()

    def omega_n(self, n):
        return self.trivial.omega(self.eps * np.asarray(n, dtype=float))

    def _build(self):
        tau, eps = self.trivial.tau, self.eps
        ops = {}
        ap, bp, app, bpp = {}, {}, {}, {}
        for (n, m) in self.labels:
            w = self.trivial.omega(eps * n)
            w1 = self.trivial.omega(eps * (n + 1))
            ap[((n, m), (n + 1, m + 1))] = tau(w) - tau(w + eps * m + eps)
            bp[((n, m), (n + 1, m))] = tau(w) + tau(w + eps * m)
            # under-hops; b'_+ and its adjoint b'_- carry eps*(m+1)
            app[((n, m), (n + 1, m + 1))] = tau(w1) - tau(w1 + eps * m + eps)
            bpp[((n, m), (n + 1, m))] = tau(w1) + tau(w1 + eps * m + eps)
        for name, d in (("a+", ap), ("b+", bp), ("a'+", app), ("b'+", bpp)):
            vals = {k: float(_sqrt_clamped(v, f"in {name} at {k[0]}")) for k, v in d.items()}
            M = self.hop_matrix(vals)
            ops[name] = BlockOperator(M, self, name)
            lower = name[:-1] + "-"
            ops[lower] = BlockOperator(M.conj().T, self, lower)
        xp = {}
        rho = self.profile
        for (n, m) in self.labels:
            z = self.trivial.omega(eps * n)
            xp[((n, m), (n, m + 1))] = rho(z) - rho(z + eps * m + eps)
        vals = {k: float(_sqrt_clamped(v, f"in X+ at {k[0]}")) for k, v in xp.items()}
        M = self.hop_matrix(vals)
        ops["X+"] = BlockOperator(M, self, "X+")
        ops["X-"] = BlockOperator(M.conj().T, self, "X-")
        ops["X0"] = BlockOperator(np.diag(self.x0).astype(complex), self, "X0")
        ops["N0"] = BlockOperator(np.diag(self.n0).astype(complex), self, "N0")
        self.operators = ops

    def with_operator(self, name, matrix):
        """Copy with one operator replaced (used for fault injection)."""
        new = TrivialLattice.__new__(TrivialLattice)
        new.__dict__.update(self.__dict__)
        new.operators = dict(self.operators)
        new.operators[name] = BlockOperator(matrix, new, name)
        return new

    def env(self, R=None, idx=None):
        Rv = self.n0 if R is None else R
        e = C.Env(self.x0, self.n0, R=Rv, eps=self.eps, rho=_rho_fn(self.profile), trivial=self.trivial, u=self.u)
        return e if idx is None else e.subset(idx)

    def coords(self, n, m):
        return coords(self, n, m)

    def standard_rep(self, n, kind="AN"):
        z = float(self.trivial.omega(self.eps * n))
        return standard_rep((z, z + self.eps * n), self.eps, kind, R=z if kind == "AR" else None, rho=self.profile)

    def diag(self, expr, R=None):
        return np.diag(C.evaluate(C.wrap(expr), self.env(R)))

    def interior(self, depth=2):
        """Indices of sources with n <= n_max - depth."""
        return np.nonzero(self.n <= self.n_max - depth)[0]

    def to_archive(self):
        spaces = []
        for n in range(self.n_min, self.n_max + 1):
            spaces.append({"s": n, "n": n, "m_min": 0, "m_max": n - 1, "z_min": float(self.trivial.omega(self.eps * n))})
        ops = {}
        for name, op in sorted(self.operators.items()):
            ops[name] = [
                {"source": [int(v) for v in self.labels[j]], "target": [int(v) for v in self.labels[i]], "value": [float(op.matrix[i, j].real), float(op.matrix[i, j].imag)]}
                for i, j in zip(*np.nonzero(op.matrix))
            ]
        return {"profile_hash": profile_hash(self.profile), "epsilon": self.eps, "spaces": spaces, "operators": ops}


def profile_hash(profile):
    import hashlib

    payload = json.dumps({"pieces": [[b, list(map(float, c))] for b, c in profile.pieces], "domain": profile.domain})
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def trivial_lattice(profile, eps, n_max, n_min=1):
    td = profile if isinstance(profile, TrivialProfileData) else TrivialProfileData(profile)
    return TrivialLattice(td, eps, n_max, n_min)


# representing symbolic elements


def _ladder_matrix(lat, tag, sig, cache):
    key = (tag, sig)
    if key in cache:
        return cache[key]
    ops = lat.operators
    if tag in ("AR", "AN"):
        L = np.linalg.matrix_power(ops["X+" if sig >= 0 else "X-"].matrix, abs(sig))
    elif tag in ("AC", "ANC"):
        L = np.linalg.matrix_power(ops["X+"].matrix, sig[0]) @ np.linalg.matrix_power(ops["X-"].matrix, sig[1])
    else:
        r, s = sig
        A = np.linalg.matrix_power(ops["a+" if r >= 0 else "a-"].matrix, abs(r))
        B = np.linalg.matrix_power(ops["b+" if s >= 0 else "b-"].matrix, abs(s))
        L = A @ B
    cache[key] = L
    return L


def represent(element, lattice, R=None):
    """BlockOperator of a normal form (or PSI element) on a lattice.

    AR and PSI coefficients take R from the source vector's N_0 eigenvalue
    unless ``R`` is given.
    """
    if not isinstance(element, NormalForm):
        element = NormalForm.scalar("AN", C.wrap(element))
    env = lattice.env(R)
    memo = {}
    cache = {}
    out = lattice.zero()
    for sig, c in element.terms.items():
        L = _ladder_matrix(lattice, element.tag, sig, cache)
        out += _apply_coeff(L, C.evaluate(c, env, memo))
    return BlockOperator(out, lattice)


def represent_word(word, lattice, R=None):
    """Factor-by-factor product of generator matrices and coefficient diagonals."""
    env = lattice.env(R)
    M = np.eye(lattice.dim, dtype=complex)
    names = {"X+", "X-", "a+", "a-", "b+", "b-", "a'+", "a'-", "b'+", "b'-"}
    for f in word:
        if isinstance(f, str):
            if f not in names:
                raise TagError(f"unknown generator {f}")
            M = M @ lattice.operators[f].matrix
        elif isinstance(f, NormalForm):
            M = M @ represent(f, lattice, R).matrix
        else:
            M = M @ np.diag(C.evaluate(C.wrap(f), env))
    return BlockOperator(M, lattice)


# verification


def _dev(M, cols):
    if len(cols) == 0:
        return 0.0, None
    sub = np.abs(M[:, cols])
    sub = np.where(np.isfinite(sub), sub, np.inf)
    i, j = np.unravel_index(np.argmax(sub), sub.shape)
    return float(sub[i, j]), j


def verify_relations(lattice: TrivialLattice, depth=2):
    """Defining relations of B and the lattice identities, as matrices."""
    L = lattice
    ops = {k: v.matrix for k, v in L.operators.items()}
    cols = L.interior(depth)
    N = C.N
    X = C.X
    tau = C.tau
    checks = []

    def diag(e):
        return np.diag(C.evaluate(e, L.env()))

    from .algebra import K_aa, K_bb, exchange

    checks.append(("[X0,N0]=0", ops["X0"] @ ops["N0"] - ops["N0"] @ ops["X0"]))
    checks.append(("a-a+ = tau(N0)-tau(X0+eps)", ops["a-"] @ ops["a+"] - diag(K_aa("-", "+"))))
    checks.append(("a+a- = tau(N-1)-tau(X-1)", ops["a+"] @ ops["a-"] - diag(K_aa("+", "-"))))
    checks.append(("b-b+ = tau(N0)+tau(X0)", ops["b-"] @ ops["b+"] - diag(K_bb("-", "+"))))
    checks.append(("b+b- = tau(N-1)+tau(X-1)", ops["b+"] @ ops["b-"] - diag(K_bb("+", "-"))))
    for sb, sa in (("+", "+"), ("-", "-"), ("-", "+"), ("+", "-")):
        lhs = ops["b" + sb] @ ops["a" + sa]
        # F has poles only where a b already annihilates the source
        rhs = _apply_coeff(ops["a" + sa] @ ops["b" + sb], C.evaluate(exchange(sb, sa), L.env()))
        checks.append((f"b{sb}a{sa} = a{sa}b{sb} F", lhs - rhs))
    # f(X0,N0) a = a f(X_1 + eps, N_1) etc.
    for g, (j, c) in (("a+", (1, 1)), ("a-", (-1, -1)), ("b+", (1, 0)), ("b-", (-1, 0))):
        for f in (C.X0, C.N0):
            lhs = diag(f) @ ops[g]
            rhs = ops[g] @ diag(C.shift(f, j, c))
            checks.append((f"{f} {g} = {g} shift({f})", lhs - rhs))
    for a, b in (("a+", "a-"), ("b+", "b-"), ("a'+", "a'-"), ("b'+", "b'-"), ("X+", "X-")):
        checks.append((f"({a})^dag = {b}", ops[a].conj().T - ops[b]))
    checks.append(("X+ = b-a+", ops["X+"] - ops["b-"] @ ops["a+"]))
    checks.append(("X- = a-b+", ops["X-"] - ops["a-"] @ ops["b+"]))
    checks.append(("X+ = a'+b'-", ops["X+"] - ops["a'+"] @ ops["b'-"]))
    checks.append(("X- = b'+a'-", ops["X-"] - ops["b'+"] @ ops["a'-"]))
    checks.append(("X+X- = rho(N0)-rho(X0)", ops["X+"] @ ops["X-"] - diag(C.rho(C.N0) - C.rho(C.X0))))
    checks.append(("X-X+ = rho(N0)-rho(X0+eps)", ops["X-"] @ ops["X+"] - diag(C.rho(C.N0) - C.rho(X(0, 1)))))
    # spectral reconstruction of N0 and X0 from b+b- and a+a-
    td = L.trivial
    bb = np.real(np.diag(ops["b+"] @ ops["b-"]))
    aa = np.real(np.diag(ops["a+"] @ ops["a-"]))
    s = td.tauinv(0.5 * bb + 0.5 * aa)
    n_rec = td.omega(td.omegainv(s) + L.eps)
    x_rec = td.tauinv(0.5 * bb - 0.5 * aa) - s + n_rec
    checks.append(("N0 = omega(omegainv(tauinv(bb/2+aa/2))+eps)", np.diag(n_rec - L.n0)))
    checks.append(("X0 = tauinv(bb/2-aa/2)-tauinv(bb/2+aa/2)+N0", np.diag(x_rec - L.x0)))
    report = []
    for name, M in checks:
        d, j = _dev(M, cols)
        loc = None if j is None else list(L.labels[cols[j]])
        report.append({"relation": name, "max_abs_deviation": d, "location": loc})
    return report


def coords(lattice, n, m):
    i = lattice.index((n, m))
    x = float(lattice.x0[i])
    y = float(lattice.profile(float(lattice.n0[i])))
    return x, y


def faithfulness_scan(f, profile, eps_list, n_max=12, tol=1e-10):
    """True if the coefficient expression vanishes on every basis vector."""
    f = C.wrap(f)
    td = profile if isinstance(profile, TrivialProfileData) else TrivialProfileData(profile)
    for eps in eps_list:
        lat = TrivialLattice(td, eps, n_max)
        v = C.evaluate(f, lat.env())
        if not np.all(np.isfinite(v)) or np.any(np.abs(v) > tol):
            return False
    return True


def heisenberg_weyl(lattice: TrivialLattice, depth=2):
    """[a-,a+], [b-,b+] minus their constant value and [a,b] on interior columns."""
    ops = {k: v.matrix for k, v in lattice.operators.items()}
    cols = lattice.interior(depth)
    out = []
    for x, y in (("a-", "a+"), ("b-", "b+")):
        M = ops[x] @ ops[y] - ops[y] @ ops[x]
        d = np.real(np.diag(M))[cols]
        c = float(np.mean(d)) if len(d) else 0.0
        dev, j = _dev(M - c * np.eye(lattice.dim), cols)
        out.append({"relation": f"[{x},{y}] = c id", "value": c, "max_abs_deviation": dev, "location": None if j is None else list(lattice.labels[cols[j]])})
    for x in ("a+", "a-"):
        for y in ("b+", "b-"):
            dev, j = _dev(ops[x] @ ops[y] - ops[y] @ ops[x], cols)
            out.append({"relation": f"[{x},{y}] = 0", "value": 0.0, "max_abs_deviation": dev, "location": None if j is None else list(lattice.labels[cols[j]])})
    return out


def random_B_word(rng, max_len=8, coeff_prob=0.2):
    """Random word in a+-, b+- with occasional coefficient functions."""
    word = []
    for _ in range(int(rng.integers(1, max_len + 1))):
        if rng.random() < coeff_prob:
            word.append(C.X0 * float(rng.normal()) + C.rho(C.N0))
        else:
            word.append(str(rng.choice(["a+", "a-", "b+", "b-"])))
    return word


def normal_order_oracle(lattice: TrivialLattice, n_words, rng, n_cols=None, max_len=8):
    """max deviation between represent(normalize(w)) and the factor-by-factor product."""
    from .algebra import normalize

    n_cols = lattice.n_max - max_len if n_cols is None else n_cols
    cols = np.nonzero(lattice.n <= n_cols)[0]
    worst, where, bad = 0.0, None, []
    for _ in range(n_words):
        w = random_B_word(rng, max_len)
        M1 = represent(normalize(w, "B"), lattice).matrix[:, cols]
        M2 = represent_word(w, lattice).matrix[:, cols]
        if not np.all(np.isfinite(M1)):
            bad.append([str(f) for f in w])
            continue
        d = float(np.abs(M1 - M2).max(initial=0.0))
        if d > worst:
            worst, where = d, [str(f) for f in w]
    return {"relation": "normal ordering", "max_abs_deviation": worst, "location": where, "non_finite_words": bad}
