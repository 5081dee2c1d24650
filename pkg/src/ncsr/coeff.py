"""Coefficient expressions: an immutable AST over X0, N_k, R, eps.

Atoms
    X0          the diagonal operator X_0
    N(j)        N_j = omega(omega^{-1}(N_0) + eps j); N(0) is N_0
    RN(j)       N_j with N_0 replaced by R; RN(0) is R
    eps         the deformation parameter

Shifting an expression by (j, c) replaces X0 -> X_j + c eps and
N_k -> N_{k+j}, with X_j = X0 + N_j - N_0. Sums and products are kept in a
canonical flattened form so that equal factors cancel structurally.
"""
from __future__ import annotations

import cmath
import json
from fractions import Fraction

import numpy as np

AST_VERSION = "ncsr-coeff/1"

FUNCS = ("tau", "tauinv", "omega", "omegainv")


def _num_key(v):
    v = complex(v)
    return (round(v.real, 15), round(v.imag, 15))


class Expr:
    __slots__ = ("_key", "_hash", "_skey")

    def _init(self, key):
        self._key = key
        self._hash = hash(key)
        self._skey = None

    @property
    def skey(self):
        if self._skey is None:
            self._skey = repr(self._key)
        return self._skey

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        return isinstance(other, Expr) and self._hash == other._hash and self._key == other._key

    def __lt__(self, other):
        return self.skey < other.skey

    # arithmetic sugar
    def __add__(self, o):
        return add(self, wrap(o))

    __radd__ = __add__

    def __sub__(self, o):
        return add(self, mul(Num(-1), wrap(o)))

    def __rsub__(self, o):
        return add(wrap(o), mul(Num(-1), self))

    def __neg__(self):
        return mul(Num(-1), self)

    def __mul__(self, o):
        return mul(self, wrap(o))

    __rmul__ = __mul__

    def __truediv__(self, o):
        return mul(self, power(wrap(o), -1))

    def __rtruediv__(self, o):
        return mul(wrap(o), power(self, -1))

    def __pow__(self, p):
        return power(self, p)

    def is_zero(self):
        return isinstance(self, Num) and self.value == 0

    def is_one(self):
        return isinstance(self, Num) and self.value == 1

    def __repr__(self):
        return to_str(self)


class Num(Expr):
    __slots__ = ("value",)

    def __init__(self, value):
        v = complex(value)
        if v.imag == 0:
            v = complex(v.real, 0.0)
        self.value = v
        self._init(("num",) + _num_key(v))


class Atom(Expr):
    __slots__ = ("name", "j")

    def __init__(self, name, j=0):
        self.name = name
        self.j = int(j)
        self._init(("atom", name, self.j))


class Func(Expr):
    """name in {'rho'} with derivative order k, or one of FUNCS (k = 0)."""

    __slots__ = ("name", "k", "arg")

    def __init__(self, name, arg, k=0):
        self.name = name
        self.k = int(k)
        self.arg = arg
        self._init(("func", name, self.k, arg._key))


class Sum(Expr):
    __slots__ = ("const", "items")

    def __init__(self, const, items):
        self.const = const
        self.items = items  # tuple of (Expr, complex)
        self._init(("sum", _num_key(const), tuple((e._key, _num_key(c)) for e, c in items)))


class Prod(Expr):
    __slots__ = ("coef", "items")

    def __init__(self, coef, items):
        self.coef = coef
        self.items = items  # tuple of (Expr, Fraction)
        self._init(("prod", _num_key(coef), tuple((e._key, (p.numerator, p.denominator)) for e, p in items)))


ZERO = Num(0)
ONE = Num(1)
X0 = Atom("X")
EPS = Atom("eps")
R = Atom("RN", 0)
N0 = Atom("N", 0)


def N(j):
    return Atom("N", j)


def RN(j):
    return Atom("RN", j)


def wrap(x):
    if isinstance(x, Expr):
        return x
    return Num(x)


def _clean(c):
    c = complex(c)
    return complex(c.real, 0.0) if c.imag == 0 else c


def add(*terms):
    const = 0j
    acc = {}
    order = []

    def push(e, c):
        if e in acc:
            acc[e] += c
        else:
            acc[e] = c
            order.append(e)

    for t in terms:
        t = wrap(t)
        if isinstance(t, Num):
            const += t.value
        elif isinstance(t, Sum):
            const += t.const
            for e, c in t.items:
                push(e, c)
        elif isinstance(t, Prod) and t.coef != 1:
            push(_prod(1, t.items), t.coef)
        else:
            push(t, 1)
    items = [(e, _clean(acc[e])) for e in order if acc[e] != 0]
    items.sort(key=lambda ec: ec[0].skey)
    const = _clean(const)
    if not items:
        return Num(const)
    if len(items) == 1 and const == 0:
        e, c = items[0]
        return e if c == 1 else mul(Num(c), e)
    return Sum(const, tuple(items))


def _prod(coef, items):
    items = tuple(items)
    if not items:
        return Num(coef)
    if len(items) == 1 and coef == 1 and items[0][1] == 1:
        return items[0][0]
    return Prod(_clean(coef), items)


def mul(*factors):
    coef = 1 + 0j
    acc = {}
    order = []

    def push(e, p):
        if e in acc:
            acc[e] += p
        else:
            acc[e] = p
            order.append(e)

    for f in factors:
        f = wrap(f)
        if isinstance(f, Num):
            coef *= f.value
        elif isinstance(f, Prod):
            coef *= f.coef
            for e, p in f.items:
                push(e, p)
        elif isinstance(f, Sum) and f.const == 0 and len(f.items) == 1:
            e, c = f.items[0]
            coef *= c
            push(e, Fraction(1))
        else:
            push(f, Fraction(1))
    if coef == 0:
        return ZERO
    items = [(e, acc[e]) for e in order if acc[e] != 0]
    if len(items) == 1 and items[0][1] == 1 and isinstance(items[0][0], Sum) and coef != 1:
        # keep linear combinations flat
        s = items[0][0]
        return add(Num(s.const * coef), *[_scaled(t, c * coef) for t, c in s.items])
    items.sort(key=lambda ep: ep[0].skey)
    return _prod(coef, items)


def _scaled(t, c):
    if c == 1:
        return t
    if isinstance(t, Prod):
        return Prod(_clean(t.coef * c), t.items)
    return Prod(_clean(c), ((t, Fraction(1)),))


def power(e, p):
    e = wrap(e)
    p = Fraction(p).limit_denominator(1000)
    if p == 0:
        return ONE
    if p == 1:
        return e
    if isinstance(e, Num):
        if p.denominator == 1:
            if e.value == 0 and p < 0:
                raise ZeroDivisionError("0 to a negative power")
            return Num(e.value ** int(p))
        return Num(cmath.exp(float(p) * cmath.log(e.value)) if e.value != 0 else 0)
    if isinstance(e, Prod):
        cpow = e.coef ** float(p) if p.denominator != 1 else e.coef ** int(p)
        return _prod(cpow, [(b, q * p) for b, q in e.items])
    return _prod(1, [(e, p)])


def sqrt(e):
    return power(e, Fraction(1, 2))


def inv(e):
    return power(e, -1)


def rho(e, k=0):
    return Func("rho", wrap(e), k)


def drho(e):
    return Func("rho", wrap(e), 1)


def tau(e):
    return Func("tau", wrap(e))


def tauinv(e):
    return Func("tauinv", wrap(e))


def omega(e):
    return Func("omega", wrap(e))


def omegainv(e):
    return Func("omegainv", wrap(e))


def X(j=0, c=0):
    """X_j + c eps."""
    base = X0 if j == 0 else add(X0, N(j), mul(Num(-1), N0))
    return add(base, mul(Num(c), EPS)) if c else base


# structural transformations


def transform(e, atom_map):
    """Rebuild ``e`` with atoms replaced by atom_map(atom) (or kept if None)."""
    memo = {}

    def go(x):
        if x in memo:
            return memo[x]
        if isinstance(x, Num):
            out = x
        elif isinstance(x, Atom):
            rep = atom_map(x)
            out = x if rep is None else rep
        elif isinstance(x, Func):
            out = Func(x.name, go(x.arg), x.k)
        elif isinstance(x, Sum):
            out = add(Num(x.const), *[mul(Num(c), go(t)) for t, c in x.items])
        else:
            out = mul(Num(x.coef), *[power(go(b), p) for b, p in x.items])
        memo[x] = out
        return out

    return go(e)


def shift(e, j, c):
    """Apply X0 -> X_j + c eps, N_k -> N_{k+j}."""
    if j == 0 and c == 0:
        return e

    def amap(a):
        if a.name == "X":
            return X(j, c)
        if a.name == "N":
            return N(a.j + j) if j else None
        return None

    return transform(e, amap)


def subst_R(e):
    """Replace N_k by its value at N_0 = R (the right ideal quotient)."""

    def amap(a):
        if a.name == "N":
            return RN(a.j)
        return None

    return transform(e, amap)


def subst_X0(e, x):
    return transform(e, lambda a: x if a.name == "X" else None)


def conj(e):
    memo = {}

    def go(x):
        if x in memo:
            return memo[x]
        if isinstance(x, Num):
            out = Num(x.value.conjugate())
        elif isinstance(x, Atom):
            out = x
        elif isinstance(x, Func):
            out = Func(x.name, go(x.arg), x.k)
        elif isinstance(x, Sum):
            out = add(Num(x.const.conjugate()), *[mul(Num(c.conjugate()), go(t)) for t, c in x.items])
        else:
            # principal powers of real-positive bases are real; conjugate base-wise
            out = mul(Num(x.coef.conjugate()), *[power(go(b), p) for b, p in x.items])
        memo[x] = out
        return out

    return go(e)


def atoms(e):
    out = set()
    stack = [e]
    seen = set()
    while stack:
        x = stack.pop()
        if x in seen:
            continue
        seen.add(x)
        if isinstance(x, Atom):
            out.add((x.name, x.j))
        elif isinstance(x, Func):
            stack.append(x.arg)
        elif isinstance(x, Sum):
            stack.extend(t for t, _ in x.items)
        elif isinstance(x, Prod):
            stack.extend(b for b, _ in x.items)
    return out


def diff(e, var=X0):
    """Symbolic derivative with respect to an atom."""
    memo = {}

    def go(x):
        if x in memo:
            return memo[x]
        if isinstance(x, Num):
            out = ZERO
        elif isinstance(x, Atom):
            out = ONE if x == var else ZERO
        elif isinstance(x, Func):
            da = go(x.arg)
            if da.is_zero():
                out = ZERO
            elif x.name == "rho":
                out = mul(Func("rho", x.arg, x.k + 1), da)
            elif x.name == "tau":
                # tau tau' = rho'/2
                out = mul(Num(0.5), rho(x.arg, 1), inv(x), da)
            else:
                raise NotImplementedError(f"derivative of {x.name}")
        elif isinstance(x, Sum):
            out = add(*[mul(Num(c), go(t)) for t, c in x.items])
        else:
            terms = []
            for i, (b, p) in enumerate(x.items):
                db = go(b)
                if db.is_zero():
                    continue
                rest = [power(bb, pp) for k, (bb, pp) in enumerate(x.items) if k != i]
                terms.append(mul(Num(x.coef * float(p)), power(b, p - 1), db, *rest))
            out = add(*terms)
        memo[x] = out
        return out

    return go(e)


# evaluation


class Env:
    """Numeric values for the atoms at a batch of points.

    ``x0``, ``n0`` are arrays of equal length. ``u`` is omega^{-1}(n0) when
    N_j with j != 0 must be evaluated. ``R`` is a scalar or an array.
    ``funcs`` supplies rho (callable rho(x, k)) and optionally tau, tauinv,
    omega, omegainv.
    """

    def __init__(self, x0, n0=None, R=None, eps=0.0, rho=None, trivial=None, u=None):
        self.x0 = np.asarray(x0, dtype=float)
        self.n0 = None if n0 is None else np.broadcast_to(np.asarray(n0, dtype=float), self.x0.shape)
        self.R = R
        self.eps = float(eps)
        self.rho = rho
        self.trivial = trivial
        self._u = u

    def subset(self, idx, dx=0.0):
        sub = lambda a: None if a is None else np.asarray(a)[idx] if np.ndim(a) else a
        return Env(self.x0[idx] + dx, sub(self.n0), sub(self.R), self.eps, self.rho, self.trivial, sub(self._u))

    @property
    def u(self):
        if self._u is None:
            self._u = np.asarray(self.trivial.omegainv(self.n0), dtype=float)
        return self._u

    def atom(self, a):
        shape = self.x0.shape
        if a.name == "X":
            return self.x0.astype(complex)
        if a.name == "eps":
            return np.full(shape, self.eps, dtype=complex)
        if a.name == "N":
            if a.j == 0:
                return self.n0.astype(complex)
            return np.asarray(self.trivial.omega(self.u + self.eps * a.j), dtype=complex) * np.ones(shape)
        if a.name == "RN":
            Rv = np.broadcast_to(np.asarray(self.R, dtype=float), shape)
            if a.j == 0:
                return Rv.astype(complex)
            uR = np.asarray(self.trivial.omegainv(Rv), dtype=float)
            return np.asarray(self.trivial.omega(uR + self.eps * a.j), dtype=complex) * np.ones(shape)
        raise KeyError(a.name)

    def func(self, f, v):
        re = np.real(v)
        if f.name == "rho":
            out = self.rho(re, f.k) if f.k else self.rho(re)
        else:
            out = getattr(self.trivial, f.name)(re)
        return np.asarray(out, dtype=complex) * np.ones(np.shape(v))


SING_TOL = 1e-8
SING_DX = 1e-6


def evaluate(e, env, memo=None, fix=True):
    """Evaluate to a complex array over the points of ``env``.

    With ``fix`` a 0/0 in a product is replaced by the average of the
    values just left and right of the point (removable singularity).
    """
    if memo is None:
        memo = {}
    if e in memo:
        return memo[e]
    shape = env.x0.shape
    if isinstance(e, Num):
        out = np.full(shape, e.value, dtype=complex)
    elif isinstance(e, Atom):
        out = env.atom(e)
    elif isinstance(e, Func):
        out = env.func(e, evaluate(e.arg, env, memo, fix))
    elif isinstance(e, Sum):
        out = np.full(shape, e.const, dtype=complex)
        with np.errstate(invalid="ignore"):
            for t, c in e.items:
                out = out + c * evaluate(t, env, memo, fix)
    else:
        num = np.full(shape, 1 + 0j)
        den = np.full(shape, 1 + 0j)
        for b, p in e.items:
            v = evaluate(b, env, memo, fix)
            if p > 0:
                num = num * _pow(v, p)
            else:
                den = den * _pow(v, -p)
        bad = (np.abs(num) < SING_TOL) & (np.abs(den) < SING_TOL)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = e.coef * num / den
        if fix:
            # nonzero over a vanishing denominator is a genuine pole
            pole = (np.abs(den) < SING_TOL) & ~bad
            out[pole] = complex(np.inf, np.inf)
        if fix and bad.any() and any(p < 0 for _, p in e.items):
            idx = np.nonzero(bad)[0]
            # widen the step when a side lands on another exact zero
            for dx in (SING_DX, 1e2 * SING_DX, 1e4 * SING_DX):
                lo = evaluate(e, env.subset(idx, -dx), {}, False)
                hi = evaluate(e, env.subset(idx, dx), {}, False)
                lo2 = evaluate(e, env.subset(idx, -2 * dx), {}, False)
                hi2 = evaluate(e, env.subset(idx, 2 * dx), {}, False)
                fl, fh = np.isfinite(lo) & np.isfinite(lo2), np.isfinite(hi) & np.isfinite(hi2)
                with np.errstate(invalid="ignore"):
                    # Richardson on the symmetric average cancels the dx^2 term
                    sym = (4 * (lo + hi) - (lo2 + hi2)) / 6
                    val = np.where(fl & fh, sym, np.where(fl, 2 * lo - lo2, 2 * hi - hi2))
                fl, fh = fl | np.isfinite(lo), fh | np.isfinite(hi)
                with np.errstate(invalid="ignore"):
                    val = np.where(np.isfinite(val), val, np.where(np.isfinite(lo), lo, hi))
                ok = fl | fh
                out[idx[ok]] = val[ok]
                idx = idx[~ok]
                if idx.size == 0:
                    break
    memo[e] = out
    return out


def _pow(v, p):
    if p.denominator == 1:
        return v ** int(p)
    if p.denominator == 2:
        # principal square root; clamp tiny negative rounding
        r = np.where((np.abs(v.imag) < 1e-14) & (v.real < 0) & (v.real > -1e-12), 0.0 + 0j, v)
        return np.sqrt(r) ** p.numerator
    return np.exp(float(p) * np.log(v))


# printing and serialization


def to_str(e):
    if isinstance(e, Num):
        v = e.value
        return f"{v.real:g}" if v.imag == 0 else f"({v.real:g}{v.imag:+g}j)"
    if isinstance(e, Atom):
        if e.name == "X":
            return "X0"
        if e.name == "eps":
            return "eps"
        if e.name == "N":
            return f"N{e.j}" if e.j >= 0 else f"N_{-e.j}"
        return "R" if e.j == 0 else f"R[{e.j:+d}]"
    if isinstance(e, Func):
        name = e.name if e.k == 0 else e.name + "'" * e.k if e.k < 4 else f"{e.name}^({e.k})"
        return f"{name}({to_str(e.arg)})"
    if isinstance(e, Sum):
        parts = [] if e.const == 0 else [to_str(Num(e.const))]
        for t, c in e.items:
            s = to_str(t)
            if c == 1:
                parts.append(s)
            elif c == -1:
                parts.append("-" + s)
            else:
                parts.append(f"{to_str(Num(c))}*{s}")
        return "(" + " + ".join(parts).replace("+ -", "- ") + ")"
    parts = [] if e.coef == 1 else [to_str(Num(e.coef))]
    for b, p in e.items:
        s = to_str(b)
        parts.append(s if p == 1 else f"{s}^({p})")
    return "*".join(parts)


def to_json(e):
    if isinstance(e, Num):
        return ["num", e.value.real, e.value.imag]
    if isinstance(e, Atom):
        return ["atom", e.name, e.j]
    if isinstance(e, Func):
        return ["func", e.name, e.k, to_json(e.arg)]
    if isinstance(e, Sum):
        return ["sum", [e.const.real, e.const.imag], [[to_json(t), [c.real, c.imag]] for t, c in e.items]]
    return [
        "prod",
        [e.coef.real, e.coef.imag],
        [[to_json(b), [p.numerator, p.denominator]] for b, p in e.items],
    ]


def from_json(d):
    tag = d[0]
    if tag == "num":
        return Num(complex(d[1], d[2]))
    if tag == "atom":
        return Atom(d[1], d[2])
    if tag == "func":
        return Func(d[1], from_json(d[3]), d[2])
    if tag == "sum":
        return add(Num(complex(*d[1])), *[mul(Num(complex(*c)), from_json(t)) for t, c in d[2]])
    if tag == "prod":
        return mul(Num(complex(*d[1])), *[power(from_json(b), Fraction(p[0], p[1])) for b, p in d[2]])
    raise ValueError(f"unknown AST node {tag!r}")


def dumps(e):
    return json.dumps({"version": AST_VERSION, "expr": to_json(e)})


def loads(s):
    d = json.loads(s)
    if d.get("version") != AST_VERSION:
        raise ValueError(f"unsupported AST version {d.get('version')!r}")
    return from_json(d["expr"])
