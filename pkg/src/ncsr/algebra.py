"""Normal-ordered elements of the algebras AC, AR, AN, ANC, B and (Psi, mu).

A NormalForm maps a ladder signature to a coefficient expression:

    AR, AN   r in Z          X_+^r f_r   (X_-^{|r|} for r < 0)
    AC, ANC  (r, s) in N^2   X_+^r X_-^s f_rs
    B, PSI   (r, s) in Z^2   a^r b^s f_rs  (a_+^r or a_-^{|r|}, same for b)

Ladders are always to the left of the coefficient. Products are computed by
right-multiplying a term by one generator at a time using the commutation
and contraction rules of each algebra.
"""
from __future__ import annotations

import json
from functools import lru_cache

import numpy as np

from . import coeff as C
from .coeff import EPS, ONE, ZERO, Expr, X, add, inv, mul, rho, shift, sqrt, tau

TAGS = ("AC", "AR", "AN", "ANC", "B", "PSI")
GENERATORS = {
    "AC": ("X+", "X-"),
    "ANC": ("X+", "X-"),
    "AR": ("X+", "X-"),
    "AN": ("X+", "X-"),
    "B": ("a+", "a-", "b+", "b-"),
    "PSI": ("a+", "a-", "b+", "b-"),
}


class TagError(ValueError):
    pass


def _nbase(tag):
    """Expression playing the role of N_0 in contractions."""
    return C.R if tag in ("AR", "AC") else C.N0


def _check_coeff(tag, e):
    at = C.atoms(e)
    names = {a for a in at}
    if tag in ("AC", "AR", "PSI") and any(n == "N" for n, _ in names):
        raise TagError(f"N_0 is not an element of {tag}")
    if tag in ("AN", "ANC") and any(n == "N" and j != 0 for n, j in names):
        raise TagError(f"N_k with k != 0 is not an element of {tag}")


def _zero_sig(tag):
    return 0 if tag in ("AR", "AN") else (0, 0)


class NormalForm:
    __slots__ = ("tag", "terms")

    def __init__(self, tag, terms=None):
        if tag not in TAGS:
            raise TagError(f"unknown algebra {tag!r}")
        self.tag = tag
        clean = {}
        for sig, c in (terms or {}).items():
            c = C.wrap(c)
            if not c.is_zero():
                clean[sig] = c
        self.terms = clean

    # construction
    @classmethod
    def scalar(cls, tag, c):
        c = C.wrap(c)
        _check_coeff(tag, c)
        return cls(tag, {_zero_sig(tag): c})

    @classmethod
    def gen(cls, tag, name):
        if name not in GENERATORS[tag]:
            raise TagError(f"generator {name} is not in {tag}")
        if tag in ("AR", "AN"):
            return cls(tag, {1 if name == "X+" else -1: ONE})
        if tag in ("AC", "ANC"):
            return cls(tag, {(1, 0) if name == "X+" else (0, 1): ONE})
        sig = {"a+": (1, 0), "a-": (-1, 0), "b+": (0, 1), "b-": (0, -1)}[name]
        return cls(tag, {sig: ONE})

    # ring operations
    def __add__(self, other):
        other = _coerce(self.tag, other)
        if other.tag != self.tag:
            raise TagError(f"cannot add {self.tag} and {other.tag}")
        out = dict(self.terms)
        for sig, c in other.terms.items():
            out[sig] = add(out[sig], c) if sig in out else c
        return NormalForm(self.tag, out)

    __radd__ = __add__

    def __neg__(self):
        return self.scale(-1)

    def __sub__(self, other):
        return self + (-_coerce(self.tag, other))

    def __rsub__(self, other):
        return _coerce(self.tag, other) - self

    def scale(self, c):
        c = C.wrap(c)
        return NormalForm(self.tag, {s: mul(c, v) for s, v in self.terms.items()})

    def __mul__(self, other):
        return multiply(self, other)

    def __rmul__(self, other):
        return multiply(_coerce(self.tag, other), self)

    def __pow__(self, k):
        out = NormalForm.scalar(self.tag, ONE)
        for _ in range(int(k)):
            out = out * self
        return out

    def dagger(self):
        return dagger(self)

    def is_structurally_zero(self):
        return not self.terms

    def grades(self):
        if self.tag not in ("B", "PSI"):
            raise TagError("grading is defined on B and PSI")
        return sorted({r + s for r, s in self.terms})

    def coefficient(self, sig):
        return self.terms.get(sig, ZERO)

    def __repr__(self):
        parts = []
        for sig in sorted(self.terms, key=_sig_key):
            parts.append(f"{_ladder_str(self.tag, sig)}*[{self.terms[sig]!r}]")
        return f"{self.tag}<" + (" + ".join(parts) if parts else "0") + ">"

    def to_json(self):
        return {
            "algebra": self.tag,
            "version": C.AST_VERSION,
            "terms": [
                {"signature": list(sig) if isinstance(sig, tuple) else sig, "coeff": C.to_json(c)}
                for sig, c in sorted(self.terms.items(), key=lambda kv: _sig_key(kv[0]))
            ],
        }

    @classmethod
    def from_json(cls, d):
        if isinstance(d, str):
            d = json.loads(d)
        terms = {}
        for t in d["terms"]:
            sig = tuple(t["signature"]) if isinstance(t["signature"], list) else t["signature"]
            terms[sig] = C.from_json(t["coeff"])
        return cls(d["algebra"], terms)


def _sig_key(sig):
    return sig if isinstance(sig, tuple) else (sig,)


def _ladder_str(tag, sig):
    def pw(name, k):
        return "" if k == 0 else name if k == 1 else f"{name}^{k}"

    if tag in ("AR", "AN"):
        return pw("X+", sig) if sig >= 0 else pw("X-", -sig) or "1"
    if tag in ("AC", "ANC"):
        s = pw("X+", sig[0]) + pw("X-", sig[1])
        return s or "1"
    r, s = sig
    out = (pw("a+", r) if r >= 0 else pw("a-", -r)) + (pw("b+", s) if s >= 0 else pw("b-", -s))
    return out or "1"


def _coerce(tag, x):
    if isinstance(x, NormalForm):
        return x
    return NormalForm.scalar(tag, C.wrap(x))


# generator shifts: f g = g T_g(f)

_SHIFT = {
    "X+": (0, 1),
    "X-": (0, -1),
    "a+": (1, 1),
    "a-": (-1, -1),
    "b+": (1, 0),
    "b-": (-1, 0),
}


def _T(c, g):
    j, k = _SHIFT[g]
    return shift(c, j, k)


# contraction and exchange coefficients in B


def K_aa(first, second):
    """a_{first} a_{second} for opposite signs."""
    if first == "+":
        return tau(C.N(-1)) - tau(X(-1))
    return tau(C.N0) - tau(X(0, 1))


def K_bb(first, second):
    if first == "+":
        return tau(C.N(-1)) + tau(X(-1))
    return tau(C.N0) + tau(X0_)


X0_ = C.X0


@lru_cache(maxsize=None)
def exchange(sb, sa):
    """F with b_{sb} a_{sa} = a_{sa} b_{sb} F."""
    N = C.N
    if sb == "+" and sa == "+":
        return sqrt(
            (tau(N(0)) - tau(X(0, 1))) * (tau(N(1)) + tau(X(1, 1))) * inv(tau(N(1)) - tau(X(1, 1))) * inv(tau(N(0)) + tau(X0_))
        )
    if sb == "-" and sa == "-":
        return sqrt(
            (tau(N(-1)) - tau(X(-1))) * (tau(N(-2)) + tau(X(-2, -1))) * inv(tau(N(-2)) - tau(X(-2))) * inv(tau(N(-1)) + tau(X(-1)))
        )
    if sb == "-" and sa == "+":
        return sqrt((rho(N(0)) - rho(X(0, 1))) * inv(tau(N(-1)) - tau(X(-1, 1))) * inv(tau(N(-1)) + tau(X(-1))))
    return sqrt((tau(N(-1)) - tau(X(-1))) * (tau(N(-1)) + tau(X(-1, -1))) * inv(rho(N(0)) - rho(X0_)))


@lru_cache(maxsize=None)
def _exchange_power(sb, s, sa):
    """E with b_{sb}^s a_{sa} = a_{sa} b_{sb}^s E."""
    if s == 0:
        return ONE
    prev = _exchange_power(sb, s - 1, sa)
    return mul(shift(prev, 1 if sb == "+" else -1, 0), exchange(sb, sa))


def _sgn(k):
    return "+" if k > 0 else "-"


# term times generator


def _times_gen(tag, sig, c, g):
    """(ladder_sig * c) * g as a list of (sig, coeff)."""
    c2 = _T(c, g)
    if tag in ("AR", "AN"):
        r = sig
        nb = _nbase(tag)
        if g == "X+":
            if r >= 0:
                return [(r + 1, c2)]
            return [(r + 1, mul(rho(nb) - rho(X(0, 1)), c2))]
        if r <= 0:
            return [(r - 1, c2)]
        return [(r - 1, mul(rho(nb) - rho(C.X0), c2))]
    if tag in ("AC", "ANC"):
        r, s = sig
        if g == "X-":
            return [((r, s + 1), c2)]
        return [(k, mul(v, c2)) for k, v in _ac_xm_xp(r, s)]
    # B and PSI
    r, s = sig
    if g[0] == "b":
        d = 1 if g[1] == "+" else -1
        if s == 0 or (s > 0) == (d > 0):
            return [((r, s + d), c2)]
        K = K_bb(_sgn(s), g[1])
        return [((r, s + d), mul(K, c2))]
    d = 1 if g[1] == "+" else -1
    E = _exchange_power(_sgn(s), abs(s), g[1]) if s else ONE
    if r == 0 or (r > 0) == (d > 0):
        return [((r + d, s), mul(E, c2))]
    K = shift(K_aa(_sgn(r), g[1]), s, 0)
    return [((r + d, s), mul(K, E, c2))]


@lru_cache(maxsize=None)
def _ac_xm_xp(r, s):
    """X_+^r X_-^s X_+ in AC normal form, as a tuple of (sig, coeff)."""
    if s == 0:
        return (((r + 1, 0), ONE),)
    out = {}
    for sig, v in _ac_xm_xp(r, s - 1):
        k = (sig[0], sig[1] + 1)
        v2 = shift(v, 0, -1)
        out[k] = add(out[k], v2) if k in out else v2
    delta = rho(X(0, 1)) - rho(C.X0)
    k = (r, s - 1)
    out[k] = add(out[k], -delta) if k in out else -delta
    return tuple(out.items())


def _gens_of(tag, sig):
    if tag in ("AR", "AN"):
        return ["X+"] * sig if sig >= 0 else ["X-"] * (-sig)
    if tag in ("AC", "ANC"):
        return ["X+"] * sig[0] + ["X-"] * sig[1]
    r, s = sig
    return (["a+"] * r if r >= 0 else ["a-"] * (-r)) + (["b+"] * s if s >= 0 else ["b-"] * (-s))


def right_mul_gen(A: NormalForm, g):
    if g not in GENERATORS[A.tag]:
        raise TagError(f"generator {g} is not in {A.tag}")
    out = {}
    for sig, c in A.terms.items():
        for k, v in _times_gen(A.tag, sig, c, g):
            out[k] = add(out[k], v) if k in out else v
    return NormalForm(A.tag, out)


def multiply(A: NormalForm, B: NormalForm):
    if not isinstance(B, NormalForm):
        B = _coerce(A.tag, B)
    if A.tag != B.tag:
        raise TagError(f"cannot multiply {A.tag} and {B.tag}")
    total = NormalForm(A.tag)
    for sig, c in B.terms.items():
        P = A
        for g in _gens_of(A.tag, sig):
            P = right_mul_gen(P, g)
        total = total + NormalForm(A.tag, {k: mul(v, c) for k, v in P.terms.items()})
    return total


def normalize(word, tag):
    """Normal form of a word: a sequence of generator names, coefficient
    expressions, numbers and NormalForms. A list of words is summed."""
    if isinstance(word, NormalForm):
        if word.tag != tag:
            raise TagError(f"element of {word.tag} given for {tag}")
        return word
    if word and isinstance(word[0], (list, tuple)) and not isinstance(word[0], str):
        total = NormalForm(tag)
        for w in word:
            total = total + normalize(w, tag)
        return total
    out = NormalForm.scalar(tag, ONE)
    for f in word:
        if isinstance(f, str):
            out = right_mul_gen(out, f)
        elif isinstance(f, NormalForm):
            out = multiply(out, f)
        else:
            c = C.wrap(f)
            _check_coeff(tag, c)
            out = NormalForm(tag, {k: mul(v, c) for k, v in out.terms.items()})
    return out


def add_nf(a, b):
    return a + b


def dagger(A: NormalForm):
    total = NormalForm(A.tag)
    for sig, c in A.terms.items():
        word = [C.conj(c)] + [_DAG[g] for g in reversed(_gens_of(A.tag, sig))]
        total = total + normalize(word, A.tag)
    return total


_DAG = {"X+": "X-", "X-": "X+", "a+": "a-", "a-": "a+", "b+": "b-", "b-": "b+"}


def X_plus(tag):
    """X_+ as an element of ``tag`` (b_- a_+ in B)."""
    if tag in ("B", "PSI"):
        return normalize(["b-", "a+"], tag)
    return NormalForm.gen(tag, "X+")


def X_minus(tag):
    if tag in ("B", "PSI"):
        return normalize(["a-", "b+"], tag)
    return NormalForm.gen(tag, "X-")


def commutator(A, B):
    return A * B - B * A


# quotient maps


def _reinterpret(A, target, coeff_map=lambda c: c):
    out = NormalForm(target)
    for sig, c in A.terms.items():
        word = _gens_of(A.tag, sig)
        P = normalize(word, target)
        out = out + NormalForm(target, {k: mul(v, coeff_map(c)) for k, v in P.terms.items()})
    return out


def quotient(A: NormalForm, which):
    if which == "q1":
        if A.tag != "ANC":
            raise TagError("q1 maps ANC to AN")
        return _reinterpret(A, "AN")
    if which == "q2":
        if A.tag not in ("AC", "ANC"):
            raise TagError("q2 maps AC (or ANC) to AR")
        return _reinterpret(A, "AR", C.subst_R)
    if which == "q3":
        if A.tag != "AN":
            raise TagError("q3 maps AN to AR")
        return NormalForm("AR", {s: C.subst_R(c) for s, c in A.terms.items()})
    if which == "q4":
        if A.tag != "B":
            raise TagError("q4 maps B to PSI")
        return NormalForm("PSI", {s: C.subst_R(c) for s, c in A.terms.items()})
    raise ValueError(f"unknown quotient {which!r}")


def as_B(psi: NormalForm):
    """View a PSI element as an element of B (R stays a constant)."""
    if psi.tag not in ("PSI", "B"):
        raise TagError("expected a PSI element")
    return NormalForm("B", dict(psi.terms))


def mu(xi, zeta):
    """Nonassociative product on Psi: normal order in B, then N_0 -> R."""
    return quotient(multiply(as_B(xi), as_B(zeta)), "q4")


def psi_from_AR(f: NormalForm):
    """Embed an AR element into P^(0): X_+ -> b_- a_+, X_- -> a_- b_+."""
    if f.tag != "AR":
        raise TagError("expected an AR element")
    out = NormalForm("PSI")
    for r, c in f.terms.items():
        word = ["b-", "a+"] * r if r >= 0 else ["a-", "b+"] * (-r)
        P = quotient(normalize(word, "B"), "q4")
        out = out + NormalForm("PSI", {k: mul(v, c) for k, v in P.terms.items()})
    return out


def grade_decompose(psi: NormalForm):
    if psi.tag not in ("PSI", "B"):
        raise TagError("grading is defined on B and PSI")
    out = {}
    for (r, s), c in psi.terms.items():
        out.setdefault(r + s, {})[(r, s)] = c
    return {g: NormalForm(psi.tag, t) for g, t in sorted(out.items())}


@lru_cache(maxsize=None)
def _xpow_coeff(r):
    """G_r with X_+^r = a^r b^{-r} G_r in B (X_-^{|r|} for r < 0)."""
    if r == 0:
        return ONE
    word = ["b-", "a+"] * r if r > 0 else ["a-", "b+"] * (-r)
    P = normalize(word, "B")
    assert list(P.terms) == [(r, -r)], P
    return P.terms[(r, -r)]


def membership_AN(xi: NormalForm):
    """(is_in_AN, AN rewrite or None) for a B element."""
    if xi.tag != "B":
        raise TagError("membership_AN takes a B element")
    if any(r + s != 0 for r, s in xi.terms):
        return False, None
    out = {}
    for (r, s), c in xi.terms.items():
        out[r] = mul(c, inv(_xpow_coeff(r)))
    return True, NormalForm("AN", out)


# numeric comparison


def coeff_values(A: NormalForm, env):
    return {sig: C.evaluate(c, env) for sig, c in A.terms.items()}


def numerically_equal(A: NormalForm, B: NormalForm, env, tol=1e-9):
    if A.tag != B.tag:
        return False
    D = A - B
    for sig, c in D.terms.items():
        v = C.evaluate(c, env)
        finite = np.isfinite(v)
        if np.any(np.abs(v[finite]) > tol):
            return False
    return True


def prune(A: NormalForm, env, tol=1e-12):
    """Drop terms whose coefficient vanishes on all points of ``env``."""
    keep = {}
    for sig, c in A.terms.items():
        v = C.evaluate(c, env)
        if np.any(np.abs(v[np.isfinite(v)]) > tol):
            keep[sig] = c
    return NormalForm(A.tag, keep)
