"""Classical Poisson geometry and the noncommutative exterior derivative.

Classical functions on the surface are graded: f = sum_r e^{i r phi} F_r(z).
Every F_r arising from an AR element carries the factor A^{|r|/2} with
A = rho(R) - rho(z), so a GradedFunction stores the reduced coefficient
g_r = F_r / A^{|r|/2}, which stays smooth at the poles of the surface.

The exterior derivative acts on AR normal forms and returns the
coefficients of a one-form in the (xi_+, xi_0) basis. One-forms are
realised as grade -2 elements of Psi (xi_+ = a_-^2, xi_- = b_-^2) and
compared as matrices on a trivial lattice.
"""
from __future__ import annotations

from fractions import Fraction
from dataclasses import dataclass, field

import numpy as np

from . import coeff as C
from .algebra import NormalForm, TagError, as_B, commutator, mu, multiply, psi_from_AR, quotient, _xpow_coeff
from .coeff import EPS, ONE, X0, Num, add, inv, mul, power, rho
from .representation import TrivialLattice, _rho_fn, represent, standard_rep

BRACKETS = ("corrected", "left", "printed")
XI0_TOL = 1e-9


# classical graded functions


def _A():
    return add(rho(C.R), mul(Num(-1), rho(X0)))


def _drop_eps(e):
    return C.transform(e, lambda a: C.ZERO if a.name == "eps" else None)


@dataclass
class GradedFunction:
    """f = sum_r e^{i r phi} A^{|r|/2} g_r(z), g_r an expression in X0 and R."""

    comps: dict = field(default_factory=dict)

    def __post_init__(self):
        self.comps = {int(r): C.wrap(g) for r, g in self.comps.items() if not C.wrap(g).is_zero()}

    @classmethod
    def const(cls, c):
        return cls({0: C.wrap(c)})

    @classmethod
    def z(cls):
        return cls({0: X0})

    @classmethod
    def x_plus(cls):
        return cls({1: ONE})

    @classmethod
    def x_minus(cls):
        return cls({-1: ONE})

    @classmethod
    def from_AR(cls, f: NormalForm):
        """Classical image: X_+ -> e^{i phi} A^{1/2}, X_0 -> z, eps -> 0."""
        if f.tag != "AR":
            raise TagError("classical images are defined for AR elements")
        return cls({r: _drop_eps(c) for r, c in f.terms.items()})

    def to_AR(self):
        """The AR normal form sum_r X_pm^r g_r(X0) (one choice of ordering)."""
        return NormalForm("AR", dict(self.comps))

    def __add__(self, other):
        other = _gf(other)
        out = dict(self.comps)
        for r, g in other.comps.items():
            out[r] = add(out[r], g) if r in out else g
        return GradedFunction(out)

    def __neg__(self):
        return self.scale(-1)

    def __sub__(self, other):
        return self + (-_gf(other))

    def scale(self, c):
        c = C.wrap(c)
        return GradedFunction({r: mul(c, g) for r, g in self.comps.items()})

    def __mul__(self, other):
        if not isinstance(other, GradedFunction):
            return self.scale(other)
        out = {}
        A = _A()
        for r, g in self.comps.items():
            for s, h in other.comps.items():
                k = r + s
                e = (abs(r) + abs(s) - abs(k)) // 2
                t = mul(power(A, e), g, h) if e else mul(g, h)
                out[k] = add(out[k], t) if k in out else t
        return GradedFunction(out)

    __rmul__ = __mul__

    def grades(self):
        return sorted(self.comps)

    def component(self, r, z, R, profile):
        """F_r(z) including the A^{|r|/2} factor."""
        env = _cenv(z, R, profile)
        g = self.comps.get(r)
        if g is None:
            return np.zeros(np.shape(env.x0), dtype=complex)
        val = C.evaluate(g, env)
        if r:
            a = np.maximum(np.real(C.evaluate(_A(), env)), 0.0)
            val = val * a ** (abs(r) / 2)
        return val

    def reduced(self, r, z, R, profile):
        g = self.comps.get(r)
        env = _cenv(z, R, profile)
        return np.zeros(env.x0.shape, dtype=complex) if g is None else C.evaluate(g, env)

    def __call__(self, z, phi, R, profile):
        z = np.asarray(z, dtype=float)
        out = np.zeros(z.shape, dtype=complex)
        for r in self.comps:
            out = out + np.exp(1j * r * np.asarray(phi)) * self.component(r, z, R, profile)
        return out

    def __repr__(self):
        body = ", ".join(f"{r}: {C.to_str(g)}" for r, g in sorted(self.comps.items()))
        return f"GradedFunction({{{body}}})"


def _gf(x):
    if isinstance(x, GradedFunction):
        return x
    if isinstance(x, NormalForm):
        return GradedFunction.from_AR(x)
    return GradedFunction.const(x)


def _cenv(z, R, profile):
    return C.Env(np.atleast_1d(np.asarray(z, dtype=float)), R=R, eps=0.0, rho=_rho_fn(profile))


def poisson(f, h):
    """PB(e^{ir phi}F, e^{is phi}G) = e^{i(r+s)phi}(s F'G - r G'F)."""
    f, h = _gf(f), _gf(h)
    A = _A()
    dA = mul(Num(-1), rho(X0, 1))
    out = {}
    for r, c in f.comps.items():
        dc = C.diff(c)
        for s, d in h.comps.items():
            dd = C.diff(d)
            k = r + s
            e = (abs(r) + abs(s) - abs(k)) // 2 - 1
            # F' = A^{|r|/2-1}(|r|/2 A' c + A c'), same for G
            a_part = 0.5 * (s * abs(r) - r * abs(s))
            smooth = add(mul(Num(s), dc, d), mul(Num(-r), c, dd))
            if e < 0:
                # only reachable with a_part == 0 (same signs or a zero grade)
                t = smooth
            else:
                t = mul(power(A, e), add(mul(A, smooth), mul(Num(a_part), dA, c, d)))
            out[k] = add(out[k], t) if k in out else t
    return GradedFunction(out)


def jacobi_residual(f, g, h, z, R, profile, phi=0.3):
    """max |PB(f,PB(g,h)) + cyclic| on samples."""
    J = poisson(f, poisson(g, h)) + poisson(g, poisson(h, f)) + poisson(h, poisson(f, g))
    return float(np.max(np.abs(J(z, phi, R, profile)), initial=0.0))


def chebyshev_grid(a, b, n):
    """Chebyshev points strictly inside (a, b)."""
    k = np.arange(n)
    t = np.cos((2 * k + 1) * np.pi / (2 * n))
    return 0.5 * (a + b) + 0.5 * (b - a) * t[::-1]


def C_function():
    """C(z) = rho'(z)^2 + 4 rho(R) - 4 rho(z)."""
    return add(power(rho(X0, 1), 2), mul(Num(4), _A()))


def metric_pair(f, h):
    """g(df~, dh~) as a graded function."""
    f, h = _gf(f), _gf(h)
    Xp, Xm, Z = GradedFunction.x_plus(), GradedFunction.x_minus(), GradedFunction.z()
    body = poisson(Xp, f) * poisson(Xm, h) + poisson(Xm, f) * poisson(Xp, h) + (poisson(Z, f) * poisson(Z, h)).scale(2)
    return body.scale(mul(Num(-2), inv(C_function())))


def hodge_df(f):
    """Coefficients of *df on dX_-, dX_+, dX_0."""
    f = _gf(f)
    Xp, Xm, Z = GradedFunction.x_plus(), GradedFunction.x_minus(), GradedFunction.z()
    k = mul(Num(2j), power(C_function(), Fraction(-1, 2)))
    return {
        "dX-": poisson(f, Xp).scale(k),
        "dX+": poisson(f, Xm).scale(k),
        "dX0": poisson(f, Z).scale(mul(Num(2), k)),
    }


def laplacian(f):
    f = _gf(f)
    Xp, Xm, Z = GradedFunction.x_plus(), GradedFunction.x_minus(), GradedFunction.z()
    Cz = C_function()
    first = poisson(Xm, poisson(Xp, f)) + poisson(Xp, poisson(Xm, f)) + poisson(Z, poisson(Z, f)).scale(2)
    first = first.scale(mul(Num(-2), inv(Cz)))
    pref = mul(Num(2), power(Cz, -2), rho(X0, 1), add(rho(X0, 2), Num(-2)))
    second = (Xm * poisson(Xp, f) - Xp * poisson(Xm, f)).scale(pref)
    return first + second


def sample_points(a, b, R, profile, n=16):
    """Chebyshev samples of (a, b) split into (kept, excluded) by C(z) != 0."""
    z = chebyshev_grid(a, b, n)
    c = np.real(C.evaluate(C_function(), _cenv(z, R, profile)))
    keep = np.abs(c) > 1e-12
    return z[keep], z[~keep]


# Poisson limit


def _fit(eps, vals):
    eps = np.asarray(eps, dtype=float)
    vals = np.asarray(vals, dtype=float)
    ok = vals > 0
    if ok.sum() < 2:
        return float("nan"), float("nan")
    slope, icpt = np.polyfit(np.log(eps[ok]), np.log(vals[ok]), 1)
    return float(slope), float(icpt)


def pb_limit_defect(f, h, profile, J, eps, margin=0.25):
    """max entry of (1/eps)[f,h] - Q(PB(f,h)) on the standard AR rep of J.

    Entries are compared between basis vectors whose X0 lies at least
    ``margin * |J|`` from both ends; near the poles the square-root ladder
    coefficients converge non-uniformly in eps. margin=0 uses every entry.
    """
    rep = standard_rep(J, eps, "AR", R=J[0], rho=profile)
    M = rep.represent(commutator(f, h)) / eps
    Q = rep.represent(poisson(f, h).to_AR())
    w = J[1] - J[0]
    keep = (rep.x0 >= J[0] + margin * w - 1e-12) & (rep.x0 <= J[1] - margin * w + 1e-12)
    D = np.abs(M - Q)[np.ix_(keep, keep)]
    return float(np.max(D[np.isfinite(D)], initial=0.0))


def pb_limit_check(f, h, profile, J, eps_list, margin=0.25):
    defects = [pb_limit_defect(f, h, profile, J, e, margin) for e in eps_list]
    slope, icpt = _fit(eps_list, defects)
    return {"quantity": "poisson-limit", "epsilon": list(map(float, eps_list)), "defect": defects, "slope": slope, "intercept": icpt, "margin": margin}


def random_AR(rng, grades=(-1, 0, 1), degree=2, scale=1.0):
    """Random AR element sum_r X_pm^r p_r(X0) with real polynomial p_r."""
    terms = {}
    for r in grades:
        cs = rng.normal(size=degree + 1) * scale
        terms[r] = add(*[mul(Num(float(c)), power(X0, k)) if k else Num(float(c)) for k, c in enumerate(cs)])
    return NormalForm("AR", terms)


# exterior derivative


def _sc(e):
    return NormalForm.scalar("AR", e)


def _A0():
    return add(rho(C.R), mul(Num(-1), rho(X0)))


def _A1():
    return add(rho(C.R), mul(Num(-1), rho(C.X(0, 1))))


def _drho(c1, c0):
    """rho(X0 + c1 eps) - rho(X0 + c0 eps)."""
    return add(rho(C.X(0, c1)), mul(Num(-1), rho(C.X(0, c0))))


def _third(f, bracket):
    if bracket == "printed":
        return _sc(mul(inv(EPS), _drho(1, 0)))
    k = _sc(mul(inv(EPS), _drho(2, 1)))
    cx = commutator(_sc(X0), f)
    return cx * k if bracket == "corrected" else k * cx


@dataclass
class OneForm:
    """omega = xi_+ g_plus + xi_0 g_zero; alt = (g_minus, g_zero') in the (xi_-, xi_0) basis."""

    g_plus: NormalForm
    g_zero: NormalForm
    alt: tuple | None = None
    bracket: str = "corrected"

    def psi(self):
        """Image in P^(-2)."""
        a2 = NormalForm.gen("PSI", "a-") * NormalForm.gen("PSI", "a-")
        return mu(a2, psi_from_AR(self.g_plus)) + mu(xi0_psi(), psi_from_AR(self.g_zero))

    def matrix(self, lattice):
        return oneform_matrix(lattice, self.g_plus, self.g_zero)

    def alt_matrix(self, lattice):
        gm, g0 = self.alt
        L = lattice
        return L.operators["b-"].matrix @ L.operators["b-"].matrix @ represent(gm, L).matrix + mm(xi0_matrix(L), represent(g0, L).matrix)


def d_nc(f: NormalForm, bracket="corrected"):
    """Exterior derivative of an AR element."""
    if bracket not in BRACKETS:
        raise ValueError(f"bracket must be one of {BRACKETS}")
    if not isinstance(f, NormalForm):
        f = _sc(C.wrap(f))
    Xp, Xm = NormalForm.gen("AR", "X+"), NormalForm.gen("AR", "X-")
    k0 = _sc(mul(inv(EPS), inv(_A0())))
    k1 = _sc(mul(inv(EPS), inv(_A1())))
    cx = commutator(_sc(X0), f)
    rb = commutator(_sc(rho(C.X(0, 1))), f) - _third(f, bracket)
    g_plus = Xm * k0 * cx
    g_zero = -(Xm * k0 * commutator(Xp, f)) - (Xm * k1 * rb).scale(0.5)
    g_minus = -(k0 * Xp * cx)
    g_zero2 = -(k1 * commutator(Xm, f) * Xp) + (k1 * rb).scale(0.5)
    return OneForm(g_plus, g_zero, (g_minus, g_zero2), bracket)


def xi0_parts():
    """AR coefficients (c_a, c_b) with xi_0 = a_-^2 c_a + b_-^2 c_b."""
    P = _drho(2, 0)
    Xp, Xm = NormalForm.gen("AR", "X+"), NormalForm.gen("AR", "X-")
    ca = (Xm * _sc(mul(_A1(), inv(_A0()), inv(P)))).scale(mul(Num(-2), EPS))
    cb = (Xp * _sc(inv(P))).scale(mul(Num(-2), EPS))
    return ca, cb


def xi0_psi():
    ca, cb = xi0_parts()
    a2 = NormalForm.gen("PSI", "a-") * NormalForm.gen("PSI", "a-")
    b2 = NormalForm.gen("PSI", "b-") * NormalForm.gen("PSI", "b-")
    return mu(a2, psi_from_AR(ca)) + mu(b2, psi_from_AR(cb))


def xi0_matrix(L):
    ca, cb = xi0_parts()
    a, b = L.operators["a-"].matrix, L.operators["b-"].matrix
    M = a @ a @ represent(ca, L).matrix + b @ b @ represent(cb, L).matrix
    # rho(X0 + 2 eps) = rho(X0): xi_0 is undefined on that column
    P = np.real(C.evaluate(_drho(2, 0), L.env()))
    M[:, np.abs(P) < XI0_TOL * max(1.0, np.abs(P).max(initial=0.0))] = np.nan
    return M


def mm(X, Y):
    """X @ Y where a non-finite column of X only spoils the columns it reaches."""
    bad = ~np.all(np.isfinite(X), axis=0)
    if not bad.any():
        return X @ Y
    Y0 = np.where(np.isfinite(Y), Y, 0.0)
    out = np.where(np.isfinite(X), X, 0.0) @ Y0
    reach = np.any(Y0[bad, :] != 0, axis=0) | ~np.all(np.isfinite(Y), axis=0)
    out[:, reach] = np.nan
    return out


def oneform_matrix(L, g_plus, g_zero):
    a = L.operators["a-"].matrix
    return a @ a @ represent(g_plus, L).matrix + mm(xi0_matrix(L), represent(g_zero, L).matrix)


def left_multiply(L, f, W):
    """f . W for W mapping V_n to lower rows; f taken with R = N_0 of the source."""
    out = np.zeros_like(W)
    for n in np.unique(L.n):
        cols = np.nonzero(L.n == n)[0]
        Rn = float(L.n0[cols[0]])
        out[:, cols] = mm(represent(f, L, R=Rn).matrix, W[:, cols])
    return out


def finite_columns(*Ms):
    ok = None
    for M in Ms:
        c = np.all(np.isfinite(M), axis=0)
        ok = c if ok is None else ok & c
    return ok


def _maxdiff(A, B, cols):
    D = np.abs(A - B)[:, cols]
    return float(D.max(initial=0.0))


def window_lattice(profile, eps, level_u, pad=2):
    """Trivial lattice rows around n = level_u / eps."""
    n = int(round(level_u / eps))
    return TrivialLattice(_trivial(profile), eps, n + 1, max(1, n - pad)), n


def _trivial(profile):
    from .profile import TrivialProfileData

    return profile if isinstance(profile, TrivialProfileData) else TrivialProfileData(profile)


def interior_columns(L, n, margin=0.25, grid=None):
    """Columns of V_n away from the poles and from the singular set of xi_0.

    xi_0 has a pole where rho(X0 + 2 eps) = rho(X0), so the second cut is
    on |rho(X0 + 2 step) - rho(X0)|. With ``grid`` only columns whose X0
    lies on the grid z_min + k*grid are kept and the cut uses step = grid,
    so scans over eps = grid, grid/2, ... sample the same points.
    """
    prof = L.profile
    cols = np.nonzero(L.n == n)[0]
    x = L.x0[cols]
    step = L.eps if grid is None else grid
    if grid is not None:
        k = (x - L.n0[cols]) / grid
        on = np.abs(k - np.round(k)) < 1e-9
        cols, x = cols[on], x[on]
    a = prof(L.n0[cols]) - prof(x)
    p = np.abs(prof(x + 2 * step) - prof(x))
    return cols[(a >= margin * a.max()) & (p >= margin * p.max())]


def leibniz_defect(f, h, profile, eps, level_u=2.0, bracket="corrected", margin=0.25, grid=None):
    """max entry of d(fh) - d(f).h - f.d(h) on V_n with eps*n = level_u.

    The coordinate one-forms degenerate at the poles (rho(R) = rho(z)) and
    xi_0 degenerates where rho(X0 + 2 eps) = rho(X0), so only columns clear
    of both (see :func:`interior_columns`) count.
    """
    L, n = window_lattice(profile, eps, level_u)
    cols = interior_columns(L, n, margin, grid)
    dfh = d_nc(f * h, bracket).matrix(L)
    dfh_r = mm(d_nc(f, bracket).matrix(L), represent(h, L).matrix)
    f_dh = left_multiply(L, f, d_nc(h, bracket).matrix(L))
    ok = finite_columns(dfh, dfh_r, f_dh)
    cols = cols[ok[cols]]
    return _maxdiff(dfh, dfh_r + f_dh, cols)


def leibniz_scan(f, h, profile, eps_list, level_u=2.0, margin=0.25):
    # sample the points of the coarsest lattice at every eps
    grid = max(eps_list)
    d = [leibniz_defect(f, h, profile, e, level_u, margin=margin, grid=grid) for e in eps_list]
    slope, icpt = _fit(eps_list, d)
    ratios = [d[i] / d[i + 1] if d[i + 1] > 0 else float("inf") for i in range(len(d) - 1)]
    return {"quantity": "leibniz-defect", "epsilon": list(map(float, eps_list)), "defect": d, "slope": slope, "intercept": icpt, "ratios": ratios}


def exactness_defects(L, bracket="corrected"):
    """Deviations of d(1), d(X0) - xi_0, d(X+) - xi_+ as P^(-2) matrices."""
    a = L.operators["a-"].matrix
    xi0 = xi0_matrix(L)
    xip = a @ a
    one = d_nc(_sc(ONE), bracket).matrix(L)
    dx0 = d_nc(_sc(X0), bracket).matrix(L)
    dxp = d_nc(NormalForm.gen("AR", "X+"), bracket).matrix(L)
    cols = np.nonzero(finite_columns(xi0, one, dx0, dxp))[0]
    return {
        "d(1)": float(np.abs(one[:, cols]).max(initial=0.0)),
        "d(X0)-xi0": _maxdiff(dx0, xi0, cols),
        "d(X+)-xi+": _maxdiff(dxp, xip, cols),
        "excluded_columns": [list(map(int, L.labels[j])) for j in np.nonzero(~finite_columns(xi0, one, dx0, dxp))[0]],
    }


def xi_relations(L, cols=None):
    """Consistency of the xi_- / xi_+ relations and of d(X-) on a lattice.

    Returns max deviations over ``cols`` (default: all) restricted to
    columns where every factor is finite, plus the excluded columns.
    """
    a, b = L.operators["a-"].matrix, L.operators["b-"].matrix
    xip, xim, xi0 = a @ a, b @ b, xi0_matrix(L)
    Xp, Xm = NormalForm.gen("AR", "X+"), NormalForm.gen("AR", "X-")
    D = mul(_drho(2, 0), inv(_A1()), inv(EPS))
    rhs_m = -(xip @ represent(_sc(inv(_A1())) * Xm * Xm, L).matrix) - 0.5 * mm(xi0, represent(_sc(D) * Xm, L).matrix)
    rhs_p = -(xim @ represent(_sc(inv(_A0())) * Xp * Xp, L).matrix) - 0.5 * mm(xi0, represent(_sc(D) * Xp, L).matrix)
    dxm = d_nc(Xm).matrix(L)
    ok = finite_columns(xi0, rhs_m, rhs_p, dxm)
    sel = np.zeros(L.dim, bool)
    sel[np.arange(L.dim) if cols is None else cols] = True
    cols = np.nonzero(ok & sel)[0]
    return {
        "xi_minus": _maxdiff(xim, rhs_m, cols),
        "xi_plus": _maxdiff(xip, rhs_p, cols),
        "d(X-)-xi_minus": _maxdiff(dxm, xim, cols),
        "excluded_columns": [list(map(int, L.labels[j])) for j in np.nonzero(~ok)[0]],
    }


# vector fields


def vector_apply(xi: NormalForm, f, bracket="corrected"):
    """V_xi(f) = mu(xi, d f) for xi of grade +2; returned as an AR element."""
    if xi.tag not in ("PSI", "B"):
        raise TagError("a vector field is a PSI element")
    xi = NormalForm("PSI", dict(xi.terms))
    if any(r + s != 2 for r, s in xi.terms):
        raise TagError("a vector field has grade +2")
    if not xi.terms:
        return NormalForm("AR")
    v = mu(xi, d_nc(f, bracket).psi())
    out = {}
    for (r, s), c in v.terms.items():
        if r + s != 0:
            raise TagError("vector field application left P^(0)")
        out[r] = mul(c, inv(C.subst_R(_xpow_coeff(r))))
    return NormalForm("AR", out)


# inner derivations


class NotADerivation(ValueError):
    pass


def leibniz_residual(rep_Xp, X0m, eps, xi0, xip, xim, rhoR, rhoX0_prime=None):
    """Residual of xi applied to [X0, X+] = eps X+."""
    r1 = xi0 @ rep_Xp - rep_Xp @ xi0 + X0m @ xip - xip @ X0m - eps * xip
    return float(np.abs(r1).max(initial=0.0))


def derivation_to_inner(rep, xi0, xip, xim, tol=1e-8):
    """f with [f, .] = xi on X0, X+, X- in a standard representation."""
    X0m, Xp, Xm = rep.X0, rep.Xp, rep.Xm
    eps = rep.eps
    dim = rep.dim
    xi0, xip, xim = (np.asarray(m, dtype=complex) for m in (xi0, xip, xim))
    res = leibniz_residual(Xp, X0m, eps, xi0, xip, xim, None)
    scale = max(1.0, np.abs(xi0).max(initial=0.0), np.abs(xip).max(initial=0.0))
    if res > tol * scale * 10:
        raise NotADerivation(f"input is not a derivation (residual {res:g} on [X0,X+] = eps X+)")
    fhat = np.zeros((dim, dim), dtype=complex)
    for r in range(-(dim - 1), dim):
        if r == 0:
            continue
        Mr = np.diag(np.diag(xi0, -r), -r)
        fhat += -Mr / (eps * r)
    p0 = np.diag(xi0)
    if np.abs(p0).max(initial=0.0) > tol * scale:
        raise NotADerivation(f"input is not a derivation (diagonal part {np.abs(p0).max():g})")
    gp = xip - (fhat @ Xp - Xp @ fhat)
    g = np.zeros(dim, dtype=complex)
    sub = np.diag(gp, -1)
    for m in range(dim - 1):
        g[m + 1] = g[m] + sub[m] / rep.xp[m]
    f = fhat + np.diag(g)
    ad = lambda A: f @ A - A @ f
    post = max(float(np.abs(ad(X0m) - xi0).max()), float(np.abs(ad(Xp) - xip).max()), float(np.abs(ad(Xm) - xim).max()))
    if post > tol * scale:
        raise NotADerivation(f"input is not a derivation (postcondition residual {post:g})")
    return f


def scalar_offset(D):
    """Distance of D from the nearest multiple of the identity."""
    c = np.trace(D) / D.shape[0]
    return float(np.abs(D - c * np.eye(D.shape[0])).max())
