"""Command line interface: ncsr {intervals,lattice,rep,verify,calculus,topology-ops,render}.

Exit codes: 0 all checks pass, 1 an unexpected failure, 2 configuration or
input error. Set NCSR_LOG to a logging level name for diagnostics.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import os
import sys
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import __version__
from . import calculus as K
from . import coeff as C
from . import render
from .algebra import NormalForm
from .multitop import _seams, COMPROMISES, MODE_OF, LatticeError, apply_compromise, build_G0, is_AN_representation, reflects_topology, topo_change_maps, violations
from .profile import ProfileError, TrivialProfileData, enumerate_rep_intervals, epsilon0, surface_points, validate_profile
from .representation import heisenberg_weyl, normal_order_oracle, profile_hash, standard_rep, trivial_lattice, verify_relations

log = logging.getLogger("ncsr")

COMMANDS = ("intervals", "lattice", "rep", "verify", "calculus", "topology-ops", "render")
SUITES = ("poisson", "leibniz", "sphere", "inner")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    pieces: list
    domain: tuple | None = None
    epsilon: list = field(default_factory=lambda: [0.5])
    R: float | None = None
    y_max: float | None = None
    n_max: int = 8
    compromise: str | None = None
    mode: str | None = None
    suites: list = field(default_factory=lambda: list(SUITES))
    out: str = "ncsr_out"
    seed: int = 0
    words: int = 50

    @property
    def eps(self):
        return self.epsilon[0]

    def profile(self):
        try:
            return validate_profile([(b, c) for b, c in self.pieces], self.domain)
        except ProfileError as e:
            raise ConfigError(f"invalid profile: {e}") from None

    def digest(self):
        d = asdict(self)
        d.pop("out")
        return hashlib.sha256(json.dumps(d, sort_keys=True, default=str).encode()).hexdigest()[:16]


def load_config(path=None, **over):
    raw = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e.strerror}") from None
        try:
            raw = tomllib.loads(text)
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f"{path}: {e}") from None
    pieces = []
    for k, p in enumerate(raw.get("piece", [])):
        if "coeffs" not in p:
            raise ConfigError(f"piece {k + 1}: missing 'coeffs'")
        pieces.append((float(p.get("breakpoint", -1.0)), [float(c) for c in p["coeffs"]]))
    if not pieces and "coeffs" in raw:
        pieces = [(-1.0, [float(c) for c in raw["coeffs"]])]
    if not pieces:
        raise ConfigError("config defines no profile: add [[piece]] tables with 'coeffs'")
    eps = raw.get("epsilon", 0.5)
    eps = [float(e) for e in (eps if isinstance(eps, list) else [eps])]
    cfg = RunConfig(
        pieces=pieces,
        domain=tuple(raw["domain"]) if "domain" in raw else None,
        epsilon=eps,
        R=raw.get("R"),
        y_max=raw.get("y_max"),
        n_max=int(raw.get("n_max", 8)),
        compromise=raw.get("compromise"),
        mode=raw.get("mode"),
        suites=list(raw.get("suites", SUITES)),
        out=str(raw.get("out", "ncsr_out")),
        seed=int(raw.get("seed", 0)),
        words=int(raw.get("words", 50)),
    )
    for k, v in over.items():
        if v is None:
            continue
        if k == "epsilon":
            v = [float(v)]
        setattr(cfg, k, v)
    _check(cfg)
    return cfg


def _check(cfg):
    if not all(e > 0 and math.isfinite(e) for e in cfg.epsilon):
        raise ConfigError(f"epsilon must be positive, got {cfg.epsilon}")
    if cfg.compromise is not None and cfg.compromise not in COMPROMISES:
        raise ConfigError(f"unknown compromise {cfg.compromise!r}; choose from {', '.join(COMPROMISES)}")
    if cfg.mode is not None and cfg.mode not in ("over", "under"):
        raise ConfigError(f"unknown mode {cfg.mode!r}")
    if cfg.compromise and cfg.mode and MODE_OF[cfg.compromise] != cfg.mode:
        raise ConfigError(f"compromise {cfg.compromise} needs {MODE_OF[cfg.compromise]}-hopping, not {cfg.mode}")
    unknown = [s for s in cfg.suites if s not in SUITES]
    if unknown:
        raise ConfigError(f"unknown suites {unknown}; choose from {', '.join(SUITES)}")
    if cfg.n_max < 1:
        raise ConfigError("n_max must be >= 1")


# output


def atomic_write(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _json(obj, compact=False):
    if compact:
        return json.dumps(_clean(obj), sort_keys=True, separators=(",", ":")) + "\n"
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def _clean(x):
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if math.isfinite(v) else str(v)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


def result(name, deviation, tol, witnesses=None, expected_fail=False):
    ok = deviation is not None and np.isfinite(deviation) and deviation <= tol
    if ok:
        status = "pass"
    else:
        status = "expected-fail" if expected_fail else "fail"
    return {"name": name, "status": status, "max_deviation": deviation, "tolerance": tol, "witnesses": witnesses or []}


def flag(name, ok, witnesses=None, expected_fail=False):
    status = "pass" if ok else ("expected-fail" if expected_fail else "fail")
    return {"name": name, "status": status, "max_deviation": None, "tolerance": None, "witnesses": witnesses or []}


def report(cmd, cfg, results, extra=None):
    return {
        "command": cmd,
        "config_hash": cfg.digest(),
        "versions": {"ncsr": __version__, "numpy": np.__version__},
        "results": results,
        **(extra or {}),
    }


def exit_code(rep):
    return 1 if any(r["status"] == "fail" for r in rep["results"]) else 0


def seal(archive):
    body = json.dumps(_clean(archive), sort_keys=True)
    out = dict(archive)
    out["sha256"] = hashlib.sha256(body.encode()).hexdigest()
    return out


def check_archive(path):
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"archive {path} is unreadable: {e}") from None
    digest = data.pop("sha256", None)
    body = json.dumps(_clean(data), sort_keys=True)
    if digest != hashlib.sha256(body.encode()).hexdigest():
        raise ConfigError(f"archive {path} failed the integrity check")
    return data


# lattice construction


def _is_trivial(profile):
    return len(profile.critical_points()) == 1


def build_lattice(cfg, profile, eps=None):
    eps = cfg.eps if eps is None else eps
    if _is_trivial(profile) and cfg.compromise is None:
        return trivial_lattice(profile, eps, cfg.n_max)
    G = build_G0(profile, eps, cfg.y_max)
    if cfg.compromise is None:
        return G
    return apply_compromise(G, cfg.compromise, cfg.mode)


# commands


def cmd_intervals(cfg, out):
    profile = cfg.profile()
    tops = profile.topology_intervals()
    top_rows = [
        {"t": t.id, "z1": t.z1, "z2": t.z2, "z3": t.z3, "z4": t.z4, "z5": t.z5, "parent": t.parent, "bottom": t.bottom, "top": t.top}
        for t in tops
    ]
    e0 = {k: epsilon0(profile, k) for k in COMPROMISES}
    rows = []
    for eps in cfg.epsilon:
        for J in enumerate_rep_intervals(profile, eps, cfg.y_max):
            rows.append([eps, J.id, J.t, J.dim, J.z_min, J.z_max, J.level, "" if J.parent is None else J.parent])
    atomic_write(out / "intervals.csv", _csv(["epsilon", "s", "t", "dim", "z_min", "z_max", "level", "parent"], rows))
    rep = report("intervals", cfg, [], {"topology_intervals": top_rows, "epsilon0": e0, "rep_intervals": len(rows)})
    atomic_write(out / "intervals.json", _json(rep))
    return rep


def cmd_lattice(cfg, out):
    profile = cfg.profile()
    L = build_lattice(cfg, profile)
    if L.dim == 0:
        raise ConfigError("the lattice is empty")
    archive = seal(L.to_archive())
    atomic_write(out / "lattice.json", _json(archive, compact=True))
    atomic_write(out / "lattice.svg", render.lattice_svg(L, cfg.mode))
    atomic_write(out / "lattice.dot", render.lattice_dot(L, cfg.mode))
    return report("lattice", cfg, [], {"dim": L.dim, "files": ["lattice.json", "lattice.svg", "lattice.dot"]})


def cmd_rep(cfg, out):
    profile = cfg.profile()
    results, reps = [], []
    for J in enumerate_rep_intervals(profile, cfg.eps, cfg.y_max):
        rep = standard_rep(J, cfg.eps, "AN", rho=profile)
        prod = rep.Xp @ rep.Xm - np.diag(profile(rep.z_min) - profile(rep.x0))
        killed = [m for m in range(rep.dim) if np.abs(rep.Xp[:, m]).max(initial=0.0) < 1e-12]
        results.append(result(f"X+X- = rho(z_min) - rho(X0) on J_{J.id}", float(np.abs(prod).max()), 1e-12))
        results.append(flag(f"X+ annihilates exactly the top vector of J_{J.id}", killed == [rep.dim - 1], [killed]))
        reps.append({"s": J.id, "z_min": J.z_min, "z_max": J.z_max, "dim": rep.dim, "x0": rep.x0, "xp": rep.xp})
    rp = report("rep", cfg, results, {"representations": reps})
    atomic_write(out / "rep.json", _json(rp))
    return rp


def cmd_verify(cfg, out, archive=None):
    if archive is not None:
        check_archive(archive)
    profile = cfg.profile()
    L = build_lattice(cfg, profile)
    res = []
    if not hasattr(L, "spaces"):
        for r in verify_relations(L):
            res.append(result(r["relation"], r["max_abs_deviation"], 1e-9, [r["location"]]))
        td = L.trivial
        if td.even and abs(profile(td.z0 + 1.0) - profile(td.z0) - 1.0) < 1e-12 and abs(profile(td.z0 + 2.0) - profile(td.z0) - 4.0) < 1e-12:
            for r in heisenberg_weyl(L):
                res.append(result(r["relation"], r["max_abs_deviation"], 1e-12, [r["location"]]))
        rng = np.random.default_rng(cfg.seed)
        o = normal_order_oracle(L, cfg.words, rng, n_cols=max(1, L.n_max - 8))
        res.append(result("normal ordering oracle", o["max_abs_deviation"], 1e-9, [o["location"]] + o["non_finite_words"]))
    else:
        mode = cfg.mode or MODE_OF.get(cfg.compromise, "over")
        v = violations(L, mode)
        seams = L.seams if cfg.compromise == "merge" else _seams(L)
        seam_labels = {tuple(s["label"]) for s in seams}
        added = {}
        for _, par, _, _ in getattr(L, "added", []):
            added[par] = added.get(par, 0) + 1
        for p in v.parents:
            ok = not p["classification"].endswith("violating")
            if added.get(p["s"]):
                # added vectors fill the missing child-level slots
                p = dict(p, added=added[p["s"]])
                ok = p["dim"] == sum(p["children_dims"]) + 1 + added[p["s"]]
            expected = cfg.compromise in ("merge", "split", None)
            res.append(flag(f"{mode} dimension condition at V_{p['s']}", ok, [p], expected))
        for s, r in is_AN_representation(L, mode).items():
            if r["status"] == "truncated":
                res.append(flag(f"A^N representation on V_{s}", False, r["failures"], expected_fail=True))
                continue
            fails = r["failures"]
            expected = bool(fails) and cfg.compromise in ("merge", "split", None)
            if cfg.compromise in ("merge", None):
                expected = expected and all(tuple(f["label"]) in seam_labels or tuple(f["label"]) in {(l[0], l[1] + 1) for l in seam_labels} for f in fails)
            res.append(flag(f"A^N representation on V_{s}", not fails, fails, expected))
        ok, wit = reflects_topology(L, profile)
        res.append(flag("reflects topology", ok, [wit], expected_fail=True))
    rp = report("verify", cfg, res)
    atomic_write(out / "verify.json", _json(rp))
    return rp


def _sphere(res, rows):
    z2 = validate_profile([(-1.0, [0.0, 0.0, 1.0])])
    G = K.GradedFunction
    z = K.chebyshev_grid(-1.0, 1.0, 17)
    c = np.real(C.evaluate(K.C_function(), K._cenv(z, 1.0, z2)))
    res.append(result("sphere C(z) = 4", float(np.abs(c - 4).max()), 1e-12))
    g = K.metric_pair(G.z(), G.z())(z, 0.0, 1.0, z2)
    res.append(result("sphere g(dz,dz) = 1 - z^2", float(np.abs(g - (1 - z**2)).max()), 1e-10))
    inner = z[np.abs(z) < 0.95]
    lz = K.laplacian(G.z())
    res.append(result("sphere laplacian z = -2z", float(np.abs(lz(inner, 0.0, 1.0, z2) + 2 * inner).max()), 1e-9))
    lx = K.laplacian(G.x_plus())
    d = lx(inner, 0.7, 1.0, z2) + 2 * G.x_plus()(inner, 0.7, 1.0, z2)
    res.append(result("sphere laplacian X+ = -2 X+", float(np.abs(d).max()), 1e-9))
    for r in lz.grades():
        for zz, v in zip(z, lz.component(r, z, 1.0, z2)):
            rows.append(["laplacian(z)", zz, r, v.real, v.imag])


def cmd_calculus(cfg, out):
    res, rows, scans = [], [], []
    if not cfg.suites:
        log.warning("no calculus suites selected; nothing to do")
    rng = np.random.default_rng(cfg.seed)
    z4 = validate_profile([(-1.0, [0.0, 0.0, 0.0, 0.0, 1.0])])
    z2 = validate_profile([(-1.0, [0.0, 0.0, 1.0])])
    if "sphere" in cfg.suites:
        _sphere(res, rows)
    if "poisson" in cfg.suites:
        Xp, X0 = NormalForm.gen("AR", "X+"), NormalForm.scalar("AR", C.X0)
        eps = [0.1, 0.05, 0.025]
        s = K.pb_limit_check(X0, Xp, z4, (-1.0, 1.0), eps)
        scans.append(s)
        res.append(result("poisson limit (X0, X+) exact", max(s["defect"]), 1e-12))
        for k in range(3):
            s = K.pb_limit_check(K.random_AR(rng), K.random_AR(rng), z4, (-1.0, 1.0), eps)
            scans.append(s)
            res.append(result(f"poisson limit slope, random pair {k}", abs(s["slope"] - 1.0), 0.3))
    if "leibniz" in cfg.suites:
        Xp = NormalForm.gen("AR", "X+")
        L = trivial_lattice(z2, 0.5, 8)
        for name, v in K.exactness_defects(L).items():
            if name != "excluded_columns":
                res.append(result(f"exterior derivative {name}", v, 1e-12))
        s = K.leibniz_scan(Xp, Xp, z2, [0.05, 0.025, 0.0125])
        scans.append(s)
        res.append(result("leibniz slope (X+, X+)", abs(s["slope"] - 1.0), 0.3))
    if "inner" in cfg.suites:
        rep = standard_rep((-1.25, 1.25), 0.5, "AR", R=-1.25, rho=z2)
        worst = 0.0
        for _ in range(5):
            h = rng.normal(size=(rep.dim, rep.dim)) + 1j * rng.normal(size=(rep.dim, rep.dim))
            ad = lambda A: h @ A - A @ h
            f = K.derivation_to_inner(rep, ad(rep.X0), ad(rep.Xp), ad(rep.Xm))
            worst = max(worst, K.scalar_offset(f - h))
        res.append(result("inner derivation round trip", worst, 1e-8))
    atomic_write(out / "calculus.csv", _csv(["quantity", "z", "r", "re", "im"], rows))
    rp = report("calculus", cfg, res, {"scans": scans})
    atomic_write(out / "calculus.json", _json(rp))
    return rp


def cmd_topology_ops(cfg, out):
    profile = cfg.profile()
    G = build_G0(profile, cfg.eps, cfg.y_max)
    rng = np.random.default_rng(cfg.seed)
    res = []
    for s in sorted(G.spaces):
        if not G.children(s):
            continue
        try:
            T = topo_change_maps(G, s)
        except LatticeError as e:
            log.info("skipping V_%s: %s", s, e)
            continue
        k = T.A.shape[1]
        hom, inv = 0.0, 0.0
        for _ in range(10):
            f = rng.normal(size=(k, k)) + 1j * rng.normal(size=(k, k))
            g = rng.normal(size=(k, k)) + 1j * rng.normal(size=(k, k))
            for P, M in ((T.A_plus, T.A_minus), (T.B_plus, T.B_minus)):
                hom = max(hom, float(np.abs(P(f @ g) - P(f) @ P(g)).max()))
                inv = max(inv, float(np.abs(M(P(f)) - f).max()))
        res.append(result(f"A+/B+ homomorphism on V_{s}", hom, 1e-10))
        res.append(result(f"A-A+ = id, B-B+ = id on V_{s}", inv, 1e-10))
    rp = report("topology-ops", cfg, res)
    atomic_write(out / "topology-ops.json", _json(rp))
    return rp


def cmd_render(cfg, out):
    profile = cfg.profile()
    if cfg.R is None:
        raise ConfigError("render needs R in the config")
    try:
        pts = surface_points(profile, float(cfg.R), (np.linspace(0, 2 * np.pi, 24, endpoint=False), np.linspace(-3, 3, 121)))
    except ValueError as e:
        raise ConfigError(str(e)) from None
    atomic_write(out / "surface.csv", _csv(["x1", "x2", "x3", "component"], pts))
    atomic_write(out / "surface.svg", render.surface_svg(pts))
    return report("render", cfg, [], {"points": len(pts)})


def _parser():
    p = argparse.ArgumentParser(prog="ncsr", description="Noncommutative surfaces of rotation toolkit")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", type=Path)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--compromise", choices=COMPROMISES)
    p.add_argument("--mode", choices=("over", "under"))
    p.add_argument("--out", type=Path)
    p.add_argument("--seed", type=int)
    p.add_argument("--archive", type=Path, help="lattice archive to integrity-check (verify)")
    return p


def main(argv=None):
    logging.basicConfig(level=os.environ.get("NCSR_LOG", "WARNING").upper(), format="%(levelname)s %(name)s: %(message)s")
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config, epsilon=args.epsilon, compromise=args.compromise, mode=args.mode, seed=args.seed)
        out = Path(args.out or cfg.out)
        fn = {
            "intervals": cmd_intervals,
            "lattice": cmd_lattice,
            "rep": cmd_rep,
            "verify": lambda c, o: cmd_verify(c, o, args.archive),
            "calculus": cmd_calculus,
            "topology-ops": cmd_topology_ops,
            "render": cmd_render,
        }[args.command]
        rep = fn(cfg, out)
    except (ConfigError, ProfileError, LatticeError) as e:
        print(f"ncsr: error: {e}", file=sys.stderr)
        return 2
    for r in rep["results"]:
        print(f"{r['status']:>13}  {r['name']}")
    return exit_code(rep)


if __name__ == "__main__":
    sys.exit(main())
