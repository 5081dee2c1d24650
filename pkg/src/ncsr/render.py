"""SVG and DOT diagrams of lattices, and surface point clouds.

Layout is a pure function of the lattice: basis vector |n,m> sits at
(X0 eigenvalue, rho(N0 eigenvalue)); each space gets a circle at its right
phantom point z_min + dim*eps on the same level.
"""
from __future__ import annotations

import numpy as np

from .multitop import MODE_OF, MultiLattice

ARROWS = {
    "a+": "#1f77b4",
    "b+": "#d62728",
    "a'+": "#17becf",
    "b'+": "#ff7f0e",
    "X+": "#2ca02c",
}


def _nodes(L):
    """[(label, x, y, kind)] and [(s, x, y)] for phantom points."""
    prof = L.profile
    nodes = []
    added = {tuple(a[0]) for a in getattr(L, "added", [])}
    for j, lab in enumerate(L.labels):
        kind = "added" if tuple(lab) in added else "basis"
        nodes.append((tuple(int(v) for v in lab), float(L.x0[j]), float(prof(float(L.n0[j]))), kind))
    phantoms = []
    if isinstance(L, MultiLattice):
        for s, sp in sorted(L.spaces.items()):
            phantoms.append((s, sp.z_min + sp.dim * L.eps, float(prof(sp.z_min))))
    else:
        for n in range(L.n_min, L.n_max + 1):
            z = float(L.trivial.omega(L.eps * n))
            phantoms.append((n, z + L.eps * n, float(prof(z))))
    return nodes, phantoms


def _edges(L, mode):
    ops = L.hops(mode) if isinstance(L, MultiLattice) else L.operators
    names = ("a+", "b+") if mode == "over" else ("a'+", "b'+")
    out = []
    for name in names + ("X+",):
        M = ops[name].matrix
        for i, j in zip(*np.nonzero(np.abs(M) > 1e-14)):
            out.append((name, tuple(int(v) for v in L.labels[j]), tuple(int(v) for v in L.labels[i]), float(abs(M[i, j]))))
    out.sort()
    return out


def lattice_mode(L):
    return MODE_OF.get(getattr(L, "compromise", "none"), "over")


def lattice_svg(L, mode=None, size=640, pad=40):
    mode = mode or lattice_mode(L)
    nodes, phantoms = _nodes(L)
    xs = [x for _, x, _, _ in nodes] + [x for _, x, _ in phantoms]
    ys = [y for _, _, y, _ in nodes] + [y for _, _, y in phantoms]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    sx = (size - 2 * pad) / max(x1 - x0, 1e-12)
    sy = (size - 2 * pad) / max(y1 - y0, 1e-12)
    px = lambda x: pad + (x - x0) * sx
    py = lambda y: size - pad - (y - y0) * sy
    pos = {lab: (px(x), py(y)) for lab, x, y, _ in nodes}
    r = 4
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">',
        "<defs>",
    ]
    for name, col in ARROWS.items():
        mid = name.replace("'", "p").replace("+", "plus")
        lines.append(
            f'<marker id="h-{mid}" markerWidth="8" markerHeight="8" refX="7" refY="4" orient="auto">'
            f'<path d="M0,0 L8,4 L0,8 z" fill="{col}"/></marker>'
        )
    lines.append("</defs>")
    for name, src, tgt, val in _edges(L, mode):
        (ax, ay), (bx, by) = pos[src], pos[tgt]
        mid = name.replace("'", "p").replace("+", "plus")
        lines.append(
            f'<line class="arrow" data-op="{name}" data-source="{src[0]},{src[1]}" data-target="{tgt[0]},{tgt[1]}" '
            f'x1="{ax:.2f}" y1="{ay:.2f}" x2="{bx:.2f}" y2="{by:.2f}" stroke="{ARROWS[name]}" '
            f'stroke-width="1" marker-end="url(#h-{mid})"/>'
        )
    for lab, x, y, kind in nodes:
        cx, cy = pos[lab]
        col = "#9467bd" if kind == "added" else "#000000"
        lines.append(
            f'<g class="cross {kind}" data-label="{lab[0]},{lab[1]}" stroke="{col}" stroke-width="1.5">'
            f'<line x1="{cx - r:.2f}" y1="{cy - r:.2f}" x2="{cx + r:.2f}" y2="{cy + r:.2f}"/>'
            f'<line x1="{cx - r:.2f}" y1="{cy + r:.2f}" x2="{cx + r:.2f}" y2="{cy - r:.2f}"/></g>'
        )
    for s, x, y in phantoms:
        lines.append(f'<circle class="phantom" data-space="{s}" cx="{px(x):.2f}" cy="{py(y):.2f}" r="{r}" fill="none" stroke="#7f7f7f"/>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def lattice_dot(L, mode=None):
    mode = mode or lattice_mode(L)
    nodes, phantoms = _nodes(L)
    out = ["digraph lattice {", "  node [shape=point];"]
    for lab, x, y, kind in nodes:
        shape = "diamond" if kind == "added" else "point"
        out.append(f'  "{lab[0]},{lab[1]}" [shape={shape}, pos="{x:.6g},{y:.6g}!", xlabel="|{lab[0]},{lab[1]}>"];')
    for s, x, y in phantoms:
        out.append(f'  "phantom{s}" [shape=circle, label="", pos="{x:.6g},{y:.6g}!"];')
    for name, src, tgt, val in _edges(L, mode):
        out.append(f'  "{src[0]},{src[1]}" -> "{tgt[0]},{tgt[1]}" [label="{name}", color="{ARROWS[name]}"];')
    out.append("}")
    return "\n".join(out) + "\n"


def surface_svg(points, size=480, pad=30):
    """Side view (x1, x3) of a surface point cloud, coloured by component."""
    pts = np.asarray([(p[0], p[2], p[3]) for p in points], dtype=float).reshape(-1, 3)
    lines = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">']
    if len(pts):
        lo, hi = pts[:, :2].min(axis=0), pts[:, :2].max(axis=0)
        sc = (size - 2 * pad) / max(float((hi - lo).max()), 1e-12)
        palette = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")
        for x, z, k in pts:
            lines.append(
                f'<circle class="point" data-component="{int(k)}" cx="{pad + (x - lo[0]) * sc:.2f}" '
                f'cy="{size - pad - (z - lo[1]) * sc:.2f}" r="1.5" fill="{palette[int(k) % len(palette)]}"/>'
            )
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
