"""Nodal sets of piecewise-linear functions on triangulated surfaces.

A coefficient vector sampled at mesh vertices determines a piecewise
linear interpolant.  This module extracts the interpolant's zero set as
polyline chains, labels the sign domains, locates points where the zero
set branches, and fits the local vanishing order against harmonic
polynomials Re(x+iy)^N, Im(x+iy)^N.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from . import jsonio

DEFAULT_TAU_REL = 1e-8
DEFAULT_N_MAX = 6
MIN_FIT_VERTICES = 12
# order fits with a larger normalized residual are treated as inconclusive
CONFIDENT_RESIDUAL = 0.35
# sorted branch angles closer than this are merged into one ray cluster
RAY_GAP = 0.30


class NodalError(ValueError):
    """Invalid input to a nodal-set computation."""


@dataclass
class SingularPoint:
    """A point where the zero set branches, with its local structure."""

    location: np.ndarray
    order: int | None
    branch_angles: np.ndarray
    residual: float

    @property
    def confident(self) -> bool:
        return self.order is not None and self.residual <= CONFIDENT_RESIDUAL


@dataclass
class NodalAnalysis:
    """Discrete nodal structure of one function."""

    function_index: int
    sign_labels: np.ndarray    # (V,) values in {-1, 0, +1}
    domain_labels: np.ndarray  # (V,) nodal-domain id, -1 on zero vertices
    domain_count: int
    segments: list             # polyline chains, each an (n_i, dim) array
    singular_points: list      # SingularPoint entries (see detect_...)
    flagged_triangles: np.ndarray
    _graph: dict = field(default_factory=dict, repr=False)
    _node_coords: dict = field(default_factory=dict, repr=False)


def analyze(mesh, u, function_index: int = 0,
            tau_rel: float = DEFAULT_TAU_REL) -> NodalAnalysis:
    """Extract sign domains and nodal polylines of the interpolant of u.

    u holds one value per raw mesh vertex (use
    WeightedOperator.vertex_values to expand an eigenvector).  Vertices
    with |u| <= tau_rel * max|u| are labeled zero.  Domains are maximal
    edge-connected components of same-sign vertices; the returned chains
    trace the interpolant's zero set through crossing edges and zero
    vertices.
    """
    u = np.asarray(u, dtype=float)
    if u.shape != (mesh.num_vertices,):
        raise NodalError(
            f"expected {mesh.num_vertices} vertex values, got shape {u.shape}")
    if not np.all(np.isfinite(u)):
        raise NodalError("function values must be finite")
    umax = float(np.abs(u).max())
    if umax == 0.0:
        raise NodalError("all-zero function has no nodal structure")
    if not 0.0 < tau_rel < 1.0:
        raise NodalError(f"tau_rel must lie in (0, 1), got {tau_rel}")

    tau = tau_rel * umax
    labels = np.zeros(mesh.num_vertices, dtype=np.int8)
    labels[u > tau] = 1
    labels[u < -tau] = -1
    canon = mesh.canonical
    if mesh.periodic_map:
        # a quotient vertex has one sign; the canonical copy decides
        dups = np.fromiter(mesh.periodic_map.keys(), dtype=np.int64)
        labels[dups] = labels[canon[dups]]

    domain_labels, domain_count = _label_domains(mesh, labels)
    graph, coords = _build_segment_graph(mesh, u, labels)
    segments = [np.array([coords[k] for k in path])
                for path in _walk_chains(graph)]
    flagged = np.flatnonzero((labels[mesh.triangles] == 0).any(axis=1))
    return NodalAnalysis(function_index, labels, domain_labels, domain_count,
                         segments, [], flagged, graph, coords)


def _label_domains(mesh, labels):
    V = mesh.num_vertices
    E = mesh.edges
    le = labels[E]
    same = (le[:, 0] == le[:, 1]) & (le[:, 0] != 0)
    rows = E[same]
    if mesh.periodic_map:
        pairs = np.array([(d, c) for d, c in sorted(mesh.periodic_map.items())
                          if labels[c] != 0], dtype=np.int64).reshape(-1, 2)
        rows = np.vstack([rows, pairs])
    g = coo_matrix((np.ones(len(rows)), (rows[:, 0], rows[:, 1])),
                   shape=(V, V))
    _, comp = connected_components(g, directed=False)

    nz = np.flatnonzero(labels != 0)
    cids, first = np.unique(comp[nz], return_index=True)
    # domain 0 holds the smallest-index nonzero vertex, and so on
    rank = np.empty(len(cids), dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(len(cids))
    domain_labels = np.full(V, -1, dtype=np.int64)
    domain_labels[nz] = rank[np.searchsorted(cids, comp[nz])]
    return domain_labels, len(cids)


def _build_segment_graph(mesh, u, labels):
    """Little zero-set segments between graph nodes.

    Nodes are either sign-change crossing points on edges (keyed by the
    quotient edge) or zero-labeled vertices (keyed by the canonical id).
    """
    canon = mesh.canonical
    interior = np.ones(mesh.num_vertices, dtype=bool)
    interior[mesh.boundary_vertices] = False
    coords = {}
    pairs = []

    def edge_node(a, b):
        key = ("e",) + mesh.quotient_edge_key(a, b)
        if key not in coords:
            ua, ub = u[a], u[b]
            t = ua / (ua - ub)
            coords[key] = (1.0 - t) * mesh.vertices[a] + t * mesh.vertices[b]
        return key

    def vertex_node(a):
        c = int(canon[a])
        key = ("v", c)
        if key not in coords:
            coords[key] = mesh.vertices[c].astype(float)
        return key

    tl = labels[mesh.triangles]
    nzero = (tl == 0).sum(axis=1)
    const = (tl[:, 0] == tl[:, 1]) & (tl[:, 1] == tl[:, 2])

    for t in np.flatnonzero((nzero == 0) & ~const):
        vs = mesh.triangles[t]
        ends = [edge_node(int(vs[i]), int(vs[j]))
                for i, j in ((0, 1), (1, 2), (2, 0))
                if tl[t, i] != tl[t, j]]
        pairs.append((ends[0], ends[1]))

    for t in np.flatnonzero(nzero == 1):
        vs = mesh.triangles[t]
        ls = tl[t]
        (zi,) = np.flatnonzero(ls == 0)
        a, b = vs[np.flatnonzero(ls != 0)]
        if labels[a] != labels[b]:
            pairs.append((vertex_node(int(vs[zi])),
                          edge_node(int(a), int(b))))

    # an edge between two zero vertices lies entirely in the zero set;
    # keep interior ones only, so Dirichlet boundaries do not leak in
    zero_edges = {}
    for t in np.flatnonzero(nzero == 2):
        vs = mesh.triangles[t]
        za, zb = (int(v) for v in vs[np.flatnonzero(tl[t] == 0)])
        if interior[za] and interior[zb]:
            zero_edges.setdefault(mesh.quotient_edge_key(za, zb), (za, zb))
    for key in sorted(zero_edges):
        za, zb = zero_edges[key]
        pairs.append((vertex_node(za), vertex_node(zb)))

    graph = {}
    for a, b in pairs:
        if a == b:
            continue
        graph.setdefault(a, set()).add(b)
        graph.setdefault(b, set()).add(a)
    return {k: sorted(v) for k, v in graph.items()}, coords


def _walk_chains(graph):
    """Chain graph edges into maximal paths; closed loops repeat the start."""
    used = set()

    def take(a, b):
        e = (a, b) if a <= b else (b, a)
        if e in used:
            return False
        used.add(e)
        return True

    chains = []
    for start in sorted(k for k in graph if len(graph[k]) != 2):
        for nb in graph[start]:
            if not take(start, nb):
                continue
            path = [start, nb]
            prev, cur = start, nb
            while len(graph[cur]) == 2:
                nxt = next(x for x in graph[cur] if x != prev)
                if not take(cur, nxt):
                    break
                path.append(nxt)
                prev, cur = cur, nxt
            chains.append(path)
    # what remains consists of pure cycles
    for start in sorted(graph):
        for nb in graph[start]:
            if not take(start, nb):
                continue
            path = [start, nb]
            prev, cur = start, nb
            while cur != start:
                nxt = next(x for x in graph[cur] if x != prev)
                take(cur, nxt)
                path.append(nxt)
                prev, cur = cur, nxt
            chains.append(path)
    return chains


# -- local geometry helpers -----------------------------------------------------


def _periods(mesh):
    if not mesh.periodic_map:
        return None
    return mesh.vertices.max(axis=0) - mesh.vertices.min(axis=0)


def _local_frame(mesh, point):
    """Map ambient points to 2d coordinates centered at `point`.

    Returns (disp, dist, lift): disp(points) -> (K, 2) local coordinates,
    dist(points) -> (K,) ambient separation, and lift(xy) -> the ambient
    point at local offset xy.  On a flat torus the displacement wraps by
    the periods; on an embedded closed surface the local plane is the
    tangent plane at the nearest vertex.
    """
    p = np.asarray(point, dtype=float)
    if mesh.dim == 2:
        periods = _periods(mesh)

        def disp(q):
            d = np.atleast_2d(np.asarray(q, dtype=float)) - p
            if periods is not None:
                d = d - np.round(d / periods) * periods
            return d

        def lift(xy):
            q = p + np.asarray(xy, dtype=float)
            if periods is not None:
                base = mesh.vertices.min(axis=0)
                q = base + np.mod(q - base, periods)
            return q

        return disp, lambda q: np.linalg.norm(disp(q), axis=1), lift

    v_near = int(np.argmin(np.linalg.norm(mesh.vertices - p, axis=1)))
    incident = np.flatnonzero((mesh.triangles == v_near).any(axis=1))
    tv = mesh.vertices[mesh.triangles[incident]]
    cross = np.cross(tv[:, 1] - tv[:, 0], tv[:, 2] - tv[:, 0])
    normal = cross.sum(axis=0)
    normal /= np.linalg.norm(normal)
    axis = np.zeros(3)
    axis[int(np.argmin(np.abs(normal)))] = 1.0
    e1 = axis - (axis @ normal) * normal
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(normal, e1)

    def disp(q):
        d = np.atleast_2d(np.asarray(q, dtype=float)) - p
        return np.column_stack([d @ e1, d @ e2])

    def lift(xy):
        x, y = np.asarray(xy, dtype=float)
        return p + x * e1 + y * e2

    return (disp,
            lambda q: np.linalg.norm(
                np.atleast_2d(np.asarray(q, dtype=float)) - p, axis=1),
            lift)


def _select_ball(mesh, point, radius):
    """Raw vertex ids within radius, one per quotient vertex."""
    _, dist, _ = _local_frame(mesh, point)
    ids = np.flatnonzero(dist(mesh.vertices) <= radius)
    _, keep = np.unique(mesh.canonical[ids], return_index=True)
    return ids[np.sort(keep)]


# -- vanishing order -------------------------------------------------------------


def fit_vanishing_order(mesh, u, point, r_fit=None, n_max: int = DEFAULT_N_MAX,
                        segments=None):
    """Fit the vanishing order of u at a zero by harmonic polynomials.

    Least-squares fits of the vertex values within r_fit (default three
    mean edge lengths) against span{Re(z^N), Im(z^N)} in local
    coordinates scaled by 1/r_fit, for N = 1..n_max.  Returns
    (order, branch_angles, residual) where order minimizes the
    normalized residual.  When polyline `segments` are supplied the
    branch angles are measured from the chains near the point; otherwise
    they are the fitted harmonic's zero rays.  Too few sample vertices
    yield (None, [], inf).
    """
    u = np.asarray(u, dtype=float)
    if r_fit is None:
        r_fit = 3.0 * mesh.mean_edge_length
    if not r_fit > 0:
        raise NodalError(f"r_fit must be positive, got {r_fit}")
    if not 1 <= n_max <= 12:
        raise NodalError(f"n_max must lie in 1..12, got {n_max}")

    disp, _, _ = _local_frame(mesh, point)
    ids = _select_ball(mesh, point, r_fit)
    if len(ids) < MIN_FIT_VERTICES:
        return None, np.empty(0), math.inf
    local = disp(mesh.vertices[ids])
    vals = u[ids]
    norm = float(np.linalg.norm(vals))
    if norm == 0.0:
        return None, np.empty(0), math.inf

    z = (local[:, 0] + 1j * local[:, 1]) / r_fit
    best_n, best_res, best_coef = None, math.inf, None
    for n in range(1, n_max + 1):
        zn = z**n
        A = np.column_stack([zn.real, zn.imag])
        coef, _, _, _ = np.linalg.lstsq(A, vals, rcond=None)
        res = float(np.linalg.norm(vals - A @ coef)) / norm
        if res < best_res:
            best_n, best_res, best_coef = n, res, coef
    angles = None
    if segments is not None:
        angles = _ray_angles(disp, segments, r_fit)
    if angles is None:
        delta = math.atan2(best_coef[1], best_coef[0])
        angles = np.sort([(delta + 0.5 * math.pi + m * math.pi) / best_n
                          % (2.0 * math.pi) for m in range(2 * best_n)])
    return best_n, np.asarray(angles, dtype=float), best_res


def _ray_angles(disp, segments, r_fit):
    """Directions of nodal rays: cluster chain points in an annulus."""
    angles = []
    for chain in segments:
        local = disp(chain)
        rho = np.linalg.norm(local, axis=1)
        keep = (rho >= 0.35 * r_fit) & (rho <= 1.15 * r_fit)
        angles.extend(np.arctan2(local[keep, 1], local[keep, 0]))
    if not angles:
        return None
    a = np.sort(np.mod(angles, 2.0 * math.pi))
    gaps = np.diff(np.concatenate([a, a[:1] + 2.0 * math.pi]))
    cut = int(np.argmax(gaps))
    seq = np.concatenate([a[cut + 1:], a[:cut + 1] + 2.0 * math.pi])
    out, group = [], [seq[0]]
    for prev, nxt in zip(seq[:-1], seq[1:]):
        if nxt - prev > RAY_GAP:
            out.append(np.mean(group))
            group = []
        group.append(nxt)
    out.append(np.mean(group))
    return np.sort(np.mod(out, 2.0 * math.pi))


# -- singular point detection ----------------------------------------------------


def _refine_critical_point(mesh, u, point):
    """One Newton step toward the critical point of a local quadratic fit.

    Works in the local tangent frame, so surface meshes are refined the
    same way as planar ones; the step lands in the tangent plane, which
    is accurate to second order in the step length.
    """
    me = mesh.mean_edge_length
    rad = 2.5 * me
    disp, _, lift = _local_frame(mesh, point)
    ids = _select_ball(mesh, point, rad)
    if len(ids) < 8:
        return point
    x, y = (disp(mesh.vertices[ids]) / rad).T
    vals = u[ids]
    A = np.column_stack([np.ones_like(x), x, y, x * x, x * y, y * y])
    c, _, _, _ = np.linalg.lstsq(A, vals, rcond=None)
    H = np.array([[2.0 * c[3], c[4]], [c[4], 2.0 * c[5]]])
    det = H[0, 0] * H[1, 1] - H[0, 1] * H[1, 0]
    scale = float(np.abs(H).max())
    rms = float(np.linalg.norm(vals)) / math.sqrt(len(vals))
    # only move when the data really has a nondegenerate quadratic part
    if scale < 0.05 * rms or abs(det) < 1e-4 * scale * scale:
        return point
    shift = np.linalg.solve(H, -c[1:3]) * rad
    if np.linalg.norm(shift) > me:
        return point
    return lift(shift)


def detect_singular_points(mesh, u, analysis, r_fit=None,
                           n_max: int = DEFAULT_N_MAX):
    """Locate and classify branch points of the nodal set.

    Candidates are segment-graph nodes of degree >= 3 plus near-contacts
    between distinct (or self-approaching) polylines within one mean
    edge length.  Candidates are refined toward the critical point of a
    local quadratic fit, deduplicated within two mean edge lengths, and
    each surviving point gets a vanishing-order fit.  The result is
    stored on `analysis.singular_points` and returned.
    """
    me = mesh.mean_edge_length
    candidates = []
    for key in sorted(analysis._graph):
        deg = len(analysis._graph[key])
        if deg >= 3:
            candidates.append((-deg, 0, key,
                               np.asarray(analysis._node_coords[key], float)))

    pts, owner, arc, loop_len = [], [], [], []
    for ci, chain in enumerate(analysis.segments):
        steps = np.linalg.norm(np.diff(chain, axis=0), axis=1)
        cum = np.concatenate([[0.0], np.cumsum(steps)])
        closed = bool(np.array_equal(chain[0], chain[-1]))
        total = float(cum[-1]) if closed else math.inf
        for pi, pt in enumerate(chain):
            pts.append(pt)
            owner.append(ci)
            arc.append(float(cum[pi]))
            loop_len.append(total)
    if pts:
        from scipy.spatial import cKDTree

        arr = np.asarray(pts)
        near = cKDTree(arr).query_pairs(r=me, output_type="ndarray")
        for i, j in sorted(map(tuple, near)):
            if owner[i] == owner[j]:
                # within one chain only a fold-back counts: the path
                # between the points must far exceed their separation
                chord = float(np.linalg.norm(arr[i] - arr[j]))
                along = abs(arc[i] - arc[j])
                along = min(along, loop_len[i] - along)
                if chord < 1e-12 or along < 3.0 * chord:
                    continue
            mid = 0.5 * (arr[i] + arr[j])
            candidates.append((0, 1, tuple(np.round(mid, 12)), mid))

    kept = []
    for *_, loc in sorted(candidates, key=lambda c: c[:3]):
        loc = _refine_critical_point(mesh, u, loc)
        _, dist, _ = _local_frame(mesh, loc)
        if all(dist(np.asarray([k]))[0] > 2.0 * me for k in kept):
            kept.append(loc)

    points = []
    for loc in kept:
        order, angles, res = fit_vanishing_order(
            mesh, u, loc, r_fit=r_fit, n_max=n_max,
            segments=analysis.segments)
        points.append(SingularPoint(np.asarray(loc, float), order,
                                    angles, res))
    analysis.singular_points = points
    return points


# -- nodal domains as triangle sets ----------------------------------------------


def domain_triangles(mesh, analysis, domain_id: int) -> np.ndarray:
    """Triangles forming the closure of one nodal domain.

    A triangle belongs to the domain when at least one vertex carries
    the domain's label and no vertex carries a different one (zero
    vertices are shared closure).
    """
    if not 0 <= domain_id < analysis.domain_count:
        raise NodalError(f"domain id {domain_id} out of range "
                         f"(have {analysis.domain_count})")
    lab = analysis.domain_labels[mesh.triangles]
    has = (lab == domain_id).any(axis=1)
    other = ((lab != domain_id) & (lab != -1)).any(axis=1)
    return np.flatnonzero(has & ~other)


# -- SVG rendering ---------------------------------------------------------------


def _svg_num(x) -> str:
    return format(float(x), ".6g")


def _boundary_loops(mesh):
    """Boundary edges chained into loops of raw vertex ids."""
    tri = mesh.triangles
    e = np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]])
    eq = np.sort(mesh.canonical[e], axis=1)
    uniq, counts = np.unique(eq, axis=0, return_counts=True)
    graph = {}
    for a, b in uniq[counts == 1]:
        graph.setdefault(int(a), set()).add(int(b))
        graph.setdefault(int(b), set()).add(int(a))
    return _walk_chains({k: sorted(v) for k, v in graph.items()})


def _split_at_jumps(chain, jump):
    """Break a polyline where consecutive points jump across a seam."""
    if jump is None or len(chain) < 2:
        return [chain]
    big = (np.abs(np.diff(chain, axis=0)) > jump).any(axis=1)
    cuts = np.flatnonzero(big) + 1
    return [seg for seg in np.split(chain, cuts) if len(seg) >= 2]


def render_svg(mesh, analysis: NodalAnalysis, path: str | None = None) -> str:
    """Draw the nodal polylines over the mesh outline as an SVG string.

    Planar meshes draw their boundary; the flat torus draws its chart
    rectangle with chains split where they wrap around.  Closed
    surfaces in 3d render as two side-by-side orthographic hemisphere
    charts.  Output bytes are deterministic for fixed inputs, and when
    `path` is given the string is also written there.
    """
    V = mesh.vertices
    outline_pts = []
    if mesh.dim == 2:
        lo, hi = V.min(axis=0), V.max(axis=0)
        jump = 0.5 * (hi - lo) if mesh.periodic_map else None

        def project(pts):
            return [np.atleast_2d(pts)]

        if mesh.periodic_map:
            frame = np.array([[lo[0], lo[1]], [hi[0], lo[1]], [hi[0], hi[1]],
                              [lo[0], hi[1]], [lo[0], lo[1]]])
            outline_pts.append(frame)
        else:
            for loop in _boundary_loops(mesh):
                outline_pts.append(V[np.asarray(loop)])
        chains2d = []
        for chain in analysis.segments:
            chains2d.extend(_split_at_jumps(chain, jump))
        marks2d = [np.atleast_2d(sp.location)
                   for sp in analysis.singular_points]
    else:
        # two orthographic hemisphere charts, back chart mirrored and
        # shifted right so the shared rim lines match up
        R = float(np.linalg.norm(V, axis=1).max())
        lo = np.array([-1.1 * R, -1.1 * R])
        hi = np.array([3.6 * R, 1.1 * R])

        def flatten(pts):
            pts = np.atleast_2d(pts)
            out = np.column_stack([pts[:, 0], pts[:, 1]])
            back = pts[:, 2] < 0.0
            out[back, 0] = 2.5 * R - pts[back, 0]
            return out

        def project(pts):
            pts = np.atleast_2d(pts)
            back = pts[:, 2] < 0.0
            cuts = np.flatnonzero(back[1:] != back[:-1]) + 1
            return [flatten(seg) for seg in np.split(pts, cuts)
                    if len(seg) >= 2]

        t = np.linspace(0.0, 2.0 * math.pi, 73)
        rim = np.column_stack([R * np.cos(t), R * np.sin(t)])
        outline_pts.append(rim)
        outline_pts.append(rim + [2.5 * R, 0.0])
        chains2d = []
        for chain in analysis.segments:
            chains2d.extend(project(chain))
        marks2d = [flatten(sp.location) for sp in analysis.singular_points]

    pad = 0.04 * float(max(hi - lo))
    y0, y1 = lo[1], hi[1]

    def fy(y):
        return y0 + y1 - y

    def path_d(pts):
        words = [f"{_svg_num(p[0])} {_svg_num(fy(p[1]))}" for p in pts]
        return "M " + " L ".join(words)

    width = _svg_num(0.005 * float(max(hi - lo)))
    lines = [
        '<svg xmlns="http://www.w3.org/2000/svg" viewBox="'
        f'{_svg_num(lo[0] - pad)} {_svg_num(lo[1] - pad)} '
        f'{_svg_num(hi[0] - lo[0] + 2 * pad)} '
        f'{_svg_num(hi[1] - lo[1] + 2 * pad)}">',
    ]
    for pts in outline_pts:
        lines.append(f'<path d="{path_d(pts)}" fill="none" '
                     f'stroke="#888888" stroke-width="{width}"/>')
    for pts in chains2d:
        lines.append(f'<path d="{path_d(pts)}" fill="none" '
                     f'stroke="#bb2200" stroke-width="{width}"/>')
    s = 2.5 * 0.005 * float(max(hi - lo))
    for loc in marks2d:
        x, y = float(loc[0, 0]), float(loc[0, 1])
        d = (f"M {_svg_num(x - s)} {_svg_num(fy(y - s))} "
             f"L {_svg_num(x + s)} {_svg_num(fy(y + s))} "
             f"M {_svg_num(x - s)} {_svg_num(fy(y + s))} "
             f"L {_svg_num(x + s)} {_svg_num(fy(y - s))}")
        lines.append(f'<path d="{d}" fill="none" stroke="#1144bb" '
                     f'stroke-width="{width}"/>')
    lines.append("</svg>")
    text = "\n".join(lines) + "\n"
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    return text


# -- serialization ---------------------------------------------------------------


def analysis_to_dict(analysis: NodalAnalysis) -> dict:
    singular = []
    for sp in analysis.singular_points:
        singular.append({
            "location": [float(c) for c in sp.location],
            "order": None if sp.order is None else int(sp.order),
            "branch_angles": [float(a) for a in sp.branch_angles],
            "residual": float(sp.residual) if math.isfinite(sp.residual)
                        else None,
        })
    return {
        "format": "nodal-analysis",
        "function_index": int(analysis.function_index),
        "domain_count": int(analysis.domain_count),
        "sign_labels": [int(s) for s in analysis.sign_labels],
        "domain_labels": [int(d) for d in analysis.domain_labels],
        "segments": [[[float(c) for c in pt] for pt in chain]
                     for chain in analysis.segments],
        "singular_points": singular,
    }


def save_analysis(analysis: NodalAnalysis, path: str) -> None:
    jsonio.dump(analysis_to_dict(analysis), path)
