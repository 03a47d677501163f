"""Metric cones over finite path-metric graphs.

A cone point is (node, height); all height-0 points are identified into
the apex.  A path's length charges vertical movement at cost 1 and
angular movement at height t at cost lambda(t) per unit of base
distance, lambda continuous with lambda(t) = 0 iff t = 0.  The exact
distance is an infimum over paths of a supremum over subdivisions; the
computable handle here is a weighted graph on a finite height grid
whose shortest paths give an upper bound that decreases under grid
refinement, reported together with the trivial vertical lower bound so
the discretization error stays visible.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra, shortest_path

from .spaces import DEFAULT_CAP, ModelMismatch, Space

APEX = "*"


@dataclass(frozen=True)
class LambdaFunction:
    """Angular weight profile lambda: [0, inf) -> [0, inf).

    ``increasing_unbounded`` asserts monotone growth without bound; the
    compactification diagnostic requires that flag and refuses to run
    without it.
    """

    tag: str
    fn: Callable[[float], float]
    increasing_unbounded: bool = False

    def __call__(self, t: float) -> float:
        if t < 0:
            raise ValueError("heights are non-negative")
        return float(self.fn(t))

    @staticmethod
    def linear() -> "LambdaFunction":
        return LambdaFunction("linear", lambda t: t, increasing_unbounded=True)

    @staticmethod
    def sqrt() -> "LambdaFunction":
        return LambdaFunction("sqrt", math.sqrt, increasing_unbounded=True)

    @staticmethod
    def from_table(points: Sequence[tuple[float, float]],
                   increasing_unbounded: bool = False) -> "LambdaFunction":
        """Piecewise-linear interpolation through (t, lambda(t)) pairs."""
        pts = sorted((float(t), float(v)) for t, v in points)
        ts = np.array([t for t, _ in pts])
        vs = np.array([v for _, v in pts])

        def fn(t: float) -> float:
            return float(np.interp(t, ts, vs))

        return LambdaFunction("table", fn, increasing_unbounded)

    def validate_on_grid(self, heights: Sequence[float]):
        vals = [self(t) for t in heights]
        for t, v in zip(heights, vals):
            if (v == 0) != (t == 0):
                raise ValueError(f"need lambda(t) = 0 iff t = 0; got lambda({t}) = {v}")
        if self.increasing_unbounded:
            if any(b < a for a, b in zip(vals, vals[1:])):
                raise ValueError("lambda flagged increasing but decreases on the grid")


def cycle_graph(n: int, edge_length=1.0) -> tuple[tuple[str, ...], tuple]:
    """Nodes "0".."n-1" in a cycle with equal edge lengths."""
    nodes = tuple(str(i) for i in range(n))
    edges = tuple((nodes[i], nodes[(i + 1) % n], float(edge_length)) for i in range(n))
    return nodes, edges


def load_edge_list(text: str) -> tuple[tuple[str, ...], tuple]:
    """Parse an edge list: one "node node length" per line, rational
    lengths allowed, '#' comments ignored."""
    nodes: list[str] = []
    edges = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ValueError(f"bad edge line {raw!r}; expected 'node node length'")
        u, v, w = parts
        length = float(Fraction(w))
        if length <= 0:
            raise ValueError(f"edge length must be positive: {raw!r}")
        for x in (u, v):
            if x not in nodes:
                nodes.append(x)
        edges.append((u, v, length))
    return tuple(nodes), tuple(edges)


def geometric_heights(t_max: float, per_octave: int = 4,
                      extra: Sequence[float] = ()) -> tuple[float, ...]:
    """Apex row plus 2^(i/per_octave) up to (and one step past) t_max."""
    if t_max < 1:
        raise ValueError("t_max must be >= 1")
    hs = {0.0}
    i = 0
    while True:
        t = 2.0 ** (i / per_octave)
        hs.add(t)
        if t >= t_max:
            break
        i += 1
    hs.update(float(t) for t in extra)
    return tuple(sorted(hs))


@dataclass(frozen=True, eq=False)
class ConeGrid:
    """Finite model of a cone: base graph with all-pairs distances plus a
    strictly increasing height grid whose first row (t = 0) is the apex."""

    nodes: tuple[str, ...]
    edges: tuple[tuple[str, str, float], ...]
    heights: tuple[float, ...]
    base_distance: np.ndarray

    @staticmethod
    def build(nodes: Sequence[str], edges: Sequence[tuple], heights: Sequence[float]) -> "ConeGrid":
        nodes = tuple(nodes)
        heights = tuple(float(t) for t in heights)
        if len(heights) < 2 or heights[0] != 0.0:
            raise ValueError("height grid must start at 0 (the apex row)")
        if any(b <= a for a, b in zip(heights, heights[1:])):
            raise ValueError("height grid must be strictly increasing")
        index = {v: i for i, v in enumerate(nodes)}
        if len(index) != len(nodes):
            raise ValueError("duplicate node names")
        rows, cols, data = [], [], []
        norm_edges = []
        for u, v, w in edges:
            if u not in index or v not in index:
                raise ValueError(f"edge ({u}, {v}) uses an unknown node")
            w = float(w)
            rows += [index[u], index[v]]
            cols += [index[v], index[u]]
            data += [w, w]
            norm_edges.append((u, v, w))
        graph = csr_matrix((data, (rows, cols)), shape=(len(nodes), len(nodes)))
        dist = shortest_path(graph, method="D", directed=False)
        if np.isinf(dist).any():
            raise ValueError("base graph is disconnected")
        return ConeGrid(nodes, tuple(norm_edges), heights, dist)

    @cached_property
    def node_index(self) -> dict[str, int]:
        return {v: i for i, v in enumerate(self.nodes)}

    @cached_property
    def height_index(self) -> dict[float, int]:
        return {t: i for i, t in enumerate(self.heights)}

    def base_dist(self, u: str, v: str) -> float:
        return float(self.base_distance[self.node_index[u], self.node_index[v]])

    def refine_heights(self) -> "ConeGrid":
        """Double the height-grid density: geometric midpoints between
        positive rows, an arithmetic midpoint below the first row."""
        hs = list(self.heights)
        new = set(hs)
        for a, b in zip(hs, hs[1:]):
            new.add(b / 2 if a == 0.0 else math.sqrt(a * b))
        return ConeGrid(self.nodes, self.edges, tuple(sorted(new)), self.base_distance)

    def grid_points(self) -> list[tuple[str, float]]:
        pts: list[tuple[str, float]] = [(APEX, 0.0)]
        for t in self.heights[1:]:
            pts.extend((v, t) for v in self.nodes)
        return pts


def canonical_cone_point(p) -> tuple[str, float]:
    if not (isinstance(p, tuple) and len(p) == 2):
        raise ModelMismatch(f"expected a (node, height) pair: {p!r}")
    node, t = p
    t = float(t)
    if t < 0:
        raise ModelMismatch(f"height must be >= 0: {p!r}")
    if t == 0.0:
        return (APEX, 0.0)  # all height-0 points are identified
    return (str(node), t)


@dataclass(frozen=True, eq=False)
class ConeSpace(Space):
    """Space handle over a cone grid; distance is the shortest-path
    metric of the weighted grid graph (an upper bound for the cone
    metric, exact as a metric on grid points)."""

    grid: ConeGrid
    lam: LambdaFunction
    cap: int = DEFAULT_CAP

    model = "cone"
    integer_metric = False

    def __post_init__(self):
        self.lam.validate_on_grid(self.grid.heights)

    @property
    def basepoint(self) -> tuple[str, float]:
        return (APEX, 0.0)

    def validate(self, p):
        node, t = canonical_cone_point(p)
        if t == 0.0:
            return (APEX, 0.0)
        if node not in self.grid.node_index:
            raise ModelMismatch(f"unknown base node {node!r}")
        if t not in self.grid.height_index:
            raise ModelMismatch(f"height {t!r} is not on the grid")
        return (node, t)

    @cached_property
    def _points(self) -> list[tuple[str, float]]:
        return self.grid.grid_points()

    @cached_property
    def _point_index(self) -> dict[tuple[str, float], int]:
        return {p: i for i, p in enumerate(self._points)}

    @cached_property
    def _graph(self) -> csr_matrix:
        grid, lam = self.grid, self.lam
        nb = len(grid.nodes)
        heights = grid.heights
        lam_vals = [lam(t) for t in heights]

        def idx(node: str, hi: int) -> int:
            if hi == 0:
                return 0
            return 1 + (hi - 1) * nb + grid.node_index[node]

        rows: list[int] = []
        cols: list[int] = []
        data: list[float] = []

        def add(i: int, j: int, w: float):
            rows.extend((i, j))
            cols.extend((j, i))
            data.extend((w, w))

        # vertical edges (including apex to the first row: pure height cost)
        for v in grid.nodes:
            add(0, idx(v, 1), heights[1])
            for hi in range(1, len(heights) - 1):
                add(idx(v, hi), idx(v, hi + 1), heights[hi + 1] - heights[hi])
        # horizontal and diagonal edges along base edges
        for u, v, w in grid.edges:
            for hi in range(1, len(heights)):
                add(idx(u, hi), idx(v, hi), lam_vals[hi] * w)
                if hi + 1 < len(heights):
                    dt = heights[hi + 1] - heights[hi]
                    diag = dt + max(lam_vals[hi], lam_vals[hi + 1]) * w
                    add(idx(u, hi), idx(v, hi + 1), diag)
                    add(idx(u, hi + 1), idx(v, hi), diag)
        n = 1 + (len(heights) - 1) * nb
        return csr_matrix((data, (rows, cols)), shape=(n, n))

    def _index_of(self, p) -> int:
        return self._point_index[self.validate(p)]

    @cached_property
    def _row_cache(self) -> dict[int, np.ndarray]:
        return {}

    def _dist_row(self, source_index: int) -> np.ndarray:
        cache = self._row_cache
        if source_index not in cache:
            if len(cache) > 128:
                cache.clear()
            cache[source_index] = dijkstra(self._graph, indices=source_index)
        return cache[source_index]

    def distance(self, p, q) -> float:
        return float(self._dist_row(self._index_of(p))[self._index_of(q)])

    def pairwise(self, ps, qs) -> np.ndarray:
        src = [self._index_of(p) for p in ps]
        dst = [self._index_of(q) for q in qs]
        uniq = sorted(set(src))
        rows = dijkstra(self._graph, indices=uniq)
        row_of = {s: i for i, s in enumerate(uniq)}
        return rows[np.ix_([row_of[s] for s in src], dst)]

    def paired(self, ps, qs) -> np.ndarray:
        if len(ps) != len(qs):
            raise ValueError("paired distance needs equal-length sequences")
        out = np.empty(len(ps))
        dst = [self._index_of(q) for q in qs]
        for i, p in enumerate(ps):
            out[i] = self._dist_row(self._index_of(p))[dst[i]]
        return out

    def closed_ball(self, center, r) -> list:
        if r < 0:
            raise ValueError("radius must be >= 0")
        row = self._dist_row(self._index_of(center))
        hits = np.nonzero(row <= r)[0]
        self._check_cap(len(hits))
        return [self._points[i] for i in hits]

    def format_point(self, p) -> str:
        node, t = canonical_cone_point(p)
        return "apex" if t == 0.0 else f"{node}@{t!r}"


# ---------------------------------------------------------------------------
# lengths, distances, diagnostics


def lambda_length(grid: ConeGrid, lam: LambdaFunction, path: Sequence) -> float:
    """Length of an explicit point sequence: each step pays the height
    change plus the base distance weighted by the larger endpoint
    lambda.  Steps touching the apex carry no angular term (the base
    coordinate is collapsed there)."""
    if len(path) < 2:
        raise ValueError("a path needs at least 2 points")
    pts = []
    for p in path:
        node, t = canonical_cone_point(p)
        if t != 0.0:
            if node not in grid.node_index:
                raise ModelMismatch(f"unknown base node {node!r}")
            if t not in grid.height_index:
                raise ModelMismatch(f"height {t!r} is not on the grid")
        pts.append((node, t))
    total = 0.0
    for (u, s), (v, t) in zip(pts, pts[1:]):
        total += abs(s - t)
        if s != 0.0 and t != 0.0:
            total += max(lam(s), lam(t)) * grid.base_dist(u, v)
    return total


def cone_distance_upper(grid: ConeGrid, lam: LambdaFunction, p, q) -> float:
    """Shortest grid-path length: an upper bound for the cone distance,
    non-increasing under height-grid refinement."""
    return ConeSpace(grid, lam).distance(p, q)


def cone_distance_lower(p, q) -> float:
    """Trivial bracket partner: any path moves at least the height gap."""
    u = canonical_cone_point(p)
    v = canonical_cone_point(q)
    if u == v:
        return 0.0
    return abs(u[1] - v[1])


@dataclass(frozen=True)
class DiagnosticRow:
    height: float
    measured_separation: float
    bound: float
    passed: bool


@dataclass(frozen=True)
class DiagnosticTable:
    entourage_radius: float
    slack: float
    rows: tuple[DiagnosticRow, ...]

    def all_passed(self) -> bool:
        return all(row.passed for row in self.rows)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(("t", "measured_sep", "bound", "pass"))
        for row in self.rows:
            writer.writerow(
                (repr(row.height), repr(row.measured_separation), repr(row.bound),
                 str(row.passed).lower())
            )
        return buf.getvalue()


def compactification_diagnostic(
    grid: ConeGrid,
    lam: LambdaFunction,
    entourage_radius: float,
    heights: Sequence[float],
    slack: float = 0.1,
) -> DiagnosticTable:
    """Measure, per threshold height t, the largest base separation among
    grid pairs above t lying within the entourage, against r_E / lambda(t).

    This is the quantitative shadow of "controlled sets meet the boundary
    only at the diagonal": with lambda increasing and unbounded, pairs of
    bounded cone distance must have base separation shrinking like
    1 / lambda.  The slack absorbs grid discretization.
    """
    if not lam.increasing_unbounded:
        raise ValueError(
            "diagnostic requires a lambda flagged increasing-unbounded; "
            "the criterion's hypothesis fails otherwise"
        )
    if entourage_radius < 0:
        raise ValueError("entourage radius must be >= 0")
    space = ConeSpace(grid, lam)
    pts = space._points
    pt_heights = np.array([t for _, t in pts])
    node_ids = np.array(
        [grid.node_index[v] if t > 0 else 0 for v, t in pts]
    )
    rows = []
    for t in sorted(float(t) for t in heights):
        if t <= 0:
            raise ValueError("threshold heights must be positive (t = 0 is the apex)")
        if t > grid.heights[-1]:
            raise ValueError(f"threshold {t} is beyond the grid top {grid.heights[-1]}")
        above = np.nonzero(pt_heights >= t)[0]
        dmat = dijkstra(space._graph, indices=above, limit=entourage_radius)
        sub = dmat[:, above]
        src_nodes = node_ids[above]
        measured = 0.0
        finite = np.nonzero(np.isfinite(sub))
        if len(finite[0]):
            seps = grid.base_distance[src_nodes[finite[0]], src_nodes[finite[1]]]
            measured = float(seps.max())
        bound = entourage_radius / lam(t)
        rows.append(
            DiagnosticRow(
                height=t,
                measured_separation=measured,
                bound=bound,
                passed=measured <= bound * (1.0 + slack),
            )
        )
    return DiagnosticTable(
        entourage_radius=float(entourage_radius), slack=slack, rows=tuple(rows)
    )


def cone_space_from_config(cfg: dict, cap: int = DEFAULT_CAP) -> ConeSpace:
    """Build a cone handle from flat config keys.

    Base graph: either ``base_cycle = n`` (with optional ``edge_length``)
    or ``base_edges`` holding edge-list text / a file path.  Heights:
    geometric up to ``height_max`` (``heights_per_octave`` rows per
    octave) plus any ``extra_heights``.  ``lam`` picks linear or sqrt.
    """
    if "base_cycle" in cfg:
        n = int(cfg["base_cycle"])
        nodes, edges = cycle_graph(n, float(Fraction(str(cfg.get("edge_length", 1)))))
    elif "base_edges" in cfg:
        text = str(cfg["base_edges"])
        if "\n" not in text and text.endswith((".edges", ".txt")):
            with open(text) as fh:
                text = fh.read()
        nodes, edges = load_edge_list(text)
    else:
        raise ValueError("cone space needs 'base_cycle' or 'base_edges'")
    t_max = float(cfg.get("height_max", 64))
    per_octave = int(cfg.get("heights_per_octave", 4))
    extra = []
    if "extra_heights" in cfg:
        extra = [float(Fraction(s.strip())) for s in str(cfg["extra_heights"]).split(",")]
    heights = geometric_heights(t_max, per_octave, extra)
    lam_name = str(cfg.get("lam", "linear")).lower()
    if lam_name == "linear":
        lam = LambdaFunction.linear()
    elif lam_name == "sqrt":
        lam = LambdaFunction.sqrt()
    else:
        raise ValueError(f"unknown lambda choice {lam_name!r}")
    grid = ConeGrid.build(nodes, edges, heights)
    return ConeSpace(grid, lam, cap=cap)
