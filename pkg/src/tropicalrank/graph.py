"""Chains of loops, PL functions with integer slopes, and certificates.

Geometry is exact: lengths, offsets and values are Fractions, slopes are
integers.  The divisor-of-function convention is ord_p(psi) = -(sum of
outgoing slopes at p), so R(D) = {psi : D + div(psi) >= 0}.
"""

from __future__ import annotations

from fractions import Fraction

from .ring import rat, rat_str

TOP, BOTTOM, BRIDGE = "top", "bottom", "bridge"


class ChainGraph:
    """g loops joined by g+1 bridges, with a marked left vertex.

    Loop k has a top edge of length ell[k] and a bottom edge of length
    m[k] between vertices v_k (left) and w_k (right); bridge k of length
    n[k] joins w_{k-1} to v_k.  Loop indices run 14-g .. 13.
    """

    def __init__(self, g, ell, m, n, scale_base=None):
        if g not in (11, 12, 13):
            raise ValueError("genus must be 11, 12, or 13")
        self.g = g
        self.first = 14 - g
        self.loop_indices = list(range(self.first, 14))
        self.bridge_indices = list(range(self.first, 15))
        self.ell = {k: rat(ell[k]) for k in self.loop_indices}
        self.m = {k: rat(m[k]) for k in self.loop_indices}
        self.n = {k: rat(n[k]) for k in self.bridge_indices}
        for d in (self.ell, self.m, self.n):
            if any(v <= 0 for v in d.values()):
                raise ValueError("edge lengths must be positive")
        self.scale_base = scale_base
        self._edges = []
        for k in self.bridge_indices:
            self._edges.append((BRIDGE, k))
            if k <= 13:
                self._edges.append((TOP, k))
                self._edges.append((BOTTOM, k))
        self._edge_order = {e: i for i, e in enumerate(self._edges)}

    def edges(self):
        return list(self._edges)

    def edge_length(self, edge):
        kind, k = edge
        if kind == BRIDGE:
            return self.n[k]
        return self.ell[k] if kind == TOP else self.m[k]

    # -- vertices --------------------------------------------------------

    def vertex(self, name, k):
        """Canonical GraphPoint for vertex w_k or v_k."""
        if name == "w":
            if k == self.first - 1:
                return GraphPoint(self, (BRIDGE, self.first), 0)
            return GraphPoint(self, (TOP, k), self.ell[k])
        if name == "v":
            if k == 14:
                return GraphPoint(self, (BRIDGE, 14), self.n[14])
            return GraphPoint(self, (TOP, k), 0)
        raise ValueError(name)

    def leftmost(self):
        return self.vertex("w", self.first - 1)

    @classmethod
    def from_config(cls, cfg):
        g = int(cfg.get("g", 13))
        base = int(str(cfg.get("scale_base", "10000")))
        overrides = cfg.get("overrides", {}) or {}
        return make_admissible_chain(
            g, base, m2_equals_l2=bool(overrides.get("m2_equals_l2", False))
        )


def make_admissible_chain(g, scale_base=10000, m2_equals_l2=False) -> ChainGraph:
    """Length tower in powers of scale_base realizing the admissible chain
    m_13 << l_13 << m_12 << ... << l_1 << n_14 << ... << n_1, smallest 1.

    m2_equals_l2 deliberately breaks admissibility on loop 2 (torsion
    index 2); such graphs are accepted for manual exploration only.
    """
    if scale_base < 2:
        raise ValueError("scale base must be at least 2")
    B = Fraction(scale_base)
    first = 14 - g
    ell = {k: B ** (2 * (13 - k) + 1) for k in range(first, 14)}
    m = {k: B ** (2 * (13 - k)) for k in range(first, 14)}
    n = {k: B ** (40 - k) for k in range(first, 15)}
    if m2_equals_l2:
        if 2 not in m:
            raise ValueError("loop 2 absent for this genus")
        m[2] = ell[2]
    return ChainGraph(g, ell, m, n, scale_base=scale_base)


class GraphPoint:
    """A point on an edge; endpoint representations canonicalize to the
    vertex's preferred edge (top edge where one exists)."""

    __slots__ = ("graph", "edge", "offset")

    def __init__(self, graph, edge, offset):
        offset = rat(offset)
        length = graph.edge_length(edge)
        if offset < 0 or offset > length:
            raise ValueError(f"offset {offset} outside edge of length {length}")
        kind, k = edge
        if offset == 0:
            if kind == BOTTOM:
                edge = (TOP, k)
            elif kind == BRIDGE and k - 1 >= graph.first:
                edge, offset = (TOP, k - 1), graph.ell[k - 1]
        elif offset == length:
            if kind == BOTTOM:
                edge, offset = (TOP, k), graph.ell[k]
            elif kind == BRIDGE and k <= 13:
                edge, offset = (TOP, k), 0
        self.graph = graph
        self.edge = edge
        self.offset = offset

    def sort_key(self):
        return (self.graph._edge_order[self.edge], self.offset)

    def __eq__(self, other):
        return (
            isinstance(other, GraphPoint)
            and self.graph is other.graph
            and self.edge == other.edge
            and self.offset == other.offset
        )

    def __hash__(self):
        return hash((self.edge, self.offset))

    def __repr__(self):
        return f"{self.edge[0]}:{self.edge[1]}@{rat_str(self.offset)}"

    def to_json(self):
        return {"edge": f"{self.edge[0]}:{self.edge[1]}", "offset": rat_str(self.offset)}


def point_from_json(graph, obj) -> GraphPoint:
    kind, _, idx = str(obj["edge"]).partition(":")
    if kind not in (TOP, BOTTOM, BRIDGE):
        raise ValueError(f"unknown edge kind {kind!r}")
    return GraphPoint(graph, (kind, int(idx)), rat(obj["offset"]))


class GraphDivisor:
    """Finite Z-linear combination of graph points."""

    __slots__ = ("graph", "mult")

    def __init__(self, graph, mult=None):
        self.graph = graph
        self.mult = {}
        if mult:
            for p, c in (mult.items() if isinstance(mult, dict) else mult):
                c = int(c)
                if not c:
                    continue
                acc = self.mult.get(p, 0) + c
                if acc:
                    self.mult[p] = acc
                else:
                    self.mult.pop(p, None)

    def degree(self):
        return sum(self.mult.values())

    def multiplicity(self, p):
        return self.mult.get(p, 0)

    def is_effective(self):
        return all(c >= 0 for c in self.mult.values())

    def __add__(self, other):
        out = dict(self.mult)
        for p, c in other.mult.items():
            acc = out.get(p, 0) + c
            if acc:
                out[p] = acc
            else:
                out.pop(p, None)
        d = GraphDivisor(self.graph)
        d.mult = out
        return d

    def __neg__(self):
        d = GraphDivisor(self.graph)
        d.mult = {p: -c for p, c in self.mult.items()}
        return d

    def __sub__(self, other):
        return self + (-other)

    def __eq__(self, other):
        return isinstance(other, GraphDivisor) and self.mult == other.mult

    def points(self):
        return sorted(self.mult, key=GraphPoint.sort_key)

    def to_json(self):
        return [
            {**p.to_json(), "mult": self.mult[p]}
            for p in self.points()
        ]

    def __repr__(self):
        return " + ".join(f"{c}*{p!r}" for p, c in sorted(self.mult.items(), key=lambda t: t[0].sort_key())) or "0"


class PLFunction:
    """Piecewise-linear function with integer slopes.

    Stored as the value at the leftmost vertex plus, per edge, segments
    (start offset, slope) with strictly increasing offsets starting at 0.
    Edges not listed carry a single zero-slope segment.
    """

    __slots__ = ("graph", "base", "segments", "_vertex_values")

    def __init__(self, graph, base, segments=None, _check=True):
        self.graph = graph
        self.base = rat(base)
        segs = {}
        for edge, lst in (segments or {}).items():
            length = graph.edge_length(edge)
            norm = []
            for off, slope in lst:
                off = rat(off)
                slope = int(slope)
                if off < 0 or off >= length:
                    raise ValueError("segment start outside edge")
                if norm and off <= norm[-1][0]:
                    raise ValueError("segment offsets must increase")
                if norm and norm[-1][1] == slope:
                    continue
                norm.append((off, slope))
            if not norm or norm[0][0] != 0:
                raise ValueError("segments must start at offset 0")
            if len(norm) > 1 or norm[0][1] != 0:
                segs[edge] = tuple(norm)
        self.segments = segs
        self._vertex_values = None
        if _check:
            self.vertex_values()

    def edge_segments(self, edge):
        return self.segments.get(edge, ((Fraction(0), 0),))

    def _increment(self, edge):
        segs = self.edge_segments(edge)
        length = self.graph.edge_length(edge)
        total = Fraction(0)
        for i, (off, slope) in enumerate(segs):
            end = segs[i + 1][0] if i + 1 < len(segs) else length
            total += slope * (end - off)
        return total

    def vertex_values(self):
        """Values at vertices; verifies loop continuity."""
        if self._vertex_values is not None:
            return self._vertex_values
        g = self.graph
        vals = {("w", g.first - 1): self.base}
        for k in g.bridge_indices:
            vals[("v", k)] = vals[("w", k - 1)] + self._increment((BRIDGE, k))
            if k <= 13:
                top = vals[("v", k)] + self._increment((TOP, k))
                bot = vals[("v", k)] + self._increment((BOTTOM, k))
                if top != bot:
                    raise ValueError(f"discontinuous around loop {k}")
                vals[("w", k)] = top
        self._vertex_values = vals
        return vals

    def edge_left_value(self, edge):
        kind, k = edge
        vals = self.vertex_values()
        return vals[("w", k - 1)] if kind == BRIDGE else vals[("v", k)]

    def eval(self, point: GraphPoint):
        edge = point.edge
        segs = self.edge_segments(edge)
        val = self.edge_left_value(edge)
        t = point.offset
        for i, (off, slope) in enumerate(segs):
            if off >= t:
                break
            nxt = segs[i + 1][0] if i + 1 < len(segs) else None
            end = t if nxt is None or nxt > t else nxt
            val += slope * (end - off)
        return val

    def __add__(self, other):
        if isinstance(other, (int, Fraction, str)):
            return PLFunction(self.graph, self.base + rat(other), self.segments, _check=False)
        if self.graph is not other.graph:
            raise ValueError("graph mismatch")
        segs = {}
        for edge in set(self.segments) | set(other.segments):
            a, b = self.edge_segments(edge), other.edge_segments(edge)
            offs = sorted({o for o, _ in a} | {o for o, _ in b})
            merged = [(o, _slope_at(a, o) + _slope_at(b, o)) for o in offs]
            segs[edge] = merged
        return PLFunction(self.graph, self.base + other.base, segs, _check=False)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, (int, Fraction, str)):
            return self + (-rat(other))
        return self + (other * -1)

    def __mul__(self, c):
        c = int(c)
        segs = {e: [(o, s * c) for o, s in lst] for e, lst in self.segments.items()}
        return PLFunction(self.graph, self.base * c, segs, _check=False)

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, PLFunction):
            return NotImplemented
        if self.graph is not other.graph or self.base != other.base:
            return False
        for edge in set(self.segments) | set(other.segments):
            if self.edge_segments(edge) != other.edge_segments(edge):
                return False
        return True


def _slope_at(segs, off):
    cur = segs[0][1]
    for o, s in segs:
        if o <= off:
            cur = s
        else:
            break
    return cur


def pl_divisor(psi: PLFunction) -> GraphDivisor:
    """div(psi) with ord_p = -(sum of outgoing slopes at p)."""
    g = psi.graph
    orders = {}

    def bump(point, c):
        if c:
            orders[point] = orders.get(point, 0) + c

    out_at_vertex = {}

    def vertex_out(vname, slope):
        out_at_vertex[vname] = out_at_vertex.get(vname, 0) + slope

    for edge in g.edges():
        kind, k = edge
        segs = psi.edge_segments(edge)
        length = g.edge_length(edge)
        for i in range(1, len(segs)):
            off, s_out = segs[i]
            s_in = segs[i - 1][1]
            bump(GraphPoint(g, edge, off), s_in - s_out)
        first_slope, last_slope = segs[0][1], segs[-1][1]
        if kind == BRIDGE:
            vertex_out(("w", k - 1), first_slope)
            vertex_out(("v", k), -last_slope)
        else:
            vertex_out(("v", k), first_slope)
            vertex_out(("w", k), -last_slope)
    for (name, k), total in out_at_vertex.items():
        bump(g.vertex(name, k), -total)
    return GraphDivisor(g, orders)


def in_linear_system(D: GraphDivisor, psi: PLFunction) -> bool:
    if D.graph is not psi.graph:
        raise ValueError("graph mismatch")
    return (D + pl_divisor(psi)).is_effective()


def _edge_profiles(funcs, edge):
    """Per function: (value at left endpoint, segment list) on this edge."""
    return [(f.edge_left_value(edge), list(f.edge_segments(edge))) for f in funcs]


def _envelope_on_edge(graph, funcs, edge):
    """Lower envelope on one edge.

    Returns (segments, regions): segments as (offset, slope) for the
    envelope; regions as (start, end, active) where active is the
    frozenset of function indices equal to the minimum on the open
    interval (start, end).
    """
    length = graph.edge_length(edge)
    profiles = _edge_profiles(funcs, edge)
    cuts = sorted({Fraction(0), length} | {o for _, segs in profiles for o, _ in segs})
    vals = [v for v, _ in profiles]
    seg_ptr = [0] * len(funcs)
    env_segs = []
    regions = []

    for ci in range(len(cuts) - 1):
        a, b = cuts[ci], cuts[ci + 1]
        slopes = []
        for i, (_, segs) in enumerate(profiles):
            while seg_ptr[i] + 1 < len(segs) and segs[seg_ptr[i] + 1][0] <= a:
                seg_ptr[i] += 1
            slopes.append(segs[seg_ptr[i]][1])
        x = a
        cur = list(vals)
        while x < b:
            mval = min(cur)
            minimizers = [i for i, v in enumerate(cur) if v == mval]
            s_env = min(slopes[i] for i in minimizers)
            active = frozenset(i for i in minimizers if slopes[i] == s_env)
            nxt = b
            for i, v in enumerate(cur):
                if v > mval and slopes[i] < s_env:
                    cross = x + Fraction(v - mval, s_env - slopes[i])
                    if cross < nxt:
                        nxt = cross
            if not env_segs or env_segs[-1][1] != s_env:
                env_segs.append((x, s_env))
            regions.append((x, nxt, active))
            dx = nxt - x
            cur = [v + slopes[i] * dx for i, v in enumerate(cur)]
            x = nxt
        vals = cur

    # merge adjacent regions with identical active sets
    merged = []
    for r in regions:
        if merged and merged[-1][2] == r[2] and merged[-1][1] == r[0]:
            merged[-1] = (merged[-1][0], r[1], r[2])
        else:
            merged.append(r)
    return env_segs, merged


def min_combination(psis, bs) -> PLFunction:
    """Pointwise min of psi_i + b_i with exact crossing breakpoints."""
    if not psis:
        raise ValueError("need at least one function")
    graph = psis[0].graph
    funcs = [psi + rat(b) for psi, b in zip(psis, bs)]
    if len(funcs) == 1:
        return funcs[0]
    segs = {}
    for edge in graph.edges():
        env, _ = _envelope_on_edge(graph, funcs, edge)
        segs[edge] = env
    base = min(f.base for f in funcs)
    return PLFunction(graph, base, segs)


class IndependenceCertificate:
    """Per function: a witness point with a strictly positive margin."""

    def __init__(self, entries):
        self.entries = list(entries)
        if any(e["margin"] <= 0 for e in self.entries):
            raise ValueError("certificate margins must be positive")

    def min_margin(self):
        return min(e["margin"] for e in self.entries)

    def to_json(self):
        return [
            {
                "id": e["id"],
                "coefficient": rat_str(e["coefficient"]),
                "witness": e["witness"].to_json(),
                "margin": rat_str(e["margin"]),
            }
            for e in self.entries
        ]


class IndependenceFailure:
    """Indices that never uniquely achieve the minimum."""

    def __init__(self, failed_ids):
        self.failed_ids = list(failed_ids)

    def to_json(self):
        return {"failed": self.failed_ids}


def certify_independence(psis, bs, ids=None):
    """Exact scan: refine at all breakpoints and crossings, then find for
    each function an open segment where it alone achieves the minimum."""
    graph = psis[0].graph
    if ids is None:
        ids = list(range(len(psis)))
    funcs = [psi + rat(b) for psi, b in zip(psis, bs)]
    if len(funcs) == 1:
        # no competitor; any point works, margin conventionally 1
        entry = {
            "id": ids[0],
            "coefficient": rat(bs[0]),
            "witness": graph.leftmost(),
            "margin": Fraction(1),
        }
        return IndependenceCertificate([entry])
    witness = {}
    for edge in graph.edges():
        _, regions = _envelope_on_edge(graph, funcs, edge)
        for start, end, active in regions:
            if len(active) != 1 or start >= end:
                continue
            (i,) = active
            if i in witness:
                continue
            mid = (start + end) / 2
            point = GraphPoint(graph, edge, mid)
            fvals = [f.eval(point) for f in funcs]
            mine = fvals[i]
            margin = min(v for j, v in enumerate(fvals) if j != i) - mine
            if margin > 0:
                witness[i] = {
                    "id": ids[i],
                    "coefficient": rat(bs[i]),
                    "witness": point,
                    "margin": margin,
                }
        if len(witness) == len(funcs):
            break
    if len(witness) == len(funcs):
        return IndependenceCertificate([witness[i] for i in range(len(funcs))])
    return IndependenceFailure([ids[i] for i in range(len(funcs)) if i not in witness])
