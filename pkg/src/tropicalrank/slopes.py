"""Tableaux, slope tables, chip positions, and the functions phi_i.

A rank-5 degree-16 series on the chain is encoded by six slopes per
bridge.  Crossing loop k increments exactly one slope index (read off a
standard tableau), except on the lingering loop.  Chip positions on each
loop are forced by the incrementing slope; the lingering chip is only
constrained away from finitely many torsion positions.
"""

from __future__ import annotations

from fractions import Fraction

from .graph import (
    BOTTOM,
    BRIDGE,
    TOP,
    ChainGraph,
    GraphDivisor,
    GraphPoint,
    PLFunction,
    in_linear_system,
    pl_divisor,
)

INITIAL_SLOPES = (-2, -1, 0, 1, 2, 3)


class TableauError(ValueError):
    pass


class ChipSolveError(RuntimeError):
    def __init__(self, loop, message):
        super().__init__(f"loop {loop}: {message}")
        self.loop = loop


class Tableau:
    """Two-row filling, possibly skew for genus 11/12.

    Row r occupies columns 6-len(row_r) .. 5; the removed top-left boxes
    encode the ramification seeding for genus < 13.
    """

    def __init__(self, top, bottom, lingering, genus=13):
        self.top = tuple(int(x) for x in top)
        self.bottom = tuple(int(x) for x in bottom)
        self.lingering = int(lingering)
        self.genus = int(genus)
        self._validate()

    def _validate(self):
        g = self.genus
        if g not in (11, 12, 13):
            raise TableauError("genus must be 11, 12, or 13")
        shapes = {13: [(6, 6)], 12: [(5, 6)], 11: [(5, 5), (4, 6)]}
        if (len(self.top), len(self.bottom)) not in shapes[g]:
            raise TableauError(
                f"row lengths {len(self.top)},{len(self.bottom)} invalid for genus {g}"
            )
        loops = set(range(14 - g, 14))
        if self.lingering not in loops:
            raise TableauError("lingering symbol outside loop range")
        expected = loops - {self.lingering}
        if sorted(self.top + self.bottom) != sorted(expected):
            raise TableauError("symbols must be the loop indices minus lingering")
        for row in (self.top, self.bottom):
            if any(row[i] >= row[i + 1] for i in range(len(row) - 1)):
                raise TableauError("rows must strictly increase")
        top_start = 6 - len(self.top)
        bottom_start = 6 - len(self.bottom)
        if top_start < bottom_start:
            raise TableauError("removed boxes must form a top-left Young diagram")
        for col in range(max(top_start, bottom_start), 6):
            if self.top[col - top_start] >= self.bottom[col - bottom_start]:
                raise TableauError(f"column {col} must increase downward")

    def column_of(self, symbol):
        if symbol in self.top:
            return 6 - len(self.top) + self.top.index(symbol)
        if symbol in self.bottom:
            return 6 - len(self.bottom) + self.bottom.index(symbol)
        raise KeyError(symbol)

    def removed_columns(self):
        """Columns of the seed boxes, top row first."""
        return list(range(6 - len(self.top))) + list(range(6 - len(self.bottom)))

    def to_json(self):
        return {
            "top": list(self.top),
            "bottom": list(self.bottom),
            "lingering": self.lingering,
            "genus": self.genus,
        }

    @classmethod
    def from_json(cls, obj):
        return cls(obj["top"], obj["bottom"], obj["lingering"], obj.get("genus", 13))

    def __eq__(self, other):
        return (
            isinstance(other, Tableau)
            and (self.top, self.bottom, self.lingering, self.genus)
            == (other.top, other.bottom, other.lingering, other.genus)
        )

    def __hash__(self):
        return hash((self.top, self.bottom, self.lingering, self.genus))

    def __repr__(self):
        return (
            f"Tableau(top={self.top}, bottom={self.bottom}, "
            f"lingering={self.lingering}, genus={self.genus})"
        )


class RamificationSpec:
    """One admissible ramification case: a genus together with the
    required vanishing orders at the left point.

    The supported cases are genus 13 with no condition, genus 12 with
    a_1 >= 2, and genus 11 with either a_1 >= 3 or (a_0 >= 1 and
    a_2 >= 4).  Anything else is rejected.
    """

    _CASES = {
        (13, ()): ("13", (6, 6)),
        (12, ((1, 2),)): ("12", (5, 6)),
        (11, ((1, 3),)): ("11a", (5, 5)),
        (11, ((0, 1), (2, 4))): ("11b", (4, 6)),
    }

    __slots__ = ("genus", "vanishing")

    def __init__(self, genus, vanishing=None):
        self.genus = genus
        self.vanishing = dict(vanishing or {})
        key = (genus, tuple(sorted(self.vanishing.items())))
        if key not in self._CASES:
            raise ValueError(f"unsupported ramification case {genus}, {self.vanishing}")

    @classmethod
    def all_cases(cls):
        return [
            cls(g, dict(v))
            for g, v in sorted(cls._CASES, key=lambda k: (-k[0], len(k[1]), k[1]))
        ]

    def case_label(self):
        return self._CASES[(self.genus, tuple(sorted(self.vanishing.items())))][0]

    def shape(self):
        """Row lengths (top, bottom) of the matching tableau shape."""
        return self._CASES[(self.genus, tuple(sorted(self.vanishing.items())))][1]

    def minimal_vanishing(self):
        """Least strictly increasing sequence meeting the requirements."""
        out = []
        for i in range(6):
            lo = max(i, self.vanishing.get(i, 0))
            out.append(lo if not out else max(out[-1] + 1, lo))
        return tuple(out)

    def seed_slopes(self):
        """Slope vector on the first bridge: (16 - g) - a[5 - i]."""
        a = self.minimal_vanishing()
        return tuple((16 - self.genus) - a[5 - i] for i in range(6))

    def tableaux(self, lingering=None):
        shape = self.shape()
        return [
            t
            for t in all_tableaux(self.genus, lingering)
            if (len(t.top), len(t.bottom)) == shape
        ]

    def __repr__(self):
        return f"RamificationSpec(genus={self.genus}, vanishing={self.vanishing})"


def all_tableaux(genus=13, lingering=None):
    """All standard fillings for the genus.

    Genus 11 has two admissible skew shapes (the two ramification
    alternatives); both are enumerated.  `lingering` filters to one
    choice of lingering loop.
    """
    shapes = {13: [(6, 6)], 12: [(5, 6)], 11: [(5, 5), (4, 6)]}
    loops = range(14 - genus, 14)
    lingers = [lingering] if lingering is not None else list(loops)
    out = []
    for ell in lingers:
        symbols = sorted(set(loops) - {ell})
        for lt, lb in shapes[genus]:
            for top, bottom in _standard_fillings(symbols, lt, lb):
                out.append(Tableau(top, bottom, ell, genus))
    return out


def _standard_fillings(symbols, len_top, len_bottom):
    top_start, bottom_start = 6 - len_top, 6 - len_bottom
    fillings = []

    def place(idx, top, bottom):
        if idx == len(symbols):
            fillings.append((tuple(top), tuple(bottom)))
            return
        sym = symbols[idx]
        if len(top) < len_top:
            place(idx + 1, top + [sym], bottom)
        if len(bottom) < len_bottom:
            col = bottom_start + len(bottom)
            # the box above, if part of the shape, must already be filled
            if col < top_start or col - top_start < len(top):
                place(idx + 1, top, bottom + [sym])

    place(0, [], [])
    return fillings


class SlopeTable:
    """Incoming (s) and outgoing (sp) slope vectors per loop."""

    def __init__(self, genus, lingering, seed, s, sp, incremented):
        self.genus = genus
        self.lingering = lingering
        self.seed = tuple(seed)
        self.s = s
        self.sp = sp
        self.incremented = incremented  # loop -> slope index or None

    @property
    def loop_indices(self):
        return list(range(14 - self.genus, 14))

    def bridge_slopes(self, k):
        """Slope vector along bridge beta_k."""
        if k == 14 - self.genus:
            return self.seed
        if k == 14:
            return self.sp[13]
        return self.s[k]

    def __eq__(self, other):
        return isinstance(other, SlopeTable) and (
            self.genus,
            self.lingering,
            self.seed,
            self.s,
            self.sp,
        ) == (other.genus, other.lingering, other.seed, other.s, other.sp)

    def __hash__(self):
        return hash((self.genus, self.seed, tuple(sorted(self.sp.items()))))


def slopes_from_tableau(t: Tableau) -> SlopeTable:
    vec = list(INITIAL_SLOPES)
    for col in t.removed_columns():
        vec[5 - col] += 1
    if any(vec[i] >= vec[i + 1] for i in range(5)):
        raise TableauError("seed slopes not strictly increasing")
    s, sp, incremented = {}, {}, {}
    for k in range(14 - t.genus, 14):
        s[k] = tuple(vec)
        if k == t.lingering:
            incremented[k] = None
        else:
            idx = 5 - t.column_of(k)
            vec[idx] += 1
            if idx < 5 and vec[idx] >= vec[idx + 1]:
                raise TableauError(f"slopes collide after loop {k}")
            incremented[k] = idx
        sp[k] = tuple(vec)
    return SlopeTable(t.genus, t.lingering, s[14 - t.genus], s, sp, incremented)


def tau(st: SlopeTable, k) -> int:
    return sum(st.sp[k][i] + 2 - i for i in range(6))


ORDINARY = "ordinary"
LINGERING = "lingering"
DECREASING_LOOP = "decreasing-loop"
DECREASING_BRIDGE = "decreasing-bridge"
SWITCHING = "switching"


class LoopProfile:
    """Per-loop/bridge kinds plus the distinguished slope index."""

    def __init__(self, genus, items, taus):
        self.genus = genus
        self.items = dict(items)  # ("loop"|"bridge", k) -> (kind, h or None)
        self.taus = dict(taus)
        special = [key for key, (kind, _) in self.items.items() if kind != ORDINARY]
        if len(special) > 1:
            raise ValueError(f"more than one positive-multiplicity item: {special}")
        self.special = special[0] if special else None

    def kind(self, key):
        return self.items.get(key, (ORDINARY, None))[0]

    def index_of_special(self):
        return self.items[self.special][1] if self.special else None

    def special_kind(self):
        return self.items[self.special][0] if self.special else None


def classify(st: SlopeTable, switching_witness=None) -> LoopProfile:
    items = {}
    for k in st.loop_indices:
        sin, sout = st.s[k], st.sp[k]
        drops = [h for h in range(6) if sout[h] < sin[h]]
        if drops:
            items[("loop", k)] = (DECREASING_LOOP, drops[0])
        elif sout == sin:
            if switching_witness is not None and switching_witness.get("loop") == k:
                items[("loop", k)] = (SWITCHING, switching_witness["index"])
            else:
                items[("loop", k)] = (LINGERING, None)
        if k != 14 - st.genus:
            prev = st.sp[k - 1] if k - 1 in st.sp else st.seed
            drops = [h for h in range(6) if st.s[k][h] < prev[h]]
            if drops:
                items[("bridge", k)] = (DECREASING_BRIDGE, drops[0])
    taus = {k: tau(st, k) for k in st.loop_indices}
    return LoopProfile(st.genus, items, taus)


# -- chip positions --------------------------------------------------------


def _circle_point(graph, k, rho):
    """Point on loop k at circle coordinate rho in [0, L), measured from
    v_k along the top edge first."""
    ell, m = graph.ell[k], graph.m[k]
    rho = rho % (ell + m)
    if rho <= ell:
        return GraphPoint(graph, (TOP, k), rho)
    return GraphPoint(graph, (BOTTOM, k), ell + m - rho)


def forced_chip_rho(graph, k, slope):
    """Circle coordinate accommodating a slope -> slope+1 increment."""
    ell, m = graph.ell[k], graph.m[k]
    return (ell - slope * m) % (ell + m)


def chip_solve(graph: ChainGraph, st: SlopeTable, switching=None):
    """Break divisor realizing the slope table.

    Returns (D, chips) where chips maps loop index to GraphPoint.  The
    lingering chip goes to the midpoint of the largest gap between the
    torsion positions of the table's slopes.  A switching witness
    {"loop": k, "index": h} pins that loop's chip to the torsion point
    of slope s_k[h] instead.
    """
    if graph.g != st.genus:
        raise ValueError("graph and slope table genus differ")
    chips = {}
    for k in st.loop_indices:
        idx = st.incremented[k]
        L = graph.ell[k] + graph.m[k]
        if switching is not None and switching["loop"] == k:
            if idx is not None:
                raise ValueError(f"loop {k} is not lingering; cannot switch there")
            rho = forced_chip_rho(graph, k, st.s[k][switching["index"]])
        elif idx is not None:
            rho = forced_chip_rho(graph, k, st.s[k][idx])
        else:
            forbidden = sorted(
                {forced_chip_rho(graph, k, v) for v in set(st.s[k]) | set(st.sp[k])}
            )
            best = None
            for i, start in enumerate(forbidden):
                end = forbidden[i + 1] if i + 1 < len(forbidden) else forbidden[0] + L
                if best is None or end - start > best[0]:
                    best = (end - start, start)
            rho = (best[1] + best[0] / 2) % L
        chips[k] = _circle_point(graph, k, rho)
    D = GraphDivisor(
        graph,
        [(graph.leftmost(), 16 - st.genus)] + [(p, 1) for p in chips.values()],
    )
    for i in range(6):
        phi = build_phi(graph, st, chips, i)
        total = D + pl_divisor(phi)
        bad = [p for p, c in total.mult.items() if c < 0]
        if bad:
            where = min(bad, key=GraphPoint.sort_key)
            raise ChipSolveError(
                where.edge[1], f"phi_{i} has an uncovered pole at {where!r}"
            )
    return D, chips


# -- realizing phi_i -------------------------------------------------------


def _loop_patterns(s_in, s_out, ell, m, chip_edge, c):
    """Candidate (top segments, bottom segments) realizing slopes
    (s_in, s_out) across one loop.

    The chip sits at offset c on chip_edge ("same" = top, "other" =
    bottom, None = the vertex v when c == 0).  Offsets c == ell / c == m
    mean the vertex w.  Continuity holds for every candidate by
    construction; order conditions are the caller's check.
    """
    L = ell + m
    out = []

    def exact_div(num, den):
        q = Fraction(num) / Fraction(den)
        return int(q) if q.denominator == 1 else None

    # constants with the chip unused
    a = exact_div(s_in * m, L)
    if a is not None:
        out.append(([(0, a)], [(0, s_in - a)]))
    # constants leaning on a vertex chip at v
    if chip_edge is None and c == 0:
        a = exact_div((s_in + 1) * m, L)
        if a is not None:
            out.append(([(0, a)], [(0, s_in + 1 - a)]))

    def chip_interior(length, other_len):
        """Chip strictly inside the edge of this length, at offset c."""
        pats = []
        # net +1 across the chip, other edge constant; for equal in/out
        # slopes this only solves at the torsion position and leaves a
        # zero at w (the switching-loop crossing)
        a = exact_div(s_in * other_len - length + c, L)
        if a is not None:
            pats.append(([(0, a), (c, a + 1)], [(0, s_in - a)]))
        # chip, then a compensating down-bend on the same edge
        a, rem = divmod(s_in * other_len, L)
        y = c + rem
        if 0 < rem and y < length:
            pats.append(([(0, a), (c, a + 1), (y, a)], [(0, s_in - a)]))
        # down-bend before the chip on the same edge
        a = -(-s_in * other_len // L)
        rem = a * L - s_in * other_len
        y = c - rem
        if 0 < rem and 0 <= y:
            seg = [(0, a), (y, a - 1), (c, a)] if y > 0 else [(0, a - 1), (c, a)]
            pats.append((seg, [(0, s_in - a)]))
        # chip here, down-bend on the other edge
        lo = s_in * other_len + c - length - other_len
        a = -(-lo // L)
        z = a * L - lo
        if 0 <= z < other_len:
            b = s_in - a
            oseg = [(0, b), (z, b - 1)] if z > 0 else [(0, b - 1)]
            pats.append(([(0, a), (c, a + 1)], oseg))
        return pats

    if chip_edge == "same" and 0 < c < ell:
        out.extend(chip_interior(ell, m))
    elif chip_edge == "other" and 0 < c < m:
        out.extend((o, t) for t, o in chip_interior(m, ell))

    at_w = (chip_edge == "same" and c == ell) or (chip_edge == "other" and c == m)
    if (at_w and s_out <= s_in + 1) or s_out == s_in - 1:
        # natural crossing with one down-bend: out slope s_in - 1.  With
        # the chip at w this realizes a lingering crossing (ord_w = -1);
        # with no chip involved it is the decreasing-loop crossing.
        # Bend variants cover the non-integral constant cases.
        a = -(-s_in * m // L)
        y = ell + s_in * m - a * L
        if 0 <= y < ell and a * L != s_in * m:
            seg = [(0, a), (y, a - 1)] if y > 0 else [(0, a - 1)]
            out.append((seg, [(0, s_in - a)]))
        b = -(-s_in * ell // L)
        z = m + s_in * ell - b * L
        if 0 <= z < m and b * L != s_in * ell:
            seg = [(0, b), (z, b - 1)] if z > 0 else [(0, b - 1)]
            out.append(([(0, s_in - b)], seg))
    if chip_edge is None and c == 0 and s_out == s_in:
        # vertex chip at v plus a down-bend
        a = -(-(s_in + 1) * m // L)
        y = ell + (s_in + 1) * m - a * L
        if 0 <= y < ell:
            seg = [(0, a), (y, a - 1)] if y > 0 else [(0, a - 1)]
            out.append((seg, [(0, s_in + 1 - a)]))
        b = -(-(s_in + 1) * ell // L)
        z = m + (s_in + 1) * ell - b * L
        if 0 <= z < m:
            seg = [(0, b), (z, b - 1)] if z > 0 else [(0, b - 1)]
            out.append(([(0, s_in + 1 - b)], seg))
    return out


def _chip_location(graph, k, chip: GraphPoint):
    """(edge tag, offset) of the chip relative to loop k."""
    kind, kk = chip.edge
    if kind == TOP and kk == k:
        if chip.offset == 0:
            return None, Fraction(0)
        return "same", chip.offset
    if kind == BOTTOM and kk == k:
        return "other", chip.offset
    if chip == graph.vertex("v", k):
        return None, Fraction(0)
    if chip == graph.vertex("w", k):
        return "same", graph.ell[k]
    raise ChipSolveError(k, "chip not on this loop")


def _ord_ok(s_in, s_out, tsegs, bsegs, ell, m, chip_edge, c):
    at_v = chip_edge is None and c == 0
    at_w = (chip_edge == "same" and c == ell) or (chip_edge == "other" and c == m)
    if s_in - tsegs[0][1] - bsegs[0][1] < (-1 if at_v else 0):
        return False
    if tsegs[-1][1] + bsegs[-1][1] - s_out < (-1 if at_w else 0):
        return False
    chip_at = None
    if chip_edge == "same" and 0 < c < ell:
        chip_at = ("top", c)
    elif chip_edge == "other" and 0 < c < m:
        chip_at = ("bottom", c)
    for tag, segs, length in (("top", tsegs, ell), ("bottom", bsegs, m)):
        for i, (off, slope) in enumerate(segs):
            end = segs[i + 1][0] if i + 1 < len(segs) else length
            if not 0 <= off < end <= length:
                return False
            if i:
                rise = slope - segs[i - 1][1]
                if rise > 0 and (rise > 1 or (tag, off) != chip_at):
                    return False
    return True


def solve_loop(graph, k, s_in, s_out, chip: GraphPoint):
    """Exact segments for the top and bottom edges of loop k."""
    ell, m = graph.ell[k], graph.m[k]
    chip_edge, c = _chip_location(graph, k, chip)
    for tsegs, bsegs in _loop_patterns(s_in, s_out, ell, m, chip_edge, c):
        tsegs = tuple((Fraction(o), s) for o, s in tsegs)
        bsegs = tuple((Fraction(o), s) for o, s in bsegs)
        t_inc = sum(
            s * ((tsegs[i + 1][0] if i + 1 < len(tsegs) else ell) - o)
            for i, (o, s) in enumerate(tsegs)
        )
        b_inc = sum(
            s * ((bsegs[i + 1][0] if i + 1 < len(bsegs) else m) - o)
            for i, (o, s) in enumerate(bsegs)
        )
        if t_inc != b_inc:
            continue
        if _ord_ok(s_in, s_out, tsegs, bsegs, ell, m, chip_edge, c):
            return tsegs, bsegs
    raise ChipSolveError(k, f"no profile for slopes ({s_in},{s_out})")


def build_phi(graph: ChainGraph, st: SlopeTable, chips, i) -> PLFunction:
    """phi_i: slope s_k[i] on each bridge, loop transitions using the
    solved chips, value 0 at the leftmost vertex.

    A bridge whose column drops by 1 (the left table and the right table
    disagree) bends down at its midpoint; any other mismatch is an error.
    """
    segs = {}
    first = 14 - st.genus
    for k in graph.bridge_indices:
        left = st.sp[k - 1][i] if k > first else st.seed[i]
        right = st.s[k][i] if k <= 13 else st.sp[13][i]
        if left == right:
            if left:
                segs[(BRIDGE, k)] = [(0, left)]
        elif right == left - 1:
            segs[(BRIDGE, k)] = [(0, left), (Fraction(graph.n[k], 2), right)]
        else:
            raise ChipSolveError(k, f"bridge slope jumps {left}->{right} in column {i}")
    for k in graph.loop_indices:
        tsegs, bsegs = solve_loop(graph, k, st.s[k][i], st.sp[k][i], chips[k])
        segs[(TOP, k)] = tsegs
        segs[(BOTTOM, k)] = bsegs
    return PLFunction(graph, 0, segs)
