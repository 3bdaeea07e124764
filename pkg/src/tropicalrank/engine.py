"""Block division, basis selection, and the left-to-right builder.

Given a slope table realized by chips, the engine drops one of the 21
pairwise sums by a case-dependent rule, walks the chain assigning one
function per loop and the rest to bridges while only ever raising
coefficients, and hands the result to the exact certificate check in
graph.py.  The bookkeeping lemmas are enforced loudly along the way,
but correctness is gated by the certificate alone.
"""

from __future__ import annotations

from fractions import Fraction

from .graph import (
    BOTTOM,
    BRIDGE,
    TOP,
    GraphPoint,
    IndependenceCertificate,
    PLFunction,
    _envelope_on_edge,
    certify_independence,
    make_admissible_chain,
    min_combination,
    pl_divisor,
)
from .ring import rat_str
from .slopes import (
    DECREASING_BRIDGE,
    DECREASING_LOOP,
    LINGERING,
    SWITCHING,
    SlopeTable,
    Tableau,
    build_phi,
    chip_solve,
    classify,
    slopes_from_tableau,
    solve_loop,
)


class EngineError(RuntimeError):
    pass


class LemmaViolation(EngineError):
    """A structural lemma failed; the input is outside the supported
    case list or there is a bug upstream."""


# -- blocks -----------------------------------------------------------------


class BlockPlan:
    """Loop indices z1 <= z2 splitting the chain into three blocks with
    target slopes 4, 3, 2.  A block may be empty (z1 == z2 or z2 == 13)."""

    __slots__ = ("genus", "z1", "z2", "first")

    def __init__(self, genus, z1, z2):
        first = 14 - genus
        if not first <= z1 <= z2 <= 13:
            raise EngineError(f"block bounds ({z1}, {z2}) out of range for genus {genus}")
        self.genus = genus
        self.z1 = z1
        self.z2 = z2
        self.first = first

    def target(self, k):
        """Slope of theta entering loop k."""
        if k <= self.z1:
            return 4
        return 3 if k <= self.z2 else 2

    def block_of(self, k):
        if k <= self.z1:
            return 1
        return 2 if k <= self.z2 else 3

    def target_of_block(self, b):
        return 5 - b

    def loops_in(self, b):
        lo = (self.first, self.z1 + 1, self.z2 + 1)[b - 1]
        hi = (self.z1, self.z2, 13)[b - 1]
        return list(range(lo, hi + 1))

    def to_json(self):
        return {"z1": self.z1, "z2": self.z2}

    def __repr__(self):
        return f"BlockPlan(genus={self.genus}, z1={self.z1}, z2={self.z2})"

    def __eq__(self, other):
        return (
            isinstance(other, BlockPlan)
            and (self.genus, self.z1, self.z2) == (other.genus, other.z1, other.z2)
        )


def choose_blocks(profile, st: SlopeTable) -> BlockPlan:
    """Block division for each case of the classification."""
    kind = profile.special_kind()

    def right_ramified_plan():
        k = min(k for k in st.loop_indices if st.sp[k][5] == 6)
        return BlockPlan(st.genus, 6 if k >= 7 else 7, max(k - 1, 7))

    def left_extra_plan():
        k = max(k for k in st.loop_indices if st.s[k][0] == -3)
        return BlockPlan(st.genus, min(k, 6), 6 if k >= 8 else 7)

    if kind is None:
        if st.sp[13][5] == 6:
            return right_ramified_plan()
        if st.seed[0] == -3:
            return left_extra_plan()
        raise EngineError("no special loop or bridge and no extra ramification")
    ell = profile.special[1]
    if kind == LINGERING:
        return BlockPlan(st.genus, min(6, ell), max(7, ell))
    if kind == SWITCHING:
        z1 = ell if ell < 6 else 5 if ell == 6 else 6
        z2 = 7 if ell < 6 else ell
        return BlockPlan(st.genus, z1, z2)
    if kind == DECREASING_BRIDGE:
        if ell >= 8 and st.sp[ell - 1][5] == 6:
            return right_ramified_plan()
        if ell <= 7 and st.s[ell][0] == -3:
            return left_extra_plan()
        return BlockPlan(st.genus, min(ell - 1, 6), ell - 1)
    if kind == DECREASING_LOOP:
        if ell >= 8 and st.s[ell][5] == 6:
            return right_ramified_plan()
        if ell <= 7 and st.sp[ell][0] == -3:
            return left_extra_plan()
        z1 = ell if ell < 6 else 5 if ell == 6 else 6
        z2 = ell - 1 if ell > 8 else 8 if ell == 8 else 7
        return BlockPlan(st.genus, z1, z2)
    raise EngineError(f"unhandled profile kind {kind!r}")


# -- pairs and permissibility ------------------------------------------------


class Permissibility:
    __slots__ = ("permissible", "new", "departing")

    def __init__(self, permissible, new, departing):
        self.permissible = permissible
        self.new = new
        self.departing = departing

    @property
    def kind(self):
        if not self.permissible:
            return "not permissible"
        if self.new and self.departing:
            return "new and departing"
        if self.new:
            return "new"
        if self.departing:
            return "departing"
        return "ordinary"

    def __repr__(self):
        return f"<{self.kind}>"


def permissible(s_in, s_out, target) -> Permissibility:
    ok = s_in <= target <= s_out
    return Permissibility(ok, ok and s_in <= target - 1, ok and s_out >= target + 1)


def _column_schedules(st: SlopeTable, switching=None):
    """Bridge-slope schedule per generator label.

    Plain tables use labels "0".."5".  A switching witness at (ell, h)
    relabels columns h, h+1 as "zh", "z(h+1)" and adds the spliced
    generator "infh" that follows column h up to the loop and column
    h+1 after it.
    """
    bridges = list(range(14 - st.genus, 15))
    cols = {i: {k: st.bridge_slopes(k)[i] for k in bridges} for i in range(6)}
    if switching is None:
        return {str(i): cols[i] for i in range(6)}
    ell, h = switching["loop"], switching["index"]
    scheds = {str(i): cols[i] for i in range(6) if i not in (h, h + 1)}
    scheds[f"z{h}"] = cols[h]
    scheds[f"z{h + 1}"] = cols[h + 1]
    scheds[f"inf{h}"] = {k: cols[h][k] if k <= ell else cols[h + 1][k] for k in bridges}
    return scheds


def _label_order(scheds):
    def key(fid):
        if fid.isdigit():
            return (0, int(fid))
        return (1 if fid[0] == "z" else 2, int(fid.lstrip("zinf") or 0))

    return {fid: i for i, fid in enumerate(sorted(scheds, key=key))}


def pair_key(order, a, b):
    return tuple(sorted((a, b), key=order.__getitem__))


def pair_name(key):
    a, b = key
    if a.isdigit() and b.isdigit():
        return f"phi_{a}{b}"
    return f"phi_{a}+{b}"


class PairTable:
    """All pairwise sums of the generators, with slope schedules."""

    def __init__(self, st, plan, scheds):
        self.st = st
        self.plan = plan
        self.scheds = scheds
        self.order = _label_order(scheds)
        labels = sorted(scheds, key=self.order.__getitem__)
        self.keys = []
        for i, a in enumerate(labels):
            for b in labels[i:]:
                self.keys.append((a, b))

    def sort(self, keys):
        return sorted(keys, key=lambda p: (self.order[p[0]], self.order[p[1]]))

    def slope(self, key, k):
        a, b = key
        return self.scheds[a][k] + self.scheds[b][k]

    def perm(self, key, k) -> Permissibility:
        return permissible(self.slope(key, k), self.slope(key, k + 1), self.plan.target(k))

    def permissible_on_block(self, key, b):
        loops = self.plan.loops_in(b)
        if loops:
            return any(self.perm(key, k).permissible for k in loops)
        # empty block: by convention the functions whose slope on the
        # transition bridge equals the block's target slope
        z = (self.plan.first - 1, self.plan.z1, self.plan.z2)[b - 1]
        return self.slope(key, z + 1) == self.plan.target_of_block(b)

    def block_members(self, keys, b):
        return [p for p in keys if self.permissible_on_block(p, b)]


# -- basis selection ----------------------------------------------------------


class BasisSelection:
    def __init__(self, retained, omitted, rule, checklist, block_counts, *,
                 replaced=None, dichotomy=None):
        self.retained = list(retained)
        self.omitted = list(omitted)
        self.rule = rule
        self.checklist = dict(checklist)
        self.block_counts = dict(block_counts)
        self.replaced = replaced
        self.dichotomy = dichotomy

    def to_json(self):
        out = {
            "retained": [pair_name(p) for p in self.retained],
            "omitted": [pair_name(p) for p in self.omitted],
            "rule": self.rule,
            "conditions": self.checklist,
            "block_counts": {str(b): c for b, c in sorted(self.block_counts.items())},
        }
        if self.replaced:
            out["replaced"] = {
                "removed": pair_name(self.replaced[0]),
                "added": pair_name(self.replaced[1]),
            }
        if self.dichotomy:
            out["dichotomy"] = self.dichotomy
        return out


def _extra_ramification(profile, st):
    """Whether the table carries slope 6 on the right or -3 on the left,
    which overrides the usual omission rule."""
    kind = profile.special_kind()
    if kind is None:
        return st.sp[13][5] == 6 or st.seed[0] == -3
    ell = profile.special[1]
    if kind == DECREASING_BRIDGE:
        return (ell >= 8 and st.sp[ell - 1][5] == 6) or (ell <= 7 and st.s[ell][0] == -3)
    if kind == DECREASING_LOOP:
        return (ell >= 8 and st.s[ell][5] == 6) or (ell <= 7 and st.sp[ell][0] == -3)
    return False


def select_basis(profile, st, plan, switching=None):
    """Drop one pairwise sum (and in the switching case swap one for an
    inf-pair), then verify the bookkeeping conditions."""
    kind = profile.special_kind()
    scheds = _column_schedules(st, switching if kind == SWITCHING else None)
    table = PairTable(st, plan, scheds)
    keys = list(table.keys)
    replaced = None
    dichotomy = None

    def block_candidates(b, pool=None):
        cands = table.block_members(pool if pool is not None else keys, b)
        if not cands:
            raise EngineError(f"no omission candidate permissible on block {b}")
        return table.sort(cands)

    if kind == SWITCHING:
        ell, h = switching["loop"], switching["index"]
        plain = [p for p in keys if p[0].isdigit() and p[1].isdigit()]
        block = 2 if ell <= 7 and ell != 6 else (1 if ell == 6 else 3)
        psi = block_candidates(block, plain)[0]
        rule = f"switching: plain pair on block {block}"
        retained = [p for p in keys if p != psi]
        # swap in the inf-pair when one partner reaches one past the
        # target out of the switching loop
        zh, inf = f"z{h}", f"inf{h}"
        tgt = plan.target(ell) + 1
        partner = [
            fid
            for fid in scheds
            if fid != inf and scheds[f"z{h + 1}"][ell + 1] + scheds[fid][ell + 1] == tgt
        ]
        if partner:
            old = pair_key(table.order, zh, partner[0])
            new = pair_key(table.order, inf, partner[0])
            if old in retained:
                retained[retained.index(old)] = new
                replaced = (old, new)
                rule += f"; swapped {pair_name(old)} for {pair_name(new)}"
    elif kind in (None, LINGERING) or _extra_ramification(profile, st):
        if kind == LINGERING and not _extra_ramification(profile, st):
            ell = profile.special[1]
            block = 2 if ell <= 7 else 3
            psi = block_candidates(block)[0]
            rule = f"lingering: pair on block {block}"
        else:
            psi = block_candidates(2)[0]
            rule = "ramified: pair on block 2"
        retained = [p for p in keys if p != psi]
    else:
        ell = profile.special[1]
        h = profile.index_of_special()
        if kind == DECREASING_BRIDGE:
            vec, tk = st.sp[ell - 1], ell - 1
            if ell in (5, 6):
                want = plan.target(tk) - 1
                ii = [i for i in range(6) if i != h and vec[h] + vec[i] == want]
                if len(ii) != 1:
                    raise LemmaViolation(
                        f"decreasing bridge at {ell}: expected one index with "
                        f"slope sum {want}, found {ii}"
                    )
                psi = pair_key(table.order, str(h), str(ii[0]))
                rule = f"decreasing bridge (l={ell}): omit {pair_name(psi)}"
                dichotomy = "small-l"
            else:
                psi, rule, dichotomy = _depart_dichotomy(
                    table, vec, h, plan.target(tk), ell, "bridge"
                )
        else:
            vec = st.s[ell]
            tk = ell if (ell < 6 or ell in (7, 8)) else ell - 1
            psi, rule, dichotomy = _depart_dichotomy(
                table, vec, h, plan.target(tk), ell, "loop"
            )
        retained = [p for p in keys if p != psi]

    counts = {}
    for b in (1, 2, 3):
        counts[b] = len(table.block_members(retained, b))
        expected = len(plan.loops_in(b)) + 1
        if counts[b] != expected:
            raise EngineError(
                f"block {b} has {counts[b]} permissible functions, needs {expected}"
            )
    checklist = _verify_conditions(profile, st, plan, table, retained, switching)
    return BasisSelection(
        retained, [psi], rule, checklist, counts, replaced=replaced, dichotomy=dichotomy
    )


def _depart_dichotomy(table, vec, h, target, ell, what):
    """Omission for the non-ramified decreasing cases: exactly one of
    the two clauses must single out the dropped pair."""
    ii = [i for i in range(6) if i != h and vec[h] + vec[i] == target]
    alt = 2 * vec[h] == target + 1
    if len(ii) > 1:
        raise LemmaViolation(f"decreasing {what} at {ell}: non-unique index {ii}")
    if ii and alt:
        raise LemmaViolation(f"decreasing {what} at {ell}: both dichotomy clauses hold")
    if ii:
        psi = pair_key(table.order, str(h), str(ii[0]))
        return psi, f"decreasing {what} (l={ell}): omit {pair_name(psi)}", "pair"
    if alt:
        psi = pair_key(table.order, str(h), str(h))
        return psi, f"decreasing {what} (l={ell}): omit {pair_name(psi)}", "double"
    raise LemmaViolation(f"decreasing {what} at {ell}: neither dichotomy clause holds")


def _verify_conditions(profile, st, plan, table, retained, switching):
    """Conditions (i)-(vi) on the retained set, reported as a checklist."""
    kind = profile.special_kind()
    checks = {}
    # (i) nothing retained may straddle the special loop's crossing
    ok = True
    if kind == DECREASING_LOOP:
        ell = profile.special[1]
        h_minus = profile.index_of_special()
        h_plus = st.incremented[ell]
        if h_plus is not None:
            p = pair_key(table.order, str(h_plus), str(h_minus))
            ok = p not in retained or not table.perm(p, ell).permissible
    if kind == SWITCHING:
        ell, h = switching["loop"], switching["index"]
        for fid in table.scheds:
            a = pair_key(table.order, f"z{h}", fid)
            b = pair_key(table.order, f"z{h + 1}", fid)
            if a in retained and b in retained:
                if table.perm(a, ell).permissible and table.perm(b, ell).permissible:
                    ok = False
    checks["i"] = ok
    # (ii) per-block counts (also enforced with a hard error upstream)
    checks["ii"] = all(
        len(table.block_members(retained, b)) == len(plan.loops_in(b)) + 1 for b in (1, 2, 3)
    )
    # (iii) each pair permissible on at most one block, counting loops only
    checks["iii"] = all(
        sum(
            1
            for b in (1, 2, 3)
            if any(table.perm(p, k).permissible for k in plan.loops_in(b))
        )
        <= 1
        for p in retained
    )
    # (iv) the positive-multiplicity loop is last in its block
    if kind in (LINGERING, SWITCHING, DECREASING_LOOP):
        ell = profile.special[1]
        checks["iv"] = ell in (plan.z1, plan.z2, 13)
    else:
        checks["iv"] = True
    # (v) on a decreasing loop no retained pair with the dropping index
    if kind == DECREASING_LOOP:
        ell = profile.special[1]
        h = str(profile.index_of_special())
        checks["v"] = not any(h in p and table.perm(p, ell).permissible for p in retained)
    else:
        checks["v"] = True
    # (vi) a decreasing bridge sits between blocks, or no retained pair
    # with the dropping index is permissible on the loop before it
    if kind == DECREASING_BRIDGE:
        ell = profile.special[1]
        h = str(profile.index_of_special())
        checks["vi"] = ell in (plan.z1 + 1, plan.z2 + 1) or not any(
            h in p and table.perm(p, ell - 1).permissible for p in retained
        )
    else:
        checks["vi"] = True
    bad = [name for name, good in checks.items() if not good]
    if bad:
        raise LemmaViolation(f"conditions {bad} fail for this basis")
    return checks


# -- exact PL helpers ---------------------------------------------------------


def _values_at(left_value, segs, offs):
    """Values of a PL profile at the sorted offsets."""
    out = []
    val = left_value
    ptr = 0
    prev = Fraction(0)
    for x in offs:
        while ptr + 1 < len(segs) and segs[ptr + 1][0] <= x:
            nxt = segs[ptr + 1][0]
            val += segs[ptr][1] * (nxt - prev)
            prev = nxt
            ptr += 1
        out.append(val + segs[ptr][1] * (x - prev))
    return out


def _gap_range_on_edge(graph, edge, f, others):
    """Exact (min, max) of min(others) - f over the edge."""
    env_segs, _ = _envelope_on_edge(graph, others, edge)
    length = graph.edge_length(edge)
    offs = sorted(
        {Fraction(0), Fraction(length)}
        | {o for o, _ in env_segs}
        | {o for o, _ in f.edge_segments(edge)}
    )
    ev = _values_at(min(o.edge_left_value(edge) for o in others), env_segs, offs)
    fv = _values_at(f.edge_left_value(edge), f.edge_segments(edge), offs)
    gaps = [a - b for a, b in zip(ev, fv)]
    return min(gaps), max(gaps)


def pl_min_value(f: PLFunction):
    """Global minimum of a PL function, exact."""
    best = None
    for edge in f.graph.edges():
        segs = f.edge_segments(edge)
        length = f.graph.edge_length(edge)
        offs = sorted({Fraction(0), Fraction(length)} | {o for o, _ in segs})
        for v in _values_at(f.edge_left_value(edge), segs, offs):
            if best is None or v < best:
                best = v
    return best


def best_approximation(theta: PLFunction, funcs):
    """Best approximation of theta from above by tropical combinations
    of funcs: min over phi of (phi - min(phi - theta))."""
    funcs = list(funcs)
    cs = [pl_min_value(phi - theta) for phi in funcs]
    return min_combination(funcs, [-c for c in cs]), cs


# -- the builder --------------------------------------------------------------


class AssignmentLog:
    def __init__(self):
        self.entries = []

    def note(self, **kwargs):
        self.entries.append(kwargs)

    def loop_assignments(self):
        return {
            e["index"]: e["function"]
            for e in self.entries
            if e["event"] == "assign" and e["place"] == "loop"
        }

    def bridge_assignments(self):
        out = {}
        for e in self.entries:
            if e["event"] == "assign" and e["place"] == "bridge":
                out.setdefault(e["index"], []).append(e["function"])
        return out

    def to_json(self):
        return list(self.entries)


class _Builder:
    def __init__(self, graph, plan, table, funcs, soft_loops, dec_bridge):
        self.graph = graph
        self.plan = plan
        self.table = table
        self.funcs = funcs
        self.soft_loops = soft_loops
        self.dec_bridge = dec_bridge
        self.coeff = {p: None for p in funcs}
        self.shifted = {}
        self.assigned = {}
        self.log = AssignmentLog()

    # -- bookkeeping --------------------------------------------------------

    def set_coeff(self, p, c, reason):
        old = self.coeff[p]
        if old is not None and c < old:
            raise LemmaViolation(
                f"{pair_name(p)} would move down ({old} -> {c}) during {reason}"
            )
        if old == c:
            return
        self.coeff[p] = c
        self.shifted[p] = self.funcs[p] + c

    def assign(self, p, place, index, reason):
        if p in self.assigned:
            raise LemmaViolation(f"{pair_name(p)} assigned twice")
        if self.coeff[p] is None:
            raise LemmaViolation(f"{pair_name(p)} assigned with no coefficient")
        self.assigned[p] = (place, index)
        self.log.note(
            event="assign",
            place=place,
            index=index,
            function=pair_name(p),
            coefficient=rat_str(self.coeff[p]),
            reason=reason,
        )

    def value(self, p, point):
        return self.shifted[p].eval(point)

    def theta_at(self, point):
        return min(f.eval(point) for f in self.shifted.values())

    def finite(self):
        return [p for p, c in self.coeff.items() if c is not None]

    def unassigned_permissible(self, k):
        return self.table.sort(
            p
            for p in self.funcs
            if p not in self.assigned and self.table.perm(p, k).permissible
        )

    # -- stages -------------------------------------------------------------

    def start(self):
        g = self.graph
        first = self.plan.first
        n = Fraction(g.n[first])
        t = self.plan.target(first)
        hi = self.table.sort(p for p in self.funcs if self.table.slope(p, first) > t)
        hi.sort(key=lambda p: -self.table.slope(p, first))
        if not hi:
            raise LemmaViolation("no function above the target slope on the first bridge")
        slopes = [self.table.slope(p, first) for p in hi]
        if len(set(slopes)) != len(slopes):
            raise LemmaViolation(f"first-bridge slopes not distinct: {slopes}")
        q = len(hi)
        self.set_coeff(hi[0], Fraction(0), "first bridge")
        self.assign(hi[0], "bridge", first, "first bridge")
        for j in range(1, q):
            x = GraphPoint(g, (BRIDGE, first), n * j / (q + 1))
            c = self.value(hi[j - 1], x) - self.funcs[hi[j]].eval(x)
            self.set_coeff(hi[j], c, "first bridge")
            self.assign(hi[j], "bridge", first, "first bridge")
        x = GraphPoint(g, (BRIDGE, first), n * q / (q + 1))
        anchor_val = self.value(hi[-1], x)
        for p in self.table.sort(
            p
            for p in self.funcs
            if p not in self.assigned
            and self.table.slope(p, first) == t
            and self.table.perm(p, first).permissible
        ):
            self.set_coeff(p, anchor_val - self.funcs[p].eval(x), "first bridge init")

    def process_loop(self, k):
        g = self.graph
        perms = self.unassigned_permissible(k)
        self.log.note(
            event="loop-entry",
            index=k,
            unassigned_permissible=[pair_name(p) for p in perms],
        )
        if len(perms) < 2:
            raise LemmaViolation(f"loop {k}: only {len(perms)} unassigned permissible")
        w = g.vertex("w", k)
        finite = [p for p in perms if self.coeff[p] is not None]
        if not finite:
            raise LemmaViolation(f"loop {k}: no anchored permissible function")
        anchor = max(
            finite, key=lambda p: (self.value(p, w), [-self.table.order[f] for f in p])
        )
        aval = self.value(anchor, w)
        for p in perms:
            if p is not anchor:
                self.set_coeff(p, aval - self.funcs[p].eval(w), f"align at w_{k}")
        departing = [p for p in perms if self.table.perm(p, k).departing]
        if len(departing) > 1:
            raise LemmaViolation(
                f"loop {k}: several departing functions {[pair_name(p) for p in departing]}"
            )
        m = Fraction(g.m[k])
        loop_edges = [(TOP, k), (BOTTOM, k)]
        if departing:
            d = departing[0]
            others = [self.shifted[p] for p in self.finite() if p != d]
            worst = min(
                _gap_range_on_edge(g, e, self.shifted[d], others)[0] for e in loop_edges
            )
            needed = -worst
            dist = m / 8 if needed <= 0 else needed + m / 8
            if dist >= Fraction(g.n[k + 1]) / 4:
                raise LemmaViolation(f"loop {k}: departing distance {dist} too large")
            x = GraphPoint(g, (BRIDGE, k + 1), dist)
            dval = self.value(d, x)
            for p in perms:
                if p is not d:
                    self.set_coeff(p, dval - self.funcs[p].eval(x), f"depart at loop {k}")
            self.assign(d, "loop", k, "departing")
            return
        if len(perms) > 3:
            raise LemmaViolation(f"loop {k}: {len(perms)} non-departing permissible")
        margins = {}
        for p in perms:
            others = [self.shifted[q] for q in self.finite() if q != p]
            margins[p] = max(
                _gap_range_on_edge(g, e, self.shifted[p], others)[1] for e in loop_edges
            )
        winners = [p for p in perms if margins[p] > 0]
        if not winners:
            raise LemmaViolation(
                f"loop {k}: no strict minimizer among {[pair_name(p) for p in perms]}"
            )
        winner = max(
            winners, key=lambda p: (margins[p], [-self.table.order[f] for f in p])
        )
        if k in self.soft_loops:
            bump = min(m / 8, margins[winner] / 2)
            reason = "soft bump"
        elif margins[winner] > m / 3:
            bump = m / 3
            reason = "three-shape"
        else:
            bump = margins[winner] / 2
            reason = "three-shape (reduced)"
        self.set_coeff(winner, self.coeff[winner] + bump, reason)
        self.assign(winner, "loop", k, reason)

    def _strictly_min(self, p, point):
        v = self.value(p, point)
        return all(self.shifted[q].eval(point) > v for q in self.finite() if q != p)

    def _takeover(self, b, bridge_k, probe_off):
        """Assign block b's last unassigned permissible function to the
        outgoing bridge, verifying it is strictly minimal there."""
        members = [
            p
            for p in self.table.block_members(list(self.funcs), b)
            if p not in self.assigned
        ]
        if len(members) != 1:
            raise LemmaViolation(
                f"block {b} ends with {len(members)} unassigned permissible functions"
            )
        q = members[0]
        if self.coeff[q] is None:
            raise LemmaViolation(f"{pair_name(q)} reached its bridge with no coefficient")
        probe = GraphPoint(self.graph, (BRIDGE, bridge_k), probe_off)
        if not self._strictly_min(q, probe):
            raise LemmaViolation(
                f"{pair_name(q)} is not minimal at the start of bridge {bridge_k}"
            )
        self.assign(q, "bridge", bridge_k, "block leftover")
        return q

    def transition(self, zb):
        g = self.graph
        b = self.plan.block_of(zb)
        bridge_k = zb + 1
        n = Fraction(g.n[bridge_k])
        bent = bridge_k == self.dec_bridge
        self._takeover(b, bridge_k, n / 8)
        next_b = b + 1
        if next_b < 3 and not self.plan.loops_in(next_b):
            pts = (n * 5 / 8, n * 3 / 4) if bent else (n / 3, n * 2 / 3)
            x1 = GraphPoint(g, (BRIDGE, bridge_k), pts[0])
            members = [
                p
                for p in self.table.block_members(list(self.funcs), next_b)
                if p not in self.assigned
            ]
            if len(members) != 1:
                raise LemmaViolation(
                    f"empty block {next_b} needs exactly one function, got {len(members)}"
                )
            mem = members[0]
            self.set_coeff(mem, self.theta_at(x1) - self.funcs[mem].eval(x1), "empty block")
            self.assign(mem, "bridge", bridge_k, "empty block")
            init_x = GraphPoint(g, (BRIDGE, bridge_k), pts[1])
            target_b = next_b + 1
        else:
            init_x = GraphPoint(g, (BRIDGE, bridge_k), n * 5 / 8 if bent else n / 2)
            target_b = next_b
        k1 = self.plan.loops_in(target_b)[0]
        t = self.plan.target(k1)
        tv = self.theta_at(init_x)
        for p in self.table.sort(
            p
            for p in self.funcs
            if self.coeff[p] is None
            and self.table.slope(p, k1) == t
            and self.table.perm(p, k1).permissible
        ):
            self.set_coeff(p, tv - self.funcs[p].eval(init_x), f"block {target_b} init")

    def finish(self):
        g = self.graph
        n = Fraction(g.n[14])
        b = self.plan.block_of(13)
        self._takeover(b, 14, n / 8)
        x = n / 2
        if b < 3:
            members = [
                p
                for p in self.table.block_members(list(self.funcs), 3)
                if p not in self.assigned
            ]
            if len(members) != 1:
                raise LemmaViolation("empty third block needs exactly one function")
            mem = members[0]
            pt = GraphPoint(g, (BRIDGE, 14), x)
            self.set_coeff(mem, self.theta_at(pt) - self.funcs[mem].eval(pt), "empty block")
            self.assign(mem, "bridge", 14, "empty block")
            x = (x + n) / 2
        lows = [p for p in self.funcs if p not in self.assigned]
        for p in lows:
            if self.coeff[p] is not None:
                raise LemmaViolation(f"{pair_name(p)} left over with a coefficient")
        lows.sort(key=lambda p: (-self.table.slope(p, 14), [self.table.order[f] for f in p]))
        for p in lows:
            pt = GraphPoint(g, (BRIDGE, 14), x)
            self.set_coeff(p, self.theta_at(pt) - self.funcs[p].eval(pt), "last bridge")
            self.assign(p, "bridge", 14, "last bridge")
            x = (x + n) / 2

    def run(self):
        self.start()
        for k in self.graph.loop_indices:
            self.process_loop(k)
            if k < 13 and self.plan.block_of(k + 1) != self.plan.block_of(k):
                self.transition(k)
        self.finish()
        missing = [p for p, c in self.coeff.items() if c is None]
        if missing:
            raise LemmaViolation(f"unset coefficients: {[pair_name(p) for p in missing]}")
        return self.coeff, self.log, self.assigned


def run_builder(graph, plan, table, funcs, soft_loops=frozenset(), dec_bridge=None):
    """Left-to-right coefficient assignment.

    Returns (coefficients, log, assigned) where assigned maps each pair
    to its ("loop"|"bridge", index) place.
    """
    return _Builder(graph, plan, table, funcs, soft_loops, dec_bridge).run()


# -- case orchestration -------------------------------------------------------


def _spliced_phi(graph, st, chips, h, ell):
    """The switching generator: column h up to loop ell, then column
    h+1, with the crossing on loop ell realized by its pinned chip."""
    segs = {}
    first = 14 - st.genus
    for k in graph.bridge_indices:
        col = h if k <= ell else h + 1
        left = st.sp[k - 1][col] if k > first else st.seed[col]
        right = st.s[k][col] if k <= 13 else st.sp[13][col]
        if left != right:
            raise EngineError(f"spliced schedule jumps {left}->{right} on bridge {k}")
        if left:
            segs[(BRIDGE, k)] = [(0, left)]
    for k in graph.loop_indices:
        if k < ell:
            s_in, s_out = st.s[k][h], st.sp[k][h]
        elif k == ell:
            s_in, s_out = st.s[k][h], st.s[k][h] + 1
        else:
            s_in, s_out = st.s[k][h + 1], st.sp[k][h + 1]
        tsegs, bsegs = solve_loop(graph, k, s_in, s_out, chips[k])
        segs[(TOP, k)] = tsegs
        segs[(BOTTOM, k)] = bsegs
    return PLFunction(graph, 0, segs)


class CaseResult:
    """Everything prove_case established about one input."""

    def __init__(self, *, genus, source, kind, special, plan, selection, log,
                 coefficients, certificate, checks, divisor, theta, names):
        self.genus = genus
        self.source = source
        self.kind = kind
        self.special = special
        self.plan = plan
        self.selection = selection
        self.log = log
        self.coefficients = coefficients
        self.certificate = certificate
        self.checks = checks
        self.divisor = divisor
        self.theta = theta
        self.names = names

    @property
    def ok(self):
        return isinstance(self.certificate, IndependenceCertificate) and all(
            v is not False for v in self.checks.values()
        )

    def to_json(self):
        return {
            "genus": self.genus,
            "input": self.source,
            "kind": self.kind or "vertex-avoiding",
            "special": self.special,
            "blocks": self.plan.to_json(),
            "basis": self.selection.to_json(),
            "assignments": self.log.to_json(),
            "coefficients": {
                self.names[p]: rat_str(c)
                for p, c in sorted(self.coefficients.items(), key=lambda t: self.names[t[0]])
            },
            "certificate": self.certificate.to_json() if self.certificate else None,
            "certified": self.ok,
            "checks": self.checks,
            "break_divisor": self.divisor.to_json(),
        }


def _localization_check(graph, shifted, names, assigned):
    """Each assigned function must leave the minimum for good once the
    bridge after its assignment ends."""
    order = graph._edge_order
    top_order = max(order.values())
    limit = {}
    for p, (place, k) in assigned.items():
        limit[p] = order[(BRIDGE, k + 1)] if k + 1 <= 14 else top_order
    keys = list(shifted)
    funcs = [shifted[p] for p in keys]
    violations = []
    for edge in graph.edges():
        eo = order[edge]
        if all(eo <= limit[p] for p in keys):
            continue
        _, regions = _envelope_on_edge(graph, funcs, edge)
        for start, end, active in regions:
            if start >= end:
                continue
            for idx in active:
                p = keys[idx]
                if eo > limit[p]:
                    violations.append((names[p], f"{edge[0]}:{edge[1]}"))
    return sorted(set(violations))


def prove_case(case, scale_base=10000, graph=None, switching=None) -> CaseResult:
    """Run the whole pipeline on a tableau or slope table and certify
    that theta is a tropical combination of 20 independent pairwise
    sums."""
    if isinstance(case, Tableau):
        st = slopes_from_tableau(case)
        source = {"tableau": case.to_json()}
    elif isinstance(case, SlopeTable):
        st = case
        source = {
            "genus": st.genus,
            "seed": list(st.seed),
            "slopes": {str(k): list(st.s[k]) for k in st.loop_indices},
        }
    else:
        raise TypeError(f"cannot prove {type(case).__name__}")
    profile = classify(st, switching)
    kind = profile.special_kind()
    if graph is None:
        graph = make_admissible_chain(st.genus, scale_base)
    D, chips = chip_solve(graph, st, switching=switching if kind == SWITCHING else None)
    plan = choose_blocks(profile, st)
    selection = select_basis(profile, st, plan, switching)
    scheds = _column_schedules(st, switching if kind == SWITCHING else None)
    table = PairTable(st, plan, scheds)
    if kind == SWITCHING:
        ell, h = switching["loop"], switching["index"]
        singles = {
            str(i): build_phi(graph, st, chips, i) for i in range(6) if i not in (h, h + 1)
        }
        singles[f"z{h}"] = build_phi(graph, st, chips, h)
        singles[f"z{h + 1}"] = build_phi(graph, st, chips, h + 1)
        singles[f"inf{h}"] = _spliced_phi(graph, st, chips, h, ell)
    else:
        singles = {str(i): build_phi(graph, st, chips, i) for i in range(6)}
    funcs = {key: singles[key[0]] + singles[key[1]] for key in selection.retained}
    soft = set()
    if kind in (LINGERING, SWITCHING):
        soft.add(profile.special[1])
    dec_bridge = profile.special[1] if kind == DECREASING_BRIDGE else None
    coeffs, log, assigned = run_builder(graph, plan, table, funcs, soft, dec_bridge)
    names = {p: pair_name(p) for p in funcs}
    keys = table.sort(funcs)
    cert = certify_independence(
        [funcs[p] for p in keys], [coeffs[p] for p in keys], ids=[names[p] for p in keys]
    )
    certified = isinstance(cert, IndependenceCertificate)
    checks = {"certified": certified}
    shifted = {p: funcs[p] + coeffs[p] for p in keys}
    bad = _localization_check(graph, shifted, names, assigned)
    checks["assignment_localized"] = not bad
    if bad:
        checks["localization_violations"] = bad
    theta = min_combination([funcs[p] for p in keys], [coeffs[p] for p in keys])
    if kind == SWITCHING:
        checks.update(
            _switching_checks(graph, st, table, singles, funcs, coeffs, theta, switching)
        )
    return CaseResult(
        genus=st.genus,
        source=source,
        kind=kind,
        special=None if kind is None else {"kind": kind, "index": profile.special[1]},
        plan=plan,
        selection=selection,
        log=log,
        coefficients=coeffs,
        certificate=cert if certified else None,
        checks=checks,
        divisor=D,
        theta=theta,
        names=names,
    )


def theta_divisor(D, theta):
    """2D + div(theta), the effective divisor the certificate lives on."""
    return D + D + pl_divisor(theta)


# -- switching: best approximation and the replacement set --------------------


def _zero_intervals(graph, diff):
    """Per edge, maximal intervals where the nonnegative PL function
    diff vanishes, as (start, end) with start <= end."""
    zeros = {}
    for edge in graph.edges():
        segs = diff.edge_segments(edge)
        length = graph.edge_length(edge)
        offs = sorted({Fraction(0), Fraction(length)} | {o for o, _ in segs})
        vals = _values_at(diff.edge_left_value(edge), segs, offs)
        spans = []
        prev_zero = False
        for x, v in zip(offs, vals):
            if v != 0:
                prev_zero = False
                continue
            if prev_zero:
                spans[-1] = (spans[-1][0], x)
            else:
                spans.append((x, x))
            prev_zero = True
        if spans:
            zeros[edge] = spans
    return zeros


def _regions_of(graph, shifted_list, keys):
    """Unique-minimum intervals per function key per edge."""
    out = {p: {} for p in keys}
    for edge in graph.edges():
        _, regions = _envelope_on_edge(graph, shifted_list, edge)
        for start, end, active in regions:
            if len(active) == 1 and start < end:
                (i,) = active
                out[keys[i]].setdefault(edge, []).append((start, end))
    return out


def _overlaps(zeros, regions):
    for edge, spans in zeros.items():
        for zs, ze in spans:
            for rs, re in regions.get(edge, []):
                if ze > rs and zs < re:
                    return True
    return False


def _left_of_loop(graph, zeros, ell):
    """Whether any zero point lies strictly left of v_ell."""
    border = graph._edge_order[(TOP, ell)]
    for edge, spans in zeros.items():
        if graph._edge_order[edge] >= border:
            continue
        length = graph.edge_length(edge)
        for zs, _ in spans:
            if edge == (BRIDGE, ell) and zs >= length:
                continue
            return True
    return False


def _switching_checks(graph, st, table, singles, funcs, coeffs, theta, switching):
    """Replace the z-sector by gluings of the two crossings and verify
    the best approximation still reproduces theta independently."""
    ell, h = switching["loop"], switching["index"]
    zh, zh1, inf = f"z{h}", f"z{h + 1}", f"inf{h}"
    zf, z1f, him = singles[zh], singles[zh1], singles[inf]
    cC = (zf - z1f).eval(graph.vertex("w", ell))
    phi_c = min_combination([zf, z1f], [0, cC])
    dA = (him - zf).eval(GraphPoint(graph, (BRIDGE, ell + 1), Fraction(graph.n[ell + 1], 2)))
    phi_a = min_combination([zf, him], [0, -dA])
    dB = (z1f - him).eval(GraphPoint(graph, (BRIDGE, ell), Fraction(graph.n[ell], 2)))
    phi_b = min_combination([z1f, him], [0, dB])

    keys = table.sort(funcs)
    shifted = [funcs[p] + coeffs[p] for p in keys]
    regions = _regions_of(graph, shifted, keys)

    def approx_zeros(phi):
        c = pl_min_value(phi - theta)
        return _zero_intervals(graph, (phi - c) - theta)

    plain = sorted((fid for fid in singles if fid.isdigit()), key=int)
    T = [(pair_name(key), funcs[key]) for key in keys if key[0].isdigit() and key[1].isdigit()]
    for j in plain:
        fj = singles[j]
        zero = approx_zeros(phi_c + fj)
        key_h = pair_key(table.order, zh, j)
        if key_h not in funcs:
            key_h = pair_key(table.order, inf, j)
        key_h1 = pair_key(table.order, zh1, j)
        on_h = _overlaps(zero, regions.get(key_h, {}))
        on_h1 = _overlaps(zero, regions.get(key_h1, {}))
        if on_h and on_h1:
            raise LemmaViolation(
                f"best approximation of phi_C+phi_{j} meets both crossing regions"
            )
        if on_h:
            T.append((f"phi_B+{j}", phi_b + fj))
            T.append((f"phi_C+{j}", phi_c + fj))
        elif on_h1:
            T.append((f"phi_A+{j}", phi_a + fj))
            T.append((f"phi_C+{j}", phi_c + fj))
        else:
            raise LemmaViolation(
                f"best approximation of phi_C+phi_{j} misses both crossing regions"
            )
    T.append(("phi_C+C", phi_c + phi_c))
    if _left_of_loop(graph, approx_zeros(phi_c + phi_c), ell):
        T.append(("phi_A+C", phi_a + phi_c))
        if _left_of_loop(graph, approx_zeros(phi_a + phi_c), ell):
            T.append(("phi_A+A", phi_a + phi_a))
        else:
            T.append(("phi_A+B", phi_a + phi_b))
    else:
        T.append(("phi_B+C", phi_b + phi_c))
        if _left_of_loop(graph, approx_zeros(phi_b + phi_c), ell):
            T.append(("phi_A+B", phi_a + phi_b))
        else:
            T.append(("phi_B+B", phi_b + phi_b))
    if len(T) != 20:
        raise LemmaViolation(f"replacement set has {len(T)} functions, expected 20")
    t_funcs = [f for _, f in T]
    approx, cs = best_approximation(theta, t_funcs)
    cert = certify_independence(t_funcs, [-c for c in cs], ids=[name for name, _ in T])
    return {
        "replacement_theta_equal": approx == theta,
        "replacement_certified": isinstance(cert, IndependenceCertificate),
        "replacement_set": [name for name, _ in T],
    }
