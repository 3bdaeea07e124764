"""Slope tables from tableaux, enumeration counts, and chip placement."""

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tropicalrank.graph import (
    BOTTOM,
    BRIDGE,
    TOP,
    GraphDivisor,
    in_linear_system,
    make_admissible_chain,
    pl_divisor,
)
from tropicalrank.slopes import (
    DECREASING_BRIDGE,
    DECREASING_LOOP,
    INITIAL_SLOPES,
    LINGERING,
    ChipSolveError,
    RamificationSpec,
    SlopeTable,
    Tableau,
    TableauError,
    all_tableaux,
    build_phi,
    chip_solve,
    classify,
    forced_chip_rho,
    slopes_from_tableau,
    tau,
)

EXAMPLE = Tableau(
    top=(1, 3, 4, 8, 9, 10), bottom=(2, 5, 7, 11, 12, 13), lingering=6
)

# outgoing slope vectors for EXAMPLE, loop by loop
EXAMPLE_SP = {
    1: (-2, -1, 0, 1, 2, 4),
    2: (-2, -1, 0, 1, 2, 5),
    3: (-2, -1, 0, 1, 3, 5),
    4: (-2, -1, 0, 2, 3, 5),
    5: (-2, -1, 0, 2, 4, 5),
    6: (-2, -1, 0, 2, 4, 5),
    7: (-2, -1, 0, 3, 4, 5),
    8: (-2, -1, 1, 3, 4, 5),
    9: (-2, 0, 1, 3, 4, 5),
    10: (-1, 0, 1, 3, 4, 5),
    11: (-1, 0, 2, 3, 4, 5),
    12: (-1, 1, 2, 3, 4, 5),
    13: (0, 1, 2, 3, 4, 5),
}


def skew_two_row_count(len_top, len_bottom):
    """Aitken determinant for standard fillings of a two-row skew shape
    whose rows end at column 5."""
    lam = (6, 6)
    mu = (6 - len_top, 6 - len_bottom)
    n = len_top + len_bottom

    def inv_fact(x):
        return 0 if x < 0 else 1 / math.factorial(x)

    det = inv_fact(lam[0] - mu[0]) * inv_fact(lam[1] - mu[1]) - inv_fact(
        lam[0] - mu[1] + 1
    ) * inv_fact(lam[1] - mu[0] - 1)
    return round(math.factorial(n) * det)


class TestTableau:
    def test_example_roundtrip(self):
        obj = EXAMPLE.to_json()
        assert obj == {
            "top": [1, 3, 4, 8, 9, 10],
            "bottom": [2, 5, 7, 11, 12, 13],
            "lingering": 6,
            "genus": 13,
        }
        assert Tableau.from_json(obj) == EXAMPLE

    def test_column_violation_rejected(self):
        with pytest.raises(TableauError):
            Tableau((2, 3, 4, 8, 9, 10), (1, 5, 7, 11, 12, 13), 6)

    def test_non_increasing_row_rejected(self):
        with pytest.raises(TableauError):
            Tableau((1, 4, 3, 8, 9, 10), (2, 5, 7, 11, 12, 13), 6)

    def test_wrong_symbols_rejected(self):
        with pytest.raises(TableauError):
            Tableau((1, 3, 4, 8, 9, 10), (2, 5, 7, 11, 12, 14), 6)
        with pytest.raises(TableauError):
            Tableau((1, 3, 4, 8, 9, 10), (2, 5, 7, 11, 12, 13), 7)

    def test_shapes_per_genus(self):
        t12 = Tableau((3, 5, 7, 9, 11), (2, 4, 6, 8, 10, 12), 13, genus=12)
        assert t12.removed_columns() == [0]
        t11a = Tableau((3, 5, 7, 9, 11), (4, 6, 8, 10, 12), 13, genus=11)
        assert t11a.removed_columns() == [0, 0]
        t11b = Tableau((5, 7, 9, 11), (3, 4, 6, 8, 10, 12), 13, genus=11)
        assert t11b.removed_columns() == [0, 1]
        with pytest.raises(TableauError):
            Tableau((3, 5, 7, 9, 11, 12), (4, 6, 8, 10), 13, genus=11)


class TestEnumeration:
    def test_genus13_counts(self):
        per = all_tableaux(13, lingering=6)
        assert len(per) == 132
        assert len(all_tableaux(13)) == 13 * 132 == 1716

    def test_counts_match_determinant_oracle(self):
        assert skew_two_row_count(6, 6) == 132
        assert skew_two_row_count(5, 6) == 132
        assert skew_two_row_count(5, 5) == 42
        assert skew_two_row_count(4, 6) == 90
        assert len(all_tableaux(12, lingering=13)) == 132
        by_shape = {}
        for t in all_tableaux(11, lingering=13):
            by_shape.setdefault((len(t.top), len(t.bottom)), []).append(t)
        assert len(by_shape[(5, 5)]) == 42
        assert len(by_shape[(4, 6)]) == 90
        assert len(all_tableaux(12)) == 12 * 132
        assert len(all_tableaux(11)) == 11 * 132

    def test_all_distinct(self):
        ts = all_tableaux(13)
        assert len(set(ts)) == len(ts)


class TestSlopeTable:
    def test_initial_slopes(self):
        st13 = slopes_from_tableau(EXAMPLE)
        assert st13.seed == INITIAL_SLOPES == (-2, -1, 0, 1, 2, 3)
        assert st13.bridge_slopes(1) == INITIAL_SLOPES

    def test_example_table(self):
        st13 = slopes_from_tableau(EXAMPLE)
        for k, expected in EXAMPLE_SP.items():
            assert st13.sp[k] == expected, f"loop {k}"
            assert st13.s[k] == (st13.seed if k == 1 else EXAMPLE_SP[k - 1])
        assert st13.bridge_slopes(14) == (0, 1, 2, 3, 4, 5)

    def test_each_slope_increments_exactly_twice(self):
        for t in all_tableaux(13, lingering=9)[:25]:
            table = slopes_from_tableau(t)
            for i in range(6):
                assert table.sp[13][i] - table.seed[i] == 2
                assert table.sp[13][i] <= 5

    def test_final_slopes_every_genus(self):
        for g, lingering in ((12, 4), (11, 7)):
            for t in all_tableaux(g, lingering=lingering)[:10]:
                assert slopes_from_tableau(t).sp[13] == (0, 1, 2, 3, 4, 5)

    def test_seeds_for_small_genus(self):
        t12 = all_tableaux(12, lingering=13)[0]
        assert slopes_from_tableau(t12).seed == (-2, -1, 0, 1, 2, 4)
        seeds = {
            (len(t.top), len(t.bottom)): slopes_from_tableau(t).seed
            for t in all_tableaux(11, lingering=13)
        }
        assert seeds[(5, 5)] == (-2, -1, 0, 1, 2, 5)
        assert seeds[(4, 6)] == (-2, -1, 0, 1, 3, 4)

    def test_high_slope_pair_counts(self):
        # pairwise sums exceeding 4 on the first bridge: 15 - g of them
        seeds = {
            13: [(-2, -1, 0, 1, 2, 3)],
            12: [(-2, -1, 0, 1, 2, 4)],
            11: [(-2, -1, 0, 1, 2, 5), (-2, -1, 0, 1, 3, 4)],
        }
        for g, options in seeds.items():
            for seed in options:
                pairs = [
                    seed[i] + seed[j]
                    for i in range(6)
                    for j in range(i, 6)
                ]
                assert len(pairs) == 21
                assert sum(1 for v in pairs if v > 4) == 15 - g

    def test_injective_for_fixed_lingering(self):
        tables = [slopes_from_tableau(t) for t in all_tableaux(13, lingering=6)]
        seen = {tuple(tbl.sp[k] for k in tbl.loop_indices) for tbl in tables}
        assert len(seen) == 132

    def test_tau_walk(self):
        table = slopes_from_tableau(EXAMPLE)
        assert sum(v + 2 - i for i, v in enumerate(table.seed)) == 0
        expected = 0
        for k in table.loop_indices:
            if k != table.lingering:
                expected += 1
            assert tau(table, k) == expected
        assert tau(table, 13) == 12

    def test_classify_example(self):
        profile = classify(slopes_from_tableau(EXAMPLE))
        assert profile.special == ("loop", 6)
        assert profile.special_kind() == LINGERING
        assert profile.kind(("loop", 5)) == "ordinary"
        assert profile.taus[13] == 12


class TestChips:
    def test_forced_rho_vertices(self):
        graph = make_admissible_chain(13, 10)
        # slope -1 puts the chip at v, slope 0 at w
        assert forced_chip_rho(graph, 5, -1) == 0
        assert forced_chip_rho(graph, 5, 0) == graph.ell[5]

    def test_example_break_divisor(self):
        graph = make_admissible_chain(13)
        table = slopes_from_tableau(EXAMPLE)
        D, chips = chip_solve(graph, table)
        assert D.degree() == 16
        assert D.multiplicity(graph.leftmost()) == 3
        assert set(chips) == set(range(1, 14))
        for k, p in chips.items():
            assert p.edge[1] == k
            assert D.multiplicity(p) == 1

    def test_example_functions_in_system(self):
        graph = make_admissible_chain(13)
        table = slopes_from_tableau(EXAMPLE)
        D, chips = chip_solve(graph, table)
        for i in range(6):
            phi = build_phi(graph, table, chips, i)
            assert in_linear_system(D, phi), f"phi_{i}"
        phi5 = build_phi(graph, table, chips, 5)
        assert phi5.edge_segments(("bridge", 1)) == ((0, 3),)
        assert phi5.edge_segments(("bridge", 14)) == ((0, 5),)

    def test_shifted_function_same_divisor(self):
        graph = make_admissible_chain(13)
        table = slopes_from_tableau(EXAMPLE)
        _, chips = chip_solve(graph, table)
        phi = build_phi(graph, table, chips, 2)
        assert pl_divisor(phi + 7) == pl_divisor(phi)

    def test_lingering_chip_avoids_forced_positions(self):
        graph = make_admissible_chain(13)
        table = slopes_from_tableau(EXAMPLE)
        _, chips = chip_solve(graph, table)
        k = 6
        L = graph.ell[k] + graph.m[k]
        lingering = chips[k]
        rho = (
            lingering.offset
            if lingering.edge[0] == TOP
            else L - lingering.offset
        )
        for v in set(table.s[k]) | set(table.sp[k]):
            assert rho != forced_chip_rho(graph, k, v)

    def test_small_genus_samples(self):
        for g, lingering in ((12, 3), (12, 13), (11, 7), (11, 13)):
            graph = make_admissible_chain(g, 10)
            for t in all_tableaux(g, lingering=lingering)[:6]:
                table = slopes_from_tableau(t)
                D, chips = chip_solve(graph, table)
                assert D.degree() == 16
                assert D.multiplicity(graph.leftmost()) == 16 - g

    def test_genus_mismatch_rejected(self):
        graph = make_admissible_chain(12, 10)
        with pytest.raises(ValueError):
            chip_solve(graph, slopes_from_tableau(EXAMPLE))


@settings(max_examples=30, deadline=None)
@given(t=st.sampled_from(all_tableaux(13)), base=st.sampled_from([2, 3, 10]))
def test_chip_solve_property(t, base):
    graph = make_admissible_chain(13, base)
    table = slopes_from_tableau(t)
    D, chips = chip_solve(graph, table)
    assert D.degree() == 16
    assert D.is_effective()
    assert tau(table, 13) == 12
    phi = build_phi(graph, table, chips, 0)
    total = D + pl_divisor(phi)
    assert total.is_effective()
    assert total.degree() == 16


@settings(max_examples=20, deadline=None)
@given(
    t=st.sampled_from(all_tableaux(11) + all_tableaux(12)),
    base=st.sampled_from([2, 5]),
)
def test_chip_solve_small_genus_property(t, base):
    graph = make_admissible_chain(t.genus, base)
    D, chips = chip_solve(graph, slopes_from_tableau(t))
    assert D.degree() == 16
    assert D.multiplicity(graph.leftmost()) == 16 - t.genus


class TestRamificationSpec:
    def test_four_cases(self):
        labels = [spec.case_label() for spec in RamificationSpec.all_cases()]
        assert labels == ["13", "12", "11a", "11b"]

    def test_rejects_everything_else(self):
        for genus, vanishing in ((13, {1: 2}), (12, {}), (11, {1: 2}), (10, {})):
            with pytest.raises(ValueError):
                RamificationSpec(genus, vanishing)

    def test_minimal_vanishing(self):
        by_label = {s.case_label(): s for s in RamificationSpec.all_cases()}
        assert by_label["13"].minimal_vanishing() == (0, 1, 2, 3, 4, 5)
        assert by_label["12"].minimal_vanishing() == (0, 2, 3, 4, 5, 6)
        assert by_label["11a"].minimal_vanishing() == (0, 3, 4, 5, 6, 7)
        assert by_label["11b"].minimal_vanishing() == (1, 2, 4, 5, 6, 7)

    def test_seed_matches_tableau_seeds(self):
        for spec in RamificationSpec.all_cases():
            tabs = spec.tableaux()
            assert tabs, spec
            for t in tabs[:3]:
                assert slopes_from_tableau(t).seed == spec.seed_slopes()

    def test_tableau_counts(self):
        counts = {s.case_label(): len(s.tableaux()) for s in RamificationSpec.all_cases()}
        assert counts == {"13": 13 * 132, "12": 12 * 132, "11a": 11 * 42, "11b": 11 * 90}


def _walk_table(genus, seed, steps):
    """SlopeTable from explicit per-loop slope changes.

    steps maps loop k to a dict of column -> delta (empty = lingering);
    bridge decreases are given as ("bridge", k) -> {column: -1}.
    """
    first = 14 - genus
    s, sp, inc = {}, {}, {}
    cur = list(seed)
    for k in range(first, 14):
        drop = steps.get(("bridge", k), {})
        for col, d in drop.items():
            cur[col] += d
        s[k] = tuple(cur)
        delta = steps.get(k, {})
        ups = [c for c, d in delta.items() if d > 0]
        inc[k] = ups[0] if ups else None
        for col, d in delta.items():
            cur[col] += d
        sp[k] = tuple(cur)
    return SlopeTable(genus, None, tuple(seed), s, sp, inc)


def decreasing_bridge_table():
    """Genus 13, column 2 drops by one on bridge 9 and recovers."""
    steps = {
        1: {5: 1}, 2: {5: 1}, 3: {4: 1}, 4: {4: 1}, 5: {3: 1}, 6: {3: 1},
        7: {2: 1}, 8: {2: 1}, ("bridge", 9): {2: -1}, 9: {2: 1},
        10: {1: 1}, 11: {0: 1}, 12: {1: 1}, 13: {0: 1},
    }
    return _walk_table(13, INITIAL_SLOPES, steps)


def decreasing_loop_table():
    """Genus 13, loop 9 raises column 1 while dropping column 2."""
    steps = {
        1: {5: 1}, 2: {5: 1}, 3: {4: 1}, 4: {4: 1}, 5: {2: 1}, 6: {3: 1},
        7: {3: 1}, 8: {2: 1}, 9: {1: 1, 2: -1}, 10: {2: 1},
        11: {1: 1}, 12: {0: 1}, 13: {0: 1},
    }
    return _walk_table(13, INITIAL_SLOPES, steps)


class TestNonVertexAvoiding:
    def test_decreasing_bridge_profiles(self):
        table = decreasing_bridge_table()
        assert table.sp[13] == (0, 1, 2, 3, 4, 5)
        prof = classify(table)
        assert prof.special_kind() == DECREASING_BRIDGE
        assert prof.index_of_special() == 2
        graph = make_admissible_chain(13, 10)
        D, chips = chip_solve(graph, table)
        assert D.degree() == 16
        phi = build_phi(graph, table, chips, 2)
        segs = phi.edge_segments((BRIDGE, 9))
        assert [s for _, s in segs] == [2, 1]
        assert (D + pl_divisor(phi)).is_effective()

    def test_decreasing_loop_profiles(self):
        table = decreasing_loop_table()
        assert table.sp[13] == (0, 1, 2, 3, 4, 5)
        prof = classify(table)
        assert prof.special_kind() == DECREASING_LOOP
        assert prof.index_of_special() == 2
        graph = make_admissible_chain(13, 10)
        D, chips = chip_solve(graph, table)
        for i in range(6):
            phi = build_phi(graph, table, chips, i)
            assert (D + pl_divisor(phi)).is_effective()

    def test_bad_bridge_jump_rejected(self):
        table = decreasing_bridge_table()
        graph = make_admissible_chain(13, 10)
        _, chips = chip_solve(graph, table)
        bad = dict(table.s)
        bad[9] = (-2, -1, 0, 3, 4, 5)
        broken = SlopeTable(13, None, table.seed, bad, dict(table.sp), dict(table.incremented))
        with pytest.raises(ChipSolveError):
            build_phi(graph, broken, chips, 2)


class TestSwitchingChip:
    def test_witness_pins_the_chip(self):
        table = slopes_from_tableau(EXAMPLE)
        graph = make_admissible_chain(13, 10)
        h = 0
        D, chips = chip_solve(graph, table, switching={"loop": 6, "index": h})
        rho = forced_chip_rho(graph, 6, table.s[6][h])
        ell = graph.ell[6]
        expected = (TOP, 6) if rho <= ell else (BOTTOM, 6)
        assert chips[6].edge == expected
        assert D.degree() == 16
        for i in range(6):
            phi = build_phi(graph, table, chips, i)
            assert (D + pl_divisor(phi)).is_effective()

    def test_witness_on_incrementing_loop_rejected(self):
        table = slopes_from_tableau(EXAMPLE)
        graph = make_admissible_chain(13, 10)
        with pytest.raises(ValueError):
            chip_solve(graph, table, switching={"loop": 3, "index": 1})
