import math

import numpy as np
import pytest

from conftest import QUERY
from mtknn import faults
from mtknn.dataset import GeneratorConfig, QuerySet, generate_random_case
from mtknn.faults import FAULT_POINTS, MutantSpec, Operator, catalog, reachable, with_mutant
from mtknn.knn import SITE_VARIANTS, FaultSite, KnnClassifier, pristine_expression


def test_catalog_membership():
    ids = {m.id for m in catalog()}
    assert {"M-DIST-SQRT-SOD", "M-NN-CMP-ROR-LE", "M-K-CONST-P1"} <= ids


def test_catalog_size_and_coverage():
    specs = catalog()
    assert len(specs) >= 40
    assert {m.family for m in specs} == {"A", "B"}
    assert {m.site for m in specs} == set(FaultSite)
    assert {m.operator for m in specs} == set(Operator)
    assert len({m.id for m in specs}) == len(specs)
    assert len({(m.site, m.operator, m.parameter) for m in specs}) == len(specs)


def test_catalog_matches_classifier_variants():
    by_site = {}
    for m in catalog():
        by_site.setdefault(m.site, set()).add(m.id)
    assert by_site == {site: set(ids) for site, ids in SITE_VARIANTS.items()}


def test_catalog_order_is_stable():
    assert [m.id for m in catalog()] == [m.id for m in catalog()]
    assert catalog()[0].id == "M-DIST-DIFF-AOR-PLUS"


def test_only_the_control_is_flagged_equivalent():
    assert [m.id for m in catalog() if m.equivalent] == ["M-DIST-SQRT-SOD"]
    assert "M-DIST-SQRT-SOD" not in faults.default_selection()
    assert len(faults.default_selection()) == len(catalog()) - 1


def test_families_follow_sites():
    for m in catalog():
        expected = "A" if m.site.value.startswith(("DIST", "NN")) else "B"
        assert m.family == expected
        assert m.fault_point.site is m.site


def test_fault_points_one_per_site():
    assert [fp.site for fp in FAULT_POINTS] == list(FaultSite)
    assert len({fp.id for fp in FAULT_POINTS}) == len(FaultSite)


def test_unknown_mutant():
    with pytest.raises(KeyError):
        with_mutant("M-NOPE")
    with pytest.raises(KeyError):
        faults.get_mutant("M-NOPE")
    with pytest.raises(KeyError):
        with_mutant(MutantSpec("M-FAKE", FaultSite.K_VALUE, Operator.CONST, "k"))


def test_format_catalog_lines():
    lines = faults.format_catalog().splitlines()
    assert len(lines) == len(catalog())
    fields = dict((l.split("\t")[0], l.split("\t")) for l in lines)
    assert fields["M-DIST-SQRT-SOD"][1:] == ["DIST_SQRT", "SOD", "sqrt(acc) -> acc", "A", "equivalent"]
    assert fields["M-K-CONST-P1"][-2:] == ["B", "-"]


# --- mutated behaviour --------------------------------------------------------

def test_omitted_square_root_returns_squared_distance():
    handle = with_mutant("M-DIST-SQRT-SOD")
    assert handle.classifier.distance((45, 3, 16, 38), QUERY) == 5555.0
    assert handle.hits == 1


def test_sum_instead_of_difference():
    d = with_mutant("M-DIST-DIFF-AOR-PLUS").classifier.distance((45, 3, 16, 38), QUERY)
    assert d == math.sqrt(21155)
    assert round(d, 2) == 145.45


def test_handle_starts_with_reset_counters():
    assert with_mutant("M-K-CONST-P1").hits == 0


def test_pristine_sample_data(sample_train):
    assert KnnClassifier().predict(sample_train, QUERY, 3).label == 0


def test_squared_distance_mutant_never_changes_predictions():
    plain = KnnClassifier()
    mutant = with_mutant("M-DIST-SQRT-SOD").classifier
    for seed in range(1000):
        train, queries = generate_random_case(GeneratorConfig(seed=seed, query_count=5))
        for k in (1, 3):
            a = [p.label for p in plain.predict_all(train, queries, k)]
            assert a == [p.label for p in mutant.predict_all(train, queries, k)]


@pytest.mark.parametrize("mid", faults.default_selection())
def test_mutants_are_deterministic(mid):
    train, queries = generate_random_case(GeneratorConfig(seed=6))
    a = with_mutant(mid).classifier.predict_all(train, queries, 3)
    b = with_mutant(mid).classifier.predict_all(train, queries, 3)
    assert a == b


def test_mutants_change_behaviour_somewhere():
    # Every non-equivalent mutant differs from pristine on some generated input.
    plain = KnnClassifier()
    cases = [generate_random_case(GeneratorConfig(seed=s)) for s in range(30)]
    for mid in faults.default_selection():
        clf = KnnClassifier(mid)
        assert any(clf.predict_all(t, q, k) != plain.predict_all(t, q, k)
                   for t, q in cases for k in (1, 3)), mid


# --- reachability -------------------------------------------------------------

def test_distance_sites_always_reached():
    train, queries = generate_random_case(GeneratorConfig(seed=2))
    for m in catalog():
        if m.site.value.startswith("DIST"):
            assert reachable(with_mutant(m), train, queries, 1)


def test_loop_bound_unreached_at_k1():
    train, queries = generate_random_case(GeneratorConfig(seed=2))
    for mid in ("M-LOOP-BOUND-CONST-M1", "M-LOOP-BOUND-SOD"):
        handle = with_mutant(mid)
        assert not reachable(handle, train, queries, 1)
        assert reachable(handle, train, queries, 3)


def test_tiebreak_unreached_at_k1():
    train, queries = generate_random_case(GeneratorConfig(seed=2))
    assert not reachable(with_mutant("M-NN-TIE-ROR-GE"), train, queries, 1)
    assert reachable(with_mutant("M-NN-TIE-ROR-GE"), train, queries, 3)


def test_empty_query_set_reaches_nothing(sample_train):
    empty = QuerySet(sample_train.schema, [])
    for m in catalog():
        assert not reachable(with_mutant(m), sample_train, empty, 1)


def test_reachable_resets_counters_between_calls(sample_train, sample_queries):
    handle = with_mutant("M-DIST-DIFF-AOR-PLUS")
    assert reachable(handle, sample_train, sample_queries, 1)
    assert not reachable(handle, sample_train, QuerySet(sample_train.schema, []), 1)


# --- isolation ----------------------------------------------------------------

def _same(a, b):
    if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
        return np.array_equal(np.asarray(a, dtype=float), np.asarray(b, dtype=float), equal_nan=True)
    return a == b


def _snapshot(x):
    return x.copy() if isinstance(x, np.ndarray) else list(x) if isinstance(x, list) else x


@pytest.mark.parametrize("mid", [m.id for m in catalog()])
def test_only_the_mutated_site_deviates(mid):
    """Replay every traced evaluation of the other sites through the pristine expression."""
    train, queries = generate_random_case(GeneratorConfig(seed=17, train_size_range=(12, 12), query_count=4))
    clf = KnnClassifier(mid, trace=True)
    clf.predict_all(train, queries, 3)
    own = clf.site
    other_sites = set()
    for site, before, after, out in clf.trace:
        if site is own:
            continue
        other_sites.add(site)
        args = [_snapshot(a) for a in before]
        with np.errstate(invalid="ignore"):
            expected = pristine_expression(site)(*args)
        assert _same(expected, out), (site, before)
        assert all(_same(x, y) for x, y in zip(args, after)), site
    assert other_sites >= {FaultSite.DIST_DIFF, FaultSite.K_VALUE, FaultSite.VOTE_ARGMAX} - {own}


def test_pristine_trace_covers_every_site(sample_train, sample_queries):
    clf = KnnClassifier(trace=True)
    clf.predict_all(sample_train, sample_queries, 3)
    assert {t[0] for t in clf.trace} == set(FaultSite)
