import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import QUERY
from mtknn.dataset import (AttributeSchema, Dataset, GeneratorConfig, LabelAttribute, QuerySet,
                           generate_random_case)
from mtknn.errors import CaseInapplicable, ContractViolation
from mtknn.knn import KnnClassifier, predict_all
from mtknn.mr_catalog import (FOCAL_MRS, MetamorphicCase, MrId, Verdict, check_relation,
                              derive_follow_up, draw_transform_params, focal_candidates, load_case,
                              required_k, save_case)

CLF = KnnClassifier()


def run_relation(mr, train, queries, seed=0, params=None):
    k = required_k(mr)
    src = CLF.predict_all(train, queries, k)
    case = derive_follow_up(mr, train, queries, src, seed, params=params)
    fol = CLF.predict_all(case.follow_train, case.follow_queries, k)
    return case, src, fol, check_relation(case, src, fol)


# --- required k ---------------------------------------------------------------

@pytest.mark.parametrize("mr, k", [("MR1", 3), ("MR6", 3), ("MR7", 1), ("MR11", 1)])
def test_required_k(mr, k):
    assert required_k(MrId(mr)) == k


def test_eleven_relations_and_parsing():
    assert len(MrId) == 11
    assert MrId.parse("7") is MrId.MR7
    assert MrId.parse("mr10") is MrId.MR10
    with pytest.raises(ValueError):
        MrId.parse("MR12")


# --- worked examples ----------------------------------------------------------

def test_affine_2x_plus_3_on_sample_data(sample_train, sample_queries):
    params = {"attributes": [0, 1, 2, 3], "scale": 2, "offset": 3}
    case, src, fol, verdict = run_relation(MrId.MR1, sample_train, sample_queries, params=params)
    assert [p.label for p in src] == [0]
    assert [p.label for p in fol] == [0]
    assert verdict.verdict is Verdict.SATISFIED and verdict.witness is None
    assert case.follow_queries.queries == [tuple(2 * v + 3 for v in QUERY)]
    assert case.follow_train.samples[0].values == (93.0, 9.0, 35.0, 79.0)


def test_label_permutation_swapping_first_and_last(sample_train, sample_queries):
    params = {"permutation": [4, 1, 2, 3, 0]}
    case, src, fol, verdict = run_relation(MrId.MR7, sample_train, sample_queries, params=params)
    assert case.label_map[0] == 4
    assert case.expected_label(0) == 4
    assert [p.label for p in fol] == [4]
    assert verdict.satisfied


def test_duplicated_classes_get_fresh_labels_after_the_domain():
    schema = AttributeSchema(("a", "b"), LabelAttribute("c", ("1", "2", "3", "4")))
    train = Dataset(schema, [[0, 0], [1, 1], [5, 5], [9, 9], [2, 2]], [0, 1, 2, 3, 2])
    queries = QuerySet(schema, [[5, 5]])
    case = derive_follow_up(MrId.MR9, train, queries, [2], seed=0)
    domain = case.follow_train.schema.label.domain
    assert domain == ("1", "2", "3", "4", "1*", "2*", "4*")
    assert case.focal_class == 2
    assert case.label_map == {0: 4, 1: 5, 3: 6}
    assert len(case.follow_train) == 8
    added = case.follow_train.labels[5:].tolist()
    assert added == [4, 5, 6]
    assert case.follow_train.samples[:5] == train.samples


def test_relabeling_keeps_focal_class_samples():
    schema = AttributeSchema.default(1, 3)
    train = Dataset(schema, [[0], [1], [2], [3]], [0, 1, 2, 1])
    case = derive_follow_up(MrId.MR6, train, QuerySet(schema, [[1], [3]]), [1, 1], seed=0)
    assert case.follow_train.labels.tolist() == [3, 1, 4, 1]
    assert case.follow_train.schema.label.domain == ("0", "1", "2", "0*", "2*")
    assert case.checked == (0, 1)


def test_fresh_label_names_avoid_existing_ones():
    schema = AttributeSchema(("a",), LabelAttribute("c", ("x", "x*")))
    train = Dataset(schema, [[0], [1]], [0, 1])
    case = derive_follow_up(MrId.MR6, train, QuerySet(schema, [[1]]), [1], seed=0)
    assert case.follow_train.schema.label.domain == ("x", "x*", "x**")


# --- checking -----------------------------------------------------------------

def _case(mr, n_queries=1, label_map=None, checked=None):
    schema = AttributeSchema.default(1, 5)
    train = Dataset(schema, [[0]], [0])
    queries = QuerySet(schema, [[0]] * n_queries)
    return MetamorphicCase(mr, train, queries, train, queries,
                           checked=tuple(range(n_queries)) if checked is None else checked,
                           label_map=label_map)


def test_check_satisfied_when_labels_match():
    assert check_relation(_case(MrId.MR1), [0], [0]).satisfied


def test_check_label_map_violation_reports_witness():
    verdict = check_relation(_case(MrId.MR7, label_map={0: 4}), [0], [0])
    assert verdict.verdict is Verdict.VIOLATED
    assert verdict.witness.expected_label == 4
    assert verdict.witness.follow_label == 0 and verdict.witness.query_index == 0


def test_check_ignores_unchecked_queries():
    case = _case(MrId.MR10, n_queries=3, checked=(0, 2))
    assert check_relation(case, [1, 0, 2], [1, 3, 2]).satisfied
    assert check_relation(case, [1, 0, 2], [1, 3, 4]).witness.query_index == 2


def test_check_arity_mismatch():
    with pytest.raises(ContractViolation):
        check_relation(_case(MrId.MR1), [0, 1], [0])
    with pytest.raises(ContractViolation):
        check_relation(_case(MrId.MR1), [0], [])


# --- derivation details -------------------------------------------------------

def test_focal_candidates_order():
    assert focal_candidates([2, 1, 2, 1, 0]) == [1, 2, 0]


def test_informative_column_levels():
    train, queries = generate_random_case(GeneratorConfig(seed=4))
    src = CLF.predict_all(train, queries, 1)
    case = derive_follow_up(MrId.MR8, train, queries, src, 0)
    focal = case.focal_class
    col = case.follow_train.values[:, -1]
    assert np.array_equal(col, np.where(train.labels == focal, 0.0, 100.0))
    qcol = case.follow_queries.values[:, -1]
    assert np.array_equal(qcol, [0.0 if p.label == focal else 100.0 for p in src])


def test_removal_of_classes_keeps_another_label():
    schema = AttributeSchema.default(1, 3)
    train = Dataset(schema, [[0], [1], [2]], [1, 1, 2])
    queries = QuerySet(schema, [[0], [1], [2]])
    case = derive_follow_up(MrId.MR10, train, queries, [1, 1, 2], 0)
    assert case.focal_class == 1
    assert case.follow_train.labels.tolist() == [2]
    assert case.checked == (2,)


def test_inapplicable_cases():
    schema = AttributeSchema.default(1, 3)
    only_one = Dataset(schema, [[0], [1]], [1, 1])
    queries = QuerySet(schema, [[0]])
    with pytest.raises(CaseInapplicable):
        derive_follow_up(MrId.MR10, only_one, queries, [1], 0)
    with pytest.raises(CaseInapplicable):
        derive_follow_up(MrId.MR11, only_one, queries, [0], 0)
    empty = QuerySet(schema, [])
    for mr in sorted(FOCAL_MRS | {MrId.MR4}):
        with pytest.raises(CaseInapplicable):
            derive_follow_up(mr, only_one, empty, [], 0)


def test_prediction_count_must_match_queries(sample_train, sample_queries):
    with pytest.raises(ContractViolation):
        derive_follow_up(MrId.MR2, sample_train, sample_queries, [0, 0], 0)


def test_zero_scale_rejected(sample_train, sample_queries):
    with pytest.raises(ContractViolation):
        derive_follow_up(MrId.MR1, sample_train, sample_queries, [0], 0,
                         params={"attributes": [0], "scale": 0, "offset": 1})


def test_parameter_draws_are_in_range():
    for seed in range(300):
        p = draw_transform_params(MrId.MR1, 4, 5, seed)
        assert p["attributes"] and p["attributes"] == sorted(set(p["attributes"]))
        assert 1 <= abs(p["scale"]) <= 5 and -50 <= p["offset"] <= 50
        if len(p["attributes"]) < 4:
            assert abs(p["scale"]) == 1
        for mr, n in ((MrId.MR2, 4), (MrId.MR7, 5)):
            perm = draw_transform_params(mr, 4, 5, seed)["permutation"]
            assert sorted(perm) == list(range(n)) and perm != list(range(n))
        assert 0 <= draw_transform_params(MrId.MR3, 4, 5, seed)["value"] <= 100


@pytest.mark.parametrize("mr", list(MrId))
def test_derivation_is_deterministic(mr):
    train, queries = generate_random_case(GeneratorConfig(seed=21))
    src = CLF.predict_all(train, queries, required_k(mr))
    assert derive_follow_up(mr, train, queries, src, 5) == derive_follow_up(mr, train, queries, src, 5)


@pytest.mark.parametrize("mr", list(MrId))
def test_case_directory_round_trip(tmp_path, mr):
    train, queries = generate_random_case(GeneratorConfig(seed=13, train_size_range=(10, 20)))
    src = CLF.predict_all(train, queries, required_k(mr))
    case = derive_follow_up(mr, train, queries, src, 3)
    save_case(case, tmp_path / "case")
    assert sorted(p.name for p in (tmp_path / "case").iterdir()) == [
        "follow_queries.arff", "follow_train.arff", "meta.json",
        "source_queries.arff", "source_train.arff"]
    meta = json.loads((tmp_path / "case" / "meta.json").read_text())
    assert set(meta) == {"mrId", "focalClass", "labelMap", "checkedQueryIndices", "transformParams"}
    assert load_case(tmp_path / "case") == case


# --- necessity on the pristine classifier -------------------------------------

@pytest.mark.parametrize("mr", list(MrId))
@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**63), param_seed=st.integers(0, 2**63))
def test_relation_holds_on_pristine_classifier(mr, seed, param_seed):
    train, queries = generate_random_case(GeneratorConfig(seed=seed, train_size_range=(3, 60)))
    try:
        *_, verdict = run_relation(mr, train, queries, seed=param_seed)
    except CaseInapplicable:
        return
    assert verdict.satisfied, verdict.witness


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**63), subset=st.sets(st.integers(0, 3), min_size=1),
       sign=st.sampled_from([-1, 1]), offset=st.integers(-50, 50), magnitude=st.integers(1, 5))
def test_affine_parameter_independence(seed, subset, sign, offset, magnitude):
    train, queries = generate_random_case(GeneratorConfig(seed=seed))
    scale = sign * (magnitude if len(subset) == 4 else 1)
    params = {"attributes": sorted(subset), "scale": scale, "offset": offset}
    *_, verdict = run_relation(MrId.MR1, train, queries, params=params)
    assert verdict.satisfied


def test_scaling_part_of_the_attributes_can_change_predictions():
    # Why proper subsets are only reflected or translated: stretching one
    # axis re-weights it against the others.
    schema = AttributeSchema.default(2, 2)
    train = Dataset(schema, [[2, 0], [2, 0], [0, 3], [0, 3]], [0, 0, 1, 1])
    queries = QuerySet(schema, [[0, 0]])
    assert [p.label for p in predict_all(train, queries, 3)] == [0]
    params = {"attributes": [0], "scale": 2, "offset": 0}
    *_, verdict = run_relation(MrId.MR1, train, queries, params=params)
    assert not verdict.satisfied


def _enumerate(m, max_samples):
    schema = AttributeSchema.default(m, 3)
    grid = list(itertools.product(range(3), repeat=m))
    for n in range(1, max_samples + 1):
        for points in itertools.product(grid, repeat=n):
            for labels in itertools.product(range(3), repeat=n):
                yield schema, grid, Dataset(schema, points, labels)


@pytest.mark.slow
@pytest.mark.parametrize("m, max_samples", [(1, 5), (2, 3)])
def test_fresh_labels_never_move_a_winning_tie_exhaustive(m, max_samples):
    checked = 0
    for schema, grid, train in _enumerate(m, max_samples):
        for mr in (MrId.MR6, MrId.MR9):
            k = required_k(mr)
            if k > len(train):
                continue
            src = [p.label for p in CLF.predict_all(train, QuerySet(schema, grid), k)]
            for focal in set(src):
                rows = [g for g, s in zip(grid, src) if s == focal]
                case = derive_follow_up(mr, train, QuerySet(schema, rows), [focal] * len(rows), 0)
                assert case.focal_class == focal
                fol = CLF.predict_all(case.follow_train, case.follow_queries, k)
                assert check_relation(case, [focal] * len(rows), fol).satisfied, (train.samples, mr)
                checked += 1
    assert checked > 0
