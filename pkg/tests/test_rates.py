import math

import pytest

from nestfrag.errors import NestFragError
from nestfrag.utils.mass_partitions.mass_partitions import (
    FragmentationParams,
    InnerAtom,
    OuterAtom,
    canonicalize_bivariate,
    validate_mass,
)
from nestfrag.utils.paintbox.paintbox import RngHandle, sample_inner
from nestfrag.utils.partitions.partitions import (
    DistinguishedNestedPartition,
    NestedPartition,
    enumerate_nested,
    make_nested,
    nested_leq,
)
from nestfrag.utils.rates.rates import (
    erosion_jumps,
    exact_inner_dislocation_jumps,
    exact_inner_split_probability,
    exact_outer_dislocation_jumps,
    exact_split_probability_univariate,
    generator_row,
    index_vector_sum,
    inner_outcome_table,
    merge_jumps,
    outer_outcome_table,
    row_to_dict,
    univariate_rate,
)


def as_dict(jumps):
    return {j.target: j.rate for j in jumps}


@pytest.mark.parametrize("s, sizes, expected", [
    ([1.0], [3], 1.0),
    ([0.5, 0.5], [1, 1], 0.5),
    ([0.5, 0.3], [1, 1], 0.66),
    ([0.5, 0.3], [2], 0.34),
    ([], [1, 1, 1], 1.0),
    ([], [2], 0.0),
])
def test_exact_split_probability(s, sizes, expected):
    assert exact_split_probability_univariate(validate_mass(s), sizes) == pytest.approx(expected, abs=1e-12)


def test_exact_split_probability_needs_elements():
    with pytest.raises(NestFragError):
        exact_split_probability_univariate(validate_mass([0.5]), [])


@pytest.mark.parametrize("s", [[0.5, 0.3], [0.6, 0.2, 0.1], [0.5, 0.5], []])
@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_outer_outcome_table_is_a_distribution(s, k):
    table = outer_outcome_table(validate_mass(s), k)
    assert math.fsum(prob for _, prob in table) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("p", [
    ([0.5], [[0.5]], 0.5, [0.5]),
    ([0.2], [[0.1]], 0.5, [0.3]),
    ([0.3, 0.1], [[0.2, 0.1], [0.1]], 0.5, [0.3, 0.15]),
    ([], [[0.6, 0.4]], 0.0, [1.0]),
])
@pytest.mark.parametrize("m", [1, 2, 3, 4])
def test_inner_outcome_table_is_a_distribution(p, m):
    table = inner_outcome_table(canonicalize_bivariate(*p), m)
    assert math.fsum(prob for _, prob in table) == pytest.approx(1.0, abs=1e-12)


def test_inner_split_probability_of_mixed_atom_on_one_element():
    p = canonicalize_bivariate([0.5], [[0.5]], 0.5, [0.5])
    stay = DistinguishedNestedPartition(NestedPartition.coarsest(1), 0)
    leave = DistinguishedNestedPartition(NestedPartition.coarsest(1), None)
    assert exact_inner_split_probability(p, stay) == pytest.approx(0.5)
    assert exact_inner_split_probability(p, leave) == pytest.approx(0.5)


def test_inner_split_probability_matches_sampling():
    p = canonicalize_bivariate([0.3, 0.1], [[0.2, 0.1], [0.1]], 0.5, [0.3, 0.15])
    rng = RngHandle(21).generator()
    samples = 20000
    counts = {}
    for _ in range(samples):
        outcome = sample_inner(p, range(1, 4), rng).outcome
        counts[outcome] = counts.get(outcome, 0) + 1
    for outcome, prob in inner_outcome_table(p, 3):
        sigma = math.sqrt(prob * (1 - prob) / samples)
        assert abs(counts.get(outcome, 0) / samples - prob) < 5 * sigma + 1e-9
    assert set(counts) <= {outcome for outcome, _ in inner_outcome_table(p, 3)}


def test_outer_erosion_example():
    pi = make_nested([[1], [2], [3]], [[1, 2, 3]])
    jumps = as_dict(erosion_jumps(pi, FragmentationParams(c_out=1.0)))
    assert jumps[make_nested([[1], [2], [3]], [[1], [2, 3]])] == 1.0
    assert len(jumps) == 3


def test_inner_erosion_example():
    jumps = as_dict(erosion_jumps(NestedPartition.coarsest(3), FragmentationParams(c_in1=1.0)))
    assert jumps[make_nested([[1, 2], [3]], [[1, 2, 3]])] == 1.0


def test_isolation_rates_merge():
    jumps = as_dict(erosion_jumps(NestedPartition.coarsest(2), FragmentationParams(c_in2=1.0)))
    assert jumps == {NestedPartition.finest(2): 2.0}


def test_erosion_of_finest_state_is_empty():
    params = FragmentationParams(c_out=1.0, c_in1=1.0, c_in2=1.0)
    assert erosion_jumps(NestedPartition.finest(4), params) == []


def test_outer_dislocation_example():
    params = FragmentationParams(nu_out=(OuterAtom(1.0, validate_mass([0.5, 0.5])),))
    pi = make_nested([[1], [2]], [[1, 2]])
    assert as_dict(exact_outer_dislocation_jumps(pi, params)) == {
        NestedPartition.finest(2): pytest.approx(0.5)}
    # a lone inner block cannot be regrouped
    assert exact_outer_dislocation_jumps(NestedPartition.coarsest(3), params) == []


def test_outer_dislocation_without_dust_never_splits_three_ways():
    params = FragmentationParams(nu_out=(OuterAtom(1.0, validate_mass([0.7, 0.3])),))
    pi = make_nested([[1], [2], [3]], [[1, 2, 3]])
    jumps = as_dict(exact_outer_dislocation_jumps(pi, params))
    assert NestedPartition.finest(3) not in jumps
    assert sum(jumps.values()) == pytest.approx(1.0 - 0.7 ** 3 - 0.3 ** 3)


def test_migration_atom():
    p = canonicalize_bivariate([], [[1.0]], 0.0, [1.0])
    params = FragmentationParams(nu_in=(InnerAtom(1.0, p),))
    pi = make_nested([[1], [2], [3]], [[1, 2, 3]])
    assert as_dict(exact_inner_dislocation_jumps(pi, params)) == {
        make_nested([[1], [2], [3]], [[1], [2, 3]]): pytest.approx(1.0),
        make_nested([[1], [2], [3]], [[2], [1, 3]]): pytest.approx(1.0),
        make_nested([[1], [2], [3]], [[3], [1, 2]]): pytest.approx(1.0),
    }
    # alone in its outer block the migration changes nothing
    assert exact_inner_dislocation_jumps(NestedPartition.coarsest(3), params) == []


def test_inner_split_into_mother_blocks():
    p = canonicalize_bivariate([0.5, 0.5], [], 1.0, [])
    params = FragmentationParams(nu_in=(InnerAtom(1.0, p),))
    jumps = as_dict(exact_inner_dislocation_jumps(NestedPartition.coarsest(2), params))
    assert jumps == {make_nested([[1], [2]], [[1, 2]]): pytest.approx(0.5)}


def test_generator_row_of_zero_params_is_empty():
    assert generator_row(NestedPartition.coarsest(4), FragmentationParams()) == []


def test_generator_row_of_pure_outer_erosion():
    params = FragmentationParams(c_out=0.8)
    pi = NestedPartition(NestedPartition.finest(4).zeta, NestedPartition.coarsest(4).xi)
    assert as_dict(generator_row(pi, params)) == as_dict(erosion_jumps(pi, params))


def test_generator_row_cap():
    with pytest.raises(NestFragError) as e:
        generator_row(NestedPartition.coarsest(7), FragmentationParams(c_in1=1.0))
    assert e.value.code == "TOO_LARGE"


def test_generator_rows_only_move_down(mixed_params):
    for pi in enumerate_nested(3):
        for jump in generator_row(pi, mixed_params):
            assert jump.target != pi
            assert nested_leq(jump.target, pi)
            assert jump.rate > 0.0 and math.isfinite(jump.rate)


def test_row_json_shape(mixed_params):
    pi = NestedPartition.coarsest(2)
    data = row_to_dict(pi, generator_row(pi, mixed_params))
    assert data["from"] == "1,2 ; 1,2"
    assert {j["to"] for j in data["jumps"]} <= {"1|2 ; 1,2", "1|2 ; 1|2", "1,2 ; 1,2"}
    assert "1,2 ; 1,2" not in {j["to"] for j in data["jumps"]}


def test_univariate_rate_adds_erosion_for_singleton_children():
    atoms = [(1.0, validate_mass([0.5, 0.5]))]
    assert univariate_rate(1.0, atoms, [1, 1]) == pytest.approx(1.5)
    assert univariate_rate(1.0, atoms, [2, 2]) == pytest.approx(2 * 0.25 * 0.25)


def test_univariate_rate_matches_outer_dislocation():
    s = validate_mass([0.5, 0.3])
    params = FragmentationParams(nu_out=(OuterAtom(2.0, s),))
    pi = make_nested([[1], [2], [3]], [[1, 2, 3]])
    jumps = as_dict(exact_outer_dislocation_jumps(pi, params))
    target = make_nested([[1], [2], [3]], [[1, 2], [3]])
    assert jumps[target] == pytest.approx(univariate_rate(0.0, [(2.0, s)], [2, 1]))


def test_index_vector_sum_with_dust():
    assert index_vector_sum([0.5, 0.5], [1, 1], 0.0) == pytest.approx(0.5)
    assert index_vector_sum([0.5], [1, 1], 0.5) == pytest.approx(0.75)
    # only singleton children may fall in the dust
    assert index_vector_sum([0.5], [2, 1], 0.5) == pytest.approx(0.125)


def test_merge_jumps_sums_and_drops():
    source = NestedPartition.coarsest(2)
    target = NestedPartition.finest(2)
    merged = merge_jumps(source, [(target, 1.0), (source, 3.0), (target, 0.5),
                                  (make_nested([[1], [2]], [[1, 2]]), 0.0)])
    assert [(j.target, j.rate) for j in merged] == [(target, 1.5)]


def test_inner_outcome_table_cap_follows_the_config(default_config):
    p = canonicalize_bivariate([0.5], [[0.5]], 0.5, [0.5])
    assert inner_outcome_table(p, 3)
    default_config['inner_block_cap'] = 2
    with pytest.raises(NestFragError) as e:
        inner_outcome_table(p, 3)
    assert e.value.code == "TOO_LARGE"
