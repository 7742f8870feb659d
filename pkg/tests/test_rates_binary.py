import pytest

from nestfrag.utils.mass_partitions.mass_partitions import BinaryMeasures, FragmentationParams, binary_project
from nestfrag.utils.partitions.partitions import NestedPartition, make_nested
from nestfrag.utils.rates.rates import binary_rate, generator_row


def test_outer_erosion_term():
    pi = make_nested([[1], [2], [3]], [[1, 2, 3]])
    target = make_nested([[1], [2], [3]], [[1], [2, 3]])
    result = binary_rate(pi, target, BinaryMeasures(), 1.0, 0.0, 0.0)
    assert result.rate == pytest.approx(1.0)
    assert result.status == "ok"


def test_outer_dislocation_term():
    pi = make_nested([[1], [2], [3]], [[1, 2, 3]])
    target = make_nested([[1], [2], [3]], [[1], [2, 3]])
    measures = BinaryMeasures(out=((1.0, 0.5), (1.0, 0.5)))
    assert binary_rate(pi, target, measures, 0.0, 0.0, 0.0).rate == pytest.approx(0.25)


def test_inner_dislocation_term():
    pi = NestedPartition.coarsest(3)
    target = make_nested([[1, 2], [3]], [[1, 2, 3]])
    measures = BinaryMeasures(in1=((1.0, 0.5), (1.0, 0.5)))
    assert binary_rate(pi, target, measures, 0.0, 0.0, 0.0).rate == pytest.approx(0.25)


def test_identity_and_non_binary_jumps():
    pi = make_nested([[1], [2], [3]], [[1, 2, 3]])
    assert binary_rate(pi, pi, BinaryMeasures(), 1.0, 1.0, 1.0).status == "identity"
    three_way = binary_rate(pi, NestedPartition.finest(3), BinaryMeasures(), 1.0, 1.0, 1.0)
    assert (three_way.rate, three_way.status) == (0.0, "not_binary_jump")
    upward = binary_rate(NestedPartition.finest(3), pi, BinaryMeasures(), 1.0, 1.0, 1.0)
    assert upward.status == "not_binary_jump"


def test_split_outside_the_fragmenting_outer_block_has_rate_zero():
    pi = make_nested([[1, 2], [3], [4]], [[1, 2], [3, 4]])
    target = make_nested([[1], [2], [3], [4]], [[1, 2], [3], [4]])
    result = binary_rate(pi, target, BinaryMeasures(out=((1.0, 0.5),)), 1.0, 1.0, 1.0)
    assert result.rate == 0.0


def test_symmetric_outer_erosion_is_flagged():
    pi = make_nested([[1], [2]], [[1, 2]])
    result = binary_rate(pi, NestedPartition.finest(2), BinaryMeasures(), 1.0, 0.0, 0.0)
    assert result.status == "ambiguous"
    assert "symmetric_outer_erosion" in result.flags
    assert result.rate == pytest.approx(1.0)
    # counting erosion events gives both inner blocks
    params_rate = {j.target: j.rate for j in generator_row(
        pi, FragmentationParams(c_out=1.0))}[NestedPartition.finest(2)]
    assert params_rate == pytest.approx(2.0)


def test_isolation_of_one_element_from_a_pair_is_flagged():
    pi = NestedPartition.coarsest(2)
    result = binary_rate(pi, NestedPartition.finest(2), BinaryMeasures(), 0.0, 0.0, 1.0)
    assert result.status == "ambiguous"
    assert "symmetric_isolation" in result.flags


def test_isolation_out_of_a_larger_block():
    pi = NestedPartition.coarsest(3)
    target = make_nested([[1, 2], [3]], [[1, 2], [3]])
    result = binary_rate(pi, target, BinaryMeasures(), 0.0, 0.0, 1.0)
    assert (result.rate, result.status) == (pytest.approx(1.0), "ok")


def test_both_orientations_of_the_third_shape(binary_params):
    measures = binary_project(binary_params)
    pi = make_nested([[1, 2, 3]], [[1, 2, 3]])
    target = make_nested([[1, 2], [3]], [[1, 2], [3]])
    result = binary_rate(pi, target, BinaryMeasures(in3=measures.in3), 0.0, 0.0, 0.0)
    # {1,2} kept by the mother and {3} sent away, or the other way round
    x = 0.4
    assert result.rate == pytest.approx(0.9 * (x ** 2 * (1 - x) + x * (1 - x) ** 2))
    assert "in3_both_orientations" in result.flags


def test_agrees_with_generator_on_binary_fixture(binary_params):
    measures = binary_project(binary_params)
    pi = make_nested([[1, 2], [3]], [[1, 2, 3]])
    row = {j.target: j.rate for j in generator_row(pi, binary_params)}
    for target, rate in row.items():
        result = binary_rate(pi, target, measures, binary_params.c_out, binary_params.c_in1,
                             binary_params.c_in2)
        if result.status == "ambiguous":
            continue
        assert result.rate == pytest.approx(rate, abs=1e-10)
