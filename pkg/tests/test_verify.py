import pytest

from nestfrag.errors import NestFragError
from nestfrag.utils.mass_partitions.mass_partitions import (
    FragmentationParams,
    InnerAtom,
    OuterAtom,
    canonicalize_bivariate,
    validate_mass,
)
from nestfrag.utils.partitions.partitions import NestedPartition, make_nested
from nestfrag.utils.simulator.simulator import Mechanism, Trajectory, TrajectoryEvent, run
from nestfrag.utils.verify.verify import (
    FAIL,
    INCONCLUSIVE,
    PASS,
    SKIPPED,
    brute_force_generator,
    check_binary_agreement,
    check_branching,
    check_coupling,
    check_empirical,
    check_exchangeability,
    check_paintbox_law,
    check_paintbox_lln,
    check_projective_consistency,
    run_checks,
)


def test_generator_of_isolation_on_a_pair():
    gm = brute_force_generator(FragmentationParams(c_in2=1.0), 2)
    assert len(gm.states) == 3
    assert gm.rate(NestedPartition.coarsest(2), NestedPartition.finest(2)) == pytest.approx(2.0)


def test_generator_of_outer_atom():
    params = FragmentationParams(nu_out=(OuterAtom(1.0, validate_mass([0.5, 0.5])),))
    gm = brute_force_generator(params, 2)
    assert gm.rate(make_nested([[1], [2]], [[1, 2]]), NestedPartition.finest(2)) == pytest.approx(0.5)


def test_generator_of_zero_params_has_empty_rows():
    gm = brute_force_generator(FragmentationParams(), 3)
    assert all(row == {} for row in gm.rows.values())
    assert gm.to_dict()["rows"][0]["jumps"] == []


def test_generator_cap():
    with pytest.raises(NestFragError) as e:
        brute_force_generator(FragmentationParams(c_in1=1.0), 6)
    assert e.value.code == "TOO_LARGE"


def test_exchangeability_of_mixed_params(mixed_params):
    report = check_exchangeability(brute_force_generator(mixed_params, 3))
    assert report.status == PASS
    assert report.passed


def test_exchangeability_detects_a_corrupted_rate(mixed_params):
    gm = brute_force_generator(mixed_params, 3)
    source = NestedPartition.coarsest(3)
    target = make_nested([[1, 2], [3]], [[1, 2, 3]])
    gm.rows[source][target] *= 2.0
    report = check_exchangeability(gm)
    assert report.status == FAIL
    assert not report.passed
    assert report.deltas


def test_exchangeability_on_one_element(mixed_params):
    assert check_exchangeability(brute_force_generator(mixed_params, 1)).status == PASS


def test_consistency_of_pure_erosion():
    params = FragmentationParams(c_out=0.4, c_in1=0.25, c_in2=0.15)
    assert check_projective_consistency(params, 2, 3).status == PASS


def test_consistency_of_mixed_params(mixed_params):
    report = check_projective_consistency(mixed_params, 3, 4)
    assert report.status == PASS
    assert report.details["worst_gap"] < 1e-9


def test_consistency_negative_control(mixed_params):
    dropped = FragmentationParams(c_out=mixed_params.c_out, c_in1=mixed_params.c_in1,
                                  c_in2=mixed_params.c_in2, nu_out=mixed_params.nu_out)
    report = check_projective_consistency(mixed_params, 2, 3, params_n=dropped)
    assert report.status == FAIL
    assert report.deltas


def test_consistency_levels(mixed_params):
    with pytest.raises(NestFragError) as e:
        check_projective_consistency(mixed_params, 3, 3)
    assert e.value.code == "BAD_RANGE"


def test_empirical_of_zero_params():
    assert check_empirical(FragmentationParams(), 3, 1000, seed=1).status == PASS


def test_empirical_with_too_few_jumps(mixed_params):
    report = check_empirical(mixed_params, 3, 100, seed=2)
    assert report.status == INCONCLUSIVE


def test_empirical_matches_the_generator(mixed_params):
    report = check_empirical(mixed_params, 3, 20000, seed=3)
    assert report.status == PASS
    assert report.details["jumps"] >= 20000


def test_empirical_size_cap(mixed_params):
    with pytest.raises(NestFragError) as e:
        check_empirical(mixed_params, 5, 10, seed=1)
    assert e.value.code == "TOO_LARGE"


def test_binary_agreement(binary_params):
    report = check_binary_agreement(binary_params, 3)
    assert report.status == PASS
    assert report.details["agreed"] > 0
    assert report.details["flagged"]


def test_binary_agreement_needs_binary_params(mixed_params):
    with pytest.raises(NestFragError) as e:
        check_binary_agreement(mixed_params, 3)
    assert e.value.code == "NOT_BINARY"


def test_lln_of_univariate_sample(default_config):
    default_config['lln_sigmas'] = 4.0
    assert check_paintbox_lln(validate_mass([0.6, 0.3]), 10000, seed=1).status == PASS


def test_lln_of_bivariate_sample(default_config):
    default_config['lln_sigmas'] = 4.0
    p = canonicalize_bivariate([0.3, 0.1], [[0.2, 0.1], [0.1]], 0.5, [0.3, 0.15])
    assert check_paintbox_lln(p, 10000, seed=2).status == PASS


def test_lln_extremes():
    whole = check_paintbox_lln(validate_mass([1.0]), 1000, seed=3)
    assert whole.details["gap"] == pytest.approx(0.0)
    dust = check_paintbox_lln(validate_mass([]), 1000, seed=3)
    assert dust.status == PASS
    assert dust.details["estimate"] == []


def test_lln_needs_a_large_sample():
    with pytest.raises(NestFragError) as e:
        check_paintbox_lln(validate_mass([0.5]), 999, seed=1)
    assert e.value.code == "BAD_RANGE"


def test_paintbox_law():
    report = check_paintbox_law(validate_mass([0.5, 0.3]), 3, 5000, seed=4)
    assert report.status == PASS
    assert len(report.p_values) == 3


def test_branching_of_simulated_path(mixed_params):
    trajectory = run(mixed_params, 7, horizon=20.0, seed=6)
    report = check_branching(trajectory)
    assert report.status == PASS
    assert report.details["events"] == len(trajectory.events)


def test_branching_catches_a_double_split():
    initial = make_nested([[1], [2], [3], [4]], [[1, 2], [3, 4]])
    event = TrajectoryEvent(1.0, Mechanism.E_OUT, None, (1,), NestedPartition.finest(4))
    trajectory = Trajectory(4, FragmentationParams(c_out=1.0), 0, initial, (event,), 2.0)
    report = check_branching(trajectory)
    assert report.status == FAIL
    assert report.details["violations"] == {"outer_branching": 1}


def test_coupling(mixed_params):
    report = check_coupling(mixed_params, 5, 3, 20, seed=7, horizon=10.0)
    assert report.status == PASS
    assert report.details["mismatches"] == 0


def test_run_checks_skips_binary_for_general_params(mixed_params):
    reports = run_checks(mixed_params, 2, 1, ["exchangeability", "consistency", "binary"])
    assert [r.check for r in reports] == ["exchangeability", "consistency", "binary"]
    assert [r.status for r in reports] == [PASS, PASS, SKIPPED]
    assert reports[2].details["error"] == "NOT_BINARY"


def test_run_checks_runs_lln_per_atom(default_config):
    default_config['lln_sigmas'] = 4.0
    p = canonicalize_bivariate([0.5], [[0.5]], 0.5, [0.5])
    params = FragmentationParams(nu_out=(OuterAtom(1.0, validate_mass([0.7, 0.3])),),
                                 nu_in=(InnerAtom(1.0, p),))
    reports = run_checks(params, 2, 5, ["lln"])
    assert [r.details["atom"] for r in reports] == [0, 1]
    assert all(r.status == PASS for r in reports)


def test_exchangeability_over_all_permutations_of_four(mixed_params):
    report = check_exchangeability(brute_force_generator(mixed_params, 4))
    assert report.status == PASS
    assert report.details["worst_gap"] < 1e-10


@pytest.mark.slow
def test_binary_agreement_on_four_elements(binary_params):
    report = check_binary_agreement(binary_params, 4)
    assert report.status == PASS
    assert report.details["agreed"] > 0
    assert report.details["flagged"]


@pytest.mark.slow
def test_branching_over_ten_thousand_events_on_twenty(mixed_params):
    events = 0
    stream = 0
    while events < 10000:
        report = check_branching(run(mixed_params, 20, horizon=50.0, seed=12, stream=stream))
        assert report.status == PASS
        events += report.details["events"]
        stream += 1
    assert events >= 10000
