"""The ten acceptance criteria, each at its stated tolerance.

One line per criterion is printed in the terminal summary.
"""
import pytest

from conftest import ACCEPTANCE_LINES
from horomass import acceptance

NAMES = {
    1: "golden_ads_mass", 2: "cross_evaluator_agreement", 3: "adm_limit", 4: "backgrounds_vanish",
    5: "cylinder_decay_rates", 6: "remainder_quadratic", 7: "minkowski_invariance",
    8: "excluded_region_theta", 9: "geometry_kernel", 10: "thread_determinism",
}


@pytest.mark.parametrize("criterion", sorted(NAMES), ids=[NAMES[c] for c in sorted(NAMES)])
def test_criterion(criterion):
    result = acceptance.run_check(criterion)
    line = acceptance.format_line(result)
    ACCEPTANCE_LINES.append(line)
    print("\n" + line)
    assert result.passed, acceptance.format_line(result)


def test_all_criteria_registered():
    assert sorted(acceptance.CHECKS) == list(range(1, 11))
