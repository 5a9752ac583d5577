"""Desk-comparison driver tests at reduced dataset scale.

The full-scale run lives in the acceptance suite; here we only check
the driver's configuration, determinism and result structure on a
dataset small enough to train in a few seconds.
"""

import pytest

from ldcf.deskrun import desk_run_config, run_desk_comparison
from ldcf.synthdata import DeskSpec

TINY = DeskSpec(n_pos_train=10, n_neg_train=8, n_test=6, seed=0)


def test_config_is_the_fixed_small_scale_design():
    run = desk_run_config(3)
    assert run.detect.window_height == 32
    assert run.detect.window_width == 16
    assert run.detect.decision_threshold == -2.0
    assert run.boost.num_trees == 256
    assert run.boost.max_depth == 2
    assert run.boost.bootstrap_schedule == (32,)
    assert run.boost.negatives_cap == 1000
    assert run.train.initial_negatives_per_image == 3
    assert (run.seed, run.boost.seed) == (3, 3)


@pytest.fixture(scope="module")
def result():
    return run_desk_comparison(0, spec=TINY)


class TestTinyComparison:
    def test_result_structure(self, result):
        assert result.seed == 0
        assert 0.0 <= result.raw_mr <= 1.0
        assert 0.0 <= result.decorrelated_mr <= 1.0
        assert result.seconds > 0.0

    def test_decorrelation_helps_on_this_dataset(self, result):
        assert result.decorrelated_mr < result.raw_mr

    def test_deterministic(self, result):
        again = run_desk_comparison(0, spec=TINY)
        assert again.raw_mr == result.raw_mr
        assert again.decorrelated_mr == result.decorrelated_mr
        assert again.warnings == result.warnings
