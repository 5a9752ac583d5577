"""Synthetic-benchmark tests: the seeded Gaussian sampler, the two
experiment drivers, aggregate statistics against a hand oracle, and
the report serialization format.
"""

import numpy as np
import pytest

from ldcf.errors import ConfigError
from ldcf.synthbench import (
    BenchReport,
    BenchRow,
    SynthSpec,
    error_rate,
    format_table,
    run_fig1,
    run_fig2,
    sample,
    save_report,
)

SMALL = SynthSpec(n_train=300, n_test=800, seeds=(0, 1, 2))


class TestSpec:
    def test_defaults(self):
        spec = SynthSpec()
        assert spec.cov[0, 1] == 0.95
        assert spec.seeds == tuple(range(10))

    def test_asymmetric_covariance_rejected(self):
        with pytest.raises(ConfigError, match="symmetric"):
            SynthSpec(covariance=((1.0, 0.5), (0.4, 1.0)))

    def test_indefinite_covariance_rejected(self):
        with pytest.raises(ConfigError, match="positive definite"):
            SynthSpec(covariance=((1.0, 1.5), (1.5, 1.0)))

    def test_empty_seeds_rejected(self):
        with pytest.raises(ConfigError, match="seed"):
            SynthSpec(seeds=())


class TestSample:
    def test_deterministic(self):
        a = sample(SMALL, 7)
        b = sample(SMALL, 7)
        np.testing.assert_array_equal(a[0].features, b[0].features)
        np.testing.assert_array_equal(a[1], b[1])
        np.testing.assert_array_equal(a[2], b[2])

    def test_seed_changes_draw(self):
        a = sample(SMALL, 0)
        b = sample(SMALL, 1)
        assert not np.array_equal(a[0].features, b[0].features)

    def test_shapes_and_balance(self):
        ts, x_test, y_test = sample(SMALL, 3)
        assert ts.features.shape == (300, 2)
        assert int((ts.labels > 0).sum()) == 150
        assert x_test.shape == (800, 2)
        assert int((y_test > 0).sum()) == 400

    def test_odd_counts_split_floor_ceil(self):
        spec = SynthSpec(n_train=5, n_test=3, seeds=(0,))
        ts, x_test, y_test = sample(spec, 0)
        assert int((ts.labels > 0).sum()) == 2
        assert int((y_test > 0).sum()) == 1

    def test_class_statistics_near_spec(self):
        spec = SynthSpec(n_train=20000, n_test=1, seeds=(0,))
        ts, _, _ = sample(spec, 0)
        pos = ts.features[ts.labels > 0]
        neg = ts.features[ts.labels < 0]
        assert np.allclose(pos.mean(axis=0), spec.mu_plus, atol=0.03)
        assert np.allclose(neg.mean(axis=0), spec.mu_minus, atol=0.03)
        pooled = np.vstack([pos - pos.mean(axis=0), neg - neg.mean(axis=0)])
        assert np.allclose(np.cov(pooled.T), spec.cov, atol=0.05)


class TestErrorRate:
    def test_separable_problem_reaches_zero(self):
        from ldcf.boost import BoostConfig, FeatureGeometry, TrainingSet, train_realboost

        x = np.array([[-2.0, 0.0], [-1.5, 0.0], [1.5, 0.0], [2.0, 0.0]])
        y = np.array([-1.0, -1.0, 1.0, 1.0])
        ts = TrainingSet.create(x, y, geometry=FeatureGeometry(1, 1, 2, 1))
        ens = train_realboost(ts, BoostConfig(num_trees=4, max_depth=1,
                                              bootstrap_schedule=()))
        assert error_rate(ens, x, y) == 0.0
        assert error_rate(ens, x, -y) == 1.0


@pytest.fixture(scope="module")
def fig1_report():
    return run_fig1(SMALL, tree_counts=(16,), depths=(2,))


@pytest.fixture(scope="module")
def fig2_report():
    return run_fig2(SMALL)


class TestFig1:
    def test_grid_enumeration(self, fig1_report):
        keys = [(r.method, r.num_trees, r.depth, r.seed) for r in fig1_report.rows]
        assert keys == [
            ("orthogonal", 16, 2, 0),
            ("orthogonal", 16, 2, 1),
            ("orthogonal", 16, 2, 2),
            ("oblique", 16, 2, 0),
            ("oblique", 16, 2, 1),
            ("oblique", 16, 2, 2),
        ]

    def test_oblique_beats_orthogonal_on_correlated_data(self, fig1_report):
        by = {a["method"]: a for a in fig1_report.aggregates()}
        assert by["oblique"]["test_mean"] < by["orthogonal"]["test_mean"]

    def test_deterministic(self, fig1_report):
        again = run_fig1(SMALL, tree_counts=(16,), depths=(2,))
        assert again.rows == fig1_report.rows

    def test_unknown_method_rejected(self):
        with pytest.raises(ConfigError, match="unknown method"):
            run_fig1(SMALL, methods=("orthogonal", "random_forest"))


class TestFig2:
    def test_all_transforms_present(self, fig2_report):
        methods = {r.method for r in fig2_report.rows}
        assert methods == {"none", "decorrelate", "pca_whiten", "zca_whiten"}
        assert len(fig2_report.rows) == 4 * len(SMALL.seeds)

    def test_decorrelate_matches_pca_whitening_exactly(self, fig2_report):
        # threshold scans are scale-invariant per feature, so dropping
        # the eigenvalue rescaling cannot move any split
        rows = {(r.method, r.seed): r for r in fig2_report.rows}
        for seed in SMALL.seeds:
            d = rows[("decorrelate", seed)]
            p = rows[("pca_whiten", seed)]
            assert d.train_error == p.train_error
            assert d.test_error == p.test_error

    def test_transformed_beats_raw_on_correlated_data(self, fig2_report):
        by = {a["method"]: a for a in fig2_report.aggregates()}
        assert by["decorrelate"]["test_mean"] < by["none"]["test_mean"]

    def test_unknown_transform_rejected(self):
        with pytest.raises(ConfigError, match="unknown transform"):
            run_fig2(SMALL, transforms=("none", "box_cox"))


class TestAggregates:
    def make_report(self):
        rows = (
            BenchRow("a", 8, 1, 0, 0.10, 0.20),
            BenchRow("a", 8, 1, 1, 0.30, 0.40),
            BenchRow("b", 8, 1, 0, 0.05, 0.06),
        )
        return BenchReport(rows)

    def test_mean_and_stderr_oracle(self):
        aggs = self.make_report().aggregates()
        assert [a["method"] for a in aggs] == ["a", "b"]
        a = aggs[0]
        assert a["train_mean"] == pytest.approx(0.2)
        assert a["test_mean"] == pytest.approx(0.3)
        # sample stderr: std(ddof=1)/sqrt(n)
        assert a["train_stderr"] == pytest.approx(
            np.std([0.1, 0.3], ddof=1) / np.sqrt(2)
        )
        assert a["num_seeds"] == 2

    def test_single_row_stderr_zero(self):
        b = self.make_report().aggregates()[1]
        assert b["test_stderr"] == 0.0
        assert b["num_seeds"] == 1

    def test_groups_keep_first_appearance_order(self):
        rows = (
            BenchRow("z", 4, 1, 0, 0.1, 0.1),
            BenchRow("a", 4, 1, 0, 0.1, 0.1),
            BenchRow("z", 4, 1, 1, 0.1, 0.1),
        )
        aggs = BenchReport(rows).aggregates()
        assert [a["method"] for a in aggs] == ["z", "a"]


class TestReportIO:
    def test_save_format(self, tmp_path):
        report = BenchReport((
            BenchRow("a", 8, 1, 0, 0.125, 0.25),
            BenchRow("a", 8, 1, 1, 0.375, 0.5),
        ))
        path = tmp_path / "report.csv"
        save_report(report, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "method,num_trees,depth,seed,train_error,test_error"
        assert lines[1] == "a,8,1,0,0.125,0.25"
        assert lines[2] == "a,8,1,1,0.375,0.5"
        assert len(lines) == 4
        assert lines[3].startswith("# a T=8 D=1: test 0.3750 +- 0.1250")

    def test_rows_roundtrip_full_precision(self, tmp_path):
        err = 1.0 / 3.0
        report = BenchReport((BenchRow("a", 8, 1, 0, err, err),))
        path = tmp_path / "report.csv"
        save_report(report, path)
        row = path.read_text().splitlines()[1].split(",")
        assert float(row[4]) == err
        assert float(row[5]) == err

    def test_format_table(self):
        report = BenchReport((
            BenchRow("orthogonal", 16, 2, 0, 0.1, 0.2),
            BenchRow("oblique", 16, 2, 0, 0.05, 0.06),
        ))
        table = format_table(report)
        lines = table.splitlines()
        assert "method" in lines[0] and "test err" in lines[0]
        assert len(lines) == 4
        assert lines[2].startswith("orthogonal")
        assert lines[3].startswith("oblique")
