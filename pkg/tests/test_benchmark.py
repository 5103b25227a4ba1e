"""
The acceptance benchmark: analytic checks on the declared bundle, and seeded
end-to-end runs (slow; run with ``pytest -m slow``).
"""

import pytest

from vrex_mixup.benchmark import (
    ERM_TEST_MAX, TWO_STAGE_TEST_MIN, TWO_STAGE_VAL_MIN, benchmark_config, benchmark_jobs, benchmark_spec,
    check_thresholds, invariant_accuracy, invariant_snr, median_metric, pooled_agreement,
    pooled_bayes_accuracy, run_benchmark,
)
from vrex_mixup.data import SpuriousSpec, generate_spurious_environments
from vrex_mixup.training import TrainConfig, train_stage1_vrex


class TestDeclaredBundle:
    def test_keeps_default_totals(self):
        bundle = generate_spurious_environments(benchmark_spec(3))
        assert [len(env) for env in bundle.train_envs] == [368, 368, 368, 20]
        assert sum(len(env) for env in bundle.val_envs) == 308
        assert len(bundle.test_envs[0]) == 1000
        assert bundle.feature_dim == 6

    def test_default_generator_lets_erm_transfer(self):
        # the pooled Bayes rule already leans on the invariant block
        assert pooled_bayes_accuracy(SpuriousSpec()) == pytest.approx(0.967, abs=2e-3)
        assert pooled_bayes_accuracy(SpuriousSpec()) > ERM_TEST_MAX

    def test_erm_expected_below_ceiling(self):
        spec = benchmark_spec()
        assert pooled_agreement(spec) == pytest.approx(1121 / 1124)
        assert pooled_bayes_accuracy(spec) == pytest.approx(0.46, abs=0.01)
        assert pooled_bayes_accuracy(spec) < ERM_TEST_MAX

    def test_invariant_block_clears_test_bound(self):
        spec = benchmark_spec()
        assert invariant_snr(spec) == pytest.approx(5 ** 0.5 / 1.4)
        assert invariant_accuracy(spec) > TWO_STAGE_TEST_MIN

    def test_source_domains_reward_the_spurious_sign(self):
        # the invariant block alone sits just under the validation bound
        spec = benchmark_spec()
        assert invariant_accuracy(spec) == pytest.approx(0.945, abs=1e-3)
        assert pooled_bayes_accuracy(spec, correlation=1.0) > TWO_STAGE_VAL_MIN

    def test_jobs_carry_the_bundle(self, tmp_path):
        jobs = benchmark_jobs(tmp_path, seeds=[0, 1])
        assert [(job.method, job.seed) for job in jobs] == [("erm", 0), ("erm", 1), ("vrex_mixup", 0),
                                                            ("vrex_mixup", 1)]
        assert jobs[1].spec == benchmark_spec(1).to_dict()
        assert jobs[0].config == benchmark_config().to_dict()
        assert all(job.spec is None for job in benchmark_jobs(tmp_path, seeds=[0], default_spec=True))


def test_threshold_checks_use_medians():
    rows = [{"method": "erm", "test_macro_f1": v, "val_average_macro_f1": 0.99} for v in (0.4, 0.5, 0.9)]
    rows += [{"method": "vrex_mixup", "test_macro_f1": v, "val_average_macro_f1": w}
             for v, w in ((0.9, 0.96), (0.8, 0.94), (0.88, 0.97))]
    assert median_metric(rows, "erm", "test_macro_f1") == 0.5
    checks = check_thresholds(rows)
    assert [check.passed for check in checks] == [True, True, True]
    rows[1]["test_macro_f1"] = 0.6
    assert not check_thresholds(rows)[0].passed
    assert str(check_thresholds(rows)[0]).startswith("FAIL  ERM median test macro F1 0.6000")


@pytest.mark.slow
class TestAcceptance:
    @pytest.fixture(scope="class")
    def rows(self, tmp_path_factory):
        return run_benchmark(tmp_path_factory.mktemp("benchmark"))

    def test_erm_follows_the_spurious_feature(self, rows):
        assert median_metric(rows, "erm", "test_macro_f1") <= ERM_TEST_MAX

    def test_two_stage_generalizes_to_shifted_domain(self, rows):
        assert median_metric(rows, "vrex_mixup", "test_macro_f1") >= TWO_STAGE_TEST_MIN

    def test_two_stage_fits_source_domains(self, rows):
        assert median_metric(rows, "vrex_mixup", "val_average_macro_f1") >= TWO_STAGE_VAL_MIN

    def test_penalty_shrinks_risk_variance(self):
        bundle = generate_spurious_environments(SpuriousSpec())
        _, log = train_stage1_vrex(bundle, TrainConfig(stage2_epochs=0))
        assert log.records[-1].risk_variance < log.records[0].risk_variance
