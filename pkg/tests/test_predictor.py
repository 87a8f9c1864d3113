import numpy as np
import pytest

from faasprof.errors import ModelError
from faasprof.model_io import TrainedModel
from faasprof.predictor import (
    ComponentModels,
    ComponentModelSet,
    features_from_config,
    predict_async_workflow,
    predict_component,
    predict_sync_workflow,
)
from faasprof.regressors.linear import RidgeModel
from faasprof.simulator import WorkloadSpec
from faasprof.workflow import (
    Component,
    Resource,
    WorkflowSpec,
    enumerate_deployments,
    enumerate_testing_units,
    expand_configurations,
)


def constant_model(value, base_columns=("cores",)):
    """Zero-coefficient ridge + target offset: predicts `value` for any input."""
    return TrainedModel(
        algorithm="ridge",
        estimator=RidgeModel(np.zeros(len(base_columns)), 0.0),
        hyperparameters={},
        features=tuple(base_columns),
        base_columns=tuple(base_columns),
        target_stats=(float(value), 1.0),
    )


def linear_model(coefficients, base_columns):
    """Pure linear form sum(c_i * x_i), no normalization."""
    return TrainedModel(
        algorithm="ridge",
        estimator=RidgeModel(np.asarray(coefficients, dtype=float), 0.0),
        hyperparameters={},
        features=tuple(base_columns),
        base_columns=tuple(base_columns),
    )


def model_set(entries):
    return ComponentModelSet(tuple(entries), dict(entries))


class TestPredictComponent:
    def test_constant_model_echoes_value(self):
        model = constant_model(42.0)
        assert predict_component(model, {"cores": 3}) == pytest.approx(42.0)

    def test_linear_inv_cores_model_vs_hand_evaluation(self):
        # t = 20*1 + 300*inv_cores evaluated by hand at cores=4 -> 95
        model = linear_model([20.0, 300.0], ("one", "inv_cores"))
        got = predict_component(model, {"one": 1.0, "inv_cores": 0.25})
        assert abs(got - 95.0) < 1e-12

    def test_missing_feature_errors(self):
        model = constant_model(1.0, base_columns=("cores",))
        with pytest.raises(ModelError, match="cores"):
            predict_component(model, {"batch_size": 4})


class TestAsyncComposition:
    def _features(self, names):
        return {n: {"cores": 4.0} for n in names}

    def test_two_component_correction(self):
        models = model_set(
            {
                "a": ComponentModels(runtime=constant_model(100.0), avg_compute=constant_model(10.0)),
                "b": ComponentModels(runtime=constant_model(80.0), avg_compute=constant_model(8.0)),
            }
        )
        assert predict_async_workflow(models, self._features(["a", "b"])) == pytest.approx(170.0)

    def test_single_component_no_correction(self):
        models = model_set({"a": ComponentModels(runtime=constant_model(100.0))})
        assert predict_async_workflow(models, self._features(["a"])) == pytest.approx(100.0)

    def test_three_component_correction(self):
        models = model_set(
            {
                name: ComponentModels(runtime=constant_model(60.0), avg_compute=constant_model(5.0))
                for name in ("a", "b", "c")
            }
        )
        assert predict_async_workflow(models, self._features(["a", "b", "c"])) == pytest.approx(170.0)

    def test_clamped_at_max_runtime(self):
        models = model_set(
            {
                "a": ComponentModels(runtime=constant_model(100.0), avg_compute=constant_model(95.0)),
                "b": ComponentModels(runtime=constant_model(5.0)),
            }
        )
        assert predict_async_workflow(models, self._features(["a", "b"])) == pytest.approx(100.0)

    def test_corrected_never_exceeds_naive_sum(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            runtimes = rng.uniform(10, 100, size=3)
            avgs = rng.uniform(0, 9, size=3)
            models = model_set(
                {
                    f"s{i}": ComponentModels(
                        runtime=constant_model(runtimes[i]), avg_compute=constant_model(avgs[i])
                    )
                    for i in range(3)
                }
            )
            total = predict_async_workflow(models, self._features(["s0", "s1", "s2"]))
            assert total <= runtimes.sum() + 1e-9
            assert total >= runtimes.max() - 1e-9

    def test_negative_prediction_flags_model(self):
        models = model_set(
            {
                "a": ComponentModels(runtime=constant_model(-3.0)),
                "b": ComponentModels(runtime=constant_model(5.0)),
            }
        )
        with pytest.raises(ModelError, match="'a'"):
            predict_async_workflow(models, self._features(["a", "b"]))


class TestSyncComposition:
    def test_pass_through_when_unsaturated(self):
        # throughput models echo the arrival rate: every stage sees lambda_in
        echo = linear_model([1.0], ("lambda",))
        models = model_set(
            {
                "a": ComponentModels(response=constant_model(2.0), throughput=echo),
                "b": ComponentModels(response=constant_model(3.0), throughput=echo),
            }
        )
        features = {"a": {"cores": 2.0}, "b": {"cores": 2.0}}
        assert predict_sync_workflow(models, features, lambda_in=0.4) == pytest.approx(5.0)

    def test_saturated_first_component_caps_downstream_rate(self):
        # component a saturates at 1.5 req/s; b's time is 1 + lambda
        models = model_set(
            {
                "a": ComponentModels(response=constant_model(2.0), throughput=constant_model(1.5)),
                "b": ComponentModels(
                    response=linear_model([1.0, 0.0, 1.0], ("one", "cores", "lambda")),
                ),
            }
        )
        features = {"a": {"cores": 2.0}, "b": {"one": 1.0, "cores": 2.0}}
        total = predict_sync_workflow(models, features, lambda_in=4.0)
        # b evaluated at min(4.0, 1.5) = 1.5, not 4.0
        assert total == pytest.approx(2.0 + (1.0 + 1.5))
        raw = predict_sync_workflow(models, features, lambda_in=4.0, propagate=False)
        assert raw == pytest.approx(2.0 + (1.0 + 4.0))

    def test_rates_non_increasing_down_the_chain(self):
        seen = []

        class SpyModel(TrainedModel):
            def predict_row(self, values):
                seen.append(values["lambda"])
                return 1.0

        spy = SpyModel(
            algorithm="ridge",
            estimator=RidgeModel(np.zeros(1), 0.0),
            hyperparameters={},
            features=("lambda",),
            base_columns=("lambda",),
        )
        models = model_set(
            {
                name: ComponentModels(
                    response=spy, throughput=constant_model(rate, base_columns=("lambda",))
                )
                for name, rate in (("a", 3.0), ("b", 0.5), ("c", 9.0))
            }
        )
        features = {n: {} for n in ("a", "b", "c")}
        predict_sync_workflow(models, features, lambda_in=2.0)
        assert seen == sorted(seen, reverse=True)

    def test_nonpositive_throughput_errors(self):
        by_rate = lambda v: constant_model(v, base_columns=("lambda",))
        models = model_set(
            {
                "a": ComponentModels(response=by_rate(1.0), throughput=by_rate(0.0)),
                "b": ComponentModels(response=by_rate(1.0)),
            }
        )
        with pytest.raises(ModelError, match="throughput"):
            predict_sync_workflow(models, {"a": {}, "b": {}}, lambda_in=1.0)

    def test_bad_lambda_rejected(self):
        models = model_set(
            {"a": ComponentModels(response=constant_model(1.0, base_columns=("lambda",)))}
        )
        with pytest.raises(ModelError):
            predict_sync_workflow(models, {"a": {}}, lambda_in=0.0)


class TestFeaturesFromConfig:
    def test_cores_and_batch(self):
        res = Resource("vm", cores_per_node=8, node_counts=(1,))
        faas = Resource("faas", unbounded=True)
        wf = WorkflowSpec(
            (Component("a", frozenset({"vm"})), Component("b", frozenset({"faas"}))),
            {"vm": res, "faas": faas},
        )
        deployment = enumerate_deployments(wf, enumerate_testing_units(wf))[0]
        config = expand_configurations(
            deployment, {"a": [4]}, wf, workload=WorkloadSpec(mode="async_batch", batch_size=10)
        )[0]
        features = features_from_config(config, wf, batch_size=10)
        assert features["a"] == {"cores": 4.0, "batch_size": 10.0}
        assert features["b"] == {"batch_size": 10.0}  # unbounded: no cores feature
