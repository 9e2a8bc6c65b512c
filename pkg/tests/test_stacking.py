import numpy as np
import pytest

from oracles import logistic_data
from staplr.core import (
    CollinearityError,
    FittedLinearModel,
    FoldPartition,
    InvalidArgumentError,
    MultiViewDataset,
    PenaltySpec,
    derive_rng,
    make_folds,
)
from staplr.cv import LearnerSpec
from staplr.lemmas import intercept_cv_predictor
from staplr.stacking import (
    DEFAULT_BASE_SPEC,
    DEFAULT_META_SPEC,
    StackedModel,
    base_probabilities,
    fit_linear_meta,
    fit_staplr,
    load_stacked_model,
    predict_stacked,
    save_stacked_model,
    selected_views,
)

FAST_BASE = LearnerSpec(family="ridge", k=4, n_lambda=20)
FAST_META = LearnerSpec(family="lasso", nonnegative=True, standardize=False,
                        k=4, n_lambda=20)


def _intercept_base(b0):
    return FittedLinearModel(
        intercept=float(b0), coefficients=np.zeros(1),
        penalty=PenaltySpec(family="ridge", lam=1.0), converged=True,
        n_iterations=1)


def _meta(b0, beta, nonneg=False):
    return FittedLinearModel(
        intercept=float(b0), coefficients=np.asarray(beta, dtype=np.float64),
        penalty=PenaltySpec(family="lasso", lam=0.1, nonnegative=nonneg),
        converged=True, n_iterations=1)


def _hand_model(meta):
    n_views = meta.n_features
    return StackedModel(
        base_models=tuple(_intercept_base(b0)
                          for b0 in ([0.0, np.log(3.0)] * n_views)[:n_views]),
        meta_model=meta,
        z_matrix=np.full((2, n_views), 0.5),
        fold_partition=FoldPartition(n=2, assignments=np.array([1, 2]), k=2),
        base_spec=DEFAULT_BASE_SPEC,
        meta_spec=DEFAULT_META_SPEC,
        view_names=tuple(f"v{i}" for i in range(n_views)),
        seed=0,
    )


def _tiny_dataset(seed=0, n=80, signal=2.0):
    rng = derive_rng(seed)
    Xs = rng.standard_normal((n, 2))
    Xn = rng.standard_normal((n, 2))
    p = 1.0 / (1.0 + np.exp(-(Xs @ np.array([signal, signal]))))
    y = (rng.random(n) < p).astype(np.int64)
    if y.min() == y.max():
        y[:2] = [0, 1]
    return MultiViewDataset(views=(Xs, Xn), outcomes=y,
                            view_names=("signal", "noise"))


class TestHandBuiltComposition:
    def test_meta_composition_value(self):
        # base probabilities (0.5, 0.75) through meta (b0=0, beta=(0,4))
        model = _hand_model(_meta(0.0, [0.0, 4.0]))
        X = np.zeros((1, 1))
        data = MultiViewDataset(views=(np.zeros((2, 1)), np.zeros((2, 1))),
                                outcomes=np.array([0, 1]),
                                view_names=("v0", "v1"))
        probs = base_probabilities(model, data)
        assert np.abs(probs - [0.5, 0.75]).max() < 1e-12
        out = predict_stacked(model, data)
        assert np.abs(out - 1.0 / (1.0 + np.exp(-3.0))).max() < 1e-12

    def test_intercept_only_meta_constant(self):
        model = _hand_model(_meta(1.2, [0.0, 0.0]))
        data = MultiViewDataset(views=(np.ones((3, 1)), np.ones((3, 1))),
                                outcomes=np.array([0, 1, 0]),
                                view_names=("v0", "v1"))
        out = predict_stacked(model, data)
        assert np.abs(out - 1.0 / (1.0 + np.exp(-1.2))).max() < 1e-12

    def test_selected_views(self):
        assert selected_views(_hand_model(_meta(0.0, [0.0, 0.0]))) == set()
        three = StackedModel(
            base_models=tuple(_intercept_base(0.0) for _ in range(3)),
            meta_model=_meta(0.0, [0.3, 0.0, 1.2]),
            z_matrix=np.full((2, 3), 0.5),
            fold_partition=FoldPartition(n=2, assignments=np.array([1, 2]), k=2),
            base_spec=DEFAULT_BASE_SPEC, meta_spec=DEFAULT_META_SPEC,
            view_names=("a", "b", "c"), seed=0)
        assert selected_views(three) == {0, 2}

    def test_meta_view_count_mismatch_rejected(self):
        with pytest.raises(InvalidArgumentError):
            StackedModel(
                base_models=(_intercept_base(0.0), _intercept_base(0.0)),
                meta_model=_meta(0.0, [0.0, 0.0, 0.0]),
                z_matrix=np.full((2, 2), 0.5),
                fold_partition=FoldPartition(n=2, assignments=np.array([1, 2]),
                                             k=2),
                base_spec=DEFAULT_BASE_SPEC, meta_spec=DEFAULT_META_SPEC,
                view_names=("a", "b"), seed=0)

    def test_wrong_view_count_at_predict(self):
        model = _hand_model(_meta(0.0, [0.0, 4.0]))
        data = MultiViewDataset(views=(np.zeros((2, 1)),),
                                outcomes=np.array([0, 1]), view_names=("v0",))
        with pytest.raises(InvalidArgumentError):
            predict_stacked(model, data)


class TestFitStaplr:
    def test_basic_fit_shape_and_constraints(self):
        data = _tiny_dataset()
        model = fit_staplr(data, FAST_BASE, FAST_META, k=4, seed=3)
        assert model.n_views == 2
        assert model.meta_model.coefficients.min() >= 0.0
        assert model.z_matrix.shape == (80, 2)
        assert np.all((model.z_matrix > 0) & (model.z_matrix < 1))
        preds = predict_stacked(model, data)
        assert np.all((preds > 0) & (preds < 1))

    def test_single_view_monotone_recalibration(self):
        rng = derive_rng(13)
        X, y = logistic_data(rng, 70, 2, beta_scale=2.0, standardize=False)
        data = MultiViewDataset(views=(X,), outcomes=y.astype(np.int64),
                                view_names=("only",))
        model = fit_staplr(data, FAST_BASE, FAST_META, k=4, seed=1)
        assert selected_views(model) <= {0}
        base = base_probabilities(model, data)[:, 0]
        out = predict_stacked(model, data)
        order = np.argsort(base)
        assert np.all(np.diff(out[order]) >= -1e-15)

    def test_view_permutation_equivariance(self):
        data = _tiny_dataset(seed=5)
        swapped = MultiViewDataset(views=data.views[::-1],
                                   outcomes=data.outcomes,
                                   view_names=data.view_names[::-1])
        a = fit_staplr(data, FAST_BASE, FAST_META, k=4, seed=9)
        b = fit_staplr(swapped, FAST_BASE, FAST_META, k=4, seed=9)
        assert np.abs(a.meta_model.coefficients
                      - b.meta_model.coefficients[::-1]).max() < 1e-8
        for v in range(2):
            assert np.array_equal(a.base_models[v].coefficients,
                                  b.base_models[1 - v].coefficients)
        assert np.array_equal(a.z_matrix, b.z_matrix[:, ::-1])

    def test_parallel_workers_identical(self):
        data = _tiny_dataset(seed=6)
        a = fit_staplr(data, FAST_BASE, FAST_META, k=4, seed=2, n_jobs=1)
        b = fit_staplr(data, FAST_BASE, FAST_META, k=4, seed=2, n_jobs=2)
        assert np.array_equal(a.z_matrix, b.z_matrix)
        assert np.array_equal(a.meta_model.coefficients,
                              b.meta_model.coefficients)

    def test_signal_view_selected_noise_dropped(self):
        hits_signal = hits_noise = 0
        reps = 50
        for rep in range(reps):
            data = _tiny_dataset(seed=1000 + rep, n=500)
            model = fit_staplr(data, FAST_BASE, FAST_META, k=4, seed=rep)
            chosen = selected_views(model)
            if 0 in chosen:
                hits_signal += 1
            if 1 in chosen:
                hits_noise += 1
        assert hits_signal >= 0.9 * reps
        assert reps - hits_noise >= 0.9 * reps

    def test_all_noise_nonneg_selects_nothing(self):
        reps = 50
        empty = 0
        for rep in range(reps):
            rng = derive_rng(4000, rep)
            views = tuple(rng.standard_normal((200, 10)) for _ in range(5))
            y = rng.integers(0, 2, 200)
            if y.min() == y.max():
                y[:2] = [0, 1]
            data = MultiViewDataset(views=views, outcomes=y,
                                    view_names=tuple(f"v{i}" for i in range(5)))
            model = fit_staplr(data, FAST_BASE, FAST_META, k=4, seed=rep)
            if not selected_views(model):
                empty += 1
        assert empty >= 0.8 * reps


class TestLinearMeta:
    def test_degenerate_regime(self):
        rng = derive_rng(31)
        n = 40
        y = rng.integers(0, 2, n).astype(np.float64)
        y[:2] = [0, 1]
        loo = FoldPartition(n=n, assignments=np.arange(1, n + 1), k=n)
        z1 = intercept_cv_predictor(y, loo)
        z2 = 0.5 * y + 0.2 * rng.standard_normal(n)
        Z = np.column_stack([z1, z2])
        b0, beta = fit_linear_meta(Z, y, nonnegative=False)
        assert abs(beta[0] - (1.0 - n)) < 1e-8
        assert abs(beta[1]) < 1e-8
        b0n, beta_n = fit_linear_meta(Z, y, nonnegative=True)
        assert beta_n[0] == 0.0
        assert beta_n[1] > 0.0

    def test_collinear_rejected(self):
        z = np.arange(6.0)
        Z = np.column_stack([z, 2 * z + 1])
        with pytest.raises(CollinearityError):
            fit_linear_meta(Z, np.array([0, 1, 0, 1, 0, 1.0]))

    def test_shape_checked(self):
        with pytest.raises(InvalidArgumentError):
            fit_linear_meta(np.ones((4, 2)), np.ones(5))


class TestSerialization:
    def test_round_trip_bit_exact(self, tmp_path):
        data = _tiny_dataset(seed=8)
        model = fit_staplr(data, FAST_BASE, FAST_META, k=4, seed=4)
        path = str(tmp_path / "model.json")
        save_stacked_model(model, path)
        loaded = load_stacked_model(path)
        assert np.array_equal(predict_stacked(model, data),
                              predict_stacked(loaded, data))
        assert np.array_equal(model.z_matrix, loaded.z_matrix)
        assert loaded.base_spec == model.base_spec
        assert loaded.meta_spec == model.meta_spec
        assert np.array_equal(model.fold_partition.assignments,
                              loaded.fold_partition.assignments)

    def test_unrecognized_document_rejected(self, tmp_path):
        import json

        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"kind": "mystery", "schema_version": 1}))
        from staplr.stacking import stacked_model_from_dict

        with pytest.raises(InvalidArgumentError):
            stacked_model_from_dict(json.loads(path.read_text()))
