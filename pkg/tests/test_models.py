import numpy as np
import pytest

from featforge import models
from featforge.engine import AggregationFunction as F
from featforge.models import LossValue, ModelSpec, TaskKind, WORST_LOSS
from featforge.query import build_space, build_template, decode
from featforge.table import ColumnKind, table_from_columns


class TestFit:
    def test_separable_points(self):
        X = np.array([[0.0], [1.0]])
        y = np.array([0, 1])
        model = models.fit(X, y, ModelSpec())
        assert (model.predict_labels(X) == y).all()

    def test_linear_recovers_slope(self):
        rng = np.random.default_rng(0)
        x = rng.uniform(-3, 3, size=60)
        y = 2.0 * x + 1.0
        model = models.fit(x[:, None], y, ModelSpec(kind="linear", l2=0.0))
        closed_form = np.linalg.lstsq(np.column_stack([x, np.ones_like(x)]), y, rcond=None)[0]
        probe = np.array([[0.0], [1.0]])
        slope = float(np.diff(model.decision_scores(probe))[0])
        assert slope == pytest.approx(closed_form[0], abs=1e-3)

    def test_deterministic(self):
        rng = np.random.default_rng(1)
        X = rng.normal(size=(30, 3))
        y = (X[:, 0] > 0).astype(int)
        w1 = models.fit(X, y, ModelSpec(), seed=5).weights
        w2 = models.fit(X, y, ModelSpec(), seed=5).weights
        np.testing.assert_array_equal(w1, w2)

    def test_single_class_rejected(self):
        with pytest.raises(ValueError, match="2 classes"):
            models.fit(np.zeros((4, 1)), np.zeros(4), ModelSpec())

    def test_ovr_multiclass(self):
        rng = np.random.default_rng(2)
        centers = np.array([[-4.0], [0.0], [4.0]])
        X = np.vstack([c + 0.2 * rng.normal(size=(20, 1)) for c in centers])
        y = np.repeat([0, 1, 2], 20)
        model = models.fit(X, y, ModelSpec(kind="ovr_logistic"))
        assert (model.predict_labels(X) == y).mean() > 0.95


class TestAuc:
    def test_perfect_ranking(self):
        assert models.auc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0

    def test_all_ties(self):
        assert models.auc([0.5, 0.5, 0.5, 0.5], [0, 1, 0, 1]) == 0.5

    def test_pair_enumeration_case(self):
        # pairs: (.35,.1) win, (.35,.4) loss, (.8,.1) win, (.8,.4) win -> 3/4
        assert models.auc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == 0.75

    def test_single_class_rejected(self):
        with pytest.raises(ValueError):
            models.auc([0.1, 0.2], [1, 1])

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(3)
        scores = rng.normal(size=40)
        labels = rng.integers(0, 2, size=40)
        labels[:2] = [0, 1]
        base = models.auc(scores, labels)
        assert models.auc(np.exp(scores), labels) == pytest.approx(base)
        assert models.auc(3 * scores - 7, labels) == pytest.approx(base)


class TestLoss:
    def test_perfect_regression(self):
        X = np.linspace(0, 1, 20)[:, None]
        y = 3 * X[:, 0]
        model = models.fit(X, y, ModelSpec(kind="linear", l2=0.0, epochs=2000))
        out = models.loss(model, X, y, TaskKind.REGRESSION)
        assert out.value == pytest.approx(0.0, abs=1e-3)

    def test_constant_classifier_is_half(self):
        X = np.zeros((20, 1))
        y = np.array([0, 1] * 10)
        model = models.fit(X, y, ModelSpec())
        out = models.loss(model, X, y, TaskKind.BINARY)
        assert out.value == 0.5 and out.metric_raw == 0.5

    def test_hand_built_validation_set(self):
        # manual check: scores (.2,.3,.9,.8,.1,.6), labels (0,0,1,1,0,1)
        # pairs won: all except (.6 vs .2/.3/.1 wins, .6 vs nothing loses) ... enumerate:
        # positives {.9,.8,.6} vs negatives {.2,.3,.1}: 9 pairs, all won -> AUC 1
        scores = np.array([0.2, 0.3, 0.9, 0.8, 0.1, 0.6])
        labels = np.array([0, 0, 1, 1, 0, 1])
        assert models.auc(scores, labels) == 1.0
        # drop one positive to .25: it loses only to the .3 negative -> 8 wins of 9
        scores2 = np.array([0.2, 0.3, 0.9, 0.8, 0.1, 0.25])
        assert models.auc(scores2, labels) == pytest.approx(8 / 9)

    def test_single_class_valid_degenerates(self):
        X = np.array([[0.0], [1.0], [0.2], [0.9]])
        y = np.array([0, 1, 0, 1])
        model = models.fit(X, y, ModelSpec())
        out = models.loss(model, np.array([[0.5]]), np.array([1]), TaskKind.BINARY)
        assert out == LossValue(0.5, 0.5)

    def test_macro_f1(self):
        y_true = [0, 0, 1, 1, 2, 2]
        y_pred = [0, 0, 1, 2, 2, 2]
        # class 0: f1=1; class 1: p=1, r=.5 -> f1=2/3; class 2: p=2/3, r=1 -> f1=.8
        assert models.macro_f1(y_true, y_pred) == pytest.approx((1 + 2 / 3 + 0.8) / 3)


def _planted_setup():
    """Relevant table whose per-key AVG(v) equals a signal driving the labels."""
    keys = [f"u{i}" for i in range(40)]
    signal = np.array([(-1.0 if i % 2 else 1.0) for i in range(40)])
    r_keys, r_vals = [], []
    for key, s in zip(keys, signal):
        r_keys += [key, key]
        r_vals += [s + 0.1, s - 0.1]
    relevant = table_from_columns(
        "r",
        {"k": (ColumnKind.TEXT, r_keys), "v": (ColumnKind.FLOAT, r_vals)},
    )
    rng = np.random.default_rng(8)
    noise = rng.normal(size=40)
    train = table_from_columns(
        "d", {"k": (ColumnKind.TEXT, keys[:30]), "base": (ColumnKind.FLOAT, list(noise[:30]))}
    )
    valid = table_from_columns(
        "d", {"k": (ColumnKind.TEXT, keys[30:]), "base": (ColumnKind.FLOAT, list(noise[30:]))}
    )
    labels = (signal > 0).astype(int)
    return relevant, train, valid, noise, labels


class TestQueryObjective:
    def _query(self, relevant):
        tpl = build_template(relevant, [F.AVG], ["v"], [], ["k"])
        space = build_space(tpl, relevant)
        return decode(space, (0, 0, 1))

    def test_planted_feature_beats_base(self):
        relevant, train, valid, noise, labels = _planted_setup()
        base_train, base_valid = noise[:30, None], noise[30:, None]
        y_train, y_valid = labels[:30], labels[30:]
        base_model = models.fit(base_train, y_train, ModelSpec())
        base_loss = models.loss(base_model, base_valid, y_valid, TaskKind.BINARY)
        out = models.query_objective(
            self._query(relevant), relevant, train, valid,
            base_train, base_valid, y_train, y_valid,
            ModelSpec(), TaskKind.BINARY,
        )
        assert out.value < base_loss.value
        assert out.value == pytest.approx(0.0, abs=1e-9)  # the feature is the signal

    def test_all_fill_feature_is_inert(self):
        relevant, train, valid, noise, labels = _planted_setup()
        base_train, base_valid = noise[:30, None], noise[30:, None]
        y_train, y_valid = labels[:30], labels[30:]
        tpl = build_template(relevant, [F.AVG], ["v"], [], ["k"])
        space = build_space(tpl, relevant)
        query = decode(space, (0, 0, 1))
        # training tables whose keys never hit the relevant table
        ghost_train = table_from_columns("d", {"k": (ColumnKind.TEXT, ["x"] * 30)})
        ghost_valid = table_from_columns("d", {"k": (ColumnKind.TEXT, ["x"] * 10)})
        base_model = models.fit(base_train, y_train, ModelSpec())
        base_loss = models.loss(base_model, base_valid, y_valid, TaskKind.BINARY)
        out = models.query_objective(
            query, relevant, ghost_train, ghost_valid,
            base_train, base_valid, y_train, y_valid,
            ModelSpec(), TaskKind.BINARY,
        )
        assert abs(out.value - base_loss.value) < 1e-6

    def test_deterministic(self):
        relevant, train, valid, noise, labels = _planted_setup()
        args = (
            self._query(relevant), relevant, train, valid,
            noise[:30, None], noise[30:, None], labels[:30], labels[30:],
            ModelSpec(), TaskKind.BINARY,
        )
        assert models.query_objective(*args) == models.query_objective(*args)

    def test_failure_returns_worst_sentinel(self):
        relevant, train, valid, noise, labels = _planted_setup()
        out = models.query_objective(
            self._query(relevant), relevant, train, valid,
            noise[:30, None], noise[30:, None],
            np.zeros(30),  # single class: fit must fail
            labels[30:], ModelSpec(), TaskKind.BINARY,
        )
        assert out.failed and out.value == WORST_LOSS
