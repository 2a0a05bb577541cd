import numpy as np
import pytest

from monotraj import metrics, objective, trainer
from monotraj.cohort import Cohort, SplitPlan, TaskSpec, select_task
from monotraj.errors import ConfigError, DivergenceError, ProtocolError
from monotraj.synthgen import GenConfig, generate
from monotraj.trainer import ModelSpec, TrainConfig, TrainedModel

from conftest import make_subject


def _binary_cohort(rows):
    """rows: (sid, ages, features, labels); stages follow the labels."""
    subjects = [
        make_subject(sid, ages, ["EMCI" if y else "HC" for y in labels], feats, labels=labels)
        for sid, ages, feats, labels in rows
    ]
    return Cohort(tuple(subjects), tuple(f"x{j}" for j in range(len(rows[0][2][0]))), "toy",
                  TaskSpec.parse("HC_EMCI"))


@pytest.fixture
def separable():
    return _binary_cohort([
        ("a", [70.0, 71.0, 72.0], [[-2.0, 0.1], [-1.0, 0.3], [1.5, 0.2]], [0, 0, 1]),
        ("b", [60.0, 62.0], [[-1.5, -0.4], [2.0, 0.0]], [0, 1]),
    ])


@pytest.fixture(scope="module")
def easy_cohort():
    synth = generate(GenConfig(n_subjects=120, d=6, noise_std=0.05, seed=3))
    return select_task(synth.cohort, TaskSpec.parse("HC_AD"))


class TestConfig:
    @pytest.mark.parametrize(
        "kwargs",
        [
            {"gamma": -1.0},
            {"gamma": float("inf")},
            {"learning_rate": 0.0},
            {"learning_rate": float("nan")},
            {"reg_mode": "diagonal"},
            {"optimizer": "lbfgs"},
            {"epochs": 0},
            {"subjects_per_batch": 0},
            {"subjects_per_batch": "some"},
        ],
    )
    def test_rejects(self, kwargs):
        with pytest.raises(ConfigError):
            TrainConfig(**kwargs)

    def test_batch_size_policy(self):
        cfg = TrainConfig()
        assert cfg.batch_size_for(400) == 400
        assert cfg.batch_size_for(401) == 32
        assert TrainConfig(subjects_per_batch=7).batch_size_for(10) == 7
        assert TrainConfig(subjects_per_batch="all").batch_size_for(5000) == 5000


class TestBatching:
    def test_subjects_never_split(self):
        rng = np.random.default_rng(0)
        seen = np.concatenate(list(trainer.iter_subject_batches(23, 5, rng)))
        assert sorted(seen.tolist()) == list(range(23))

    def test_take_keeps_whole_subjects(self, easy_cohort):
        batch = objective.SubjectBatch.from_cohort(easy_cohort)
        sub = batch.take([3, 0])
        sizes = [easy_cohort.subjects[i].n_visits for i in (3, 0)]
        assert np.diff(sub.offsets).tolist() == sizes


class TestTrain:
    def test_separable_reaches_full_accuracy(self, separable):
        model = trainer.train(separable, TrainConfig(gamma=0.0, epochs=200, learning_rate=1e-2, seed=1))
        rep = metrics.evaluate_scorer(model.score, separable)
        assert rep.accuracy == 1.0
        assert len(model.loss_history) == 200

    def test_deterministic(self, easy_cohort):
        cfg = TrainConfig(gamma=2e-4, epochs=15, seed=4, hidden=(8, 4))
        a, b = trainer.train(easy_cohort, cfg), trainer.train(easy_cohort, cfg)
        assert a.loss_history == b.loss_history
        for x, y in zip(a.params.arrays(), b.params.arrays()):
            assert x.tobytes() == y.tobytes()

    def test_minibatch_deterministic(self, easy_cohort):
        cfg = TrainConfig(gamma=1.0, epochs=5, seed=2, hidden=(8, 4), subjects_per_batch=16)
        assert trainer.train(easy_cohort, cfg).loss_history == trainer.train(easy_cohort, cfg).loss_history

    def test_gamma_zero_equals_disabled_regularizer(self, easy_cohort, monkeypatch):
        cfg = TrainConfig(gamma=0.0, epochs=20, seed=9, hidden=(8, 4))
        with_reg = trainer.train(easy_cohort, cfg)

        def disabled(embeddings, w, pairs, n_subjects, eps=objective.DEFAULT_EPS):
            G = np.asarray(embeddings)
            return 0.0, np.zeros_like(G), np.zeros_like(w), 0

        monkeypatch.setattr(objective, "batch_regularizer", disabled)
        without = trainer.train(easy_cohort, cfg)
        assert with_reg.loss_history == without.loss_history

    def test_gamma_changes_training(self, easy_cohort):
        base = TrainConfig(gamma=0.0, epochs=10, seed=9, hidden=(8, 4))
        a = trainer.train(easy_cohort, base)
        b = trainer.train(easy_cohort, TrainConfig(gamma=1.0, epochs=10, seed=9, hidden=(8, 4)))
        assert a.loss_history != b.loss_history

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_divergence(self, separable):
        cfg = TrainConfig(gamma=0.0, epochs=50, learning_rate=1e300, optimizer="sgd", hidden=(4,))
        with pytest.raises(DivergenceError) as info:
            trainer.train(separable, cfg)
        assert info.value.learning_rate == 1e300

    def test_checkpoint_round_trip(self, easy_cohort, tmp_path):
        model = trainer.fit_model(easy_cohort, ModelSpec(config=TrainConfig(epochs=3, hidden=(5,))))
        model.save(tmp_path / "m.json")
        back = TrainedModel.load(tmp_path / "m.json")
        X = model.prepare(easy_cohort).features()
        np.testing.assert_array_equal(model.score(X), back.score(back.prepare(easy_cohort).features()))
        assert back.loss_history == model.loss_history and back.config == model.config


class TestLogreg:
    def test_sign_recovery(self):
        rows = [(f"s{i}", [60.0 + i], [[x]], [int(x > 0)]) for i, x in enumerate(np.linspace(-2, 2, 10))]
        model = trainer.train_logreg_baseline(_binary_cohort(rows))
        assert model.params.w[0] > 0

    def test_l2_shrinks_weights(self, easy_cohort):
        from monotraj.cohort import standardize

        cohort, _ = standardize(easy_cohort)
        norms = [np.linalg.norm(trainer.train_logreg_baseline(cohort, l2=l2, epochs=2000).params.w)
                 for l2 in (0.0, 1.0, 10.0)]
        assert norms[0] > norms[1] > norms[2]

    def test_separable_full_accuracy(self, separable):
        model = trainer.train_logreg_baseline(separable, l2=0.0, epochs=500)
        assert metrics.evaluate_scorer(model.score, separable).accuracy == 1.0

    def test_loss_nonincreasing(self, easy_cohort):
        model = trainer.train_logreg_baseline(easy_cohort, epochs=300)
        assert np.all(np.diff(model.loss_history) <= 1e-9)

    def test_small_fixed_step_nonincreasing(self, easy_cohort):
        model = trainer.train_logreg_baseline(easy_cohort, l2=0.1, epochs=200, learning_rate=1e-3)
        assert np.all(np.diff(model.loss_history) <= 1e-9)


class TestCrossValidate:
    def test_counts_and_partition(self, easy_cohort):
        spec = ModelSpec(config=TrainConfig(epochs=40, hidden=(16, 8), learning_rate=1e-2))
        cv = trainer.cross_validate(easy_cohort, SplitPlan(0.2, 5, seed=1), spec)
        assert len(cv.fold_reports) == 5 and cv.test_report is not None
        ids = [set(cv.split.test.ids)] + [set(f.ids) for f in cv.split.folds]
        for i in range(len(ids)):
            for j in range(i + 1, len(ids)):
                assert not ids[i] & ids[j]
        assert set().union(*ids) == set(easy_cohort.ids)
        assert all(r.accuracy >= 0.9 for r in cv.fold_reports)

    def test_logreg_folds(self, easy_cohort):
        cv = trainer.cross_validate(easy_cohort, SplitPlan(0.2, 3, seed=0), ModelSpec(kind="logreg"))
        assert len(cv.fold_reports) == 3 and cv.kind == "logreg"
        assert cv.fold_mean("accuracy") >= 0.9

    def test_one_fold_rejected(self, easy_cohort):
        with pytest.raises(ConfigError):
            trainer.cross_validate(easy_cohort, SplitPlan(0.2, 1), ModelSpec())

    def test_check_partition(self):
        trainer.check_partition([["a", "b"], ["c"]], ["a", "b", "c"])
        with pytest.raises(ProtocolError):
            trainer.check_partition([["a", "b"], ["b"]])
        with pytest.raises(ProtocolError):
            trainer.check_partition([["a"], ["b"]], ["a", "b", "c"])
