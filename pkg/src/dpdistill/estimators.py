"""scikit-learn style estimators wrapping the training pipeline.

These adapters keep the usual fit/predict/get_params contract so the
distiller composes with pipelines, grid search and cross-validation. The
heavy lifting lives in :mod:`dpdistill.pipeline`; constructor arguments map
one-to-one onto :class:`dpdistill.config.ExperimentConfig` fields.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .config import ExperimentConfig
from .generator import GeneratorLossWeights, NoiseSpec, train_generator
from .nn.network import build_mlp
from .nn.optim import Adam
from .pipeline import (
    accuracy,
    fit_softmax_classifier,
    predict_proba,
    run_pipeline,
    stream_rng,
)


class NeuralNetClassifier(ClassifierMixin, BaseEstimator):
    """Small multilayer perceptron classifier.

    Parameters
    ----------
    hidden : tuple of int
        Hidden layer widths.
    normalization : bool
        Insert a batch-normalization layer after each hidden affine map.
    epochs, batch_size, lr : training schedule (Adam).
    seed : int
        Controls initialization and minibatch order; fixed seed and data
        give a bit-identical model.
    """

    def __init__(self, hidden=(32, 32), normalization=True, epochs=30,
                 batch_size=64, lr=1e-3, seed=0):
        self.hidden = hidden
        self.normalization = normalization
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.seed = seed

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        X = np.asarray(X, dtype=np.float32)
        self.classes_, y_idx = np.unique(y, return_inverse=True)
        if len(self.classes_) < 2:
            raise ValueError("need at least 2 classes")
        self.n_features_in_ = X.shape[1]
        self.network_ = build_mlp(
            X.shape[1],
            tuple(self.hidden),
            len(self.classes_),
            normalization=self.normalization,
            seed=self.seed,
        )
        self.loss_curve_ = fit_softmax_classifier(
            self.network_,
            X,
            y_idx,
            epochs=self.epochs,
            batch_size=self.batch_size,
            optimizer=Adam(lr=self.lr),
            rng=stream_rng(self.seed, 2),
            num_classes=len(self.classes_),
        )
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "network_")
        X = check_array(X)
        return predict_proba(self.network_, np.asarray(X, dtype=np.float32))

    def predict(self, X):
        return self.classes_[np.argmax(self.predict_proba(X), axis=1)]


class DataFreeSampler(BaseEstimator):
    """Generator trained against a frozen, fitted classifier.

    ``fit`` ignores its arguments (the whole point is training without
    data); the reference classifier comes in through the constructor and
    must already be fitted with populated normalization statistics.
    """

    def __init__(self, teacher=None, noise_dim=64, hidden=(64, 32), alpha=5.0,
                 beta=10.0, ce_weight=1.0, steps=400, batch_size=64, lr=1e-3,
                 seed=0):
        self.teacher = teacher
        self.noise_dim = noise_dim
        self.hidden = hidden
        self.alpha = alpha
        self.beta = beta
        self.ce_weight = ce_weight
        self.steps = steps
        self.batch_size = batch_size
        self.lr = lr
        self.seed = seed

    def _teacher_network(self):
        if self.teacher is None:
            raise ValueError("DataFreeSampler requires a fitted teacher")
        if hasattr(self.teacher, "network_"):
            return self.teacher.network_
        return self.teacher

    def fit(self, X=None, y=None):
        teacher_net = self._teacher_network()
        out_dim = teacher_net.layers[0].in_dim
        self.generator_ = build_mlp(
            self.noise_dim, tuple(self.hidden), out_dim, seed=self.seed
        )
        self.history_ = train_generator(
            teacher_net,
            self.generator_,
            GeneratorLossWeights(self.alpha, self.beta, self.ce_weight),
            steps=self.steps,
            batch_size=self.batch_size,
            noise=NoiseSpec(dim=self.noise_dim, seed=self.seed),
            lr=self.lr,
            rng=stream_rng(self.seed, 4),
        )
        return self

    def sample(self, n_samples, seed=None):
        check_is_fitted(self, "generator_")
        rng = np.random.default_rng(self.seed if seed is None else seed)
        z = rng.standard_normal((n_samples, self.noise_dim)).astype(np.float32)
        return self.generator_.forward(z, training=False)


class PrivateDistillationClassifier(ClassifierMixin, BaseEstimator):
    """End-to-end label-private distillation as a classifier.

    ``fit(X, y)`` treats (X, y) as the private dataset: it trains the
    teacher, pretrains the generator and runs the staged distillation loop;
    ``predict`` serves the resulting student. The fitted estimator exposes
    the run's accounting: ``label_query_count_`` (one mechanism draw per
    synthetic sample) and ``private_reads_during_stages_`` (always 0).
    """

    def __init__(self, epsilon=1.0, stages=8, samples_per_stage=500,
                 student_epochs_per_stage=5, threshold=None,
                 teacher_hidden=(32, 32), student_hidden=(16,),
                 generator_hidden=(64, 32), noise_dim=64, alpha=5.0, beta=10.0,
                 ce_weight=1.0, teacher_epochs=30, teacher_lr=1e-3,
                 generator_pretrain_steps=400, generator_finetune_steps=25,
                 generator_lr=1e-3, student_lr=1e-3, batch_size=64, seed=0):
        self.epsilon = epsilon
        self.stages = stages
        self.samples_per_stage = samples_per_stage
        self.student_epochs_per_stage = student_epochs_per_stage
        self.threshold = threshold
        self.teacher_hidden = teacher_hidden
        self.student_hidden = student_hidden
        self.generator_hidden = generator_hidden
        self.noise_dim = noise_dim
        self.alpha = alpha
        self.beta = beta
        self.ce_weight = ce_weight
        self.teacher_epochs = teacher_epochs
        self.teacher_lr = teacher_lr
        self.generator_pretrain_steps = generator_pretrain_steps
        self.generator_finetune_steps = generator_finetune_steps
        self.generator_lr = generator_lr
        self.student_lr = student_lr
        self.batch_size = batch_size
        self.seed = seed

    def _config(self, n_classes: int, n_features: int) -> ExperimentConfig:
        return ExperimentConfig(
            classes=n_classes,
            dim=n_features,
            epsilon=self.epsilon,
            stages=self.stages,
            samples_per_stage=self.samples_per_stage,
            student_epochs_per_stage=self.student_epochs_per_stage,
            threshold=self.threshold,
            teacher_hidden=tuple(self.teacher_hidden),
            student_hidden=tuple(self.student_hidden),
            generator_hidden=tuple(self.generator_hidden),
            noise_dim=self.noise_dim,
            alpha=self.alpha,
            beta=self.beta,
            ce_weight=self.ce_weight,
            teacher_epochs=self.teacher_epochs,
            teacher_lr=self.teacher_lr,
            generator_pretrain_steps=self.generator_pretrain_steps,
            generator_finetune_steps=self.generator_finetune_steps,
            generator_lr=self.generator_lr,
            student_lr=self.student_lr,
            batch_size=self.batch_size,
            seed=self.seed,
        )

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        X = np.asarray(X, dtype=np.float32)
        self.classes_, y_idx = np.unique(y, return_inverse=True)
        if len(self.classes_) < 2:
            raise ValueError("need at least 2 classes")
        self.n_features_in_ = X.shape[1]
        cfg = self._config(len(self.classes_), X.shape[1])
        result = run_pipeline(cfg, X, y_idx)
        self.result_ = result
        self.teacher_ = result.teacher
        self.student_ = result.student
        self.generator_ = result.generator
        self.stage_records_ = result.stage_records
        self.label_query_count_ = result.label_query_count
        self.private_reads_during_stages_ = result.private_reads_during_stages
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "student_")
        X = check_array(X)
        return predict_proba(self.student_, np.asarray(X, dtype=np.float32))

    def predict(self, X):
        return self.classes_[np.argmax(self.predict_proba(X), axis=1)]

    def teacher_score(self, X, y):
        """Accuracy of the internal (non-private) teacher, for reference."""
        check_is_fitted(self, "teacher_")
        y_idx = np.searchsorted(self.classes_, y)
        return accuracy(self.teacher_, np.asarray(X, dtype=np.float32), y_idx)
