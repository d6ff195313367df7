"""The staged private-distillation loop.

One run: pretrain a teacher on the private data, pretrain a generator
against the frozen teacher, then for each of T stages (a) sample a fixed
quota of synthetic data, (b) score it with teacher and current student,
(c) draw each sample's private label exactly once via selective randomized
response, (d) train the student on the cached labels and fine-tune the
generator on fresh noise.

Stage code never touches the private dataset: the teacher is the only
artifact derived from it, and an access counter on the private store
verifies the isolation on every run. Labels are drawn from per-sample
counter-derived RNG streams, so a run is fully reproducible and every datum
provably consumes a single mechanism invocation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import ExperimentConfig
from .generator import (
    GeneratorLossTerms,
    GeneratorLossWeights,
    NoiseSpec,
    train_generator,
)
from .mechanisms import ThresholdRule, select_candidates, selective_rr, label_stream_rng
from .nn.functional import kl_divergence, one_hot, softmax
from .nn.losses import cross_entropy_from_logits, kl_from_logits
from .nn.network import Network, build_mlp
from .nn.optim import Adam, step_network

# Stream tags for deriving independent RNG streams from the run seed.
_TEACHER_INIT, _TEACHER_SHUFFLE = 1, 2
_GENERATOR_INIT, _GENERATOR_NOISE = 3, 4
_STUDENT_INIT, _STUDENT_SHUFFLE = 5, 6
_STAGE_NOISE, _FINETUNE_NOISE = 7, 8


def stream_rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    )


def derive_seed(seed: int, *key: int) -> int:
    seq = np.random.SeedSequence(
        entropy=int(seed), spawn_key=tuple(int(k) for k in key)
    )
    return int(seq.generate_state(1)[0])


class PrivateStore:
    """Counting wrapper around the private dataset.

    Every ``read()`` increments ``access_count``; the pipeline asserts the
    count does not move while stages run.
    """

    def __init__(self, features: np.ndarray, labels: np.ndarray):
        features = np.asarray(features, dtype=np.float32)
        labels = np.asarray(labels, dtype=np.int64)
        if len(features) != len(labels):
            raise ValueError(
                f"{len(features)} feature rows but {len(labels)} labels"
            )
        if len(features) == 0:
            raise ValueError("private dataset is empty")
        self._features = features
        self._labels = labels
        self.access_count = 0

    def read(self) -> tuple[np.ndarray, np.ndarray]:
        self.access_count += 1
        return self._features, self._labels

    @property
    def n(self) -> int:
        return len(self._labels)


@dataclass(frozen=True)
class LabeledSyntheticSet:
    """Synthetic samples with their once-drawn private labels.

    ``teacher_query_count`` equals the number of samples: each sample's
    label was drawn exactly once and is reused for every training epoch.
    The arrays are frozen after construction.
    """

    samples: np.ndarray
    labels_onehot: np.ndarray
    candidate_sizes: np.ndarray
    teacher_query_count: int

    def __post_init__(self):
        if self.teacher_query_count != len(self.samples):
            raise ValueError(
                f"teacher_query_count {self.teacher_query_count} != "
                f"{len(self.samples)} samples"
            )
        if len(self.labels_onehot) != len(self.samples):
            raise ValueError("labels and samples differ in length")
        for arr in (self.samples, self.labels_onehot, self.candidate_sizes):
            arr.setflags(write=False)

    @property
    def label_indices(self) -> np.ndarray:
        return np.argmax(self.labels_onehot, axis=1)


@dataclass(frozen=True)
class StageRecord:
    stage: int
    epsilon: float
    k_mean: float
    label_agreement: float
    student_loss: float
    student_acc: float | None
    gen_terms: GeneratorLossTerms | None
    label_queries: int

    def row(self) -> dict:
        gen = self.gen_terms
        return {
            "stage": self.stage,
            "epsilon": self.epsilon,
            "k_mean": self.k_mean,
            "label_agreement": self.label_agreement,
            "student_acc": "" if self.student_acc is None else self.student_acc,
            "gen_ce": "" if gen is None else gen.ce,
            "gen_ie": "" if gen is None else gen.ie,
            "gen_norm": "" if gen is None else gen.norm,
            "gen_total": "" if gen is None else gen.total,
        }


@dataclass
class PipelineResult:
    teacher: Network
    student: Network
    generator: Network
    stage_records: list[StageRecord]
    teacher_accuracy: float | None
    student_accuracy: float | None
    label_query_count: int
    synthetic_total: int
    private_reads_during_stages: int
    config_digest: str
    seed: int


def predict_logits(network: Network, features: np.ndarray) -> np.ndarray:
    return network.forward(np.asarray(features, dtype=np.float32), training=False)


def predict_proba(network: Network, features: np.ndarray) -> np.ndarray:
    return softmax(predict_logits(network, features))


def accuracy(network: Network, features: np.ndarray, labels: np.ndarray) -> float:
    if len(features) == 0:
        raise ValueError("cannot score an empty dataset")
    pred = np.argmax(predict_logits(network, features), axis=1)
    return float(np.mean(pred == np.asarray(labels)))


def fit_softmax_classifier(
    network: Network,
    features: np.ndarray,
    labels: np.ndarray,
    *,
    epochs: int,
    batch_size: int,
    optimizer: Adam,
    rng: np.random.Generator,
    num_classes: int,
) -> list[float]:
    """Minibatch cross-entropy training; returns per-epoch mean losses."""
    features = np.asarray(features, dtype=np.float32)
    targets = one_hot(np.asarray(labels), num_classes)
    epoch_losses = []
    for _ in range(epochs):
        order = rng.permutation(len(features))
        losses = []
        for start in range(0, len(features), batch_size):
            idx = order[start : start + batch_size]
            logits = network.forward(features[idx], training=True)
            loss, grad = cross_entropy_from_logits(logits, targets[idx])
            network.backward(grad)
            step_network(network, optimizer)
            losses.append(loss)
        epoch_losses.append(float(np.mean(losses)))
    return epoch_losses


def build_teacher(cfg: ExperimentConfig, in_dim: int) -> Network:
    return build_mlp(
        in_dim,
        cfg.teacher_hidden,
        cfg.classes,
        seed=derive_seed(cfg.seed, _TEACHER_INIT),
    )


def build_student(cfg: ExperimentConfig, in_dim: int) -> Network:
    return build_mlp(
        in_dim,
        cfg.student_hidden,
        cfg.classes,
        seed=derive_seed(cfg.seed, _STUDENT_INIT),
    )


def build_generator(cfg: ExperimentConfig, out_dim: int) -> Network:
    return build_mlp(
        cfg.noise_dim,
        cfg.generator_hidden,
        out_dim,
        seed=derive_seed(cfg.seed, _GENERATOR_INIT),
    )


def train_teacher(store: PrivateStore, cfg: ExperimentConfig) -> Network:
    """Supervised pretraining on the private data.

    The returned model carries populated normalization statistics, which the
    generator objective later uses as its reference distribution.
    """
    features, labels = store.read()
    teacher = build_teacher(cfg, features.shape[1])
    fit_softmax_classifier(
        teacher,
        features,
        labels,
        epochs=cfg.teacher_epochs,
        batch_size=cfg.batch_size,
        optimizer=Adam(lr=cfg.teacher_lr),
        rng=stream_rng(cfg.seed, _TEACHER_SHUFFLE),
        num_classes=cfg.classes,
    )
    return teacher


def pretrain_generator(
    teacher: Network, cfg: ExperimentConfig, out_dim: int
) -> tuple[Network, list[GeneratorLossTerms]]:
    generator = build_generator(cfg, out_dim)
    history = train_generator(
        teacher,
        generator,
        GeneratorLossWeights(alpha=cfg.alpha, beta=cfg.beta, ce=cfg.ce_weight),
        steps=cfg.generator_pretrain_steps,
        batch_size=cfg.batch_size,
        noise=NoiseSpec(dim=cfg.noise_dim, seed=cfg.seed),
        lr=cfg.generator_lr,
        rng=stream_rng(cfg.seed, _GENERATOR_NOISE),
    )
    return generator, history


def student_distill_loss(student_out: np.ndarray, private_label: np.ndarray) -> float:
    """Sum of per-sample KL(private label || student output).

    Accepts a single pair of vectors or two aligned batches.
    """
    student_out = np.atleast_2d(np.asarray(student_out))
    private_label = np.atleast_2d(np.asarray(private_label))
    if student_out.shape != private_label.shape:
        raise ValueError(
            f"shape mismatch: {student_out.shape} vs {private_label.shape}"
        )
    return float(
        sum(
            kl_divergence(lbl, out)
            for lbl, out in zip(private_label, student_out)
        )
    )


def make_labeled_set(
    generator: Network,
    teacher: Network,
    student: Network,
    cfg: ExperimentConfig,
    stage_index: int,
) -> LabeledSyntheticSet:
    """Stage quota of synthetic samples, each labeled exactly once.

    Sampling uses the generator in eval mode so a sample depends only on its
    own noise vector; each label draw uses an RNG stream derived from
    (run seed, stage, sample index).
    """
    rule = ThresholdRule(cfg.classes, cfg.threshold)
    noise_rng = stream_rng(cfg.seed, _STAGE_NOISE, stage_index)
    z = NoiseSpec(dim=cfg.noise_dim, seed=cfg.seed).sample(
        cfg.samples_per_stage, noise_rng
    )
    samples = generator.forward(z, training=False)
    y_t = predict_proba(teacher, samples)
    y_s = predict_proba(student, samples)

    labels = np.zeros((len(samples), cfg.classes), dtype=np.float32)
    k_sizes = np.zeros(len(samples), dtype=np.int64)
    for j in range(len(samples)):
        rng_j = label_stream_rng(cfg.seed, stage_index, j)
        labels[j] = selective_rr(y_s[j], y_t[j], rule, cfg.epsilon, rng_j)
        k_sizes[j] = select_candidates(y_s[j], rule).k
    return LabeledSyntheticSet(
        samples=samples,
        labels_onehot=labels,
        candidate_sizes=k_sizes,
        teacher_query_count=len(samples),
    )


def _train_student_on(
    student: Network,
    labeled: LabeledSyntheticSet,
    cfg: ExperimentConfig,
    stage_index: int,
    optimizer: Adam,
) -> float:
    """KL-distill the student on cached labels; returns last-epoch mean loss."""
    rng = stream_rng(cfg.seed, _STUDENT_SHUFFLE, stage_index)
    last = 0.0
    for _ in range(cfg.student_epochs_per_stage):
        order = rng.permutation(len(labeled.samples))
        losses = []
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            logits = student.forward(labeled.samples[idx], training=True)
            loss, grad = kl_from_logits(logits, labeled.labels_onehot[idx])
            student.backward(grad)
            step_network(student, optimizer)
            losses.append(loss)
        last = float(np.mean(losses))
    return last


def run_stage(
    stage_index: int,
    teacher: Network,
    student: Network,
    generator: Network,
    cfg: ExperimentConfig,
    *,
    student_optimizer: Adam | None = None,
    generator_optimizer: Adam | None = None,
    test_features: np.ndarray | None = None,
    test_labels: np.ndarray | None = None,
) -> tuple[Network, Network, StageRecord]:
    """One stage: sample, label once, distill, fine-tune the generator."""
    student_optimizer = student_optimizer or Adam(lr=cfg.student_lr)
    generator_optimizer = generator_optimizer or Adam(lr=cfg.generator_lr)

    labeled = make_labeled_set(generator, teacher, student, cfg, stage_index)
    teacher_argmax = np.argmax(predict_logits(teacher, labeled.samples), axis=1)
    agreement = float(np.mean(labeled.label_indices == teacher_argmax))

    student_loss = _train_student_on(
        student, labeled, cfg, stage_index, student_optimizer
    )

    gen_terms = None
    if cfg.generator_finetune_steps > 0:
        history = train_generator(
            teacher,
            generator,
            GeneratorLossWeights(alpha=cfg.alpha, beta=cfg.beta, ce=cfg.ce_weight),
            steps=cfg.generator_finetune_steps,
            batch_size=cfg.batch_size,
            noise=NoiseSpec(dim=cfg.noise_dim, seed=cfg.seed),
            optimizer=generator_optimizer,
            rng=stream_rng(cfg.seed, _FINETUNE_NOISE, stage_index),
        )
        gen_terms = history[-1]

    student_acc = None
    if test_features is not None and len(test_features):
        student_acc = accuracy(student, test_features, test_labels)

    record = StageRecord(
        stage=stage_index,
        epsilon=cfg.epsilon,
        k_mean=float(labeled.candidate_sizes.mean()),
        label_agreement=agreement,
        student_loss=student_loss,
        student_acc=student_acc,
        gen_terms=gen_terms,
        label_queries=labeled.teacher_query_count,
    )
    return student, generator, record


def run_pipeline(
    cfg: ExperimentConfig,
    train_features: np.ndarray,
    train_labels: np.ndarray,
    test_features: np.ndarray | None = None,
    test_labels: np.ndarray | None = None,
    *,
    teacher: Network | None = None,
    generator: Network | None = None,
) -> PipelineResult:
    """Full run: teacher pretraining, generator pretraining, T stages.

    A pretrained ``teacher`` (and optionally ``generator``) can be supplied
    to skip those phases, e.g. when loaded from a checkpoint. The student is
    trained purely on synthetic data; the private store's access counter is
    checked to be untouched across the stage loop.
    """
    store = PrivateStore(train_features, train_labels)
    in_dim = train_features.shape[1]

    if teacher is None:
        teacher = train_teacher(store, cfg)
    if generator is None:
        generator, _ = pretrain_generator(teacher, cfg, in_dim)
    student = build_student(cfg, in_dim)

    teacher_acc = None
    if test_features is not None and len(test_features):
        teacher_acc = accuracy(teacher, test_features, test_labels)

    reads_before = store.access_count
    teacher_checksum = teacher.checksum()
    student_optimizer = Adam(lr=cfg.student_lr)
    generator_optimizer = Adam(lr=cfg.generator_lr)

    records: list[StageRecord] = []
    for stage_index in range(1, cfg.stages + 1):
        _, _, record = run_stage(
            stage_index,
            teacher,
            student,
            generator,
            cfg,
            student_optimizer=student_optimizer,
            generator_optimizer=generator_optimizer,
            test_features=test_features,
            test_labels=test_labels,
        )
        records.append(record)

    reads_during = store.access_count - reads_before
    if reads_during != 0:
        raise RuntimeError(
            f"private store was read {reads_during} times during stages"
        )
    if teacher.checksum() != teacher_checksum:
        raise RuntimeError("teacher parameters changed during stages")

    student_acc = None
    if test_features is not None and len(test_features):
        student_acc = accuracy(student, test_features, test_labels)

    return PipelineResult(
        teacher=teacher,
        student=student,
        generator=generator,
        stage_records=records,
        teacher_accuracy=teacher_acc,
        student_accuracy=student_acc,
        label_query_count=sum(r.label_queries for r in records),
        synthetic_total=cfg.stages * cfg.samples_per_stage,
        private_reads_during_stages=reads_during,
        config_digest=cfg.digest(),
        seed=cfg.seed,
    )
