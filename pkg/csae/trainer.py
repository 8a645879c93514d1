"""
Alternating CSAE optimization.

Every batch runs two sub-steps in this order:
  1. reconstruction: encoder -> decoder, MSE, Adam update of encoder + decoder;
  2. classification: encoder -> classifier head, cross-entropy, Adam update of the
     head and, in "joint" mode, of the encoder ("head_only" leaves it untouched).
The decoder never receives a classification gradient. After each epoch the
validation accuracy is measured and the best epoch's weights are kept.
"""

import csv
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterator, List, Optional, Tuple

import numpy as np

from csae import config
from csae.data import LabeledDataset, SplitSpec, split
from csae.errors import ConfigError, DataRangeError, EmptyDatasetError, NonFiniteError, TrainingDivergedError
from csae.losses import categorical_crossentropy, check_labels, mse_loss
from csae.metrics import accuracy, weighted_f1
from csae.network import CsaeModel, backward, forward
from csae.optim import Adam, AdamState, LrSchedule, lr_at_epoch
from csae.tensor import argmax_rows


@dataclass
class TrainConfig:
    epochs: int = config.TRAINING["epochs"]
    batch_size: int = config.TRAINING["batch_size"]
    latent_dim: Optional[int] = None
    seed: int = config.TRAINING["seed"]
    lr_schedule: LrSchedule = field(default_factory=LrSchedule)
    update_mode: str = config.TRAINING["update_mode"]
    val_fraction: float = config.TRAINING["val_fraction"]
    eval_batch_size: int = config.TRAINING["eval_batch_size"]

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if not 0 < self.val_fraction < 1:
            raise ConfigError(f"val_fraction must lie in (0, 1), got {self.val_fraction}")
        if self.update_mode not in config.UPDATE_MODES:
            raise ConfigError(f"Unknown update mode '{self.update_mode}'. Available: {list(config.UPDATE_MODES)}")


@dataclass
class EpochRecord:
    epoch: int
    recon_loss: float
    cls_loss: float
    train_acc: float
    val_acc: float
    lr: float


@dataclass
class TrainReport:
    epochs: List[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    wall_time: float = field(default=0.0, compare=False)

    @property
    def best_val_accuracy(self) -> float:
        return self.epochs[self.best_epoch - 1].val_acc if self.epochs else 0.0

    def to_csv(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as f:
            writer = csv.DictWriter(f, fieldnames=list(EpochRecord.__dataclass_fields__))
            writer.writeheader()
            for record in self.epochs:
                writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in asdict(record).items()})
        return path

    @classmethod
    def from_csv(cls, path) -> "TrainReport":
        with Path(path).open("r", newline="", encoding="utf-8") as f:
            records = [
                EpochRecord(
                    epoch=int(row["epoch"]),
                    **{k: float(row[k]) for k in ("recon_loss", "cls_loss", "train_acc", "val_acc", "lr")},
                )
                for row in csv.DictReader(f)
            ]
        report = cls(epochs=records)
        if records:
            best = max(records, key=lambda r: (r.val_acc, -r.epoch))
            report.best_epoch = best.epoch
        return report


@dataclass
class Evaluation:
    accuracy: float
    weighted_f1: float
    recon_loss: float
    cls_loss: float
    predictions: np.ndarray = field(repr=False)


def batch_iterator(dataset: LabeledDataset, batch_size: int, rng: np.random.Generator) -> Iterator[Tuple[np.ndarray, np.ndarray]]:
    """Shuffle once, then yield consecutive batches; the last one may be partial."""
    if len(dataset) == 0:
        raise EmptyDatasetError("Cannot iterate over an empty dataset")
    if batch_size < 1:
        raise ConfigError(f"batch_size must be >= 1, got {batch_size}")
    order = rng.permutation(len(dataset))
    for start in range(0, len(order), batch_size):
        idx = order[start:start + batch_size]
        yield dataset.images[idx], dataset.labels[idx]


def reconstruction_step(model: CsaeModel, x_batch: np.ndarray, optimizer: Adam) -> float:
    z = forward(model.encoder, x_batch)
    x_hat = forward(model.decoder, z)
    loss, grad = mse_loss(x_hat, x_batch)
    if not np.isfinite(loss):
        raise NonFiniteError(f"reconstruction loss is {loss}")
    backward(model.encoder, backward(model.decoder, grad))
    optimizer.step(model.encoder + model.decoder)
    return loss


def classification_step(
    model: CsaeModel, x_batch: np.ndarray, y_batch: np.ndarray, optimizer: Adam, update_mode: str
) -> Tuple[float, int]:
    """Returns (cross-entropy, number of correct predictions in the batch)."""
    z = forward(model.encoder, x_batch)
    logits = forward(model.classifier_logits, z)
    probs = model.classifier[-1].forward(logits)
    loss, grad = categorical_crossentropy(probs, y_batch)
    if not np.isfinite(loss):
        raise NonFiniteError(f"classification loss is {loss}")

    grad_z = backward(model.classifier_logits, grad)
    updated = list(model.classifier)
    if update_mode == "joint":
        backward(model.encoder, grad_z)
        updated = model.encoder + updated
    optimizer.step(updated)
    return loss, int(np.sum(argmax_rows(probs) == y_batch))


def evaluate(model: CsaeModel, dataset: LabeledDataset, batch_size: int = config.TRAINING["eval_batch_size"]) -> Evaluation:
    """Accuracy, weighted F1 and mean losses over ``dataset``; weights are not touched."""
    n = len(dataset)
    if n == 0:
        raise EmptyDatasetError("Cannot evaluate on an empty dataset")
    check_labels(dataset.labels, model.num_classes)

    predictions = np.empty(n, dtype=np.int64)
    recon_total = cls_total = 0.0
    for start in range(0, n, batch_size):
        xb = dataset.images[start:start + batch_size].astype(model.dtype, copy=False)
        yb = dataset.labels[start:start + batch_size]
        z = forward(model.encoder, xb)
        recon, _ = mse_loss(forward(model.decoder, z), xb)
        probs = forward(model.classifier, z)
        ce, _ = categorical_crossentropy(probs, yb)
        recon_total += recon * len(yb)
        cls_total += ce * len(yb)
        predictions[start:start + len(yb)] = argmax_rows(probs)
    model.clear_caches()

    return Evaluation(
        accuracy=accuracy(dataset.labels, predictions),
        weighted_f1=weighted_f1(dataset.labels, predictions),
        recon_loss=recon_total / n,
        cls_loss=cls_total / n,
        predictions=predictions,
    )


def _check_training_data(model: CsaeModel, dataset: LabeledDataset):
    if len(dataset) == 0:
        raise EmptyDatasetError("Training set is empty")
    check_labels(dataset.labels, model.num_classes)
    if dataset.images.min() < 0 or dataset.images.max() > 1:
        raise DataRangeError("Training images must be normalized to [0, 1]")


def train(
    model: CsaeModel,
    train_set: LabeledDataset,
    train_config: TrainConfig,
    val_set: Optional[LabeledDataset] = None,
    logger=None,
) -> Tuple[CsaeModel, TrainReport]:
    """
    Run the alternating protocol and return (weights of the best validation
    epoch, report). Without ``val_set`` a validation split of
    ``val_fraction`` is drawn once from ``train_set``.
    """
    if train_config.latent_dim is not None and train_config.latent_dim != model.latent_dim:
        raise ConfigError(f"Config lambda={train_config.latent_dim} but model lambda={model.latent_dim}")
    if val_set is None:
        train_set, val_set = split(train_set, SplitSpec(val_fraction=train_config.val_fraction, seed=train_config.seed))
    _check_training_data(model, train_set)
    _check_training_data(model, val_set)

    train_set = LabeledDataset(train_set.images.astype(model.dtype, copy=False), train_set.labels)
    rng = np.random.default_rng(train_config.seed)
    ae_optimizer = Adam(AdamState(), name="reconstruction")
    cls_optimizer = Adam(AdamState(), name="classification")

    report = TrainReport()
    best_model, best_acc = None, -1.0
    started = time.perf_counter()
    if logger:
        logger.log(
            f"Training {model.preset.name} lambda={model.latent_dim} ({train_config.update_mode}) on "
            f"{len(train_set)} samples, validating on {len(val_set)}"
        )

    for epoch in range(1, train_config.epochs + 1):
        lr = lr_at_epoch(train_config.lr_schedule, epoch - 1)
        ae_optimizer.set_learning_rate(lr)
        cls_optimizer.set_learning_rate(lr)

        recon_sum = cls_sum = 0.0
        correct = 0
        for batch, (xb, yb) in enumerate(batch_iterator(train_set, train_config.batch_size, rng), start=1):
            stage = "reconstruction"
            try:
                recon = reconstruction_step(model, xb, ae_optimizer)
                stage = "classification"
                ce, hits = classification_step(model, xb, yb, cls_optimizer, train_config.update_mode)
            except NonFiniteError as e:
                raise TrainingDivergedError(epoch, batch, stage, str(e)) from e
            recon_sum += recon * len(yb)
            cls_sum += ce * len(yb)
            correct += hits
            if logger:
                logger.log_verbose(f"epoch {epoch} batch {batch}: recon={recon:.6f} cls={ce:.6f}")

        val = evaluate(model, val_set, train_config.eval_batch_size)
        n = len(train_set)
        record = EpochRecord(epoch, recon_sum / n, cls_sum / n, correct / n, val.accuracy, lr)
        report.epochs.append(record)

        improved = val.accuracy > best_acc
        if improved:
            best_acc = val.accuracy
            best_model = model.snapshot()
            report.best_epoch = epoch
        if logger:
            logger.log(
                f"Epoch {epoch}/{train_config.epochs} - recon {record.recon_loss:.5f} - cls {record.cls_loss:.5f}"
                f" - train_acc {record.train_acc:.4f} - val_acc {record.val_acc:.4f} - lr {lr:.3g}"
                + (" *" if improved else "")
            )

    report.wall_time = time.perf_counter() - started
    if logger:
        logger.log(
            f"Best validation accuracy {best_acc:.4f} at epoch {report.best_epoch} "
            f"({report.wall_time:.1f}s)"
        )
    return best_model, report
