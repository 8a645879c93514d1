"""
Latent-classifier pipeline: encode train and test images with a trained
CSAE, fit a classical classifier on the training codes, predict the test
codes. The pixel baseline runs the same classifiers on flattened,
standardized images.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np

from csae import config
from csae.checkpoint import load_checkpoint
from csae.classifiers.preprocessing import Standardizer
from csae.data import LatentDataset
from csae.metrics import MetricsReport, metrics_report
from csae.network import CsaeModel, encode
from csae.utils import load_classifier


@dataclass
class PipelineResult:
    predictions: np.ndarray
    metrics: Optional[MetricsReport]
    method: str
    features: str  # "latent" or "raw"


def extract_latent(
    model: CsaeModel,
    images: np.ndarray,
    labels: Optional[np.ndarray] = None,
    batch_size: int = config.TRAINING["eval_batch_size"],
) -> LatentDataset:
    z = encode(model, images, batch_size=batch_size)
    model.clear_caches()
    return LatentDataset(z, None if labels is None else np.asarray(labels))


def fit_predict(
    method: str,
    train: LatentDataset,
    test_z: np.ndarray,
    standardize: bool = False,
    params=None,
    logger=None,
) -> np.ndarray:
    train_z, test_z = train.z, test_z
    if standardize:
        scaler = Standardizer().fit(train_z)
        train_z, test_z = scaler.transform(train_z), scaler.transform(test_z)
    classifier = load_classifier(method, params, logger)
    classifier.fit(train_z, train.y)
    return classifier.predict(test_z)


def _report(method, features, predictions, test_labels, logger) -> PipelineResult:
    metrics = None
    if test_labels is not None:
        metrics = metrics_report(np.asarray(test_labels), predictions)
        if logger:
            logger.log(
                f"{method} on {features} features: accuracy {metrics.accuracy:.4f}, "
                f"weighted F1 {metrics.weighted_f1:.4f}"
            )
    return PipelineResult(predictions, metrics, method, features)


def pipeline_classify(
    checkpoint: Union[str, Path, CsaeModel],
    train_images: np.ndarray,
    train_labels: np.ndarray,
    test_images: np.ndarray,
    method: str,
    test_labels: Optional[np.ndarray] = None,
    standardize_latent: bool = False,
    params=None,
    logger=None,
) -> PipelineResult:
    """Fit ``method`` on the latent codes of the training images and classify the test codes."""
    model = checkpoint if isinstance(checkpoint, CsaeModel) else load_checkpoint(checkpoint, logger)
    train = extract_latent(model, train_images, train_labels)
    test = extract_latent(model, test_images)
    if logger:
        logger.log(f"Extracted latent codes: train {train.z.shape}, test {test.z.shape}")
    predictions = fit_predict(method, train, test.z, standardize_latent, params, logger)
    return _report(method, "latent", predictions, test_labels, logger)


def raw_pixel_classify(
    train_images: np.ndarray,
    train_labels: np.ndarray,
    test_images: np.ndarray,
    method: str,
    test_labels: Optional[np.ndarray] = None,
    params=None,
    logger=None,
) -> PipelineResult:
    """Pixel baseline: flatten, standardize with training statistics, fit, predict."""
    train = LatentDataset(train_images.reshape(len(train_images), -1), np.asarray(train_labels))
    test_z = test_images.reshape(len(test_images), -1)
    predictions = fit_predict(method, train, test_z, standardize=True, params=params, logger=logger)
    return _report(method, "raw", predictions, test_labels, logger)
