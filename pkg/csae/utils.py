from importlib import import_module
from pathlib import Path

from csae import config
from csae.errors import ConfigError

CLASSIFIER_MAPPING = {
    "knn": ("knn", "KNearestNeighbors"),
    "gnb": ("gnb", "GaussianNaiveBayes"),
    "svm": ("svm", "RbfSvm"),
}


def load_classifier(name, params=None, logger=None):
    """
    Instantiate a latent classifier by its CLI name. ``params`` override the
    defaults in config.CLASSIFIERS; None values are ignored.
    """
    if name not in CLASSIFIER_MAPPING:
        raise ConfigError(f"Unknown classifier '{name}'. Available: {list(CLASSIFIER_MAPPING)}")

    module_name, class_name = CLASSIFIER_MAPPING[name]
    module = import_module(f"csae.classifiers.{module_name}")
    kwargs = dict(config.CLASSIFIERS[name])
    kwargs.update({k: v for k, v in (params or {}).items() if v is not None})
    unknown = sorted(set(kwargs) - set(config.CLASSIFIERS[name]) - {"random_state"})
    if unknown:
        raise ConfigError(f"Classifier '{name}' does not take parameters {unknown}")

    classifier = getattr(module, class_name)(logger=logger, **kwargs)
    if logger:
        logger.log(f"Loaded classifier: {class_name} {kwargs}")
    return classifier


def get_output_path(input_path, suffix: str) -> Path:
    """
    Default artifact path next to an input, like 'model_boundary.ppm' for
    'model.csae' and suffix 'boundary.ppm'.
    """
    input_path = Path(input_path)
    return input_path.parent / f"{input_path.stem}_{suffix}"
