# Architecture presets (conv stack of the encoder; the decoder mirrors it)
ARCH_PRESETS = {
    "small28": {
        "input_side": 28,
        "conv_filters": [32, 64],
        "conv_kernels": [3, 3],
    },
    "large128": {
        "input_side": 128,
        "conv_filters": [32, 64, 128, 256],
        "conv_kernels": [5, 5, 3, 3],
    },
}

# Width of the hidden fully connected layers (encoder, decoder, classifier)
DENSE_UNITS = 128

# Stride of every (transposed) convolution
CONV_STRIDE = 2

# Numeric precision
WORKING_DTYPE = "float32"
CHECK_DTYPE = "float64"

# Training protocol defaults
TRAINING = {
    "epochs": 200,
    "batch_size": 128,
    "latent_dim": 10,
    "seed": 0,
    "update_mode": "joint",
    "val_fraction": 0.10,
    "eval_batch_size": 256,
}

UPDATE_MODES = ("joint", "head_only")

# Step decay: lr(e) = base * decay_factor ** (e // period_epochs)
LR_SCHEDULE = {
    "base": 1e-4,
    "decay_factor": 1.0 / 3.0,
    "period_epochs": 50,
}

ADAM = {
    "beta1": 0.9,
    "beta2": 0.999,
    "epsilon": 1e-7,
}

# Probability clipping for categorical cross-entropy
CE_CLIP = 1e-7

# Classical classifiers on latent codes / raw pixels
CLASSIFIERS = {
    "knn": {"n_neighbors": 3},
    "gnb": {"var_smoothing": 1e-9, "num_classes": None},
    "svm": {
        "C": 1.0,
        "gamma": "scale",
        "tol": 1e-3,
        "max_passes": None,  # None: 10 * n sweeps
        "max_samples": None,  # None: fit on every row; a bound subsamples with the seed
    },
}

STANDARDIZE_FLOOR = 1e-8

# Dataset splits
SPLITS = {
    "val_fraction": 0.10,
    "test_fraction": 0.20,
}

# IDX (MNIST distribution format) magic numbers
IDX = {
    "images_magic": 0x00000803,
    "labels_magic": 0x00000801,
}

# Checkpoint file layout
CHECKPOINT = {
    "magic": b"CSAE",
    "version": 1,
}

# Latent grids for the raster artifacts
GRID = {
    "margin": 0.10,
    "boundary_resolution": 400,
    "decoder_points": 10,
}

# Fixed class palette (RGB), cycled when there are more than ten classes
PALETTE = [
    (31, 119, 180),   # blue
    (255, 127, 14),   # orange
    (44, 160, 44),    # green
    (214, 39, 40),    # red
    (148, 103, 189),  # purple
    (140, 86, 75),    # brown
    (227, 119, 194),  # pink
    (127, 127, 127),  # gray
    (188, 189, 34),   # olive
    (23, 190, 207),   # cyan
]

# Finite-difference gradient checks
GRADCHECK = {
    "step": 1e-5,
    "seeds": 20,
    "tolerance": 1e-5,
    "tight_tolerance": 1e-6,
}

# Run logs
LOG_DIR = "logs"
REPORT_DIR = "reports"
LOG_RETENTION_DAYS = 7
