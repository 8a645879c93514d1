"""
CSAE - Convolutional Supervised Autoencoder with latent-space classifiers
"""

__version__ = "1.0.0" # {bumpver}
