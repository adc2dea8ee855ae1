"""Linear non-contrastive self-supervised learning dynamics toolkit."""

__version__ = "0.1.0"
