"""Self-supervised pre-training and low-shot fine-tuning for sensor anomaly classification."""

__version__ = "0.1.0"
