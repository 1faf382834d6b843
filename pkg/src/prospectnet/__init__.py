"""Imbalanced prospecting classification: ratio-sampled datasets, a frozen
autoencoder feeding a class-weighted feed-forward classifier, a random-forest
baseline, and ranking/campaign evaluation."""

__version__ = "0.1.0"
