"""Statistically grounded event-log augmentation and Siamese prefix pretraining."""

__version__ = "0.1.0"
