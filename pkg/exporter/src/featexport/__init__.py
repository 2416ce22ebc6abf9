"""featexport: stage-wise vision-backbone features as npy files + manifest."""

__version__ = "0.1.0"
