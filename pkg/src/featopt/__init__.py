"""featopt: deep-feature pipelines with embedded selection and classical models.

A library plus CLI that ingests pooled backbone embeddings, splits them,
ranks features with three embedded selectors, sweeps compact subsets across
a seven-model classifier suite under random-search tuning, and renders
comparison tables and figures.
"""

__version__ = "0.1.0"
