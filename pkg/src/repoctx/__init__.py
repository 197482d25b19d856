"""Repository-context datasets, packing strategies, evaluation and a toy
fusion-in-decoder model for Java code completion."""

__version__ = "0.1.0"
