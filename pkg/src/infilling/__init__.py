"""Text infilling toolkit: hierarchical span masking, four infilling
strategy encodings, a small causal transformer, and masked-token
perplexity evaluation."""

__version__ = "0.1.0"
