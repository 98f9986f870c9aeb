"""Model math, tokenization, search and training."""
