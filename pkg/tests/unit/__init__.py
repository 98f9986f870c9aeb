"""Unit tests for desk-trocr."""
