"""Tests for desk-trocr."""
