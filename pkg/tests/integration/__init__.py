"""End-to-end and long-running training tests."""
