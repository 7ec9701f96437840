"""Runnable studies built on mfract."""
