"""Vital negative sampling for pairwise personalized ranking."""
