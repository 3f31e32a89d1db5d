"""Randomness from sources with online bad blocks: influence analysis,
attacks, condensers and leader-election protocols."""

__version__ = "0.1.0"
