"""Bidirectional LSTM-CRF tagger for clinical concept extraction."""

__version__ = "0.1.0"
