"""Translate informal proofs into Lean proofs by bridging chains of proof states."""

__version__ = "0.1.0"
