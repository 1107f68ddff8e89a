"""Workbench for attacking and hardening learned vulnerability detectors.

The package pairs semantics-preserving code transformations over a
small imperative language with a decoupled feature/classifier training
loop that hardens token-sequence detectors against those
transformations.
"""

__version__ = "0.1.0"
