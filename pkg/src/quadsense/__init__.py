"""Simulator for parallel quantum-enhanced plasmonic sensing with
multi-spatial-mode twin beams."""

__version__ = "0.1.0"
