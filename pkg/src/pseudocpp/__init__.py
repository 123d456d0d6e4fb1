"""Pseudocode-to-C++ translation workbench.

Corpus preparation for SPoC-style line-aligned data, a numpy encoder-decoder
transformer trained with manual backpropagation, a C++-subset parser, and a
CodeBLEU-style evaluation suite, all reachable through one CLI and a small
HTTP service.
"""

__version__ = "0.1.0"
