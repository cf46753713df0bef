"""
MGiaD Lab - multigrid-inspired convolutional networks.

This package contains the tensor engine, the network building blocks, the
linear multigrid oracle, the weight-complexity analyzer, the data harness,
the trainer and the command-line interface.
"""

__version__ = "1.0.0"
