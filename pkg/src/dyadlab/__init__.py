"""Iterated 2x2 games between learning and fixed-strategy agents.

Discrete rounds or embodied differential-drive rounds, with efficacy,
surprisal and prediction-accuracy metrics and a batch CLI.
"""

__version__ = "0.1.0"
