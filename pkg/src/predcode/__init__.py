"""Predictive-coding experimentation toolkit.

Text preprocessing, token weighting, information-gain feature selection,
negative-class down sampling, linear learners and review-effort metrics,
plus a resumable sweep over the full preprocessing parameter grid.
"""

__version__ = "0.1.0"
