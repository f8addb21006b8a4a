"""
Sparse conditional-independence graphs from replicated, temporally correlated
observations with piecewise-constant latent effects.
"""

__version__ = "0.3.0"
