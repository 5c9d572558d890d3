"""
advamp - advantage amplification laboratory for slowly evolving
latent-state environments.
"""

__version__ = "0.1.0"
