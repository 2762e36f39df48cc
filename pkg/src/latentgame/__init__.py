"""Latent-variable Blotto games: neural players, GDA training, exploitability certificates, network surgery."""
__version__ = "0.1.0"
