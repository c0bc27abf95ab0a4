"""Doppler-free three-photon coherence and amplification without inversion
in thermal mercury vapour."""

__version__ = "0.1.0"
