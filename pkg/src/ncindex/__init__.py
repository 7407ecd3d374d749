"""Index pairings, spectral flow and zeta residues on truncated spectral triples."""

__version__ = "0.1.0"
