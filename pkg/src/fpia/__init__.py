"""Map sparse QUBO problems onto a field-programmable, island-style
in-memory-computing Ising machine and estimate what the embedding costs."""

from fpia.qubo import Qubo, QuboStats, energy, local_field, stats

__version__ = "0.1.0"

__all__ = ["Qubo", "QuboStats", "energy", "local_field", "stats", "__version__"]
