"""Self-adaptive Ising machine: Lagrangian-relaxed p-bit annealing for constrained binary problems."""

__version__ = "0.1.0"
