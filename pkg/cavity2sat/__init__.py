"""
cavity2sat: partition function of random 2-SAT.

Exact counting, Belief Propagation, Galton-Watson tree analysis, population
dynamics and Bethe free entropy estimates, driven from one command line.
"""

__version__ = "1.0.0"
