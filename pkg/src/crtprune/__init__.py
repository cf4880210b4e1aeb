"""crtprune: Monte Carlo verification of pruning laws for Levy continuum random trees."""

__version__ = "0.1.0"
