"""Stochastic heat equation with signed colored noise: simulation and calculus.

Subpackages by theme:

- ``kernels``: heat/potential kernel formulas and radial profiles.
- ``corrkernel``: correlation roots h, the covariance f = h * h~, norms,
  membership integrals, the well-posedness integral, and truncation.
- ``gauges``: gauge functions, decay-rate bounds, and moment bounds.
- ``noisegen``: lattice white/colored noise with exact covariance.
- ``solver``: exponential-Euler time stepping, fixed-point iteration
  diagnostics, localized and truncated variants, and the constant-field
  SDE counterexample.
- ``ergostats``: occupation averages, ensemble variances, stationarity
  and decay-rate statistics.
- ``cli``: config-driven experiment runner.
"""

__version__ = "0.1.0"
