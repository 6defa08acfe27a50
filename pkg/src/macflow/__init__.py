"""Matrix-valued Allen-Cahn toolkit.

Modules: matcore (matrix algebra of the nonlinearity), frame (direction-
anchored five-subspace splitting), orbit (transition profiles, minimal
pairs, quasi-minimal orbits), odekit (layer ODE solvers), spectra
(interval operators and estimate checks), fields/sim (periodic-grid
evolution and sharp-interface diagnostics), cli (entry point).
"""

__version__ = "0.1.0"
