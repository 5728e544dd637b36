"""Numerical laboratory for stacked traveling-wave fronts (propagating terraces)
of multistable reaction-diffusion equations, and for checking by direct
simulation that radial and general solutions organize themselves around the
terrace: level-set speeds, gap dichotomy, shift functions, super/subsolution
sandwiches, and planar ring geometry.
"""

from terracelab.nonlinearity import Nonlinearity, Zero, check_assumptions, energy_condition, find_zeros

__all__ = [
    "Nonlinearity",
    "Zero",
    "check_assumptions",
    "energy_condition",
    "find_zeros",
]

__version__ = "0.1.0"
