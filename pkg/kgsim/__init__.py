"""
kgsim - Klein-Gordon standing-wave laboratory

Pseudospectral tools for the 1D nonlinear Klein-Gordon equation
u_tt - u_xx + u = |u|^{p-1} u: standing waves, their Hessian spectrum,
modulation tracking, localized virial diagnostics and the instability
experiment at the critical frequency sqrt((p-1)/4).
"""

__version__ = "1.0.0"
__author__ = "Mehmet T. AKALIN"
__license__ = "MIT"
