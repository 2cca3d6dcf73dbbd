"""Discretized-physics-informed neural networks.

Finite-difference forward solvers whose discretized residuals, in full
order or POD-Galerkin/DEIM-reduced form, serve as physics loss terms for
small MLP and LSTM networks, including a detached external-solver training
mode with epoch-interval Jacobian refresh.
"""

__version__ = "0.1.0"
