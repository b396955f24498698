"""
Boundary values of zero solutions.

This package contains:
- quadrature: Gauss-Legendre panels, scipy wrappers and Richardson extrapolation
- kernels: closed-form zero solutions
- pairing: direct and Stokes-type boundary value pairings
- growth: growth class fits near t = 0
- fundsol: fundamental solutions in one space dimension
"""
