"""Numerical laboratory for long-time homogeneous Ricci-type flows.

Modules: `algebra` (the geometry catalog), `curvature` (frame engine and
finite-difference oracles), `flow` (coefficient ODE integration and closed
forms), `rescale` (parabolic rescaling and asymptotic fits), `soliton`
(expanding-soliton residuals), `bundle` (the twisted torus-bundle flow),
`cli` (the command-line front end), `acceptance` (the selftest suite).
"""

__version__ = "0.1.0"
