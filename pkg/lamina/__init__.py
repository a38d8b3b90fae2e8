"""Introduce lamina as a module

A numerical laboratory for the vanishing-viscosity limit of anisotropic
Navier-Stokes flow over a rapidly oscillating wall. The name is for the thin
layer that forms at that wall."""
