"""Semiclassical coherent-state propagators with complex trajectories.

Exact reference engines, the second-order complex-trajectory sum and the
uniform Airy approximation at phase-space caustics.
"""
__version__ = "0.1.0"
