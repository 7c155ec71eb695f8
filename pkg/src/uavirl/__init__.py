"""Interference-aware joint path planning and power allocation for a
cellular-connected UAV, learned from expert demonstrations.

The package provides a deterministic hexagonal-grid simulator with an
air-to-ground channel model, apprenticeship learning that recovers reward
weights from demonstrations by feature-expectation matching, Q-learning
(linear function approximation) and deep Q-network policy learners,
behavioral-cloning and heuristic baselines, a CLI experiment harness, and
an HTTP service for collecting human demonstrations.
"""

__version__ = "0.1.0"
