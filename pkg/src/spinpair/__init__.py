"""Spin-pair logical qubits driven by Heisenberg exchange: simulation and pulse compilation."""
