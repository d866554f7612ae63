"""Functional asynchronous networks: simulation, transforms and modular factorization."""
