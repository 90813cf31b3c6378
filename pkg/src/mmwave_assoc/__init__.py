"""User association for multi-connectivity mmWave networks: channel model, exact and greedy schemes, Monte Carlo driver."""

__version__ = "0.1.0"
