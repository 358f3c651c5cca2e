"""Desk-scale AMI reading-collection simulator.

Simulates change-and-transmit (CAT) meter reporting with additively
homomorphic aggregation and batch-verified signatures, plus the two
deep-learning sides of the transmission-pattern privacy problem: an
occupancy-inference attacker and a spoofing-transmission defense.
"""

__version__ = "0.1.0"
