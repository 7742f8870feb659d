"""nestfrag package initializer

Simulation and exact-rate verification of simple nested fragmentation processes:
pairs of nested partitions (gene lineages inside species) of [n] fragmenting under
erosion and paintbox dislocation.

Run the command line with `python3 -m nestfrag.app`.
"""

__version__ = "0.1.0"
