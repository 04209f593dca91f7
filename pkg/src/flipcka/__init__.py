"""Workbench for flip admissible graphs of groups.

Builds the model space glued from free-group trees and integer fibers, the
Bass-Serre tree action, special quasi-geodesic paths, glued hyperbolic spaces,
quasi-trees of quasi-lines, cone-offs, and the subgroup (Morse / contraction)
checkers, with exact integer arithmetic throughout.
"""

__version__ = "0.1.0"
