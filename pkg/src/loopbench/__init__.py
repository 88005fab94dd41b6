"""loopbench: loop transformations, an interpreter oracle, kernel
generation, and an energy-measurement benchmark harness."""

__version__ = "0.1.0"
