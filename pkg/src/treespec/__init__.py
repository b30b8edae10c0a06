"""Forward and partial inverse spectral problems for Sturm-Liouville operators
with distributional potentials on metric trees."""

__version__ = "0.1.0"
