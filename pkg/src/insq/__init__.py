"""Moving k-nearest-neighbor queries over static sites, on the plane and on road networks."""

__version__ = "0.1.0"
