"""Multiple scattering on the hypersphere: vMF random walks, compound Cox
scattering laws and Monte-Carlo Cramer-Rao bounds."""

__version__ = "0.1.0"
