"""levichk: symbolic-numeric toolkit for weakly hyperbolic Cauchy problems.

The package builds the first-order companion system of a scalar
equation of order m from its characteristic roots, triangularizes the
principal symbol exactly with a unitriangular transformation, checks
Levi-type conditions on the lower-order symbols by canonical form and
sampling, and cross-validates growth predictions with a periodic
Fourier spectral solver.
"""

__version__ = "0.1.0"
