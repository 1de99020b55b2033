"""Mass of asymptotically hyperbolic and asymptotically flat metrics by surface integrals."""
