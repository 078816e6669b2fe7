"""Monte Carlo toolkit for charged alpha-stable particle systems and their
Hermite / Rosenblatt scaling limits.

Subpackages follow the pipeline: exact stable-path sampling (`stable`),
charged Poisson systems (`particles`), mollifier/Riesz kernel machinery
(`kernels`), the particle functionals (`functionals`), Wick-product
combinatorics and identity checks (`wick`), independent limit-process
generators (`oracles`), estimation/testing (`stats`), batch orchestration
(`ensembles`) and the CLI (`cli`).
"""

__version__ = "0.1.0"

from .rng import replica_rng

__all__ = ["replica_rng", "__version__"]
