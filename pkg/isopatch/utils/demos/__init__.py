from .bench import scaling_bench
from .cahn_hilliard import CahnHilliardProblem, cahn_hilliard_run
from .hyperelastic import HyperelasticProblem, NeoHookean, neohookean_run
from .poisson import PoissonProblem, convergence_study, manufactured, poisson_run

__all__ = [
    "CahnHilliardProblem",
    "HyperelasticProblem",
    "NeoHookean",
    "PoissonProblem",
    "cahn_hilliard_run",
    "convergence_study",
    "manufactured",
    "neohookean_run",
    "poisson_run",
    "scaling_bench",
]
