from wtsched.heuristics.atcs import AtcsScaling, atcs_priority, atcs_run, atcs_scaling, atcs_sequence
from wtsched.heuristics.ga import Chromosome, GaLog, GaParams, ga_crossover, ga_decode, ga_mutate, ga_run
from wtsched.heuristics.sa import SaLog, SaParams, sa_external_swap, sa_internal_swap, sa_run

__all__ = [
    "AtcsScaling",
    "Chromosome",
    "GaLog",
    "GaParams",
    "SaLog",
    "SaParams",
    "atcs_priority",
    "atcs_run",
    "atcs_scaling",
    "atcs_sequence",
    "ga_crossover",
    "ga_decode",
    "ga_mutate",
    "ga_run",
    "sa_external_swap",
    "sa_internal_swap",
    "sa_run",
]
