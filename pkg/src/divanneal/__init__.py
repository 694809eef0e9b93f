"""Diversity-targeted inhomogeneous quantum annealing benchmarks for Ising spin glasses."""

__version__ = "0.1.0"

from .instance import (Instance, InstanceFormatError, energies, energy, generate_2d,
                       generate_quasi_1d, read_instance, write_instance)
from .spectrum import LowEnergySet, SpectrumRequest, bnb_spectrum, brute_force_spectrum
from .diversity import BasinSeeds, DiversityParams, greedy_seeds, refined_distance
from .schedule import Partition, Schedule, build_schedule, clusters_from_droplets, homogeneous
from .solver import PimcParams, pimc_anneal
from .metrics import TIMED_OUT, TimeEstimate, tts, ttd

__all__ = [
    "Instance", "InstanceFormatError", "energies", "energy", "generate_2d", "generate_quasi_1d",
    "read_instance", "write_instance", "LowEnergySet", "SpectrumRequest", "bnb_spectrum",
    "brute_force_spectrum", "BasinSeeds", "DiversityParams", "greedy_seeds", "refined_distance",
    "Partition", "Schedule", "build_schedule", "clusters_from_droplets", "homogeneous",
    "PimcParams", "pimc_anneal", "TIMED_OUT", "TimeEstimate", "tts", "ttd",
]
