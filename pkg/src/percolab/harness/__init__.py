"""Experiment orchestration: configs, two-sample tests, result bundles."""
from .config import ExperimentConfig
from .experiments import REGISTRY, ResultBundle, er_gp_matrix, hypercube_gp_matrix, run_experiment
from .stats import TwoSampleReport, distance_matrix_test, energy_test, ks_two_sample

__all__ = ["ExperimentConfig", "REGISTRY", "ResultBundle", "TwoSampleReport", "distance_matrix_test",
           "energy_test", "er_gp_matrix", "hypercube_gp_matrix", "ks_two_sample", "run_experiment"]
