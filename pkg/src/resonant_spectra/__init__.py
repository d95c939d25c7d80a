"""Spectra of resonant harmonic oscillators under small perturbations.

Exact symbol algebra and averaging, classical dynamics on the orbit sphere,
Weyl quantization in a Fock basis, and the cluster/subcluster analysis that
compares eigenvalues with Bohr-Sommerfeld predictions.
"""
from .config import RunConfig, load_config
from .dynamics import build_action_profile, detect_period, integrate_flow
from .eigen import hermitian_eigen, jacobi_eigenvalues, symmetric_eigen
from .fock import (FockBasis, FockOperator, cluster_projector, harmonic_eigenvalues,
                   quantum_time_average, weyl_quantize)
from .magnetic import MagneticModel, default_model, gauge_check, magnetic_field, magnetic_symbol
from .pipeline import run_pipeline
from .reduced import (ChartFamily, critical_values, invert_actions, level_components,
                      reduced_hamiltonian, torus_actions)
from .reports import emit_reports
from .spectral import (bs_predict, compare, detect_clusters, extract_subcluster, fit_offsets,
                       perturbation_oracle)
from .symbols import (FrequencyVector, PolySymbol, basis_convert, birkhoff_normal_form,
                      flow_average, poisson_bracket, solve_homological)

__version__ = "0.1.0"
