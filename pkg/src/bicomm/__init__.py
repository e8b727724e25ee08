"""A discretized laboratory for bilinear singular integrals and their commutators with a symbol ``b``."""

from .awf import (AwfDecomposition, DegenerateConfiguration, LedgerEntry, SuperdiagLedger,
                  build_superdiag_ledger, factorize, oscillation_dual, oscillation_lower_bound)
from .budget import ResourceCapExceeded, evaluation_budget
from .config import ConfigError, ExperimentConfig, emit_config, load_config, parse_config
from .dyadic import average, largest_dyadic_subcube, martingale_difference, maximal_function
from .harness import run_experiment
from .kernels import (CubeTriple, KernelSingularity, KernelSpec, ModulusOfContinuity, NoWitnessFound,
                      adjoint_kernel, bootstrap_cubes, calibrate_A, custom, eval_kernel, probe_nondegeneracy,
                      riesz, rough, swap_inputs, verify_regularity, verify_size)
from .lattice import Cube, DyadicGrid, LatticeFunction, bounding_cube
from .norms import (CubeSampler, Estimate, OffSupportConfig, TripleTerm, bmo_norm_est, classify_exponents,
                    dot_ls_norm, holder_seminorm_est, offsupport_norm_est, sigma_exponent,
                    superdiag_offsupport_est, weak_lr_quasinorm, weak_offsupport_est)
from .operators import (TruncationPolicy, apply_truncated, commutator, commutator_pairing,
                        fractional_integral, maximal_truncation, pairing)
from .sparse import SparseFamily, reflect_family, sparse_decompose, stopping_family, verify_sparse
from .symbols import symbol_library

__version__ = "0.1.0"
