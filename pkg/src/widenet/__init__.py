"""Numerical laboratory for overparameterized two-layer networks.

Three views of the same model are implemented and cross-validated:
random features (frozen bottom layer), the tangent-kernel linearization
around the initialization, and the mean-field particle dynamics.
"""

from .model import (InitSpec, LossSpec, RegSpec, TwoLayerNet, forward,
                    gradients, init_net, loss_value, objective)
from .optim import TrainConfig, TrainTrace, resolve_rates, train
from .kernels import (DualModel, GramBundle, gram_ntk, gram_rf,
                      mc_infinite_kernel, primal_from_dual, solve_dual)
from .tangent import TangentModel, break_ntk_experiment, lin_forward, \
    train_pair
from .meanfield import (MfDiagnostics, ParticleCloud, alpha_sweep,
                        dissipation_check, particle_g, target_experiment,
                        wasted_fraction)
from .features import (FeatureDensity, WeightSampleBank, build_bank,
                       fit_density, importance_prune, repopulate_rf,
                       tangent_compare, variance_diagnostic)
from .data import (Dataset, load_mnist, normalize_features, read_idx,
                   synth_classification, write_idx)

__version__ = "0.1.0"
