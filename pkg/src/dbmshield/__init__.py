"""Deep Boltzmann machines for federated synthetic data generation."""

__version__ = "0.1.0"

from .data import BinaryDataset, read_csv, splitdata, write_csv  # noqa: E402
from .estimators import BernoulliRBMEstimator, DeepBoltzmannMachine  # noqa: E402
from .evaluation import (  # noqa: E402
    AisConfig, ais_logpartition, exact_loglikelihood, exact_logpartition,
    loglikelihood_dbm, loglikelihood_rbm, logproblowerbound, top2latentdims,
)
from .inference import meanfield, reconstruction_error  # noqa: E402
from .models import Dbm, Rbm, load_model, save_model  # noqa: E402
from .rng import set_seed  # noqa: E402
from .sampling import samples  # noqa: E402
from .training import (  # noqa: E402
    MonitoringLog, TrainSpec, define_layer, define_partitioned_layer, fitdbm, fitrbm, stackrbms,
)

__all__ = [
    "AisConfig", "BernoulliRBMEstimator", "BinaryDataset", "Dbm", "DeepBoltzmannMachine",
    "MonitoringLog", "Rbm", "TrainSpec", "ais_logpartition", "define_layer",
    "define_partitioned_layer", "exact_loglikelihood", "exact_logpartition", "fitdbm", "fitrbm",
    "load_model", "loglikelihood_dbm", "loglikelihood_rbm", "logproblowerbound", "meanfield",
    "read_csv", "reconstruction_error", "samples", "save_model", "set_seed", "splitdata",
    "stackrbms", "top2latentdims", "write_csv",
]
