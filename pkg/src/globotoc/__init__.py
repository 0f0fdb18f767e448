"""Global out-of-time-order correlators in power-law interacting spin systems.

Submodules: ``lattice`` (geometry and coupling kernels), ``spread`` (stochastic
operator spreading), ``kn`` (cluster-size / coherence-order master equation),
``oracle`` (exact small-system quantum dynamics), ``mqc`` (coherence spectra and
experiment ingestion), ``scaling`` (light-cone regimes and fits), ``presets``
and ``cli`` (configuration and command line).
"""
__version__ = "0.1.0"

from .errors import (
    AliasingError, ConfigError, FitError, GlobotocError, KnError, LatticeError,
    MQCError, NoFitError, OracleError, SpreadError, WindowMismatchError,
)
from .lattice import CouplingKernel, LatticeSpec, SiteSet, build_lattice, dilute_sites, rate_matrix
from .spread import SpreadParams, TimeSeries, ctmc_oracle, run_ensemble, run_trial
from .kn import KnChain, KnDistribution, evolve_master, q_value, stationary_kn, transition_rates
from .mqc import MQCSpectrum, cluster_size_fit, gn_from_phase_sweep, load_experiment, second_moment
from .scaling import classify_regime, fit_experiment, predicted_global_otoc
from .presets import preset, resolve

__all__ = [name for name in dir() if not name.startswith("_")]
