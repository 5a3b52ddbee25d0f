"""Bayesian nonparametric inference for the M/G/1 queue.

Gamma-conjugate inference on the arrival rate, beta-Stacy inference on the
service-time distribution, Pollaczek-Khinchine plug-in transforms, and
consistency / Bernstein-von Mises validation experiments.
"""

__version__ = "0.1.0"

from .arrival_inference import (
    GammaPosterior,
    bayes_lambda,
    bvm_lambda,
    predictive,
    predictive_mean,
    sample_lambda,
    update_gamma,
)
from .asymptotics import (
    BvmReport,
    CovarianceRefs,
    PriorSpec,
    bvm_experiment,
    consistency_experiment,
    cov_gamma,
    cov_h,
    cov_zeta,
    cov_zeta_naive,
    var_eta,
    zeta_mc_oracle,
)
from .estimators import ArrivalRateEstimator, MG1Estimator, ServiceDistributionEstimator
from .exceptions import *  # noqa: F401,F403
from .gridcdf import GridCdf
from .queue_core import (
    MG1Truth,
    SampleData,
    ServiceDist,
    TransformSet,
    lindley_waits,
    lst_of_dist,
    pk_mean_system_size,
    pk_transforms,
    simulate_mg1,
)
from .service_inference import (
    BetaStacyState,
    CountingProcesses,
    bayes_cdf,
    dirichlet_as_beta_stacy,
    posterior_mean_of_mean,
    posterior_second_moment_of_mean,
    posterior_update,
    posterior_var_of_mean,
    sample_posterior_path,
    sample_posterior_paths,
    truncate_prior,
)
from .transforms import StabilityReport, build_transforms, stability_probability, z_grid
