"""Continuous-time randomized Hamiltonian Monte Carlo with adaptive scaling.

The sampler simulates a piecewise deterministic Markov process whose
deterministic flow is standardized Hamiltonian dynamics and whose events
are Poisson momentum refreshes. Three interchangeable strategies adapt the
diagonal scale matrix during burn-in: integrated marginal variances (VARI),
integrated squared gradients (ISG), and median crossing times (MCT).
"""
from .config import ExperimentConfig, build_target, load_config, load_suite
from .diagnostics import EssReport, efficiency, ess, summarize
from .experiment import ExperimentResult, run_experiment, run_replica, run_suite
from .ode import IntegratorConfig
from .process import ChainOutput, ProcessConfig, ScalingState, simulate_chain
from .targets import (
    GaussianSpec,
    LogisticRegressionData,
    TargetModel,
    make_bimodal,
    make_funnel,
    make_gaussian,
    make_logistic,
    make_smiley,
    make_student_t,
)
from .tuning import (
    DualAveraging,
    IsgTuner,
    MctSchedule,
    MctTuner,
    NullTuner,
    P2Estimator,
    VariTuner,
    make_tuner,
    reanchor,
    run_burnin,
)

__version__ = "0.1.0"
