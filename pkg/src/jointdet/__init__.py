"""Optimal joint detection and estimation at finite sample size.

Modules
-------
model             hypotheses, priors, costs, randomized two-step rules, average costs
discrete_optimal  exact optimal rule for finite parameter sets (prior-weighted GLR)
general_optimal   optimal rule for general Bayes costs, lower bound on the H0 cost
criteria          MAP, MMSE and median detection/estimation statistics
changepoint       retrospective changepoint detection (Bayes, CUSUM, windowed)
calibrate         threshold and randomization selection
oracle            LP and enumeration certificates for finite problems
cli               config-driven experiment runner
"""

from .errors import (InfeasibleError, InstanceTooLargeError, InvalidInputError, JointDetError,
                     NumericalDomainError, PreconditionViolation, UndefinedEstimatorError,
                     UndefinedStatisticError)
from .model import (CostSpec, DensityFamily, DetEstRule, Estimator, HypothesisSpec, Prior,
                    Problem, average_cost, script_d)

__version__ = "0.1.0"
