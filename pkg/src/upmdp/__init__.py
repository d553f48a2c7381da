"""Confidence bounds on the satisfaction probability of uncertain parametric MDPs.

Parameters are sampled from a distribution, each instantiated MDP is model
checked, and scenario-optimisation bounds turn the count of violating samples
into a lower bound on the probability that a random instantiation satisfies
the specification.
"""
from .kernels import BACKEND
from .mc import (CheckResult, BatchChecker, InfiniteReward, bounded_reach, evaluate_spec,
                 expected_reward, qualitative, reach_prob)
from .pmdp import (InstantiatedMdp, ModelError, NotGraphPreserving, NotStochastic, PMdp,
                   Specification, instantiate, instantiate_many, is_pmc, load_model,
                   parse_spec, save_model)
from .polynomial import Polynomial, parse_expr, to_text
from .sampling import draw, load_samples, save_samples
from .scenario import (beta_from_bound, beta_thm1, binomial_tail, bound_pair, eta_thm1,
                       n_required, t_star)

__version__ = "0.1.0"
