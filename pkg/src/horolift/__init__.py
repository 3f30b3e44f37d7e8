"""Horocycle-lift exponential sums, geometry and equidistribution experiments."""

from .arith import (crt_bezout, divisors, euler_phi, factorize, mobius, mod_inverse,
                    ramanujan_sum, squarefree_squarefull_split)
from .equidist import (DecayFit, DecayRateEstimator, EquidistributionExperiment,
                       ExperimentConfig, decay_fit, main_term, mu_Y_reference, nu_y,
                       run_experiment)
from .expsums import (ExpSumParams, bound_S, bound_U, eval_S, eval_T, eval_U, eval_U_fast,
                      sweep_verify)
from .fourier import (SiegelTestFn, a_coeff, b_coeff, hat_f, hat_f_closed, psi_from_string,
                      tilde_f_n, transpose_rule_check)
from .geometry import (AslElement, from_iwasawa, reduce_fundamental, to_iwasawa,
                       y_coordinates)
from .lifts import (DensitySpec, LiftSpec, check_D_nice, default_density,
                    detect_rational_linear, lift_from_string, make_from_Xi, quadratic_lift)

__version__ = "0.1.0"
