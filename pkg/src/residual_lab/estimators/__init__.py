from .asyvar import AsyVarEstimate, asyvar_fit, ratio_estimate
from .diagnostics import (CovJResult, DecompositionCheck, IndependenceTest, MCEstimate, Psi2Fit,
                          StationarityTest, chi2_independence, covJ_decay, decomposition_check,
                          delta_moment, increment_independence, psi2_growth, stationarity_test,
                          tail_diagnostic)
from .greenkubo import (CorrelationDecay, GreenKuboResult, correlation_decay, green_kubo,
                        plateau_index)
from .jumplaw import JumpLaw, exact_jump_law, theoretical_asyvar
from .mixing import (MixingResult, TransitionGrid, build_transition_grid, fit_log_cube,
                     min_resolution, mixing_time, mixing_time_for, tv_trace)
