"""Piecewise linear hidden semi-Markov models for one-shot time-series patterns."""
from .durations import (DiscreteDuration, DurationStats, GammaDuration, gamma_pmf,
                        reestimate_discrete, reestimate_gamma)
from .errors import (DataError, DomainError, EstimationError, ImpossibleSeriesError,
                     ModelFormatError, NumericError, ParseError, PLHMMError)
from .generator import SamplePath, sample
from .lattice import (Lattice, PosteriorStats, Segment, Segmentation, backward,
                      brute_force_loglik, forward, forward_backward, log_likelihood,
                      posteriors, viterbi)
from .model import (BasisConfig, EmissionParams, Model, Series, basis_eval,
                    emission_log_density, left_to_right, segment_log_likelihood, validate)
from .recognizer import Detection, ScoreTrack, find_detections, score_windows
from .special import digamma, invert_digamma, reg_lower_incomplete_gamma, trigamma
from .training import FitTrace, TrainConfig, em_step, fit, initialize, weighted_least_squares

__version__ = "0.1.0"
