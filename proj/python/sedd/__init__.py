"""Desk-scale lab for score-entropy discrete diffusion over token sequences.

Thin re-export of the compiled module: CTMC transition kernels and noise
schedules, score models (tabular, MLP, mean-parameterized, exact), the
score-entropy loss family, training, tau-leaping samplers with infilling,
likelihood bounds, and the oracle self-check suite.
"""

from ._sedd import (
    EnumeratedDist,
    ExactScoreModel,
    MeanMlpScore,
    MlpScore,
    NoiseSchedule,
    ScoreModel,
    TabularScore,
    TransitionSpec,
    axis_marginal,
    corpus_eval,
    csm_term,
    embed_clean,
    empirical_from_samples,
    evolve,
    exact_concrete_score,
    exact_reverse_solve,
    expected_denoising_score_entropy,
    expected_implicit_score_entropy,
    expected_score_entropy,
    gen_iid,
    iid_ground_truth,
    infill,
    k_const,
    kl,
    load_checkpoint,
    nll_bound,
    prior_kl,
    sample,
    se_term,
    train,
    tv,
    verify,
)

__version__ = "0.1.0"

__all__ = [
    "EnumeratedDist",
    "ExactScoreModel",
    "MeanMlpScore",
    "MlpScore",
    "NoiseSchedule",
    "ScoreModel",
    "TabularScore",
    "TransitionSpec",
    "axis_marginal",
    "corpus_eval",
    "csm_term",
    "embed_clean",
    "empirical_from_samples",
    "evolve",
    "exact_concrete_score",
    "exact_reverse_solve",
    "expected_denoising_score_entropy",
    "expected_implicit_score_entropy",
    "expected_score_entropy",
    "gen_iid",
    "iid_ground_truth",
    "infill",
    "k_const",
    "kl",
    "load_checkpoint",
    "nll_bound",
    "prior_kl",
    "sample",
    "se_term",
    "train",
    "tv",
    "verify",
]
