"""Simulate budget-limited relevance adjudication over TREC runs and measure
how well each method preserves the significant system differences found with
the full judgments."""

from .adjudication import (JudgingTrace, MethodConfig, MethodKind, TopicPool, adjudicate, adjudicate_all,
                           build_pools, trace_to_qrels)
from .agreement import (AgreementReport, Outcome, Triplet, TripletSet, bias, build_triplets, classify, compare,
                        ma_distribution, precision_recall)
from .errors import ConfigError, ParseError, StageError, ValidationError
from .harness import (ExperimentConfig, ExperimentResult, budget_fraction, load_config, run_experiment,
                      split_pooled_nonpooled)
from .measures import Measure, MeasureKind, ScoreMatrix, average_precision, ndcg, score_matrix
from .significance import (PairwisePValues, SignificanceConfig, kendall_tau, rank_systems, significant_pairs,
                           tukey_hsd)
from .trec_io import Qrels, RunSet, parse_qrels, parse_runs, read_qrels, read_runs, write_qrels

__version__ = "0.1.0"
