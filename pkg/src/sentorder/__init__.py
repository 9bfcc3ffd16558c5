"""Sentence ordering over iteratively refined sentence-entity graphs."""

from .config import RunConfig, load_config
from .data import generate_synthetic, load_corpus, save_corpus, split_corpus
from .decode import beam_decode, greedy_decode
from .graph import IrseGraph, Mention, ParagraphRecord, StateError, build_graph
from .metrics import kendall_tau, oracle_best_order, pmr
from .model import Model, ModelDims, build_vocab
from .refine import construct_irse_graph, initial_pass, iterative_pass, refine_graph
from .train import (ablation_phase_c, evaluate_corpus, pairwise_eval,
                    train_pipeline)

__version__ = "0.1.0"

__all__ = [
    "RunConfig", "load_config", "generate_synthetic", "load_corpus", "save_corpus",
    "split_corpus", "beam_decode", "greedy_decode", "IrseGraph", "Mention",
    "ParagraphRecord", "StateError", "build_graph", "kendall_tau",
    "oracle_best_order", "pmr", "Model", "ModelDims", "build_vocab",
    "construct_irse_graph", "initial_pass", "iterative_pass", "refine_graph",
    "ablation_phase_c", "evaluate_corpus", "pairwise_eval", "train_pipeline",
    "__version__",
]
