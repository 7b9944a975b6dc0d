"""Weighted Event Calculus rules: MAP inference and online structure learning."""
from .eventcalc import Interpretation, UnsupportedRule, crisp_infer
from .harness import SyntheticSpec, generate_synthetic
from .induction import InductionConfig, learn_from_mistakes
from .learner import LearnerConfig, OnlineLearner, run_stream
from .logic import Atom, Compound, Const, Literal, ModeDeclaration, Rule, Var, theta_equivalent, theta_subsumes
from .mapinf import MAPResult, brute_force_map, enumerate_distribution, map_inference, scale_weights
from .parsing import ParseError, format_rule, make_batches, parse_facts, parse_modes, parse_rules, parse_state
from .specialize import hoeffding_epsilon, information_gain
from .weights import UpdateContext, adagrad_update, batch_weight_update

__version__ = "0.1.0"

__all__ = [
    "Atom", "Compound", "Const", "Interpretation", "InductionConfig", "LearnerConfig", "Literal",
    "MAPResult", "ModeDeclaration", "OnlineLearner", "ParseError", "Rule", "SyntheticSpec",
    "UnsupportedRule", "UpdateContext", "Var", "adagrad_update", "batch_weight_update",
    "brute_force_map", "crisp_infer", "enumerate_distribution", "format_rule", "generate_synthetic",
    "hoeffding_epsilon", "information_gain", "learn_from_mistakes", "make_batches", "map_inference",
    "parse_facts", "parse_modes", "parse_rules", "parse_state", "run_stream", "scale_weights",
    "theta_equivalent", "theta_subsumes",
]
