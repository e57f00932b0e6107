"""Community recommendation from social-graph and membership structure."""

from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .config import ABLATIONS, TrainingConfig
from .data import DatasetBundle, SynthSpec, generate_planted_partition, load_bundle
from .encoders import NscMeasure, build_operators
from .evaluation import RankingMetrics, SplitResult, evaluate, split_memberships
from .graph import LinearOperator, MembershipNetwork, SocialGraph, build_membership_network, build_social_graph
from .structure import StructureReport, structure_report
from .train import FitResult, fit

__all__ = [
    "ABLATIONS", "Checkpoint", "DatasetBundle", "FitResult", "LinearOperator", "MembershipNetwork",
    "NscMeasure", "RankingMetrics", "SocialGraph", "SplitResult", "StructureReport", "SynthSpec",
    "TrainingConfig", "build_membership_network", "build_operators", "build_social_graph", "evaluate",
    "fit", "generate_planted_partition", "load_bundle", "load_checkpoint", "save_checkpoint",
    "split_memberships", "structure_report",
]
