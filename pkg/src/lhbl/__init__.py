"""Learning cost-to-go heuristics with single-step and limited-horizon Bellman labels."""

from .domains import Family, StateSpaceSpec
from .heuristics import LabelBatch, load_checkpoint, make_model, save_checkpoint
from .search import Limits, RunRecord, SearchGraph, bwas, run_limited_horizon
from .labeler import lhb_labels, ssb_label

__version__ = "0.1.0"

__all__ = [
    "Family", "StateSpaceSpec", "LabelBatch", "load_checkpoint", "make_model", "save_checkpoint",
    "Limits", "RunRecord", "SearchGraph", "bwas", "run_limited_horizon", "lhb_labels", "ssb_label",
]
