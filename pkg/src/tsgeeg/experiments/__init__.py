"""Evaluation protocols over the TSG, BF and TSG+BF feature sets."""

from .config import DEFAULT_SUBSET_CHANNELS, FEATURE_SETS, ExperimentConfig, PipelineConfig, config_hash
from .data import SubjectData, prepare_recording, prepare_subjects, stable_key
from .protocols import (fit_feature_maps, run_in_session, run_nonconstant_querying, run_transfer, score_split,
                        stratified_split, transform)
from .report import Cell, Report
from .subsets import Importance, SubsetReport, channel_importance, run_subset_search
from .synth import ClassSpec, synth_dataset

__all__ = [
    "DEFAULT_SUBSET_CHANNELS",
    "FEATURE_SETS",
    "Cell",
    "ClassSpec",
    "ExperimentConfig",
    "Importance",
    "PipelineConfig",
    "Report",
    "SubjectData",
    "SubsetReport",
    "channel_importance",
    "config_hash",
    "fit_feature_maps",
    "prepare_recording",
    "prepare_subjects",
    "run_in_session",
    "run_nonconstant_querying",
    "run_subset_search",
    "run_transfer",
    "score_split",
    "stable_key",
    "stratified_split",
    "synth_dataset",
    "transform",
]
