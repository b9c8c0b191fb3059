"""Concept quality analysis for concept bottleneck models."""

from ._core import (
    CbmModel,
    ConfigError,
    CqaError,
    DataError,
    Dataset,
    NumericalError,
    annotation_agreement,
    calibrate_flip_rates,
    concept_auc,
    dci,
    dci_from_relevance,
    entangle,
    evaluate,
    generate_world,
    leak,
    load_dataset,
    load_model,
    macro_f1,
    ois,
    roc_auc,
    run_pipeline,
    run_suite,
    set_quiet,
    simulate_annotator,
    train_cbm,
)

__all__ = [name for name in dir() if not name.startswith("_")]
