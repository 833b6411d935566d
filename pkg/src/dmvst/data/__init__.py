from .context import ContextFeatures, build_context
from .grid import (DemandGrid, GridSpec, ParseReport, TaxiRequest, aggregate_demand, dedup_filter,
                   parse_requests)
from .normalize import Normalizer, fit_normalizer
from .samples import Sample, SampleSet, build_samples, split_train_val
from .synth import SynthConfig, SynthTruth, default_spec, grid_to_requests, synth_generate

__all__ = [
    "ContextFeatures", "DemandGrid", "GridSpec", "Normalizer", "ParseReport", "Sample", "SampleSet",
    "SynthConfig", "SynthTruth", "TaxiRequest", "aggregate_demand", "build_context", "build_samples",
    "dedup_filter", "default_spec", "fit_normalizer", "grid_to_requests", "parse_requests",
    "split_train_val", "synth_generate",
]
