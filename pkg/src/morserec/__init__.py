"""Set-oriented analysis of parameterized discrete dynamical systems.

Rigorous Morse decompositions from outward-rounded interval enclosures,
finite-resolution recurrence statistics, continuation over parameter
grids, density clustering of parameter regions, and trajectory
heuristics, with deterministic rendering and a command-line front end.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .errors import (
    ContractViolation,
    DependencyError,
    EnclosureError,
    MorserecError,
    UsageError,
)
from .interval import Interval, IntervalRect
from .grid import Grid, RectangularSet
from .dynsys import MapDef, ParamBox, get_map, map_names, register_map
from .graphrep import (
    MorseDecomposition,
    Representation,
    build_representation,
    is_attracting,
    morse_decomposition,
)
from .recurrence import (
    RecurrenceField,
    ReducedHistogram,
    analyze_set,
    frrv,
    nfrrv_value,
    recurrence_times,
    reduced_histogram,
    restrict_to_set,
)
from .records import BoxRecord, RecSummary, SetSummary, read_box_record, write_box_record
from .continuation import (
    ContinuationDiagram,
    MatchResult,
    ParameterGrid,
    SweepOptions,
    clutching_match,
    continuation_classes,
    run_box,
    sweep,
)
from .cluster import FeatureMatrix, dbscan, frr_features, histogram_features
from .sim import SimConfig, attractor_cover_size, lattice, simulate, union_bounds
from .render import (
    RasterImage,
    export_morse_graph,
    render_heatmap,
    render_morse,
    render_recurrence,
)

__all__ = [
    "__version__",
    "MorserecError", "EnclosureError", "ContractViolation", "DependencyError", "UsageError",
    "Interval", "IntervalRect",
    "Grid", "RectangularSet",
    "MapDef", "ParamBox", "get_map", "map_names", "register_map",
    "Representation", "MorseDecomposition", "build_representation",
    "morse_decomposition", "is_attracting",
    "RecurrenceField", "ReducedHistogram", "analyze_set", "recurrence_times",
    "restrict_to_set", "frrv", "nfrrv_value", "reduced_histogram",
    "BoxRecord", "SetSummary", "RecSummary", "read_box_record", "write_box_record",
    "ParameterGrid", "SweepOptions", "run_box", "sweep",
    "MatchResult", "clutching_match", "ContinuationDiagram", "continuation_classes",
    "FeatureMatrix", "dbscan", "histogram_features", "frr_features",
    "SimConfig", "simulate", "union_bounds", "attractor_cover_size", "lattice",
    "RasterImage", "render_morse", "render_recurrence", "render_heatmap",
    "export_morse_graph",
]
