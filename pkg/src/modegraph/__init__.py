"""modegraph: decompose time series into oscillatory modes, test the
statistical preconditions for doing so, and transform the components into
visibility and recurrence graphs with full topological characterization."""

__version__ = "0.1.0"

from .series import (
    TimeSeries,
    ReturnSeries,
    load_csv,
    pct_returns,
    rolling_stat,
    zero_crossings,
)
from .stattests import (
    TestResult,
    JarqueBeraResult,
    SuitabilityReport,
    adf,
    kpss,
    bds,
    ljung_box,
    jarque_bera,
    acf,
    suitability_report,
)
from .emd import (
    EmdConfig,
    Imf,
    ImfMetrics,
    Decomposition,
    SiftResult,
    ReconstructionReport,
    InsufficientExtrema,
    find_extrema,
    envelope_mean,
    sift,
    emd,
    eemd,
    ceemdan,
    characterize,
    validate_reconstruction,
)
from .ts2graph import (
    Graph,
    EmbeddingParams,
    FnnResult,
    nvg,
    hvg,
    ami,
    select_delay,
    fnn,
    delay_embed,
    recurrence_graph,
)
from .graphmetrics import (
    TopologyReport,
    components,
    distance_stats,
    clustering_stats,
    betweenness,
    closeness,
    eigenvector_centrality,
    topology_report,
)
from .cli import PipelineConfig, RunManifest, load_config, main

__all__ = [
    "__version__",
    # series
    "TimeSeries",
    "ReturnSeries",
    "load_csv",
    "pct_returns",
    "rolling_stat",
    "zero_crossings",
    # statistical tests
    "TestResult",
    "JarqueBeraResult",
    "SuitabilityReport",
    "adf",
    "kpss",
    "bds",
    "ljung_box",
    "jarque_bera",
    "acf",
    "suitability_report",
    # decomposition
    "EmdConfig",
    "Imf",
    "ImfMetrics",
    "Decomposition",
    "SiftResult",
    "ReconstructionReport",
    "InsufficientExtrema",
    "find_extrema",
    "envelope_mean",
    "sift",
    "emd",
    "eemd",
    "ceemdan",
    "characterize",
    "validate_reconstruction",
    # graph construction
    "Graph",
    "EmbeddingParams",
    "FnnResult",
    "nvg",
    "hvg",
    "ami",
    "select_delay",
    "fnn",
    "delay_embed",
    "recurrence_graph",
    # graph metrics
    "TopologyReport",
    "components",
    "distance_stats",
    "clustering_stats",
    "betweenness",
    "closeness",
    "eigenvector_centrality",
    "topology_report",
    # pipeline
    "PipelineConfig",
    "RunManifest",
    "load_config",
    "main",
]
