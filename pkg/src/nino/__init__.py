"""El Nino forecasting toolkit.

Pipeline: gridded SST/OHC data -> climatology and Oceanic Nino Index ->
ConvLSTM and CNN forecasters (trained from scratch on a small numpy-backed
autodiff engine) -> ensembled quarterly anomaly forecasts -> event
classification across observed/forecast blend configurations.
"""

from .climatology import (
    AnomalySeries,
    ClimatologyTable,
    OniSeries,
    QuarterMatrix,
    classify_event,
    compute_climatology,
    oni,
    quarter_matrix,
    regional_anomaly,
)
from .evaluation import (
    ConfusionMatrix,
    EvalReport,
    ForecastConfiguration,
    accuracy,
    blend,
    evaluate_config,
    run_all_configs,
)
from .grid import (
    GeoBounds,
    GridAxes,
    NINO34,
    SpatioTemporalGrid,
    TimeStamp,
    Variable,
    align,
    extract_region,
    read_grid_csv,
    regional_mean,
    write_grid_csv,
)
from .model import (
    CnnForecaster,
    CnnForecasterConfig,
    ConvLstmXt,
    ConvLstmXtConfig,
    TrainConfig,
    cell_step,
    ensemble,
    predict_quarter_anomalies,
    train,
)
from .preprocess import (
    NormalizationParams,
    WindowSample,
    build_windows,
    denormalize,
    fit_minmax,
    normalize,
    render_heatmap,
)
from .synthetic import GroundTruth, SynthEvent, SynthSpec, generate, oracle_oni

__version__ = "0.1.0"
