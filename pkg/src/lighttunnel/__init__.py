"""Deterministic light-tunnel simulator and causal-representation benchmark.

The package simulates the numeric sensors and camera images of a light
tunnel (a sealed chamber with a tricolor source, two rotatable polarizers,
and light/current/angle sensors), generates three benchmark datasets from
declarative causal specifications, and scores learned latent representations
with the standard identifiability metrics.
"""

from . import exceptions
from .dataset_io import TunnelDataset, load_images, read_dataset, verify_dataset_images, write_dataset
from .fetch import fetch_remote
from .images import (
    DECODER_TRAIN_DEFAULTS,
    DecoderSpec,
    ImageDecoder,
    analytic_frame,
    analytic_image,
    decode,
    decode_frame,
    decoder_from_bytes,
    decoder_to_bytes,
    image_to_png,
    png_to_image,
    train_decoder,
)
from .inputs import (
    FACTOR_COLUMNS,
    INPUT_COLUMNS,
    SENSOR_COLUMNS,
    TunnelInputs,
    quantize_frame,
    quantize_inputs,
    validate_frame,
    validate_inputs,
)
from .metrics import (
    EncodingTable,
    GroupedScores,
    block_r2,
    correlation_matrix,
    grouped_corr_matrices,
    mcc,
    shd,
    spearman,
    threshold_to_match,
)
from .nnet import (
    AdamState,
    DenseNet,
    DenseNetRegressor,
    Layer,
    TrainConfig,
    forward,
    init_dense_net,
    load_weights,
    save_weights,
    train_mse,
)
from .readout import RandomFourierRidge, make_readout, r2_score, readout_r2
from .scm import (
    DEFAULT_ADJACENCY,
    DEFAULT_VIEWS,
    ENVIRONMENTS,
    ScmSpec,
    ViewSpec,
    analytic_covariance,
    analytic_mean,
    build_ccrl_dataset,
    build_multiview_dataset,
    make_scm_spec,
    sample_scm,
    view_observations,
)
from .sensors import (
    DEFAULT_PARAMS,
    SensorCalibration,
    SensorParams,
    SensorReadings,
    SensorSimulator,
    calibrate_angle,
    calibrate_current,
    fit_params,
    params_from_json,
    params_to_json,
    simulate_frame,
    simulate_sensors,
)
from .supervised import SupervisedResult, make_supervised_net, supervised_check
from .temporal import (
    TemporalSpec,
    build_citris_dataset,
    fold_angle,
    fold_brightness,
    sample_sequence,
    sample_uniform_factors,
    step_temporal,
)

__version__ = "0.1.0"
