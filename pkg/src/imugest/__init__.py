"""imugest: gesture recognition from smartphone IMU logs.

End-to-end pipeline: CSV ingestion and gesture segmentation, sliding-window
preprocessing with z-score normalization, a from-scratch stacked-LSTM
classifier trained with Adam and categorical cross-entropy, confusion-matrix
evaluation, streaming inference, and a synthetic gesture generator.
"""

__version__ = "0.1.0"

from .errors import (CheckpointError, CheckpointShapeError,
                     CheckpointVersionError, ContractViolationError,
                     CorruptFileError, EmptySegmentError,
                     MalformedCheckpointError)
from .labels import LABEL_NAMES, NUM_GESTURES, GestureLabel
from .numerics import (AdamState, Rng, adam_update, cross_entropy,
                       dropout_mask, finite_diff_gradient, relu, sigmoid,
                       softmax, tanh_act)
from .model import (ForwardCache, LSTMLayerParams, ModelConfig, ModelParams,
                    forward_batch, backward_batch, init_params,
                    lstm_cell_forward, model_backward, model_forward)
from .checkpoint import load_checkpoint, save_checkpoint
from .ingest import (CHANNEL_NAMES, GestureEvent, GestureRecording,
                     ParticipantMeta, SensorSample, SensorTrace,
                     parse_sensor_csv, parse_timestamp_csv, reject_corrupt,
                     segment_recordings, write_events_csv, write_sensor_csv)
from .preprocess import (NormalizationStats, Window, WindowedDataset,
                         drop_axis, load_dataset, remove_gravity, save_dataset,
                         select_low_variance_participants, slide_windows,
                         split_by_participant, window_recordings, zscore_apply,
                         zscore_fit)
from .synth import (TRAJECTORIES, SynthConfig, TrajectorySpec,
                    generate_dataset, generate_session, generate_trajectory,
                    trajectory_to_imu)
from .training import (ConfusionMatrix, EpochMetrics, StreamEmission,
                       TrainConfig, TrainResult, evaluate,
                       gesture_accuracy_majority, predict_probs, stream_infer,
                       train)
