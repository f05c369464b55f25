"""avfusion: multimodal arousal/valence regression over precomputed features.

Sequence encoders (1D-CNN with multiple filter widths, LSTM with attention
pooling, multi-head self-attention, strided waveform convolutions, feature
MLP) trained with pointwise or batch-concordance losses, followed by
RBF-kernel support-vector-regression late fusion with grouped-fold grid
search, evaluated by concordance and Pearson correlation.
"""

from . import dataio, metrics, nn
from .dataio import (
    FeatureSequence,
    PaddedSequence,
    UtteranceRecord,
    DatasetManifest,
    FoldAssignment,
    parse_manifest,
    write_manifest,
    read_feature_tensor,
    write_feature_tensor,
    read_aff1,
    write_aff1,
    downsample_every_k,
    ssa_sample,
    csa_sample,
    pad_truncate,
    select_features,
    kfold_split,
)
from .metrics import MetricsReport, PccMatrix, ccc, pearson, error_metrics, pcc_matrix

__version__ = "0.1.0"
