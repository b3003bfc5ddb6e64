"""Desk-scale visual-audio-tactile cross-modal retrieval pipeline."""

from .config import TrainConfig
from .data import (
    AudioParams,
    DatasetSplits,
    MultimodalSample,
    ObjectSpec,
    TactileParams,
    VisualParams,
    build_dataset,
    generate_object_bank,
    load_dataset,
    render_audio,
    render_tactile,
    render_visual,
    save_dataset,
)
from .encoders import (
    AudioEncoder,
    AudioEncoderConfig,
    Embedding,
    ImageEncoder,
    ImageEncoderConfig,
    classify,
    encode_audio,
    encode_tactile,
    encode_visual,
)
from .fusion import (
    AttentionConfig,
    AttentionFusion,
    ConcatFusion,
    CrossAttention,
    concat_fuse,
    fuse,
    scaled_dot_attention,
)
from .models import ModelState, build_model, select_dominant_features
from .retrieval import (
    RankedResult,
    RetrievalIndex,
    average_precision,
    build_index,
    euclidean_distance,
    evaluate_map,
    mean_average_precision,
    rank,
)
from .training import (
    cross_entropy,
    run_training,
    sample_triplet_batch,
    train_stage1,
    train_stage2,
    triplet_loss,
)

__version__ = "0.1.0"
