"""Sliding-window speaker diarization with powerset segmentation and
PLDA-based vector clustering."""

from .aggregate import (
    AggregatedActivity,
    SpeakerCount,
    median_filter_time,
    overlap_add,
    sort_slots,
    speaker_count,
)
from .audio import AudioBuffer, ChunkBatch, WavFormatError, load_wav, sliding_window
from .cluster import (
    INACTIVE,
    ClusterAssignment,
    ClusteringBackend,
    VbxResult,
    VbxState,
    ahc,
    assign,
    vbx_refine,
)
from .core import (
    Annotation,
    ConfigError,
    FrameRate,
    PipelineConfig,
    TimeSpan,
    config_from_mapping,
    frame_to_time,
    frames_for_samples,
    load_config,
    quantize_ms,
    read_config_file,
    time_to_frame,
)
from .embedding import (
    CleanMaskSet,
    EmbeddingSet,
    ImportedEmbedder,
    SyntheticEmbedder,
    build_embedding_set,
    clean_masks,
    read_embeddings,
    write_embeddings,
)
from .pipeline import PipelineRun, run, run_wav
from .plda import (
    PldaGenerator,
    PldaModel,
    llr_score,
    make_synthetic_model,
    pairwise_llr,
    project,
    read_model,
    sample_speakers_and_embeddings,
    write_model,
)
from .embedding import SlotEmbedder
from .powerset import PowersetCodec, build_codec, to_multilabel, validate_frame_scores
from .reconstruct import binarize_hysteresis, reconstruct, to_diarization
from .rttm import (
    DerBreakdown,
    RttmParseError,
    RttmRecord,
    der,
    format_rttm_line,
    parse_rttm_lines,
    read_rttm,
    records_to_annotation,
    write_rttm,
)
from .scoring import (
    FrameScorer,
    GroundTruthScript,
    ImportedScorer,
    OracleScorer,
    OracleScorerConfig,
    assign_local_slots,
    rasterize_local_activity,
    read_scores,
    truncate_overlaps,
    write_scores,
)
from .synthgen import GenerationError, MeetingSpec, generate, measure_fractions, script_to_rttm

__version__ = "0.1.0"
