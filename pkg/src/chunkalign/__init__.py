"""Toolkit for building aligned speech corpora from long narrated audio."""

from .align import (
    AlignParams,
    ChunkRecord,
    Cursor,
    HypothesisMatch,
    NoViableAlignment,
    Rejection,
    forced_align,
    match_hypotheses,
    start_end_align,
)
from .audio import (
    AudioBuffer,
    DurationBounds,
    MalformedContainer,
    Segment,
    SilenceParams,
    UnsupportedEncoding,
    decode_wav,
    detect_silences,
    encode_wav,
    segment_by_silence,
    strip_long_silences,
    to_mono,
)
from .distance import EmptyReference, cer, levenshtein
from .pipeline import (
    BackendEvaluation,
    FilePair,
    Manifest,
    PipelineConfig,
    RobustnessReport,
    StatsReport,
    emit_stats,
    evaluate_backends,
    run_pipeline,
    run_robustness,
)
from .search import (
    EmptyWindow,
    MatchQuality,
    MatchResult,
    SearchType,
    ThresholdPolicy,
    WindowParams,
    gapped_search,
    interval_search,
)
from .textprep import (
    RuleSet,
    VerbalizerFailure,
    cer_normalize,
    clean_symbols_and_whitespace,
    english_number_words,
    normalize,
    prepare_reference,
    remove_references,
    verbalize_numbers,
)
from .tokenizer import (
    DictionaryTagger,
    LeadingEzafe,
    SubprocessTagger,
    TaggedToken,
    TaggerFailure,
    WordGroup,
    group_ezafe,
    split_sentences,
)
from .transcribe import (
    AllBackendsFailed,
    AudioChunk,
    BackendError,
    BackendSpec,
    CallableBackend,
    PrecomputedBackend,
    ScriptedBackend,
    SubprocessBackend,
    Transcript,
    TranscribeStats,
    is_degenerate,
    mock_corrupt,
    transcribe_chunk,
)

__version__ = "0.1.0"
