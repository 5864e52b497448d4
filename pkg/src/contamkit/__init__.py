"""Synthetic noisy/reverberant speech corpora with frame-level VAD and SNR labels and C50,
plus the matching evaluation metrics, SNR baseline and multi-task loss."""

from .audio import (
    AudioBuffer,
    FrameGrid,
    SpeechActivity,
    apply_gain,
    convolve,
    mean_power,
    rasterize,
    read_wav,
    write_wav,
)
from .contamination import (
    AssetStore,
    ContaminationRecipe,
    LabeledUtterance,
    contaminate,
    draw_recipe,
    extend_with_silence,
    frame_snr,
    mix_at_snr,
)
from .heuristic import HeuristicConfig, heuristic_snr
from .loss import (
    ActivationBounds,
    Predictions,
    Targets,
    bounded_activation,
    calibrate_norms,
    multitask_loss,
    validation_score,
)
from .metrics import conditioned_distribution, decile_report, mae, vad_fscore
from .rir import RoomImpulseResponse, compute_c50, detect_onset, synth_exponential_rir

__version__ = "0.1.0"
