"""Audiomentation deformations, procedural low-pass generation and the batch planner."""
from .butterworth import ButterworthFilter, butter_lowpass, butter_lowpass_filter
from .planner import DEFAULT_TARGETS, plan, plan_and_augment
from .transforms import (
    TRANSFORMS,
    AugmentParams,
    ProceduralConfig,
    add_noise,
    augment_clip,
    compress,
    hpss,
    pitch_shift,
    procedural_clip,
    shift_fraction,
    shift_samples,
    static_lowpass,
    time_stretch,
    time_varying_lowpass,
    vibrato,
)
