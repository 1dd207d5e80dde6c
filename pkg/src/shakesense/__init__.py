"""Auditory material classification and weight estimation from shake sounds."""

from shakesense.audio import AudioClip, load_wav, save_wav
from shakesense.mfcc import MfccConfig, MfccTransformer, compute_mfcc
from shakesense.nn.estimators import RecurrentClassifier, RecurrentRegressor

__version__ = "0.1.0"

__all__ = [
    "AudioClip",
    "MfccConfig",
    "MfccTransformer",
    "RecurrentClassifier",
    "RecurrentRegressor",
    "compute_mfcc",
    "load_wav",
    "save_wav",
]
