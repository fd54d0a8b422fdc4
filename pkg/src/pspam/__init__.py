"""Probabilistically shaped PAM-8 over an unamplified EML IM/DD link.

Modules map onto the processing chain: :mod:`.shaping` (Maxwell-Boltzmann
level distributions), :mod:`.channel` (transmitter, EML, photodiode and
receiver front end), :mod:`.equalization` (FFE / Volterra equalizers),
:mod:`.metrics` (BER, AIR, ONBR) and :mod:`.experiment` (trials and sweeps).
"""

from .channel import EmlCurve, LinkConfig, Waveform
from .equalization import EqualizerConfig, VolterraKernels
from .experiment import DistributionSpec, ExperimentSpec, run_point, run_sweep, run_trial
from .metrics import TrialReport
from .shaping import PamConstellation, ShapedDistribution

__all__ = [
    "DistributionSpec",
    "EmlCurve",
    "EqualizerConfig",
    "ExperimentSpec",
    "LinkConfig",
    "PamConstellation",
    "ShapedDistribution",
    "TrialReport",
    "VolterraKernels",
    "Waveform",
    "run_point",
    "run_sweep",
    "run_trial",
]

__version__ = "0.1.0"
