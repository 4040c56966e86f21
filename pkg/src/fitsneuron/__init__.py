"""Frequency-selective (FS) and timing-shift (TS) spiking neurons: dynamics,
frequency-domain analysis, stability, training and energy accounting."""
from . import analysis, data, energy, errors, neuron, stability
from .errors import (ConfigurationError, DomainError, FitsError, NumericOverflowError,
                     RasterParseError)
from .neuron import FSParams, LayerParams, NeuronState, TSParams, fits_step, layer_forward

__version__ = "0.1.0"

__all__ = [
    "analysis", "data", "energy", "errors", "neuron", "stability",
    "FSParams", "TSParams", "NeuronState", "LayerParams", "fits_step", "layer_forward",
    "FitsError", "ConfigurationError", "DomainError", "NumericOverflowError", "RasterParseError",
]
