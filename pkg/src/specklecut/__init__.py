"""specklecut: laser-speckle material classification and pump energy control.

A from-scratch numpy CNN (convolution, pooling, dense heads, Adam
training), a deterministic synthetic speckle generator, the full
evaluation-metric suite, and a closed-loop exhaust-pump energy simulator.
"""

from . import (  # noqa: F401
    checkpoint,
    cli,
    dataset,
    energy,
    errors,
    imaging,
    metrics,
    nn,
    synth,
    training,
    zoo,
)

__version__ = "0.1.0"
