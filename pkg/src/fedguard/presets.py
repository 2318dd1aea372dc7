"""Built-in experiment presets.

``clean`` runs 10 honest clients; ``attack20`` and ``attack40`` poison 20%
and 40% of them with high Laplace noise (effective scale 200). All three
default to the defense being enabled; flip it with
:func:`fedguard.config.with_defense` or the CLI's ``--defense off``.
"""

from __future__ import annotations

from .adversary import LaplaceParams
from .config import AdversaryConfig, DEFAULT_MASTER_SEED, ExperimentConfig
from .errors import ParameterError

PRESET_NAMES = ("clean", "attack20", "attack40")

_FRACTIONS = {"clean": 0.0, "attack20": 0.2, "attack40": 0.4}


def preset(name: str, master_seed: int = DEFAULT_MASTER_SEED) -> ExperimentConfig:
    """Return the named preset configuration."""
    if name not in _FRACTIONS:
        raise ParameterError(f"unknown preset: {name!r} (expected one of {list(PRESET_NAMES)})")
    return ExperimentConfig(
        adversary=AdversaryConfig(fraction=_FRACTIONS[name], noise=LaplaceParams()),
        master_seed=master_seed,
    )
