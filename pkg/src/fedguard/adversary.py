"""Gradient poisoning: Laplace-noise corruption of client updates.

An adversary resamples every coordinate of its trained update from a
Laplace distribution centered on the true value,
``Lap(x | mu, b) = exp(-|x - mu| / b) / (2 b)``,
which is also how differential-privacy noise is generated. The scale knob
is interpreted either directly (``scale``) or as a privacy budget
(``epsilon``, effective scale = sensitivity / b), where a *smaller* b means
*more* noise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError
from .model import ParameterVector

INTERPRETATIONS = ("scale", "epsilon")
SCENARIOS = ("controlled_clients", "self_participating")


@dataclass(frozen=True)
class LaplaceParams:
    """Noise shape for poisoning.

    ``mu`` is a location offset added on top of each poisoned coordinate's
    original value (0 keeps the noise centered on the true update). With the
    default ``epsilon`` interpretation and ``b=0.005`` the effective scale
    is 200, i.e. a high level of noise.
    """

    b: float = 0.005
    interpretation: str = "epsilon"
    sensitivity: float = 1.0
    mu: float = 0.0

    def __post_init__(self) -> None:
        if not self.b > 0:
            raise ParameterError("b must be positive")
        if self.interpretation not in INTERPRETATIONS:
            raise ParameterError(f"unknown noise interpretation: {self.interpretation!r}")
        if self.interpretation == "epsilon" and not self.sensitivity > 0:
            raise ParameterError("sensitivity must be positive under the epsilon interpretation")

    @property
    def effective_scale(self) -> float:
        if self.interpretation == "scale":
            return self.b
        return self.sensitivity / self.b


@dataclass(frozen=True)
class AdversaryPlan:
    """Which clients poison their updates, and with what noise."""

    adversary_ids: frozenset[int]
    fraction: float
    noise: LaplaceParams = field(default_factory=LaplaceParams)
    scenario: str = "controlled_clients"


def laplace_pdf(x: float, mu: float, scale: float) -> float:
    """Density of Laplace(mu, scale) at x; peaks at 1/(2*scale)."""
    if not scale > 0:
        raise ParameterError("scale must be positive")
    return float(np.exp(-abs(x - mu) / scale) / (2.0 * scale))


def _unit_laplace(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    # Inverse CDF: -sgn(u) * ln(1 - 2|u|) for u uniform in (-0.5, 0.5).
    u = rng.random(shape) - 0.5
    u = np.where(u == -0.5, np.nextafter(-0.5, 0.0), u)
    return -np.sign(u) * np.log1p(-2.0 * np.abs(u))


def sample_laplace(mu: float, scale: float, rng: np.random.Generator) -> float:
    """One draw from Laplace(mu, scale) via the inverse CDF."""
    if not scale > 0:
        raise ParameterError("scale must be positive")
    return float(mu + scale * _unit_laplace(rng, ()))


def poison_update(
    update: ParameterVector, noise: LaplaceParams, rng: np.random.Generator
) -> ParameterVector:
    """Resample every coordinate as Laplace(original + mu, effective scale).

    Draws are coordinatewise independent; the input vector is untouched.
    """
    location = update.values + noise.mu
    draws = _unit_laplace(rng, update.values.shape)
    return ParameterVector(location + noise.effective_scale * draws)


def build_plan(
    n_clients: int,
    fraction: float,
    scenario: str,
    noise: LaplaceParams,
    seed: int,
) -> AdversaryPlan:
    """Pick round(fraction * n_clients) adversaries uniformly, seeded."""
    if n_clients < 1:
        raise ParameterError("n_clients must be >= 1")
    if not 0 <= fraction < 1:
        raise ParameterError("fraction must be in [0, 1)")
    if scenario not in SCENARIOS:
        raise ParameterError(f"unknown scenario: {scenario!r}")
    count = int(fraction * n_clients + 0.5)
    rng = np.random.default_rng(seed)
    chosen = rng.choice(n_clients, size=count, replace=False)
    return AdversaryPlan(
        adversary_ids=frozenset(int(c) for c in chosen),
        fraction=fraction,
        noise=noise,
        scenario=scenario,
    )
