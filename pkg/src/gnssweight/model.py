"""Measurement/state data model and the pseudorange observation function."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import MissingClockBias
from .geo import SPEED_OF_LIGHT, EcefPosition


class ConstellationId(enum.IntEnum):
    GPS = 0
    GLONASS = 1
    GALILEO = 2
    BEIDOU = 3


class Band(enum.IntEnum):
    L1 = 0
    L2 = 1
    L5 = 2  # L5/E5


@dataclass(frozen=True)
class PseudorangeMeasurement:
    """One corrected pseudorange with its satellite state and signal metadata.

    Ephemeris-derived corrections (SV clock, iono, tropo, Sagnac) are
    assumed already applied to ``pseudorange``.
    """

    constellation: ConstellationId
    sv_id: int
    band: Band
    pseudorange: float
    sat_pos: EcefPosition
    cn0: float
    lock_time: float

    @property
    def key(self) -> tuple[int, int, int]:
        return (int(self.constellation), int(self.sv_id), int(self.band))


@dataclass(frozen=True)
class NavState:
    """Receiver position plus one clock bias (seconds) per constellation."""

    position: EcefPosition
    clock_bias: dict[ConstellationId, float] = field(default_factory=dict)


@dataclass
class Epoch:
    """One measurement snapshot; measurements kept in canonical order.

    Canonical order is (constellation, sv_id, band) ascending, so feature
    rows and weight vectors line up deterministically.
    """

    time: float
    measurements: list[PseudorangeMeasurement]
    truth: EcefPosition | None = None
    session_id: str = ""

    def __post_init__(self):
        self.measurements = sorted(self.measurements, key=lambda m: m.key)
        keys = [m.key for m in self.measurements]
        if len(set(keys)) != len(keys):
            raise ValueError("duplicate (constellation, sv_id, band) in epoch")

    @property
    def n(self) -> int:
        return len(self.measurements)

    def constellations(self) -> list[ConstellationId]:
        """Constellations present, ascending; defines clock-column order."""
        return sorted({m.constellation for m in self.measurements})

    def state_dim(self) -> int:
        return 3 + len(self.constellations())

    def sat_array(self) -> np.ndarray:
        return np.array([[m.sat_pos.x, m.sat_pos.y, m.sat_pos.z] for m in self.measurements])

    def pr_array(self) -> np.ndarray:
        return np.array([m.pseudorange for m in self.measurements])

    def const_index(self) -> np.ndarray:
        """Per-measurement index into :meth:`constellations`."""
        order = {c: k for k, c in enumerate(self.constellations())}
        return np.array([order[m.constellation] for m in self.measurements], dtype=np.int64)


def observation_function(state: NavState, m: PseudorangeMeasurement) -> float:
    """Predicted pseudorange: geometric range plus c times the clock bias."""
    if m.constellation not in state.clock_bias:
        raise MissingClockBias(f"no clock bias for {m.constellation.name}")
    dx = state.position.x - m.sat_pos.x
    dy = state.position.y - m.sat_pos.y
    dz = state.position.z - m.sat_pos.z
    return math.sqrt(dx * dx + dy * dy + dz * dz) + SPEED_OF_LIGHT * state.clock_bias[m.constellation]


def residual(state: NavState, m: PseudorangeMeasurement) -> float:
    """Measured minus predicted pseudorange."""
    return m.pseudorange - observation_function(state, m)
