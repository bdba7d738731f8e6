import math

import numpy as np
import pytest

from gnssweight.geo import (
    SPEED_OF_LIGHT,
    EcefPosition,
    GeodeticPosition,
    enu_rotation,
    geodetic_to_ecef,
)
from gnssweight.model import Band, ConstellationId, Epoch, NavState, PseudorangeMeasurement


def make_epoch(
    rng,
    n=8,
    constellations=(ConstellationId.GPS, ConstellationId.GALILEO),
    noise_sigma=0.0,
    biases=None,
    time=0.0,
):
    """Synthetic epoch built directly from a known truth state.

    ``biases`` maps measurement index (canonical order is assigned after
    construction, so indices refer to generation order == sv order) to an
    additive pseudorange fault in meters. Returns (epoch, truth_state).
    """
    lat = math.radians(rng.uniform(-60, 60))
    lon = math.radians(rng.uniform(-180, 180))
    h = rng.uniform(0, 500)
    rx = geodetic_to_ecef(GeodeticPosition(lat, lon, h))
    rot = enu_rotation(GeodeticPosition(lat, lon, h))  # rows e, n, u

    clock = {c: rng.uniform(-1e-4, 1e-4) for c in constellations}
    truth_state = NavState(rx, dict(clock))

    measurements = []
    for i in range(n):
        const = constellations[i % len(constellations)]
        elev = math.radians(rng.uniform(10, 85))
        az = rng.uniform(0, 2 * math.pi)
        los_enu = np.array(
            [
                math.cos(elev) * math.sin(az),
                math.cos(elev) * math.cos(az),
                math.sin(elev),
            ]
        )
        los_ecef = rot.T @ los_enu
        sat = EcefPosition.from_array(rx.as_array() + 2.2e7 * los_ecef)
        # same arithmetic as the observation function, so noise-free
        # residuals at truth vanish to the last ulp
        dxyz = rx.as_array() - sat.as_array()
        rng_m = math.sqrt(dxyz[0] ** 2 + dxyz[1] ** 2 + dxyz[2] ** 2)
        pr = rng_m + SPEED_OF_LIGHT * clock[const]
        if noise_sigma > 0:
            pr += rng.normal(0, noise_sigma)
        if biases and i in biases:
            pr += biases[i]
        measurements.append(
            PseudorangeMeasurement(
                constellation=const,
                sv_id=i + 1,
                band=Band.L1,
                pseudorange=pr,
                sat_pos=sat,
                cn0=rng.uniform(35, 50),
                lock_time=rng.uniform(0, 60),
            )
        )
    epoch = Epoch(time=time, measurements=measurements, truth=rx)
    return epoch, truth_state


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
