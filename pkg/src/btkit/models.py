"""Built-in state-space models: a humanoid getting home and a battery-safe robot."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .statespace import F_CODE, R_CODE, S_CODE, RegionSpec, SampledDomain, StateSpaceBT

# Absorbs float drift from repeated increments such as 10 * 0.03.
EPS = 1e-9

STAND, SIT = 0.48, 0.3


def _codes(s, f):
    return np.where(s, S_CODE, np.where(f, F_CODE, R_CODE)).astype(np.int8)


def _shift(dx1, dx2):
    return lambda X: X + np.array([dx1, dx2])


def walk_home() -> tuple:
    s = lambda X: X[:, 0] <= EPS
    f = lambda X: (X[:, 0] > EPS) & (X[:, 1] < STAND - EPS)
    r = lambda X: (X[:, 0] > EPS) & (X[:, 1] >= STAND - EPS)
    bt = StateSpaceBT(_shift(-0.1, 0.0), lambda X: _codes(s(X), f(X)), 1.0, 2, "WalkHome")
    return bt, RegionSpec(s, f, r, r, tau=10)


def sit_to_stand() -> tuple:
    s = lambda X: X[:, 1] >= STAND - EPS
    f = lambda X: X[:, 1] < SIT - EPS
    r = lambda X: (X[:, 1] >= SIT - EPS) & (X[:, 1] < STAND - EPS)
    bt = StateSpaceBT(_shift(0.0, 0.05), lambda X: _codes(s(X), f(X)), 1.0, 2, "SitToStand")
    return bt, RegionSpec(s, f, r, r, tau=4)


def lie_to_sit() -> tuple:
    s = lambda X: X[:, 1] >= SIT - EPS
    f = lambda X: np.zeros(len(X), bool)
    r = lambda X: X[:, 1] < SIT - EPS
    r_prime = lambda X: (X[:, 1] >= -EPS) & (X[:, 1] < SIT - EPS)
    bt = StateSpaceBT(_shift(0.0, 0.03), lambda X: _codes(s(X), f(X)), 1.0, 2, "LieToSit")
    return bt, RegionSpec(s, f, r, r_prime, tau=10)


def humanoid_domain(resolution: int = 50) -> SampledDomain:
    """``0 < x1 <= 0.5`` (distance home), ``0 <= x2 <= 0.55`` (head height)."""
    return SampledDomain.grid([0.0, 0.0], [0.5, 0.55], resolution, open_low=(True, False))


@dataclass
class BatteryModel:
    guarantee_power: StateSpaceBT
    power_spec: RegionSpec
    do_other_task: StateSpaceBT
    obstacle: object
    init: object
    d: float
    reachable: SampledDomain


def battery(resolution: int = 50) -> BatteryModel:
    """x1 is the distance to the charger, x2 the battery level (percent)."""

    def s1(X):
        return (X[:, 1] >= 100) | ((X[:, 0] >= 0.1) & (X[:, 1] > 20))

    def f1(X):
        charging = (X[:, 0] < 0.1) & (X[:, 1] < 100)
        return np.where(charging[:, None], X + np.array([0.0, 1.0]), X + np.array([-1.0, -0.1]))

    no = lambda X: np.zeros(len(X), bool)
    power = StateSpaceBT(f1, lambda X: _codes(s1(X), no(X)), 10.0, 2, "GuaranteePowerSupply")
    spec = RegionSpec(s1, no, lambda X: ~s1(X))

    def f2(X):
        return np.stack([X[:, 0] + (50 - X[:, 0]) / 50, X[:, 1] - 0.1], axis=1)

    other = StateSpaceBT(f2, lambda X: np.zeros(len(X), np.int8), 10.0, 2, "DoOtherTask")
    return BatteryModel(
        power, spec, other,
        obstacle=lambda X: X[:, 1] <= 0,
        init=lambda X: (X[:, 0] >= 0) & (X[:, 0] <= 100) & (X[:, 1] >= 15),
        d=5.0,
        reachable=SampledDomain.grid([0.0, 0.0], [100.0, 100.0], resolution),
    )


MODELS = {
    "walk_home": walk_home,
    "sit_to_stand": sit_to_stand,
    "lie_to_sit": lie_to_sit,
}
