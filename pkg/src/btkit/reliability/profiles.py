from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

STOCHASTIC = "stochastic"
DETERMINISTIC = "deterministic"
HYBRID_DET_SUCCESS = "hybrid_det_success"
HYBRID_DET_FAILURE = "hybrid_det_failure"
KINDS = (STOCHASTIC, DETERMINISTIC, HYBRID_DET_SUCCESS, HYBRID_DET_FAILURE)

# Sojourn time given to condition leaves, which the analysis treats as
# near-instantaneous stochastic actions.
CONDITION_EPS = 1e-9


class InvalidProfile(ValueError):
    pass


def _inv(x: Optional[float]) -> float:
    if x is None:
        raise InvalidProfile("missing rate or time")
    return math.inf if x == 0 else (0.0 if math.isinf(x) else 1.0 / x)


@dataclass(frozen=True)
class ActionProfile:
    """Outcome probabilities and timing of one leaf or analyzed subtree.

    Stochastic outcomes take exponential time with rate ``mu`` (success) or
    ``nu`` (failure); deterministic ones take exactly ``tau_s``/``tau_f``.
    A rate may be infinite only when its outcome has probability zero.
    """
    kind: str
    p_s: float
    p_f: float
    mu: Optional[float] = None
    nu: Optional[float] = None
    tau_s: Optional[float] = None
    tau_f: Optional[float] = None
    is_condition: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidProfile(f"unknown kind {self.kind!r}")
        if not (0 <= self.p_s <= 1 and 0 <= self.p_f <= 1):
            raise InvalidProfile("probabilities must lie in [0, 1]")
        if abs(self.p_s + self.p_f - 1) > 1e-9:
            raise InvalidProfile(f"p_s + p_f = {self.p_s + self.p_f} != 1")
        det_s = self.kind in (DETERMINISTIC, HYBRID_DET_SUCCESS)
        det_f = self.kind in (DETERMINISTIC, HYBRID_DET_FAILURE)
        if det_s:
            self._positive(self.tau_s, "tau_s", self.p_s, time=True)
            object.__setattr__(self, "mu", _inv(self.tau_s))
        else:
            self._positive(self.mu, "mu", self.p_s)
        if det_f:
            self._positive(self.tau_f, "tau_f", self.p_f, time=True)
            object.__setattr__(self, "nu", _inv(self.tau_f))
        else:
            self._positive(self.nu, "nu", self.p_f)

    @staticmethod
    def _positive(v, name, p, time=False):
        if v is None:
            raise InvalidProfile(f"{name} is required")
        if math.isnan(v) or v <= 0:
            raise InvalidProfile(f"{name} must be > 0")
        if p > 0 and (math.isinf(v) if not time else v == 0):
            raise InvalidProfile(f"{name} is degenerate for an outcome with probability {p}")

    @classmethod
    def stochastic(cls, p_s: float, mu: float, nu: float, p_f: Optional[float] = None):
        return cls(STOCHASTIC, p_s, 1 - p_s if p_f is None else p_f, mu=mu, nu=nu)

    @classmethod
    def deterministic(cls, p_s: float, tau_s: float, tau_f: float):
        return cls(DETERMINISTIC, p_s, 1 - p_s, tau_s=tau_s, tau_f=tau_f)

    @classmethod
    def hybrid_det_success(cls, p_s: float, tau_s: float, nu: float):
        return cls(HYBRID_DET_SUCCESS, p_s, 1 - p_s, nu=nu, tau_s=tau_s)

    @classmethod
    def hybrid_det_failure(cls, p_s: float, mu: float, tau_f: float):
        return cls(HYBRID_DET_FAILURE, p_s, 1 - p_s, mu=mu, tau_f=tau_f)

    @classmethod
    def condition(cls, p_s: float, eps: float = CONDITION_EPS):
        return cls(STOCHASTIC, p_s, 1 - p_s, mu=1 / eps, nu=1 / eps, is_condition=True)

    @property
    def t_s(self) -> float:
        return self.tau_s if self.tau_s is not None else _inv(self.mu)

    @property
    def t_f(self) -> float:
        return self.tau_f if self.tau_f is not None else _inv(self.nu)

    @property
    def mean_time(self) -> float:
        """Expected time to return, p_s t_s + p_f t_f."""
        total = 0.0
        if self.p_s > 0:
            total += self.p_s * self.t_s
        if self.p_f > 0:
            total += self.p_f * self.t_f
        return total

    @property
    def exit_rate(self) -> float:
        return 1.0 / self.mean_time

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "p_s": self.p_s, "p_f": self.p_f}
        fields = {STOCHASTIC: ("mu", "nu"), DETERMINISTIC: ("tau_s", "tau_f"),
                  HYBRID_DET_SUCCESS: ("tau_s", "nu"), HYBRID_DET_FAILURE: ("mu", "tau_f")}
        for k in fields[self.kind]:
            d[k] = getattr(self, k)
        if self.is_condition:
            d["condition"] = True
        return d


def ConditionProfile(p_s: float, eps: float = CONDITION_EPS) -> ActionProfile:
    """Time-invariant truth probability of a condition leaf."""
    return ActionProfile.condition(p_s, eps)
