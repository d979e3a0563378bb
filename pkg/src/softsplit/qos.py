"""Per-user QoS: end-to-end delay, windowed reliability, service continuity.

Delay is a linear composition of midhaul transmission, split-dependent
processing scaled by EC load, and a fixed hardware overhead. Reliability is
estimated over a sliding window of recent timesteps; a user keeps service
continuity while its empirical outage rate stays strictly below the service's
outage budget.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, Optional

from .errors import ConfigError, InactiveUserError
from .split_model import FSConfigTable


@dataclass(frozen=True)
class ServiceSpec:
    id: int
    delay_threshold_ms: float = 12.0
    outage_threshold: float = 1e-5

    def __post_init__(self) -> None:
        if self.delay_threshold_ms <= 0:
            raise ConfigError("delay threshold must be positive")
        if not 0.0 < self.outage_threshold < 1.0:
            raise ConfigError("outage threshold must lie in (0, 1)")


@dataclass(frozen=True)
class DelayParams:
    route_factor_transitional: float = 1.5  # CC detour for cross-EC clusters
    load_lambda: float = 2.0
    load_threshold: float = 0.8  # utilization above which processing slows down
    hw_overhead_ms: float = 1.0
    window: int = 50


@dataclass(frozen=True)
class DelayBreakdown:
    tx_delay_ms: float
    proc_delay_ms: float
    hw_overhead_ms: float

    @property
    def total_ms(self) -> float:
        return self.tx_delay_ms + self.proc_delay_ms + self.hw_overhead_ms


def load_factor(gops_used: float, g_th: float, params: DelayParams) -> float:
    """1 plus a linear penalty once EC utilization exceeds the load threshold."""
    util = gops_used / g_th
    return 1.0 + params.load_lambda * max(0.0, util - params.load_threshold)


def e2e_delay(
    fs: int,
    transitional: bool,
    gops_used: float,
    g_th: float,
    table: FSConfigTable,
    params: DelayParams,
    served: bool = True,
) -> DelayBreakdown:
    """Delay of one served user under split `fs` at an EC loaded to `gops_used`.

    Transitional traffic detours through the CC (route factor >= 1 on the
    transmission term); processing stretches with EC load. Callers must not
    ask for the delay of a dropped or disconnected user - that timestep is an
    outage, not a delay sample.
    """
    if not served:
        raise InactiveUserError("user is not served this timestep; record an outage instead")
    row = table.row(fs)
    route = params.route_factor_transitional if transitional else 1.0
    lf = load_factor(gops_used, g_th, params)
    return DelayBreakdown(
        tx_delay_ms=row.tx_delay_midhaul_ms * route,
        proc_delay_ms=(row.proc_delay_ec_ms + row.proc_delay_cc_ms) * lf,
        hw_overhead_ms=params.hw_overhead_ms,
    )


@dataclass(frozen=True)
class ReliabilityEstimate:
    window_size: int
    outage_count: int

    @property
    def epsilon(self) -> float:
        """Empirical outage probability (0 for an empty window)."""
        if self.window_size == 0:
            return 0.0
        return self.outage_count / self.window_size

    @property
    def rho(self) -> float:
        return 1.0 - self.epsilon


class ReliabilityWindow:
    """Sliding window of outage indicators for one user."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ConfigError("window capacity must be at least 1")
        self.capacity = capacity
        self._events: deque[int] = deque(maxlen=capacity)
        self._outages = 0

    def __len__(self) -> int:
        return len(self._events)

    @property
    def outage_count(self) -> int:
        return self._outages

    def oldest(self) -> int:
        """Indicator that will be evicted by the next record (0 if not full)."""
        if len(self._events) == self.capacity:
            return self._events[0]
        return 0

    def record(
        self,
        delay_ms: Optional[float] = None,
        spec: Optional[ServiceSpec] = None,
        outage: Optional[bool] = None,
    ) -> ReliabilityEstimate:
        """Append one timestep: either a measured delay or an explicit outage.

        Dropped / disconnected timesteps count as outages; a measured delay is
        an outage iff it exceeds the service's delay threshold.
        """
        if outage is None:
            if delay_ms is None or spec is None:
                raise ConfigError("record needs either outage=… or delay_ms and spec")
            outage = delay_ms > spec.delay_threshold_ms
        event = 1 if outage else 0
        if len(self._events) == self.capacity:
            self._outages -= self._events[0]
        self._events.append(event)
        self._outages += event
        return self.estimate()

    def estimate(self) -> ReliabilityEstimate:
        return ReliabilityEstimate(window_size=len(self._events), outage_count=self._outages)


def continuity_ratio(epsilons: Iterable[float], spec: ServiceSpec) -> float:
    """Share of users whose outage rate is strictly below the service budget.

    An empty group vacuously achieves continuity (ratio 1), which keeps the
    weighted objective defined when no transitional users exist.
    """
    values = list(epsilons)
    if not values:
        return 1.0
    satisfied = sum(1 for eps in values if eps < spec.outage_threshold)
    return satisfied / len(values)


def objective_value(r_nt: float, r_t: float, w_nt: float = 0.5, w_t: float = 0.5) -> float:
    """Weighted sum of per-group continuity ratios."""
    if w_nt < 0 or w_t < 0:
        raise ConfigError("weights must be non-negative")
    return w_nt * r_nt + w_t * r_t
