"""Network scenario: topology layout, user mobility, SINR and serving clusters.

Edge clouds (ECs) own disjoint groups of access points (APs). The area is
tiled left-to-right into one vertical strip per EC and the EC's APs sit on a
regular grid inside its strip. Users follow a random-waypoint model and are
served by a cluster of their nearest APs; a user whose cluster spans APs of
two or more ECs is "transitional" (mid soft-handover between coverage areas).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, TopologyError


class UserStatus(enum.Enum):
    CONNECTED = "connected"
    DISCONNECTED = "disconnected"
    DROPPED = "dropped"


@dataclass
class AccessPoint:
    id: int
    position: tuple[float, float]
    ec_id: int
    tx_power_dbm: float = 30.0


@dataclass
class EdgeCloud:
    id: int
    ap_ids: list[int]


@dataclass
class NetworkTopology:
    """APs grouped into ECs, all ECs meeting at a single central cloud."""

    ecs: list[EdgeCloud]
    aps: list[AccessPoint]
    area: tuple[float, float]
    cc_id: int = 0

    def __post_init__(self) -> None:
        self._ap_by_id = {ap.id: ap for ap in self.aps}
        owned = [ap_id for ec in self.ecs for ap_id in ec.ap_ids]
        if len(set(owned)) != len(owned):
            raise TopologyError("AP owned by more than one EC")
        if set(owned) != set(self._ap_by_id):
            raise TopologyError("EC ap lists do not cover all APs")
        w, h = self.area
        for ap in self.aps:
            x, y = ap.position
            if not (0.0 <= x <= w and 0.0 <= y <= h):
                raise TopologyError(f"AP {ap.id} outside area")

    def ap(self, ap_id: int) -> AccessPoint:
        try:
            return self._ap_by_id[ap_id]
        except KeyError:
            raise TopologyError(f"unknown AP id {ap_id}") from None

    def ec_ids(self) -> list[int]:
        return [ec.id for ec in self.ecs]

    def ec_of_ap(self, ap_id: int) -> int:
        return self.ap(ap_id).ec_id


@dataclass
class UserState:
    id: int
    position: tuple[float, float]
    waypoint: tuple[float, float]
    speed: float
    service_id: int = 0
    cluster: list[int] = field(default_factory=list)
    prev_cluster: list[int] = field(default_factory=list)
    transitional: bool = False
    status: UserStatus = UserStatus.CONNECTED
    pending_disconnect: bool = False
    delay_history: list[float] = field(default_factory=list)

    @property
    def connected(self) -> bool:
        return self.status is UserStatus.CONNECTED


@dataclass
class ClusterAssignment:
    user_id: int
    ap_ids: list[int]  # nearest first
    complete_reconfiguration: bool


@dataclass
class SinrParams:
    """Log-distance path loss; interference folded into the noise floor."""

    pl0_db: float = 40.0
    d0_m: float = 1.0
    pathloss_exp: float = 3.5
    noise_dbm: float = -90.0
    interference_dbm: float = 0.0  # added to the noise floor, 0 disables
    sinr_threshold_db: float = -6.0


def build_topology(
    n_ecs: int,
    aps_per_ec: int,
    area: tuple[float, float],
    tx_power_dbm: float = 30.0,
) -> NetworkTopology:
    """Lay out `n_ecs` vertical strips left-to-right, each with a regular AP grid."""
    if n_ecs < 1 or aps_per_ec < 1:
        raise ConfigError("need at least one EC and one AP per EC")
    w, h = area
    if w <= 0 or h <= 0:
        raise ConfigError("area dimensions must be positive")

    strip_w = w / n_ecs
    cols = math.ceil(math.sqrt(aps_per_ec))
    rows = math.ceil(aps_per_ec / cols)

    aps: list[AccessPoint] = []
    ecs: list[EdgeCloud] = []
    ap_id = 0
    for e in range(n_ecs):
        x0 = e * strip_w
        owned = []
        for k in range(aps_per_ec):
            r, c = divmod(k, cols)
            x = x0 + (c + 0.5) * strip_w / cols
            y = (r + 0.5) * h / rows
            aps.append(AccessPoint(id=ap_id, position=(x, y), ec_id=e, tx_power_dbm=tx_power_dbm))
            owned.append(ap_id)
            ap_id += 1
        ecs.append(EdgeCloud(id=e, ap_ids=owned))
    return NetworkTopology(ecs=ecs, aps=aps, area=area)


def init_users(
    n_users: int,
    area: tuple[float, float],
    v_min: float,
    v_max: float,
    rng: np.random.Generator,
    service_id: int = 0,
) -> list[UserState]:
    w, h = area
    users = []
    for uid in range(n_users):
        pos = (rng.uniform(0.0, w), rng.uniform(0.0, h))
        wp = (rng.uniform(0.0, w), rng.uniform(0.0, h))
        users.append(
            UserState(
                id=uid,
                position=pos,
                waypoint=wp,
                speed=rng.uniform(v_min, v_max),
                service_id=service_id,
            )
        )
    return users


def step_mobility(
    users: Sequence[UserState],
    area: tuple[float, float],
    dt: float,
    v_min: float,
    v_max: float,
    rng: np.random.Generator,
) -> None:
    """Advance every user toward its waypoint; redraw waypoint/speed on arrival.

    Random-waypoint without pause: if the waypoint is reachable within this
    step the user lands exactly on it and a fresh uniform waypoint and speed
    are drawn for the next step. Positions stay inside the area rectangle.
    """
    if dt <= 0:
        raise ConfigError("dt must be positive")
    w, h = area
    for u in users:
        px, py = u.position
        wx, wy = u.waypoint
        dx, dy = wx - px, wy - py
        dist = math.hypot(dx, dy)
        travel = u.speed * dt
        if travel >= dist:
            px, py = wx, wy
            u.waypoint = (rng.uniform(0.0, w), rng.uniform(0.0, h))
            u.speed = rng.uniform(v_min, v_max)
        else:
            px += dx / dist * travel
            py += dy / dist * travel
        u.position = (min(max(px, 0.0), w), min(max(py, 0.0), h))


def compute_sinr(
    position: tuple[float, float],
    ap: AccessPoint,
    params: SinrParams,
) -> float:
    """SINR in dB at `position` from `ap` under log-distance path loss."""
    d = math.hypot(position[0] - ap.position[0], position[1] - ap.position[1])
    d = max(d, params.d0_m)
    pl = params.pl0_db + 10.0 * params.pathloss_exp * math.log10(d / params.d0_m)
    noise = params.noise_dbm + params.interference_dbm
    return ap.tx_power_dbm - pl - noise


def nearest_aps(
    position: tuple[float, float],
    topology: NetworkTopology,
    k: int,
) -> list[int]:
    """Ids of the k nearest APs, ties broken by lower AP id."""
    ranked = sorted(
        topology.aps,
        key=lambda ap: (
            (position[0] - ap.position[0]) ** 2 + (position[1] - ap.position[1]) ** 2,
            ap.id,
        ),
    )
    return [ap.id for ap in ranked[:k]]


def form_clusters(
    users: Sequence[UserState],
    topology: NetworkTopology,
    k_min: int = 2,
) -> list[ClusterAssignment]:
    """Greedy user-centric clustering: each user gets its k_min nearest APs."""
    if k_min < 2:
        raise ConfigError("minimum cluster size is two")
    if len(topology.aps) < k_min:
        raise ConfigError(f"need at least {k_min} APs, topology has {len(topology.aps)}")
    out = []
    for u in users:
        ap_ids = nearest_aps(u.position, topology, k_min)
        complete = len(set(ap_ids) & set(u.cluster)) == 0 if u.cluster else False
        out.append(ClusterAssignment(user_id=u.id, ap_ids=ap_ids, complete_reconfiguration=complete))
    return out


def classify_transitional(cluster: Sequence[int], topology: NetworkTopology) -> bool:
    """True iff the cluster's APs belong to two or more distinct ECs."""
    if not cluster:
        raise TopologyError("empty cluster")
    return len({topology.ec_of_ap(ap_id) for ap_id in cluster}) >= 2
