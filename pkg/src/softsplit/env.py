"""Turn-based discrete-time environment.

Each timestep has two turns: the CC agent first fixes the network-wide split
for transitional users, then the per-EC agents pick splits for their
non-transitional users. The step then deploys the assignment, checks the
compute/midhaul budgets, drops users until the deployment fits, marks
disconnections, updates per-user delay/reliability state and pays out
rewards, and finally advances mobility and clustering for the next timestep.

`step_low` and `preview_assignments` share one resolution path, so a
brute-force search over candidate assignments sees exactly the outcome the
environment would realize for the same drop seed.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ActionError, ConfigError, ProtocolError
from .qos import DelayParams, ReliabilityWindow, ServiceSpec
from .scenario import (
    NetworkTopology,
    SinrParams,
    UserState,
    UserStatus,
    build_topology,
    classify_transitional,
    compute_sinr,
    form_clusters,
    init_users,
    step_mobility,
)
from .split_model import FS_MAX, FS_MIN, FSConfigTable, MC_CAPABLE_MAX, ResourceLedger

GROUP_T = "transitional"
GROUP_NT = "non_transitional"


def compute_reward_low(n_met: int, n_pool: int, n_dropped: int, drop_penalty: float) -> float:
    """EC agent reward: share of its users meeting the delay budget, minus a
    per-dropped-user penalty. The denominator is the pre-drop user count;
    dropped and disconnected users contribute nothing to the numerator. An EC
    without users earns zero."""
    if n_pool == 0:
        return 0.0
    return n_met / n_pool - n_dropped * drop_penalty


def compute_reward_high(r_t: float, low_rewards: Sequence[float]) -> float:
    """CC agent reward: transitional continuity plus the sum of EC rewards."""
    return r_t + sum(low_rewards)


@dataclass
class EnvConfig:
    n_users: int = 50
    n_ecs: int = 2
    aps_per_ec: int = 4
    area: tuple[float, float] = (1000.0, 500.0)
    episode_len: int = 300
    dt: float = 1.0
    v_min: float = 10.0
    v_max: float = 30.0
    k_min: int = 2
    tx_power_dbm: float = 30.0
    sinr: SinrParams = field(default_factory=SinrParams)
    delay: DelayParams = field(default_factory=DelayParams)
    service: ServiceSpec = field(default_factory=lambda: ServiceSpec(id=0))
    g_th: float = 16000.0
    m_th: Optional[float] = None  # defaults to 30000 per EC
    w_nt: float = 0.5
    w_t: float = 0.5
    drop_penalty: float = 0.1
    share_cell_pfs: bool = False
    initial_fs: tuple[int, int] = (3, 3)  # (transitional, non-transitional) at reset
    seed: int = 0
    table: FSConfigTable = field(default_factory=FSConfigTable.default)

    def __post_init__(self) -> None:
        if self.n_users < 0 or self.n_ecs < 1 or self.aps_per_ec < 1:
            raise ConfigError("n_ecs and aps_per_ec must be positive, n_users non-negative")
        if self.episode_len < 1:
            raise ConfigError("episode_len must be at least 1")
        if self.g_th <= 0:
            raise ConfigError("g_th must be positive")
        if self.m_th is None:
            self.m_th = 30000.0 * self.n_ecs
        if self.m_th <= 0:
            raise ConfigError("m_th must be positive")
        if not (FS_MIN <= self.initial_fs[0] <= MC_CAPABLE_MAX):
            raise ConfigError("initial transitional split must be MC-capable (1..4)")
        if not (FS_MIN <= self.initial_fs[1] <= FS_MAX):
            raise ConfigError("initial non-transitional split out of range")


@dataclass(frozen=True)
class HighObs:
    n_transitional: int
    d_min_ms: float
    mean_load_transitional: float

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.n_transitional, self.d_min_ms, self.mean_load_transitional], dtype=np.float64
        )


@dataclass(frozen=True)
class LowObs:
    ec_id: int
    n_users_ec: int
    d_min_ms: float
    mean_ap_load: float
    gops_total: float
    midhaul_ec: float
    midhaul_total: float
    a_cc: int

    def as_array(self) -> np.ndarray:
        return np.array(
            [
                self.n_users_ec,
                self.d_min_ms,
                self.mean_ap_load,
                self.gops_total,
                self.midhaul_ec,
                self.midhaul_total,
                self.a_cc,
            ],
            dtype=np.float64,
        )


@dataclass
class StepOutcome:
    t: int
    fs_transitional: int
    fs_non_transitional: dict[int, int]
    low_rewards: dict[int, float]
    high_reward: float
    dropped: list[int]
    disconnected: list[int]
    gops_violation: dict[int, bool]
    midhaul_violation: bool
    r_t: float
    r_nt: float
    objective: float
    ledger: ResourceLedger
    gops_after: dict[int, float]
    midhaul_after: float
    n_connected: int
    done: bool


@dataclass
class _StepContext:
    """Candidate-independent snapshot of one timestep, ready for resolution.

    User ids equal their index into the environment's user list, so the numpy
    arrays here are indexed by user id.
    """

    ec_order: list[int]
    n_aps: dict[int, int]
    pools: dict[int, list[int]]  # connected users per EC, pre-drop
    pool_idx: dict[int, np.ndarray]
    group_t: np.ndarray  # bool per user, current group membership
    user_group: dict[int, bool]  # uid -> is transitional
    user_ecs: dict[int, tuple[int, ...]]  # uid -> serving EC ids (connected users)
    marked: list[int]  # connected users flagged for disconnection this step
    carried: list[int]  # users entering the step already out of service
    base_out: np.ndarray  # outage regardless of the assignment
    served_classes: list[tuple[bool, tuple[int, ...], int, np.ndarray]]
    n_t: dict[int, int]
    n_nt: dict[int, int]
    win_cnt: np.ndarray
    win_evict: np.ndarray
    win_len_new: np.ndarray
    eps_th: np.ndarray


@dataclass
class _Resolution:
    fs_t: int
    fs_nt: dict[int, int]
    gops_pre: dict[int, dict[str, float]]
    midhaul_pre: dict[int, dict[str, float]]
    gops_violation: dict[int, bool]
    midhaul_violation: bool
    dropped_by_ec: dict[int, list[int]]
    dropped: list[int]
    gops_after: dict[int, float]
    midhaul_after: dict[int, float]
    out: np.ndarray  # outage indicator per user
    delay: Optional[np.ndarray]  # served delay per user (nan when not served)
    r_e: dict[int, float]
    r_cc: float
    r_t: float
    r_nt: float
    objective: float


class SoftSplitEnv:
    """Two-turn environment over one deployment scenario."""

    def __init__(self, cfg: EnvConfig):
        self.cfg = cfg
        self.topology: NetworkTopology = build_topology(
            cfg.n_ecs, cfg.aps_per_ec, cfg.area, cfg.tx_power_dbm
        )
        self.ec_order = sorted(self.topology.ec_ids())
        self._n_aps = {ec.id: len(ec.ap_ids) for ec in self.topology.ecs}
        self._ec_by_id = {ec.id: ec for ec in self.topology.ecs}
        # hot-path cache: split -> (cell GOPS, user GOPS, midhaul, proc delay, tx delay)
        self._costs = {
            fs: (
                cfg.table.cell_gops(fs),
                cfg.table.user_gops(fs),
                cfg.table.midhaul(fs),
                cfg.table.row(fs).proc_delay_ec_ms + cfg.table.row(fs).proc_delay_cc_ms,
                cfg.table.row(fs).tx_delay_midhaul_ms,
            )
            for fs in range(FS_MIN, FS_MAX + 1)
        }

        self.users: list[UserState] = []
        self.windows: dict[int, ReliabilityWindow] = {}
        self.t = 0
        self._turn = "unset"
        self._ft: Optional[int] = None
        self._high_obs: Optional[HighObs] = None
        self._ledger_gops: dict[int, float] = {}
        self._ledger_midhaul: dict[int, float] = {}
        self.reset()

    # ------------------------------------------------------------------ setup

    def reset(self) -> HighObs:
        """Rebuild users and clusters from the configured seed; returns the
        first high-level observation. Resetting replays the exact episode."""
        cfg = self.cfg
        mob_seed, drop_seed = np.random.SeedSequence(cfg.seed).spawn(2)
        self.rng_mobility = np.random.Generator(np.random.PCG64(mob_seed))
        self.rng_drop = np.random.Generator(np.random.PCG64(drop_seed))

        self.users = init_users(
            cfg.n_users, cfg.area, cfg.v_min, cfg.v_max, self.rng_mobility, cfg.service.id
        )
        for assign in form_clusters(self.users, self.topology, cfg.k_min):
            u = self.users[assign.user_id]
            u.cluster = list(assign.ap_ids)
            u.prev_cluster = list(assign.ap_ids)
            u.transitional = classify_transitional(u.cluster, self.topology)
            u.status = UserStatus.CONNECTED
            u.pending_disconnect = False
        self.windows = {u.id: ReliabilityWindow(cfg.delay.window) for u in self.users}
        self.t = 0
        self._turn = "high"
        self._ft = None
        self._init_ledger()
        self._high_obs = self._compute_high_obs()
        return self._high_obs

    def _deployment(self, fs_t: int, fs_nt_e: int, n_aps: int, n_t: int, n_nt: int) -> tuple[float, float]:
        """(GOPS, midhaul) of one live EC deploying both group chains."""
        cell_t, user_t, mid_t, _, _ = self._costs[fs_t]
        cell_nt, user_nt, mid_nt, _, _ = self._costs[fs_nt_e]
        g_t = n_aps * cell_t + n_t * user_t
        g_nt = n_aps * cell_nt + n_nt * user_nt
        if self.cfg.share_cell_pfs and fs_t == fs_nt_e:
            g_nt -= n_aps * cell_t
        m = n_aps * mid_t + n_aps * mid_nt
        return g_t + g_nt, m

    def _init_ledger(self) -> None:
        """Resource snapshot for the first observations: the initial splits
        deployed against the initial clustering, before any agent acted."""
        ft, fnt = self.cfg.initial_fs
        ctx = self._build_context()
        self._ledger_gops = {}
        self._ledger_midhaul = {}
        for e in self.ec_order:
            if ctx.pools[e]:
                g, m = self._deployment(ft, fnt, ctx.n_aps[e], ctx.n_t[e], ctx.n_nt[e])
            else:
                g, m = 0.0, 0.0
            self._ledger_gops[e] = g
            self._ledger_midhaul[e] = m

    # ------------------------------------------------------------ observations

    def high_obs(self) -> HighObs:
        if self._turn == "done":
            raise ProtocolError("episode finished; reset the environment")
        return self._high_obs

    def _ap_user_counts(self) -> dict[int, int]:
        counts: dict[int, int] = {}
        for u in self.users:
            if not u.connected:
                continue
            for a in u.cluster:
                counts[a] = counts.get(a, 0) + 1
        return counts

    def _compute_high_obs(self) -> HighObs:
        ap_users = self._ap_user_counts()
        trans = [u for u in self.users if u.connected and u.transitional]
        trans_aps = sorted({a for u in trans for a in u.cluster})
        if trans_aps:
            mean_load = sum(ap_users.get(a, 0) for a in trans_aps) / len(trans_aps)
        else:
            mean_load = 0.0
        return HighObs(
            n_transitional=len(trans),
            d_min_ms=self.cfg.service.delay_threshold_ms,
            mean_load_transitional=mean_load,
        )

    def _compute_low_obs(self, a_cc: int) -> list[LowObs]:
        ap_users = self._ap_user_counts()
        mid_total = sum(self._ledger_midhaul.values())
        obs = []
        for e in self.ec_order:
            ec = self._ec_by_id[e]
            n_users_ec = sum(
                1
                for u in self.users
                if u.connected and any(self.topology.ec_of_ap(a) == e for a in u.cluster)
            )
            conn_in_cca = sum(ap_users.get(a, 0) for a in ec.ap_ids)
            mean_ap_load = conn_in_cca / len(ec.ap_ids) if ec.ap_ids else 0.0
            obs.append(
                LowObs(
                    ec_id=e,
                    n_users_ec=n_users_ec,
                    d_min_ms=self.cfg.service.delay_threshold_ms,
                    mean_ap_load=mean_ap_load,
                    gops_total=self._ledger_gops[e],
                    midhaul_ec=self._ledger_midhaul[e],
                    midhaul_total=mid_total,
                    a_cc=a_cc,
                )
            )
        return obs

    # ------------------------------------------------------------------- turns

    def step_high(self, a_cc: int) -> list[LowObs]:
        if self._turn == "done":
            raise ProtocolError("episode finished; reset the environment")
        if self._turn != "high":
            raise ProtocolError(f"expected a low turn, got step_high at t={self.t}")
        a_cc = int(a_cc)
        if not FS_MIN <= a_cc <= MC_CAPABLE_MAX:
            raise ActionError(
                f"transitional split {a_cc} invalid; multi-connectivity needs "
                f"{FS_MIN}..{MC_CAPABLE_MAX}"
            )
        self._ft = a_cc
        self._turn = "low"
        return self._compute_low_obs(a_cc)

    def step_low(self, actions: Sequence[int]) -> StepOutcome:
        if self._turn == "done":
            raise ProtocolError("episode finished; reset the environment")
        if self._turn != "low":
            raise ProtocolError(f"expected a high turn, got step_low at t={self.t}")
        if len(actions) != len(self.ec_order):
            raise ActionError(f"need one action per EC ({len(self.ec_order)}), got {len(actions)}")
        fs_nt = {}
        for e, a in zip(self.ec_order, actions):
            a = int(a)
            if not FS_MIN <= a <= FS_MAX:
                raise ActionError(f"split {a} for EC {e} outside {FS_MIN}..{FS_MAX}")
            fs_nt[e] = a

        ctx = self._build_context()
        res = self._resolve(ctx, self._ft, fs_nt, self.rng_drop)
        self._apply(ctx, res)
        outcome = self._make_outcome(res)
        self._advance()
        self.t += 1
        done = self.t >= self.cfg.episode_len
        outcome.done = done
        self._turn = "done" if done else "high"
        self._ft = None
        self._high_obs = self._compute_high_obs()
        return outcome

    # --------------------------------------------------------------- previews

    def preview_assignments(
        self,
        candidates: Sequence[tuple[int, dict[int, int]]],
        drop_seed: int,
    ) -> list[_Resolution]:
        """Resolve the current timestep for each (fs_t, fs_nt-by-EC) candidate.

        Every candidate is evaluated against the same frozen mobility state
        and a drop stream freshly seeded with `drop_seed`, so outcomes are
        comparable and reproducible; the live environment is not touched.
        """
        if self._turn == "done":
            raise ProtocolError("episode finished; reset the environment")
        ctx = self._build_context()
        results = []
        for ft, fnt in candidates:
            rng = np.random.Generator(np.random.PCG64(drop_seed))
            results.append(self._resolve(ctx, ft, dict(fnt), rng, record=False))
        return results

    def clone(self, drop_seed: Optional[int] = None) -> "SoftSplitEnv":
        """Deep copy for evaluate-without-commit; optionally reseed drops."""
        other = copy.deepcopy(self)
        if drop_seed is not None:
            other.rng_drop = np.random.Generator(np.random.PCG64(drop_seed))
        return other

    # ------------------------------------------------------------- resolution

    def _build_context(self) -> _StepContext:
        cfg = self.cfg
        n = len(self.users)
        pools: dict[int, list[int]] = {e: [] for e in self.ec_order}
        user_ecs: dict[int, tuple[int, ...]] = {}
        user_group: dict[int, bool] = {}
        marked: list[int] = []
        carried: list[int] = []
        group_t = np.zeros(n, dtype=bool)
        base_out = np.zeros(n, dtype=bool)
        class_members: dict[tuple[bool, tuple[int, ...], int], list[int]] = {}
        n_t = {e: 0 for e in self.ec_order}
        n_nt = {e: 0 for e in self.ec_order}

        for i, u in enumerate(self.users):
            group_t[i] = u.transitional
            user_group[u.id] = u.transitional
            if not u.connected:
                carried.append(u.id)
                base_out[i] = True
                continue
            ecs = tuple(sorted({self.topology.ec_of_ap(a) for a in u.cluster}))
            user_ecs[u.id] = ecs
            for e in ecs:
                pools[e].append(u.id)
                if u.transitional:
                    n_t[e] += 1
                else:
                    n_nt[e] += 1
            if u.pending_disconnect:
                marked.append(u.id)
                base_out[i] = True
            else:
                key = (u.transitional, ecs, u.service_id)
                class_members.setdefault(key, []).append(i)

        served_classes = [
            (grp, ecs, svc, np.array(idx, dtype=np.intp))
            for (grp, ecs, svc), idx in sorted(class_members.items())
        ]
        pool_idx = {e: np.array(pools[e], dtype=np.intp) for e in self.ec_order}

        win_cnt = np.array([self.windows[u.id].outage_count for u in self.users], dtype=np.int64)
        win_evict = np.array([self.windows[u.id].oldest() for u in self.users], dtype=np.int64)
        win_len_new = np.array(
            [min(len(self.windows[u.id]) + 1, cfg.delay.window) for u in self.users],
            dtype=np.int64,
        )
        eps_th = np.full(n, cfg.service.outage_threshold, dtype=np.float64)

        return _StepContext(
            ec_order=list(self.ec_order),
            n_aps=dict(self._n_aps),
            pools=pools,
            pool_idx=pool_idx,
            group_t=group_t,
            user_group=user_group,
            user_ecs=user_ecs,
            marked=marked,
            carried=carried,
            base_out=base_out,
            served_classes=served_classes,
            n_t=n_t,
            n_nt=n_nt,
            win_cnt=win_cnt,
            win_evict=win_evict,
            win_len_new=win_len_new,
            eps_th=eps_th,
        )

    def _resolve(
        self,
        ctx: _StepContext,
        fs_t: int,
        fs_nt: dict[int, int],
        rng: np.random.Generator,
        record: bool = True,
    ) -> _Resolution:
        cfg = self.cfg

        # Deployment ledger, pre-drop. An EC with no connected users deploys
        # nothing: no processing chains, no midhaul streams.
        cell_t, user_t, mid_t, proc_t, tx_t = self._costs[fs_t]
        gops_pre: dict[int, dict[str, float]] = {}
        midhaul_pre: dict[int, dict[str, float]] = {}
        for e in ctx.ec_order:
            if ctx.pools[e]:
                cell_n, user_n, mid_n, _, _ = self._costs[fs_nt[e]]
                n_aps = ctx.n_aps[e]
                g_t = n_aps * cell_t + ctx.n_t[e] * user_t
                g_nt = n_aps * cell_n + ctx.n_nt[e] * user_n
                if cfg.share_cell_pfs and fs_t == fs_nt[e]:
                    g_nt -= n_aps * cell_t
                m_t = n_aps * mid_t
                m_nt = n_aps * mid_n
            else:
                g_t = g_nt = m_t = m_nt = 0.0
            gops_pre[e] = {GROUP_T: g_t, GROUP_NT: g_nt}
            midhaul_pre[e] = {GROUP_T: m_t, GROUP_NT: m_nt}

        gops0 = {e: gops_pre[e][GROUP_T] + gops_pre[e][GROUP_NT] for e in ctx.ec_order}
        mid0 = {e: midhaul_pre[e][GROUP_T] + midhaul_pre[e][GROUP_NT] for e in ctx.ec_order}
        gops_violation = {e: gops0[e] > cfg.g_th for e in ctx.ec_order}
        midhaul_violation = sum(mid0.values()) > cfg.m_th

        if midhaul_violation or any(gops_violation.values()):
            pools = {e: list(ctx.pools[e]) for e in ctx.ec_order}
            dropped_by_ec = self._drop_to_feasibility(ctx, fs_t, fs_nt, pools, gops0, mid0, rng)
            dropped = [uid for e in ctx.ec_order for uid in dropped_by_ec[e]]
            # Recompute the deployed ledger from the surviving pools.
            gops_after: dict[int, float] = {}
            midhaul_after: dict[int, float] = {}
            for e in ctx.ec_order:
                if pools[e]:
                    nt_after = sum(1 for uid in pools[e] if ctx.user_group[uid])
                    nnt_after = len(pools[e]) - nt_after
                    g, m = self._deployment(fs_t, fs_nt[e], ctx.n_aps[e], nt_after, nnt_after)
                else:
                    g, m = 0.0, 0.0
                gops_after[e] = g
                midhaul_after[e] = m
        else:
            dropped_by_ec = {e: [] for e in ctx.ec_order}
            dropped = []
            gops_after = gops0
            midhaul_after = mid0

        util = {e: gops_after[e] / cfg.g_th for e in ctx.ec_order}

        n = len(self.users)
        out = ctx.base_out.copy()
        ok = np.zeros(n, dtype=bool)
        delay = np.full(n, np.nan, dtype=np.float64) if record else None
        th = cfg.service.delay_threshold_ms
        dp = cfg.delay
        for grp_t, ecs, _svc, members in ctx.served_classes:
            if grp_t:
                proc, tx, route = proc_t, tx_t, dp.route_factor_transitional
            else:
                _, _, _, proc, tx = self._costs[fs_nt[ecs[0]]]
                route = 1.0
            peak_util = max(util[e] for e in ecs)
            lf = 1.0 + dp.load_lambda * max(0.0, peak_util - dp.load_threshold)
            d = tx * route + proc * lf + dp.hw_overhead_ms
            if delay is not None:
                delay[members] = d
            if d > th:
                out[members] = True
            elif d < th:
                ok[members] = True
        if dropped:
            didx = np.array(dropped, dtype=np.intp)
            out[didx] = True
            ok[didx] = False
            if delay is not None:
                delay[didx] = np.nan

        eps_new = (ctx.win_cnt - ctx.win_evict + out) / ctx.win_len_new
        cont = eps_new < ctx.eps_th

        n_trans = int(np.count_nonzero(ctx.group_t))
        n_non = n - n_trans
        r_t = (int(np.count_nonzero(cont & ctx.group_t)) / n_trans) if n_trans else 1.0
        r_nt = (int(np.count_nonzero(cont & ~ctx.group_t)) / n_non) if n_non else 1.0
        objective = cfg.w_nt * r_nt + cfg.w_t * r_t

        r_e: dict[int, float] = {}
        for e in ctx.ec_order:
            pool0 = ctx.pool_idx[e]
            met = int(np.count_nonzero(ok[pool0])) if pool0.size else 0
            r_e[e] = compute_reward_low(
                met, pool0.size, len(dropped_by_ec[e]), cfg.drop_penalty
            )
        r_cc = compute_reward_high(r_t, [r_e[e] for e in ctx.ec_order])

        return _Resolution(
            fs_t=fs_t,
            fs_nt=dict(fs_nt),
            gops_pre=gops_pre,
            midhaul_pre=midhaul_pre,
            gops_violation=gops_violation,
            midhaul_violation=midhaul_violation,
            dropped_by_ec=dropped_by_ec,
            dropped=dropped,
            gops_after=gops_after,
            midhaul_after=midhaul_after,
            out=out,
            delay=delay,
            r_e=r_e,
            r_cc=r_cc,
            r_t=r_t,
            r_nt=r_nt,
            objective=objective,
        )

    def _drop_to_feasibility(
        self,
        ctx: _StepContext,
        fs_t: int,
        fs_nt: dict[int, int],
        pools: dict[int, list[int]],
        gops0: dict[int, float],
        mid0: dict[int, float],
        rng: np.random.Generator,
    ) -> dict[int, list[int]]:
        """Drop users (seeded uniform picks) until the deployment fits the budgets.

        Compute overruns are handled EC by EC; the shared-midhaul overrun is
        handled round-robin across ECs. Midhaul scales with APs, not users, so
        it only relaxes when an EC empties out and its deployment is torn down.
        Pools use swap-removal, so victim picks and removals are O(1).
        """
        cfg = self.cfg
        g = dict(gops0)
        m = dict(mid0)
        dropped_by_ec: dict[int, list[int]] = {e: [] for e in ctx.ec_order}
        gu_t = self._costs[fs_t][1]
        gu_nt = {e: self._costs[fs_nt[e]][1] for e in ctx.ec_order}
        user_ecs = ctx.user_ecs
        user_group = ctx.user_group
        pos = {e: {uid: i for i, uid in enumerate(pools[e])} for e in ctx.ec_order}

        def take_out(e2: int, uid: int) -> bool:
            """Remove uid from EC e2's pool; True when the EC empties out."""
            pool = pools[e2]
            k = pos[e2].pop(uid)
            last = pool.pop()
            if last != uid:
                pool[k] = last
                pos[e2][last] = k
                return False
            if not pool:
                g[e2] = 0.0
                m[e2] = 0.0
                return True
            return False

        def remove(uid: int, charge_ec: int) -> bool:
            died = False
            for e2 in user_ecs[uid]:
                if take_out(e2, uid):
                    died = True
                else:
                    g[e2] -= gu_t if user_group[uid] else gu_nt[e2]
            return died

        g_th = cfg.g_th
        for e in ctx.ec_order:
            pool = pools[e]
            drops = dropped_by_ec[e]
            while g[e] > g_th and pool:
                uid = pool[int(rng.random() * len(pool))]
                drops.append(uid)
                remove(uid, e)

        m_th = cfg.m_th
        m_total = sum(m.values())
        if m_total > m_th:
            i = 0
            n_ecs = len(ctx.ec_order)
            idle = 0
            while m_total > m_th and idle < n_ecs:
                e = ctx.ec_order[i % n_ecs]
                i += 1
                pool = pools[e]
                if not pool:
                    idle += 1
                    continue
                idle = 0
                uid = pool[int(rng.random() * len(pool))]
                dropped_by_ec[e].append(uid)
                if remove(uid, e):
                    m_total = sum(m.values())
        return dropped_by_ec

    # ------------------------------------------------------------------ apply

    def _apply(self, ctx: _StepContext, res: _Resolution) -> None:
        dropped = set(res.dropped)
        marked = set(ctx.marked)
        for i, u in enumerate(self.users):
            if u.id in dropped:
                u.status = UserStatus.DROPPED
            elif u.id in marked:
                u.status = UserStatus.DISCONNECTED
            self.windows[u.id].record(outage=bool(res.out[i]))
            u.delay_history.append(float(res.delay[i]))
            if len(u.delay_history) > self.cfg.delay.window:
                del u.delay_history[0]
        self._ledger_gops = dict(res.gops_after)
        self._ledger_midhaul = dict(res.midhaul_after)

    def _make_outcome(self, res: _Resolution) -> StepOutcome:
        disconnected = [u.id for u in self.users if u.status is UserStatus.DISCONNECTED]
        ledger = ResourceLedger(
            gops_by_group=res.gops_pre,
            midhaul_by_group=res.midhaul_pre,
            gops_violation=res.gops_violation,
            midhaul_violation=res.midhaul_violation,
        )
        return StepOutcome(
            t=self.t,
            fs_transitional=res.fs_t,
            fs_non_transitional=res.fs_nt,
            low_rewards=res.r_e,
            high_reward=res.r_cc,
            dropped=list(res.dropped),
            disconnected=disconnected,
            gops_violation=res.gops_violation,
            midhaul_violation=res.midhaul_violation,
            r_t=res.r_t,
            r_nt=res.r_nt,
            objective=res.objective,
            ledger=ledger,
            gops_after=res.gops_after,
            midhaul_after=sum(res.midhaul_after.values()),
            n_connected=sum(1 for u in self.users if u.connected),
            done=False,
        )

    # ---------------------------------------------------------------- advance

    def _advance(self) -> None:
        cfg = self.cfg
        step_mobility(self.users, cfg.area, cfg.dt, cfg.v_min, cfg.v_max, self.rng_mobility)
        for assign in form_clusters(self.users, self.topology, cfg.k_min):
            u = self.users[assign.user_id]
            u.prev_cluster = u.cluster
            u.cluster = list(assign.ap_ids)
            u.transitional = classify_transitional(u.cluster, self.topology)
            nearest = self.topology.ap(u.cluster[0])
            sinr = compute_sinr(u.position, nearest, cfg.sinr)
            if u.connected:
                u.pending_disconnect = (
                    assign.complete_reconfiguration or sinr < cfg.sinr.sinr_threshold_db
                )
            else:
                # Out-of-service users re-enter through their new cluster.
                u.status = (
                    UserStatus.CONNECTED
                    if sinr >= cfg.sinr.sinr_threshold_db
                    else UserStatus.DISCONNECTED
                )
                u.pending_disconnect = False
