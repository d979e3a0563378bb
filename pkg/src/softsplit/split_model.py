"""Functional-split options, their resource costs, and the resource ledger.

A split index runs from 1 (all processing centralized at the CC) to 7 (all
processing at the EC). More distributed splits burn more EC compute (GOPS)
but relieve the shared EC-to-CC midhaul link and shorten the user-perceived
delay; the shipped default cost table encodes exactly that tradeoff and
`validate_fs_table` enforces it for any user-supplied table. Only splits 1-4
keep enough processing at the CC to coordinate multi-connectivity for users
whose serving cluster spans two coverage areas.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ConfigError, SchemaError

FS_MIN = 1
FS_MAX = 7
MC_CAPABLE_MAX = 4  # highest split index that still supports cross-EC MC

TRANSITIONAL = "transitional"
NON_TRANSITIONAL = "non_transitional"

COST_FIELDS = (
    "cell_gops_per_ap",
    "user_gops_per_user",
    "midhaul_mbps_per_ap",
    "proc_delay_ec_ms",
    "proc_delay_cc_ms",
    "tx_delay_midhaul_ms",
)

# Default per-split costs. Values are implementation-chosen for the desk-scale
# scenario (they are required only to satisfy the monotonicity invariants
# checked by validate_fs_table); override via the `fs_table` config section.
DEFAULT_FS_TABLE: dict[int, dict[str, float]] = {
    1: dict(cell_gops_per_ap=0.0, user_gops_per_user=0.0, midhaul_mbps_per_ap=6500.0,
            proc_delay_ec_ms=0.0, proc_delay_cc_ms=6.0, tx_delay_midhaul_ms=5.5),
    2: dict(cell_gops_per_ap=800.0, user_gops_per_user=80.0, midhaul_mbps_per_ap=5000.0,
            proc_delay_ec_ms=0.5, proc_delay_cc_ms=5.0, tx_delay_midhaul_ms=4.5),
    3: dict(cell_gops_per_ap=1400.0, user_gops_per_user=140.0, midhaul_mbps_per_ap=3000.0,
            proc_delay_ec_ms=1.0, proc_delay_cc_ms=3.5, tx_delay_midhaul_ms=3.0),
    4: dict(cell_gops_per_ap=1450.0, user_gops_per_user=140.0, midhaul_mbps_per_ap=1500.0,
            proc_delay_ec_ms=1.5, proc_delay_cc_ms=2.5, tx_delay_midhaul_ms=2.0),
    5: dict(cell_gops_per_ap=1800.0, user_gops_per_user=170.0, midhaul_mbps_per_ap=700.0,
            proc_delay_ec_ms=2.0, proc_delay_cc_ms=1.5, tx_delay_midhaul_ms=1.5),
    6: dict(cell_gops_per_ap=1900.0, user_gops_per_user=190.0, midhaul_mbps_per_ap=200.0,
            proc_delay_ec_ms=2.5, proc_delay_cc_ms=0.8, tx_delay_midhaul_ms=1.2),
    7: dict(cell_gops_per_ap=2000.0, user_gops_per_user=210.0, midhaul_mbps_per_ap=50.0,
            proc_delay_ec_ms=3.0, proc_delay_cc_ms=0.3, tx_delay_midhaul_ms=1.0),
}


@dataclass(frozen=True)
class FSOption:
    """One functional-split choice in 1..7."""

    index: int

    def __post_init__(self) -> None:
        if not FS_MIN <= self.index <= FS_MAX:
            raise ConfigError(f"split index {self.index} outside {FS_MIN}..{FS_MAX}")

    @property
    def mc_capable_for_transitional(self) -> bool:
        return self.index <= MC_CAPABLE_MAX


@dataclass(frozen=True)
class FSCostRow:
    cell_gops_per_ap: float
    user_gops_per_user: float
    midhaul_mbps_per_ap: float
    proc_delay_ec_ms: float
    proc_delay_cc_ms: float
    tx_delay_midhaul_ms: float

    @property
    def total_delay_ms(self) -> float:
        return self.proc_delay_ec_ms + self.proc_delay_cc_ms + self.tx_delay_midhaul_ms


class FSConfigTable:
    """Per-split cost rows for all indices 1..7, validated at construction."""

    def __init__(self, rows: dict[int, FSCostRow]):
        missing = [i for i in range(FS_MIN, FS_MAX + 1) if i not in rows]
        if missing:
            raise SchemaError(f"cost table missing split indices {missing}")
        self.rows = dict(rows)
        violations = validate_fs_table(self)
        if violations:
            raise SchemaError("cost table invalid: " + "; ".join(violations))

    @classmethod
    def from_dict(cls, raw: dict) -> "FSConfigTable":
        rows = {}
        for key, entry in raw.items():
            try:
                idx = int(key)
            except (TypeError, ValueError):
                raise SchemaError(f"cost table key {key!r} is not a split index") from None
            unknown = set(entry) - set(COST_FIELDS)
            if unknown:
                raise SchemaError(f"cost table row {idx}: unknown fields {sorted(unknown)}")
            missing = set(COST_FIELDS) - set(entry)
            if missing:
                raise SchemaError(f"cost table row {idx}: missing fields {sorted(missing)}")
            rows[idx] = FSCostRow(**{k: float(entry[k]) for k in COST_FIELDS})
        return cls(rows)

    @classmethod
    def default(cls) -> "FSConfigTable":
        return cls.from_dict(DEFAULT_FS_TABLE)

    def row(self, fs: int) -> FSCostRow:
        try:
            return self.rows[fs]
        except KeyError:
            raise ConfigError(f"no cost row for split index {fs}") from None

    def cell_gops(self, fs: int) -> float:
        return self.row(fs).cell_gops_per_ap

    def user_gops(self, fs: int) -> float:
        return self.row(fs).user_gops_per_user

    def midhaul(self, fs: int) -> float:
        return self.row(fs).midhaul_mbps_per_ap


def _validate_rows(rows: dict[int, FSCostRow]) -> list[str]:
    violations = []
    for i in range(FS_MIN, FS_MAX + 1):
        r = rows[i]
        for name in COST_FIELDS:
            if getattr(r, name) < 0:
                violations.append(f"split {i}: {name} negative")
    for i in range(FS_MIN, FS_MAX):
        a, b = rows[i], rows[i + 1]
        gops_a = a.cell_gops_per_ap + a.user_gops_per_user
        gops_b = b.cell_gops_per_ap + b.user_gops_per_user
        if gops_b < gops_a:
            violations.append(f"splits {i}->{i + 1}: per-AP+per-user GOPS must be non-decreasing")
        if b.midhaul_mbps_per_ap > a.midhaul_mbps_per_ap:
            violations.append(f"splits {i}->{i + 1}: midhaul rate must be non-increasing")
        if b.total_delay_ms > a.total_delay_ms:
            violations.append(f"splits {i}->{i + 1}: total delay must be non-increasing")
    return violations


def validate_fs_table(table: "FSConfigTable | dict") -> list[str]:
    """Return all violated invariants (empty list means the table is valid)."""
    if isinstance(table, FSConfigTable):
        return _validate_rows(table.rows)
    rows = {}
    for key, entry in table.items():
        idx = int(key)
        if isinstance(entry, FSCostRow):
            rows[idx] = entry
        else:
            missing = set(COST_FIELDS) - set(entry)
            if missing:
                raise SchemaError(f"cost table row {idx}: missing fields {sorted(missing)}")
            rows[idx] = FSCostRow(**{k: float(entry[k]) for k in COST_FIELDS})
    missing_idx = [i for i in range(FS_MIN, FS_MAX + 1) if i not in rows]
    if missing_idx:
        raise SchemaError(f"cost table missing split indices {missing_idx}")
    return _validate_rows(rows)


@dataclass(frozen=True)
class GroupAssignment:
    """Network-wide split for the transitional group, per-EC split for the rest."""

    fs_transitional: FSOption
    fs_non_transitional: dict[int, FSOption]

    def __post_init__(self) -> None:
        if not self.fs_transitional.mc_capable_for_transitional:
            raise ConfigError(
                f"split {self.fs_transitional.index} cannot serve transitional users "
                f"(multi-connectivity needs splits {FS_MIN}..{MC_CAPABLE_MAX})"
            )

    def key(self) -> tuple[int, ...]:
        """Lexicographic sort key: (transitional split, per-EC splits by EC id)."""
        return (self.fs_transitional.index,) + tuple(
            self.fs_non_transitional[e].index for e in sorted(self.fs_non_transitional)
        )


@dataclass
class ResourceLedger:
    """Per-EC compute usage and the shared midhaul load for one timestep."""

    gops_by_group: dict[int, dict[str, float]]
    midhaul_by_group: dict[int, dict[str, float]]
    gops_violation: dict[int, bool] = field(default_factory=dict)
    midhaul_violation: bool = False

    @property
    def gops_total(self) -> dict[int, float]:
        return {e: sum(g.values()) for e, g in self.gops_by_group.items()}

    @property
    def midhaul_total(self) -> float:
        return sum(sum(m.values()) for m in self.midhaul_by_group.values())


def gops_for_group(fs: int, n_aps: int, n_users: int, table: FSConfigTable) -> float:
    """EC compute for one user group: per-AP cell processing plus per-user processing."""
    if n_aps < 0 or n_users < 0:
        raise ConfigError("counts must be non-negative")
    return n_aps * table.cell_gops(fs) + n_users * table.user_gops(fs)


def gops_total(
    assignment: GroupAssignment,
    ec_id: int,
    n_aps: int,
    n_transitional: int,
    n_non_transitional: int,
    table: FSConfigTable,
    share_cell_pfs: bool = False,
) -> float:
    """Total EC compute over both user groups.

    The cell-processing term is charged once per group, so an EC running both
    groups pays it twice even if the splits coincide. With `share_cell_pfs`
    identical splits are deployed once and the duplicate cell term is waived.
    """
    fs_t = assignment.fs_transitional.index
    fs_nt = assignment.fs_non_transitional[ec_id].index
    total = gops_for_group(fs_t, n_aps, n_transitional, table) + gops_for_group(
        fs_nt, n_aps, n_non_transitional, table
    )
    if share_cell_pfs and fs_t == fs_nt:
        total -= n_aps * table.cell_gops(fs_t)
    return total


def midhaul_for_group(fs: int, n_aps: int, table: FSConfigTable) -> float:
    """Midhaul load of one group at one EC; scales with APs, not with users."""
    if n_aps < 0:
        raise ConfigError("counts must be non-negative")
    return n_aps * table.midhaul(fs)


def midhaul_total(
    assignment: GroupAssignment,
    aps_per_ec: dict[int, int],
    table: FSConfigTable,
) -> float:
    """Aggregate load on the shared midhaul link over all ECs and both groups."""
    fs_t = assignment.fs_transitional.index
    total = 0.0
    for ec_id in sorted(aps_per_ec):
        n_aps = aps_per_ec[ec_id]
        fs_nt = assignment.fs_non_transitional[ec_id].index
        total += midhaul_for_group(fs_t, n_aps, table)
        total += midhaul_for_group(fs_nt, n_aps, table)
    return total


@dataclass
class ViolationReport:
    gops_violation: dict[int, bool]
    midhaul_violation: bool

    @property
    def any(self) -> bool:
        return self.midhaul_violation or any(self.gops_violation.values())


def check_constraints(
    gops_by_ec: dict[int, float],
    midhaul: float,
    g_th: float,
    m_th: float,
) -> ViolationReport:
    """Budgets are feasible at equality; only strict overshoot is a violation."""
    if g_th <= 0 or m_th <= 0:
        raise ConfigError("thresholds must be positive")
    return ViolationReport(
        gops_violation={e: g > g_th for e, g in gops_by_ec.items()},
        midhaul_violation=midhaul > m_th,
    )
