"""Storage and cost arithmetic for full nodes and header-only clients.

Units are decimal: 1 GB = 10**9 bytes, 1 MB = 10**6 bytes.

Formulas::

    full node bytes / year   = domains * cert_size * 365 / avg_lifetime_days
    full node bytes / horizon = that * horizon_days / 365        (cumulative)
    blocks / period          = period_seconds / block_time
    header bytes / period    = blocks * header_size
    cost                     = cumulative full node GB * price_per_gb
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Sequence

DAY = 86400
YEAR_DAYS = 365
GB = 10**9
MB = 10**6

REGISTERED_DOMAINS = 3.3e8
TLS_DOMAINS = REGISTERED_DOMAINS / 2
EC_CERT_SIZE = 2**9
BITCOIN_HEADER_SIZE = 80
TARGET_BLOCK_TIME = 600
DISK_PRICE_PER_GB = 0.02


def fit_header_size(targets: Sequence[tuple[float, float]], block_time: float = TARGET_BLOCK_TIME) -> float:
    """Header size that best reproduces ``(horizon_days, total_header_bytes)`` targets.

    Minimises the worst relative error. Each target's error is linear in the
    header size, so the optimum balances the two extreme per-byte ratios.
    """
    if not targets:
        raise ValueError("need at least one target")
    ratios = [days * DAY / block_time / total for days, total in targets]
    return 2.0 / (min(ratios) + max(ratios))


# Header size implied by "26 MB per year" and "about 50 MB over two years";
# the two figures are not exactly consistent, so both land within 2%.
ETHEREUM_LIKE_HEADER_SIZE = fit_header_size([(YEAR_DAYS, 26 * MB), (2 * YEAR_DAYS, 50 * MB)])


@dataclass(frozen=True)
class CapacityParams:
    num_tls_domains: float = TLS_DOMAINS
    cert_size_bytes: float = EC_CERT_SIZE
    avg_cert_lifetime_days: float = YEAR_DAYS
    block_time_seconds: float = TARGET_BLOCK_TIME
    header_size_bytes: float = BITCOIN_HEADER_SIZE
    horizon_days: float = 2 * YEAR_DAYS
    price_per_gb: float | None = DISK_PRICE_PER_GB

    def __post_init__(self) -> None:
        if self.num_tls_domains < 0:
            raise ValueError("num_tls_domains must be non-negative")
        for name in ("cert_size_bytes", "avg_cert_lifetime_days", "block_time_seconds",
                     "header_size_bytes", "horizon_days"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        if self.price_per_gb is not None and self.price_per_gb < 0:
            raise ValueError("price_per_gb must be non-negative")


@dataclass(frozen=True)
class CapacityReport:
    params: CapacityParams
    full_node_bytes_per_year: float
    full_node_bytes_per_horizon: float
    blocks_per_year: float
    blocks_per_horizon: float
    header_bytes_per_year: float
    header_bytes_per_horizon: float
    cost_estimate: float | None

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_text(self) -> str:
        p = self.params
        lines = [
            f"TLS domains                 {p.num_tls_domains:.4g}",
            f"certificate size            {p.cert_size_bytes:g} B",
            f"average lifetime            {p.avg_cert_lifetime_days:g} days",
            f"block time                  {p.block_time_seconds:g} s",
            f"header size                 {p.header_size_bytes:g} B",
            f"horizon                     {p.horizon_days:g} days",
            "",
            f"full node storage / year    {self.full_node_bytes_per_year / GB:.2f} GB",
            f"full node storage / horizon {self.full_node_bytes_per_horizon / GB:.2f} GB",
            f"blocks / year               {self.blocks_per_year:.0f}",
            f"header storage / year       {self.header_bytes_per_year / MB:.2f} MB",
            f"header storage / horizon    {self.header_bytes_per_horizon / MB:.2f} MB",
        ]
        if self.cost_estimate is not None:
            lines.append(f"storage cost over horizon   {self.cost_estimate:.2f} $")
        return "\n".join(lines)


def estimate_capacity(params: CapacityParams) -> CapacityReport:
    per_year = params.num_tls_domains * params.cert_size_bytes * YEAR_DAYS / params.avg_cert_lifetime_days
    per_horizon = per_year * params.horizon_days / YEAR_DAYS
    blocks_year = YEAR_DAYS * DAY / params.block_time_seconds
    blocks_horizon = params.horizon_days * DAY / params.block_time_seconds
    cost = None if params.price_per_gb is None else per_horizon / GB * params.price_per_gb
    return CapacityReport(
        params=params,
        full_node_bytes_per_year=per_year,
        full_node_bytes_per_horizon=per_horizon,
        blocks_per_year=blocks_year,
        blocks_per_horizon=blocks_horizon,
        header_bytes_per_year=blocks_year * params.header_size_bytes,
        header_bytes_per_horizon=blocks_horizon * params.header_size_bytes,
        cost_estimate=cost,
    )


@dataclass(frozen=True)
class Anchor:
    label: str
    computed: float
    target: float
    unit: str

    @property
    def relative_error(self) -> float:
        return abs(self.computed - self.target) / self.target

    def __str__(self) -> str:
        return (f"{self.label:<34} {self.computed:10.3f} {self.unit:<3} "
                f"(target {self.target:g} {self.unit}, {self.relative_error:+.2%})")


def reference_figures() -> list[Anchor]:
    """Recompute the reference capacity figures from default parameters."""
    base = estimate_capacity(CapacityParams())
    eth = estimate_capacity(CapacityParams(header_size_bytes=ETHEREUM_LIKE_HEADER_SIZE))
    return [
        Anchor("full node storage per year", base.full_node_bytes_per_year / GB, 84, "GB"),
        Anchor("80-byte headers per year", base.header_bytes_per_year / MB, 4.2, "MB"),
        Anchor(f"{ETHEREUM_LIKE_HEADER_SIZE:.0f}-byte headers per year", eth.header_bytes_per_year / MB, 26, "MB"),
        Anchor(f"{ETHEREUM_LIKE_HEADER_SIZE:.0f}-byte headers over two years", eth.header_bytes_per_horizon / MB, 50, "MB"),
        Anchor("storage cost over two years", base.cost_estimate, 3.4, "$"),
    ]
