"""Historical pool data: CSV ingestion, indexer download, fee-rate decoding.

CSV schema (one row per hourly snapshot)::

    timestamp,price,fee_growth_0_x128,fee_growth_1_x128

``timestamp`` is UNIX seconds, ``price`` the marginal exchange rate in
token-y per token-x (human units), and the two counters are the pool's raw
cumulative fee growth per unit of liquidity in X128 fixed point, written as
decimal integers. Token metadata lives in a JSON sidecar ``<file>.meta.json``
with keys ``decimals_x``, ``decimals_y``, ``x_counter`` (0 or 1: which
counter belongs to token x), ``fee_tier`` and ``step_seconds``.
"""

from __future__ import annotations

import csv
import json
import logging
import os
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from .errors import FetchError, IngestionError, InvalidData

log = logging.getLogger(__name__)

Q128 = 1 << 128
BUNDLED_DATASET = "synthetic_usdc_eth_hourly.csv"
CSV_HEADER = ("timestamp", "price", "fee_growth_0_x128", "fee_growth_1_x128")
ENDPOINT_ENV = "LPCONC_INDEXER_URL"


@dataclass(frozen=True)
class PoolMetadata:
    decimals_x: int = 0
    decimals_y: int = 0
    x_counter: int = 0
    fee_tier: float = 0.0005
    step_seconds: int = 3600

    def __post_init__(self) -> None:
        if self.x_counter not in (0, 1):
            raise InvalidData(f"x_counter must be 0 or 1, got {self.x_counter!r}")


@dataclass(frozen=True)
class PoolRow:
    timestamp: int
    price: float
    fee_growth_0: int
    fee_growth_1: int


class EmptyDatasetError(IngestionError):
    """The requested range contains no pool snapshots."""


@dataclass
class PoolDataset:
    rows: list[PoolRow]
    metadata: PoolMetadata = field(default_factory=PoolMetadata)
    gaps: list[tuple[int, int]] = field(default_factory=list)

    def __post_init__(self) -> None:
        _validate(self.rows, self.metadata, source="dataset")
        self.gaps = _find_gaps(self.rows, self.metadata.step_seconds)

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def timestamps(self) -> np.ndarray:
        return np.array([r.timestamp for r in self.rows], dtype=np.int64)

    @property
    def prices(self) -> np.ndarray:
        return np.array([r.price for r in self.rows], dtype=float)

    @property
    def sqrt_prices(self) -> np.ndarray:
        return np.sqrt(self.prices)


def _validate(rows: list[PoolRow], meta: PoolMetadata, source: str) -> None:
    if not rows:
        raise EmptyDatasetError(f"{source}: no rows")
    for i, row in enumerate(rows):
        if not row.price > 0.0 or not np.isfinite(row.price):
            raise IngestionError(f"{source}: row {i} (timestamp {row.timestamp}) has nonpositive price {row.price!r}")
        if i == 0:
            continue
        prev = rows[i - 1]
        if row.timestamp == prev.timestamp:
            raise IngestionError(f"{source}: duplicate timestamp {row.timestamp}")
        if row.timestamp < prev.timestamp:
            raise IngestionError(f"{source}: row {i} (timestamp {row.timestamp}) is out of order")
        if row.fee_growth_0 < prev.fee_growth_0 or row.fee_growth_1 < prev.fee_growth_1:
            raise IngestionError(f"{source}: row {i} (timestamp {row.timestamp}) has a decreasing fee growth counter")


def _find_gaps(rows: list[PoolRow], step: int) -> list[tuple[int, int]]:
    return [(a.timestamp, b.timestamp) for a, b in zip(rows, rows[1:]) if b.timestamp - a.timestamp != step]


def meta_path(path: str | os.PathLike) -> Path:
    return Path(str(path) + ".meta.json")


def load_pool_csv(path: str | os.PathLike, metadata: PoolMetadata | None = None) -> PoolDataset:
    """Parse, sort and validate a pool CSV.

    Metadata comes from ``metadata`` if given, else from the sidecar file,
    else defaults (zero decimals, counter 0 is token x).
    """
    path = Path(path)
    if metadata is None:
        side = meta_path(path)
        metadata = PoolMetadata(**json.loads(side.read_text())) if side.exists() else PoolMetadata()
    rows = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != CSV_HEADER:
            raise IngestionError(f"{path}: expected header {','.join(CSV_HEADER)}, got {header}")
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != 4:
                raise IngestionError(f"{path}: line {lineno} has {len(rec)} fields, expected 4")
            try:
                rows.append(PoolRow(int(rec[0]), float(rec[1]), int(rec[2]), int(rec[3])))
            except ValueError as exc:
                raise IngestionError(f"{path}: line {lineno} is malformed ({exc})") from None
    rows.sort(key=lambda r: r.timestamp)
    _validate(rows, metadata, source=str(path))
    dataset = PoolDataset(rows, metadata)
    if dataset.gaps:
        log.warning("%s: %d gaps in the hourly grid", path, len(dataset.gaps))
    return dataset


def bundled_dataset_path() -> Path:
    """Path of the synthetic hourly pool dataset shipped with the package."""
    from importlib.resources import files

    return Path(str(files("lpconc") / "data" / BUNDLED_DATASET))


def load_bundled_dataset() -> PoolDataset:
    return load_pool_csv(bundled_dataset_path())


def write_pool_csv(dataset: PoolDataset, path: str | os.PathLike) -> None:
    """Write ``dataset`` and its metadata sidecar; output is byte-stable."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for r in dataset.rows:
            writer.writerow([r.timestamp, repr(r.price), r.fee_growth_0, r.fee_growth_1])
    meta_path(path).write_text(json.dumps(asdict(dataset.metadata), sort_keys=True, indent=2) + "\n")


def decode_fee_growth(delta: int, token_decimals: int, decimals_x: int, decimals_y: int) -> float:
    """Token amount per unit of human-scale liquidity from a raw X128 delta.

    On-chain liquidity is ``sqrt(x_raw * y_raw)``, so one unit of liquidity
    in human token units equals ``10**((decimals_x + decimals_y) / 2)`` raw
    units.
    """
    scale = 10.0 ** (0.5 * (decimals_x + decimals_y) - token_decimals)
    return (delta / Q128) * scale


def fee_rate_series(dataset: PoolDataset, conversion_price: str = "end") -> np.ndarray:
    """Per-step fee income per unit liquidity in y-units.

    Step ``t`` (between rows ``t-1`` and ``t``) earns
    ``df_y + price * df_x``, where the x-component is converted at the
    step's end price (``conversion_price="end"``) or start price.
    """
    if conversion_price not in ("end", "start"):
        raise InvalidData(f"conversion_price must be 'end' or 'start', got {conversion_price!r}")
    meta = dataset.metadata
    rows = dataset.rows
    out = np.empty(len(rows) - 1)
    for t in range(1, len(rows)):
        a, b = rows[t - 1], rows[t]
        d0 = b.fee_growth_0 - a.fee_growth_0
        d1 = b.fee_growth_1 - a.fee_growth_1
        dx_raw, dy_raw = (d0, d1) if meta.x_counter == 0 else (d1, d0)
        fx = decode_fee_growth(dx_raw, meta.decimals_x, meta.decimals_x, meta.decimals_y)
        fy = decode_fee_growth(dy_raw, meta.decimals_y, meta.decimals_x, meta.decimals_y)
        price = b.price if conversion_price == "end" else a.price
        out[t - 1] = fy + price * fx
    return out


def median_fee_rate(series) -> float:
    arr = np.asarray(series, dtype=float)
    if arr.size == 0:
        raise InvalidData("cannot take the median of an empty fee-rate series")
    return float(np.median(arr))


_HOURS_QUERY = """
query hours($pool: String!, $start: Int!, $end: Int!, $first: Int!) {
  poolHourDatas(first: $first, orderBy: periodStartUnix, orderDirection: asc,
                where: {pool: $pool, periodStartUnix_gt: $start, periodStartUnix_lte: $end}) {
    periodStartUnix
    token0Price
    token1Price
    feeGrowthGlobal0X128
    feeGrowthGlobal1X128
  }
}
"""

_POOL_QUERY = """
query pool($pool: ID!) {
  pool(id: $pool) {
    feeTier
    token0 { decimals }
    token1 { decimals }
  }
}
"""


class _Client:
    def __init__(self, endpoint: str, session: Any, retries: int, backoff: float, sleep: Callable[[float], None]):
        self.endpoint = endpoint
        self.session = session
        self.retries = retries
        self.backoff = backoff
        self.sleep = sleep

    def query(self, query: str, variables: dict[str, Any]) -> dict[str, Any]:
        import requests

        last: str = ""
        for attempt in range(self.retries + 1):
            if attempt:
                self.sleep(self.backoff * 2 ** (attempt - 1))
            try:
                resp = self.session.post(self.endpoint, json={"query": query, "variables": variables}, timeout=30)
            except requests.RequestException as exc:
                last = f"{type(exc).__name__}: {exc}"
                log.info("indexer request failed (%s), attempt %d", last, attempt + 1)
                continue
            if resp.status_code >= 500 or resp.status_code == 429:
                last = f"HTTP {resp.status_code}"
                log.info("indexer returned %s, attempt %d", last, attempt + 1)
                continue
            if resp.status_code != 200:
                raise FetchError(f"indexer returned HTTP {resp.status_code}")
            payload = resp.json()
            if payload.get("errors"):
                raise FetchError(f"indexer error: {payload['errors']}")
            return payload["data"]
        raise FetchError(f"indexer unreachable after {self.retries + 1} attempts ({last})")


def fetch_pool_history(
    endpoint: str | None,
    pool_id: str,
    start: int,
    end: int,
    *,
    x_is_token0: bool = False,
    page_size: int = 1000,
    session: Any = None,
    retries: int = 3,
    backoff: float = 1.0,
    sleep: Callable[[float], None] = time.sleep,
    out_path: str | os.PathLike | None = None,
) -> PoolDataset:
    """Download hourly snapshots in ``[start, end]`` from a subgraph-style indexer.

    Pages are requested with a ``periodStartUnix`` cursor until a short page
    arrives. Transient failures (connection errors, HTTP 5xx/429) are
    retried with exponential backoff. When ``out_path`` is given the result
    is persisted with :func:`write_pool_csv`.
    """
    endpoint = endpoint or os.environ.get(ENDPOINT_ENV)
    if not endpoint:
        raise FetchError(f"no indexer endpoint given and {ENDPOINT_ENV} is not set")
    if session is None:
        import requests

        session = requests.Session()
    client = _Client(endpoint, session, retries, backoff, sleep)

    pool = client.query(_POOL_QUERY, {"pool": pool_id}).get("pool")
    if not pool:
        raise EmptyDatasetError(f"pool {pool_id} not found")
    dec0, dec1 = int(pool["token0"]["decimals"]), int(pool["token1"]["decimals"])
    meta = PoolMetadata(
        decimals_x=dec0 if x_is_token0 else dec1,
        decimals_y=dec1 if x_is_token0 else dec0,
        x_counter=0 if x_is_token0 else 1,
        fee_tier=int(pool["feeTier"]) / 1e6,
    )

    rows: list[PoolRow] = []
    cursor = start - 1
    while True:
        page = client.query(
            _HOURS_QUERY, {"pool": pool_id, "start": cursor, "end": end, "first": page_size}
        )["poolHourDatas"]
        for rec in page:
            # token0Price is token0 per token1; y per x is token0Price when x is token1
            price = float(rec["token1Price"] if x_is_token0 else rec["token0Price"])
            rows.append(
                PoolRow(
                    int(rec["periodStartUnix"]),
                    price,
                    int(rec["feeGrowthGlobal0X128"]),
                    int(rec["feeGrowthGlobal1X128"]),
                )
            )
        if len(page) < page_size:
            break
        cursor = int(page[-1]["periodStartUnix"])
    if not rows:
        raise EmptyDatasetError(f"no snapshots for pool {pool_id} in [{start}, {end}]")
    dataset = PoolDataset(rows, meta)
    if out_path is not None:
        write_pool_csv(dataset, out_path)
    return dataset
