import json
from pathlib import Path

import numpy as np
import pytest
import requests

from lpconc import FetchError, IngestionError, InvalidData
from lpconc.market_data import (
    CSV_HEADER,
    EmptyDatasetError,
    PoolDataset,
    PoolMetadata,
    PoolRow,
    Q128,
    decode_fee_growth,
    fee_rate_series,
    fetch_pool_history,
    load_bundled_dataset,
    load_pool_csv,
    median_fee_rate,
    write_pool_csv,
)

DATA = Path(__file__).parent / "data"


def _write(tmp_path, lines, name="pool.csv"):
    path = tmp_path / name
    path.write_text(",".join(CSV_HEADER) + "\n" + "\n".join(lines) + "\n")
    return path


def test_load_fixture():
    ds = load_pool_csv(DATA / "pool_3rows.csv")
    assert len(ds) == 3
    assert ds.gaps == []
    assert ds.prices.tolist() == [1350.0, 1360.5, 1341.25]
    assert ds.sqrt_prices[0] == pytest.approx(1350.0**0.5)


def test_fixture_fee_rates():
    rates = fee_rate_series(load_pool_csv(DATA / "pool_3rows.csv"))
    assert rates[0] == 1.0
    assert rates[1] == pytest.approx(1341.25 * 1000 / Q128, rel=1e-15)
    start = fee_rate_series(load_pool_csv(DATA / "pool_3rows.csv"), conversion_price="start")
    assert start[1] == pytest.approx(1360.5 * 1000 / Q128, rel=1e-15)
    with pytest.raises(InvalidData):
        fee_rate_series(load_pool_csv(DATA / "pool_3rows.csv"), conversion_price="mid")


def test_rows_are_sorted_and_gaps_flagged(tmp_path):
    path = _write(tmp_path, ["7200,2.0,0,0", "0,1.0,0,0", "3600,1.5,0,0", "14400,1.0,0,0"])
    ds = load_pool_csv(path)
    assert ds.timestamps.tolist() == [0, 3600, 7200, 14400]
    assert ds.gaps == [(7200, 14400)]


@pytest.mark.parametrize(
    "lines, match",
    [
        (["0,1.0,5,0", "3600,1.0,4,0"], "row 1 .*timestamp 3600.*decreasing"),
        (["0,1.0,0,0", "0,1.1,0,0"], "duplicate timestamp 0"),
        (["0,1.0,0,0", "3600,-1.0,0,0"], "row 1.*nonpositive price"),
        (["0,1.0,0"], "line 2 has 3 fields"),
        (["0,abc,0,0"], "line 2 is malformed"),
        ([], "no rows"),
    ],
)
def test_validation_errors(tmp_path, lines, match):
    with pytest.raises(IngestionError, match=match):
        load_pool_csv(_write(tmp_path, lines))


def test_bad_header(tmp_path):
    path = tmp_path / "x.csv"
    path.write_text("a,b,c,d\n1,2,3,4\n")
    with pytest.raises(IngestionError, match="expected header"):
        load_pool_csv(path)


def test_write_round_trip_is_byte_stable(tmp_path):
    meta = PoolMetadata(decimals_x=18, decimals_y=6, x_counter=1)
    rows = [PoolRow(3600 * i, 1350.0 + 0.1 * i, 10**30 + i, 2**140 + 7 * i) for i in range(5)]
    ds = PoolDataset(rows, meta)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    write_pool_csv(ds, a)
    back = load_pool_csv(a)
    assert back.rows == rows and back.metadata == meta
    write_pool_csv(back, b)
    assert a.read_bytes() == b.read_bytes()
    assert json.loads(Path(str(a) + ".meta.json").read_text())["x_counter"] == 1


def test_decode_identities():
    assert decode_fee_growth(Q128, 0, 0, 0) == 1.0
    assert decode_fee_growth(0, 6, 18, 6) == 0.0
    # linear in the raw delta
    assert decode_fee_growth(6 * Q128, 6, 18, 6) == pytest.approx(6 * decode_fee_growth(Q128, 6, 18, 6))
    # one human x-unit per human liquidity unit with 18/6 decimals
    raw = Q128 * 10**18 // 10**12
    assert decode_fee_growth(raw, 18, 18, 6) == pytest.approx(1.0, rel=1e-15)


def test_x_fee_converted_at_price():
    meta = PoolMetadata(x_counter=0)
    rows = [PoolRow(0, 1350.0, 0, 0), PoolRow(3600, 1350.0, Q128, 0), PoolRow(7200, 1350.0, Q128, 0)]
    rates = fee_rate_series(PoolDataset(rows, meta))
    assert rates.tolist() == [1350.0, 0.0]
    # the counter mapping comes from metadata, not column position
    swapped = [PoolRow(r.timestamp, r.price, r.fee_growth_1, r.fee_growth_0) for r in rows]
    assert fee_rate_series(PoolDataset(swapped, PoolMetadata(x_counter=1))).tolist() == [1350.0, 0.0]


def test_median():
    assert median_fee_rate([1, 2, 100]) == 2
    assert median_fee_rate([5]) == 5
    assert median_fee_rate([1, 3]) == 2
    with pytest.raises(InvalidData):
        median_fee_rate([])


def test_bundled_dataset():
    ds = load_bundled_dataset()
    assert len(ds) == 2160 and ds.gaps == []
    assert ds.metadata.decimals_x == 18 and ds.metadata.x_counter == 1
    assert ds.prices[0] == 1350.0
    # frozen values of the bundled synthetic data
    assert median_fee_rate(fee_rate_series(ds)) == pytest.approx(2.2028419901223536e-04, rel=1e-12)


###############################################################################
# Indexer client against a scripted session


class FakeResponse:
    def __init__(self, status, payload=None):
        self.status_code = status
        self._payload = payload

    def json(self):
        return self._payload


class FakeSession:
    def __init__(self, script):
        self.script = list(script)
        self.requests = []

    def post(self, url, json=None, timeout=None):
        self.requests.append(json)
        item = self.script.pop(0)
        if isinstance(item, Exception):
            raise item
        return item


POOL = FakeResponse(200, {"data": {"pool": {"feeTier": "500", "token0": {"decimals": "6"},
                                            "token1": {"decimals": "18"}}}})


def _hour(ts, price):
    return {"periodStartUnix": ts, "token0Price": str(price), "token1Price": str(1 / price),
            "feeGrowthGlobal0X128": str(ts * 10), "feeGrowthGlobal1X128": str(ts)}


def _page(*hours):
    return FakeResponse(200, {"data": {"poolHourDatas": list(hours)}})


def test_fetch_paginates(tmp_path):
    session = FakeSession([POOL, _page(_hour(3600, 1350.0), _hour(7200, 1351.0)), _page(_hour(10800, 1352.0))])
    out = tmp_path / "pool.csv"
    ds = fetch_pool_history("http://indexer", "0xpool", 3600, 10800, page_size=2, session=session,
                            sleep=lambda s: None, out_path=out)
    assert ds.timestamps.tolist() == [3600, 7200, 10800]
    assert ds.prices.tolist() == [1350.0, 1351.0, 1352.0]
    assert ds.metadata == PoolMetadata(decimals_x=18, decimals_y=6, x_counter=1, fee_tier=0.0005)
    assert session.requests[1]["variables"]["start"] == 3599
    assert session.requests[2]["variables"]["start"] == 7200
    assert load_pool_csv(out).rows == ds.rows


def test_fetch_retries_server_errors():
    sleeps = []
    session = FakeSession([POOL, FakeResponse(503), requests.ConnectionError("reset"), _page(_hour(0, 2.0))])
    ds = fetch_pool_history("http://indexer", "0xpool", 0, 0, session=session, sleep=sleeps.append, backoff=0.5)
    assert len(ds) == 1
    assert sleeps == [0.5, 1.0]


def test_fetch_gives_up():
    session = FakeSession([FakeResponse(500)] * 3)
    with pytest.raises(FetchError, match="after 3 attempts"):
        fetch_pool_history("http://indexer", "0xpool", 0, 1, session=session, retries=2, sleep=lambda s: None)


def test_fetch_client_errors_are_not_retried():
    with pytest.raises(FetchError, match="HTTP 404"):
        fetch_pool_history("http://x", "0xpool", 0, 1, session=FakeSession([FakeResponse(404)]), sleep=lambda s: None)
    bad = FakeResponse(200, {"errors": [{"message": "boom"}]})
    with pytest.raises(FetchError, match="boom"):
        fetch_pool_history("http://x", "0xpool", 0, 1, session=FakeSession([bad]), sleep=lambda s: None)


def test_fetch_empty_range():
    with pytest.raises(EmptyDatasetError):
        fetch_pool_history("http://x", "0xpool", 0, 1, session=FakeSession([POOL, _page()]), sleep=lambda s: None)


def test_fetch_needs_endpoint(monkeypatch):
    monkeypatch.delenv("LPCONC_INDEXER_URL", raising=False)
    with pytest.raises(FetchError, match="LPCONC_INDEXER_URL"):
        fetch_pool_history(None, "0xpool", 0, 1)
