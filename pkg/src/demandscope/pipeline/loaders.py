"""File loaders for billing, census, nightlight, survey, ward and footprint data."""
from __future__ import annotations

import csv
import json
import math
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import RecordError, ValidationError
from .records import BillingRecord, parse_month
from .tables import CellGrid, CensusTable, ViirsTable

BILLING_FIELDS = ("customer_id", "building_id", "lon", "lat", "connection_month", "bill_month", "kwh")
SURVEY_FIELDS = ("county_id", "household_id", "reported_kwh", "sample_weight")


def _rows(path, required: tuple[str, ...]):
    """Yield (line_number, row) pairs, checking the header first."""
    fh = open(path, newline="")
    with fh:
        reader = csv.DictReader(fh)
        missing = [f for f in required if f not in (reader.fieldnames or ())]
        if missing:
            raise ValidationError(f"{path}: missing columns {missing}")
        for row in reader:
            yield reader.line_num, row


def _real(value: str, path, line: int, what: str) -> float:
    try:
        x = float(value)
    except (TypeError, ValueError):
        raise RecordError(f"{path}:{line}: {what} {value!r} is not a number") from None
    if not math.isfinite(x):
        raise RecordError(f"{path}:{line}: {what} is not finite")
    return x


@dataclass(frozen=True)
class BillingTable:
    records: dict[str, BillingRecord]  # building_id -> record (single-customer buildings only)
    dropped_multi_customer: tuple[str, ...]


def load_billing(path) -> BillingTable:
    """Read one-row-per-bill CSV; buildings served by more than one account are dropped."""
    per_customer: dict[str, dict] = {}
    bills: dict[str, list[tuple[int, float]]] = defaultdict(list)
    for line, row in _rows(path, BILLING_FIELDS):
        kwh = _real(row["kwh"], path, line, "kwh")
        if kwh < 0:
            raise RecordError(f"{path}:{line}: negative kwh {kwh}")
        try:
            conn = parse_month(row["connection_month"])
            month = parse_month(row["bill_month"])
        except RecordError as exc:
            raise RecordError(f"{path}:{line}: {exc}") from None
        cid = row["customer_id"]
        info = (row["building_id"], _real(row["lon"], path, line, "lon"), _real(row["lat"], path, line, "lat"), conn)
        if cid in per_customer and per_customer[cid] != info:
            raise RecordError(f"{path}:{line}: customer {cid} changes building, location or connection month")
        per_customer[cid] = info
        bills[cid].append((month, kwh))

    customers_of: dict[str, list[str]] = defaultdict(list)
    for cid, (bid, *_rest) in per_customer.items():
        customers_of[bid].append(cid)
    records = {}
    dropped = []
    for bid in sorted(customers_of):
        cids = customers_of[bid]
        if len(cids) > 1:
            dropped.append(bid)
            continue
        cid = cids[0]
        _, lon, lat, conn = per_customer[cid]
        series = sorted(bills[cid])
        months = [m for m, _ in series]
        if len(set(months)) != len(months):
            raise RecordError(f"{path}: customer {cid} has duplicate bill months")
        records[bid] = BillingRecord(cid, bid, (lon, lat), conn, tuple(series))
    return BillingTable(records, tuple(dropped))


def load_census(path) -> CensusTable:
    rows: dict[str, dict[str, float]] = defaultdict(dict)
    for line, row in _rows(path, ("ward_id", "indicator_name", "fraction")):
        rows[row["ward_id"]][row["indicator_name"]] = _real(row["fraction"], path, line, "fraction")
    return CensusTable.from_rows(rows)


def load_viirs(csv_path, grid_path) -> ViirsTable:
    grid = CellGrid(**json.loads(Path(grid_path).read_text()))
    radiance = {}
    for line, row in _rows(csv_path, ("cell_id", "year", "radiance")):
        val = _real(row["radiance"], csv_path, line, "radiance")
        if val < 0:
            raise RecordError(f"{csv_path}:{line}: negative radiance")
        radiance[(int(row["cell_id"]), int(row["year"]))] = val
    return ViirsTable(grid, radiance)


@dataclass(frozen=True)
class SurveyRow:
    county_id: str
    household_id: str
    reported_kwh: float
    sample_weight: float


def load_survey(path) -> list[SurveyRow]:
    out = []
    for line, row in _rows(path, SURVEY_FIELDS):
        kwh = _real(row["reported_kwh"], path, line, "reported_kwh")
        wt = _real(row["sample_weight"], path, line, "sample_weight")
        if kwh < 0 or wt <= 0:
            raise RecordError(f"{path}:{line}: reported_kwh must be >= 0 and sample_weight > 0")
        out.append(SurveyRow(row["county_id"], row["household_id"], kwh, wt))
    return out


@dataclass(frozen=True)
class Ward:
    ward_id: str
    constituency_id: str
    county_id: str
    ring: np.ndarray  # (N, 2) lon/lat

    def contains(self, lon: float, lat: float) -> bool:
        from ..imaging import points_in_polygon

        return bool(points_in_polygon(np.array([lon]), np.array([lat]), self.ring)[0])


def load_wards(path) -> list[Ward]:
    data = json.loads(Path(path).read_text())
    wards = []
    for feat in data["features"]:
        p = feat["properties"]
        ring = np.asarray(feat["geometry"]["coordinates"][0], dtype=np.float64)
        wards.append(Ward(p["ward_id"], p["constituency_id"], p["county_id"], ring))
    return wards


def load_footprints(path) -> dict[str, np.ndarray]:
    """building_id -> outer ring (lon/lat)."""
    data = json.loads(Path(path).read_text())
    return {
        f["properties"]["building_id"]: np.asarray(f["geometry"]["coordinates"][0], dtype=np.float64)
        for f in data["features"]
    }
