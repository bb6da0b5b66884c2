"""Billing records, stable consumption and tier labels."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import NoStableBills, RecordError

LOW_MAX_KWH = 30.0
HIGH_MIN_KWH = 60.0
STABLE_AFTER_MONTHS = 12


def parse_month(s: str) -> int:
    """``"YYYY-MM"`` to a month ordinal (``year * 12 + month - 1``)."""
    try:
        y, m = str(s).strip().split("-")[:2]
        year, month = int(y), int(m)
    except ValueError as exc:
        raise RecordError(f"bad month {s!r}; expected YYYY-MM") from exc
    if not 1 <= month <= 12:
        raise RecordError(f"bad month {s!r}")
    return year * 12 + month - 1


def format_month(ordinal: int) -> str:
    return f"{ordinal // 12:04d}-{ordinal % 12 + 1:02d}"


def month_year(ordinal: int) -> int:
    return ordinal // 12


class TierLabel(enum.Enum):
    LOW = "Low"
    HIGH = "High"
    EXCLUDED_MID = "ExcludedMid"

    @property
    def class_index(self) -> int:
        if self is TierLabel.EXCLUDED_MID:
            raise ValueError("mid-band households have no class index")
        return 0 if self is TierLabel.LOW else 1


def assign_label(kwh: float) -> TierLabel:
    """Low at or below 30 kWh/month, High at or above 60, excluded in between."""
    if not math.isfinite(kwh):
        raise ValueError(f"kWh must be finite, got {kwh}")
    if kwh <= LOW_MAX_KWH:
        return TierLabel.LOW
    if kwh >= HIGH_MIN_KWH:
        return TierLabel.HIGH
    return TierLabel.EXCLUDED_MID


def binary_label(kwh: float, thres: float = LOW_MAX_KWH) -> TierLabel:
    """Contiguous convention: Low iff ``kwh <= thres`` else High."""
    return TierLabel.LOW if kwh <= thres else TierLabel.HIGH


@dataclass(frozen=True)
class BillingRecord:
    customer_id: str
    building_id: str
    location: tuple[float, float]
    connection_month: int
    bills: tuple[tuple[int, float], ...] = field(default_factory=tuple)

    def __post_init__(self):
        months = [m for m, _ in self.bills]
        if any(b <= a for a, b in zip(months, months[1:])):
            raise RecordError(f"{self.customer_id}: bill months must be strictly increasing")
        for m, kwh in self.bills:
            if not math.isfinite(kwh) or kwh < 0:
                raise RecordError(f"{self.customer_id}: invalid kWh {kwh} in {format_month(m)}")


@dataclass(frozen=True)
class StableConsumption:
    building_id: str
    mean_kwh_per_month: float
    n_months_used: int


def compute_stable_consumption(record: BillingRecord) -> StableConsumption:
    """Average all bills dated at least 12 months after connection."""
    cutoff = record.connection_month + STABLE_AFTER_MONTHS
    kwh = [k for m, k in record.bills if m >= cutoff]
    if not kwh:
        raise NoStableBills(f"{record.customer_id}: no bills on or after {format_month(cutoff)}")
    return StableConsumption(record.building_id, float(np.mean(kwh)), len(kwh))
