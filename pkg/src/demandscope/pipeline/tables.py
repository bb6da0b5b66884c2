"""Ward census and gridded nightlight tables."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from types import MappingProxyType
from typing import Mapping

import numpy as np

from ..errors import CensusGroupWarning, MissingCell, UnknownWard, ValidationError

# Census indicator groups, in column order. Each group's fractions partition the ward's households.
CENSUS_GROUPS: dict[str, tuple[str, ...]] = {
    "water": ("water_surface", "water_improved", "water_unimproved"),
    "sanitation": ("sanitation_improved", "sanitation_unimproved"),
    "lightfuel": ("lightfuel_finished", "lightfuel_rudimentary"),
    "floor": ("floor_finished", "floor_rudimentary"),
    "cookfuel": ("cookfuel_finished", "cookfuel_rudimentary"),
    "wall": ("wall_finished", "wall_rudimentary", "wall_natural"),
    "roof": ("roof_finished", "roof_rudimentary", "roof_natural"),
}
CENSUS_INDICATORS: tuple[str, ...] = tuple(n for g in CENSUS_GROUPS.values() for n in g)
assert len(CENSUS_INDICATORS) == 17

VIIRS_FIRST_YEAR = 2012
VIIRS_LAST_YEAR = 2015

GROUP_SUM_RANGE = (0.98, 1.02)


def census_group_columns(group: str) -> list[int]:
    names = CENSUS_GROUPS[group]
    return [CENSUS_INDICATORS.index(n) for n in names]


@dataclass(frozen=True)
class CensusTable:
    """Ward id to 17-vector of household fractions."""

    wards: Mapping[str, np.ndarray]

    @classmethod
    def from_rows(cls, rows: Mapping[str, Mapping[str, float]]) -> "CensusTable":
        wards = {}
        for ward, values in rows.items():
            missing = [n for n in CENSUS_INDICATORS if n not in values]
            if missing:
                raise ValidationError(f"ward {ward}: missing census indicators {missing}")
            vec = np.array([values[n] for n in CENSUS_INDICATORS], dtype=np.float64)
            vec.setflags(write=False)
            if np.any((vec < 0) | (vec > 1)):
                raise ValidationError(f"ward {ward}: census fractions must lie in [0, 1]")
            wards[ward] = vec
        table = cls(MappingProxyType(wards))
        table.check_groups()
        return table

    def check_groups(self) -> list[tuple[str, str, float]]:
        """Warn about (and return) ward groups whose fractions do not sum to about one."""
        bad = []
        lo, hi = GROUP_SUM_RANGE
        for ward, vec in self.wards.items():
            for group in CENSUS_GROUPS:
                s = float(vec[census_group_columns(group)].sum())
                if not lo <= s <= hi:
                    bad.append((ward, group, s))
        for ward, group, s in bad:
            warnings.warn(f"ward {ward}: census group {group} sums to {s:.3f}", CensusGroupWarning)
        return bad


def attach_census(ward_id: str, table: CensusTable) -> np.ndarray:
    try:
        vec = table.wards[ward_id]
    except KeyError:
        raise UnknownWard(f"ward {ward_id!r} not in census table") from None
    if vec.shape != (17,):
        raise ValidationError(f"ward {ward_id}: census vector has length {vec.shape[0]}, expected 17")
    return vec.copy()


@dataclass(frozen=True)
class CellGrid:
    """Regular lon/lat grid; cell ids are ``row * n_cols + col`` counted from the north-west corner."""

    origin_lon: float
    origin_lat: float
    cell_deg: float
    n_cols: int
    n_rows: int

    def cell_of(self, lon: float, lat: float) -> int:
        col = math.floor((lon - self.origin_lon) / self.cell_deg)
        row = math.floor((self.origin_lat - lat) / self.cell_deg)
        if not (0 <= col < self.n_cols and 0 <= row < self.n_rows):
            raise MissingCell(f"({lon}, {lat}) lies outside the nightlight grid")
        return row * self.n_cols + col

    def to_dict(self) -> dict:
        return {
            "origin_lon": self.origin_lon,
            "origin_lat": self.origin_lat,
            "cell_deg": self.cell_deg,
            "n_cols": self.n_cols,
            "n_rows": self.n_rows,
        }


@dataclass(frozen=True)
class ViirsTable:
    grid: CellGrid
    radiance: Mapping[tuple[int, int], float]  # (cell_id, year) -> mean radiance


def nightlight_year(connection_year: int) -> int:
    """Year before electrification, clamped to the first composite year."""
    return max(connection_year - 1, VIIRS_FIRST_YEAR)


def attach_nightlight(lon: float, lat: float, connection_year: int, table: ViirsTable) -> float:
    cell = table.grid.cell_of(lon, lat)
    year = min(nightlight_year(connection_year), VIIRS_LAST_YEAR)
    try:
        return float(table.radiance[(cell, year)])
    except KeyError:
        raise MissingCell(f"no radiance for cell {cell} in {year}") from None
