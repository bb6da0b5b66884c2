"""Deterministic synthetic world: rasters, footprints, billing, census, nightlights, survey.

Every building's consumption follows a known rule

    latent_kwh = a * area_m2 + b * roof_brightness + c * neighbours_within_50m + N(0, noise_sd)

clipped at zero, where ``roof_brightness`` is the mean roof intensity in [0, 1].
Bright metal roofs and dark thatch roofs are drawn with a ward-wealth dependent
probability, and wealthier households connect earlier (adoption bias).
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .imaging import bilinear_resize, rasterize_polygons, write_png
from .pipeline.records import TierLabel, assign_label, format_month
from .pipeline.tables import CENSUS_INDICATORS, VIIRS_FIRST_YEAR, VIIRS_LAST_YEAR, CellGrid

LEVELS = ("separable", "realistic", "adversarial")
BILLING_END_MONTH = 2018 * 12 + 11
SLOT_DEG = 0.0125
CELL_DEG = 15 / 3600
SLOTS_PER_ROW = 16
GRID_ORIGIN = (36.0, 1.0)
M_PER_DEG = 111_320.0


@dataclass(frozen=True)
class WorldSpec:
    seed: int = 0
    n_counties: int = 29
    constituencies_per_county: int = 2
    wards_per_county: int = 4
    buildings_per_ward: int = 30
    raster_px: int = 512
    meters_per_pixel: float = 0.5
    # roof palettes: mean RGB and per-building jitter
    metal_rgb: tuple[float, float, float] = (200.0, 204.0, 208.0)
    thatch_rgb: tuple[float, float, float] = (32.0, 24.0, 16.0)
    roof_sd: float = 7.0
    palette_overlap: float = 0.0
    # building sizes (log-normal, m^2)
    area_median_m2: float = 45.0
    area_sigma: float = 0.55
    # background texture
    background_rgb: tuple[float, float, float] = (96.0, 116.0, 70.0)
    texture_amp: float = 10.0
    pixel_noise: float = 4.0
    clutter: float = 1.0
    clutter_mimic: float = 0.0  # 0: natural soil/tree colours, 1: soil and shade take the roof palettes
    gain_sd: float = 0.0  # per-ward exposure gain
    proxy_noise: float = 1.0  # scales the logit noise of the non-roof census indicators
    # consumption rule
    a_area: float = 0.4
    b_brightness: float = 60.0
    c_density: float = 0.3
    noise_sd: float = 10.0
    # administrative wealth structure
    county_wealth_sd: float = 1.0
    ward_wealth_sd: float = 0.5
    metal_logit_slope: float = 1.6
    # electrification timeline
    adoption_bias: float = 1.5
    first_year: int = 2011
    n_years: int = 5
    multi_customer_frac: float = 0.03
    missing_bill_frac: float = 0.05
    bill_noise: float = 0.15
    # footprint label noise
    misalign_frac: float = 0.0
    misalign_px: int = 0
    # nightlights and survey
    viirs_signal: float = 0.3
    viirs_noise: float = 1.0
    survey_min: int = 10
    survey_max: int = 50
    biased_county: int | None = 0
    level: str = "custom"

    def __post_init__(self):
        if self.meters_per_pixel != 0.5:
            raise ValueError("synthetic worlds are rendered at 0.5 m/pixel")
        if min(self.n_counties, self.wards_per_county, self.buildings_per_ward, self.constituencies_per_county) < 1:
            raise ValueError("world dimensions must be positive")
        if self.area_sigma <= 0 or self.roof_sd < 0 or self.noise_sd < 0:
            raise ValueError("distribution scales must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "WorldSpec":
        d = dict(d)
        for k in ("metal_rgb", "thatch_rgb", "background_rgb"):
            if k in d:
                d[k] = tuple(d[k])
        return cls(**d)


def difficulty_knobs(spec: WorldSpec, level: str) -> WorldSpec:
    """Scale consumption noise, palette overlap, clutter and footprint misalignment together."""
    if level == "separable":
        return replace(spec, noise_sd=0.0, palette_overlap=0.0, misalign_frac=0.0, misalign_px=0,
                       clutter=0.0, texture_amp=6.0, level=level)
    if level == "realistic":
        return replace(spec, noise_sd=10.0, palette_overlap=0.5, misalign_frac=0.05, misalign_px=2,
                       clutter=1.0, texture_amp=10.0, level=level)
    if level == "adversarial":
        return replace(spec, noise_sd=18.0, palette_overlap=1.0, misalign_frac=0.2, misalign_px=5,
                       clutter=2.0, texture_amp=14.0, level=level)
    raise ValueError(f"level must be one of {LEVELS}, got {level!r}")


def world_spec(level: str = "realistic", **overrides) -> WorldSpec:
    return replace(difficulty_knobs(WorldSpec(), level), **overrides)


@dataclass
class Building:
    building_id: str
    county_id: str
    constituency_id: str
    ward_id: str
    rect: tuple[int, int, int, int]  # row0, col0, height, width in raster pixels
    center_px: tuple[int, int]  # (row, col) of the GPS pixel
    lon: float
    lat: float
    roof: str
    roof_rgb: tuple[float, float, float]
    area_m2: float
    brightness: float
    neighbors: int
    latent_kwh: float
    connection_month: int = 0
    label_shift: tuple[int, int] = (0, 0)

    @property
    def connection_year(self) -> int:
        return self.connection_month // 12

    @property
    def tier(self) -> TierLabel:
        return oracle_tier(self)


@dataclass
class WardRaster:
    ward_id: str
    county_id: str
    constituency_id: str
    wealth: float
    pixels: np.ndarray
    origin: tuple[float, float]
    pixel_size: tuple[float, float]
    acquisition_month: int
    meters_per_pixel: float = 0.5

    def pixel_to_lonlat(self, row: float, col: float) -> tuple[float, float]:
        return (self.origin[0] + col * self.pixel_size[0], self.origin[1] - row * self.pixel_size[1])


@dataclass
class World:
    spec: WorldSpec
    rasters: list[WardRaster]
    buildings: list[Building]
    billing: list[dict]
    census: dict[str, dict[str, float]]
    viirs: dict[tuple[int, int], float]
    grid: CellGrid
    survey: list[dict]
    extra: dict = field(default_factory=dict)

    def raster_of(self, ward_id: str) -> WardRaster:
        return self._by_ward[ward_id]

    def __post_init__(self):
        self._by_ward = {r.ward_id: r for r in self.rasters}

    def building_mask(self, b: Building, aligned: bool = True) -> np.ndarray:
        """Full-raster mask of one building (optionally with its label misalignment)."""
        r = self.raster_of(b.ward_id)
        m = np.zeros(r.pixels.shape[:2], dtype=np.uint8)
        r0, c0, h, w = b.rect
        if not aligned:
            r0 += b.label_shift[0]
            c0 += b.label_shift[1]
        m[max(r0, 0):max(r0 + h, 0), max(c0, 0):max(c0 + w, 0)] = 1
        return m

    def ward_mask(self, ward_id: str, labels: bool = False) -> np.ndarray:
        """All footprints in a ward; ``labels=True`` applies the label misalignment."""
        r = self.raster_of(ward_id)
        m = np.zeros(r.pixels.shape[:2], dtype=np.uint8)
        for b in self.buildings:
            if b.ward_id == ward_id:
                m |= self.building_mask(b, aligned=not labels)
        return m


def oracle_tier(building: Building) -> TierLabel:
    return assign_label(building.latent_kwh)


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def _palettes(spec: WorldSpec) -> dict[str, tuple[np.ndarray, float]]:
    metal = np.array(spec.metal_rgb)
    thatch = np.array(spec.thatch_rgb)
    # overlap widens both palettes around fixed means
    sd = spec.roof_sd * (1.0 + 3.0 * spec.palette_overlap)
    return {"metal": (metal, sd), "thatch": (thatch, sd)}


def _texture(rng: np.random.Generator, size: int, amp: float) -> np.ndarray:
    coarse = rng.standard_normal((size // 32 + 2, size // 32 + 2, 1))
    fine = rng.standard_normal((size // 8 + 2, size // 8 + 2, 1))
    tint = np.array([1.0, 0.8, 0.6])
    tex = bilinear_resize(coarse, size, size) + 0.5 * bilinear_resize(fine, size, size)
    return amp * tex * tint


def _place_rects(rng, spec: WorldSpec, areas_px: np.ndarray, margin: int) -> list[tuple[int, int, int, int]]:
    size = spec.raster_px
    n_clusters = 1 + rng.poisson(1.5)
    centers = rng.uniform(margin + 32, size - margin - 32, size=(n_clusters, 2))
    spreads = rng.uniform(40, 110, size=n_clusters)
    occupied = np.zeros((size, size), dtype=bool)
    rects = []
    gap = 3
    for area in areas_px:
        aspect = rng.uniform(1.0, 2.0)
        h = max(4, int(round(math.sqrt(area / aspect))))
        w = max(4, int(round(area / h)))
        if rng.random() < 0.5:
            h, w = w, h
        for attempt in range(200):
            k = rng.integers(n_clusters)
            spread = spreads[k] * (1.0 + attempt / 40)
            cy, cx = centers[k] + rng.normal(0, spread, size=2)
            r0 = int(round(cy)) - h // 2
            c0 = int(round(cx)) - w // 2
            # the GPS pixel must leave a half-patch margin
            if not (margin <= r0 + h // 2 < size - margin and margin <= c0 + w // 2 < size - margin):
                continue
            if r0 - gap < 0 or c0 - gap < 0 or r0 + h + gap > size or c0 + w + gap > size:
                continue
            if occupied[r0 - gap:r0 + h + gap, c0 - gap:c0 + w + gap].any():
                continue
            occupied[r0:r0 + h, c0:c0 + w] = True
            rects.append((r0, c0, h, w))
            break
    return rects


def _render_ward(rng, spec: WorldSpec, rects, roofs, colors) -> np.ndarray:
    size = spec.raster_px
    img = np.empty((size, size, 3))
    img[:] = np.array(spec.background_rgb)
    img += _texture(rng, size, spec.texture_amp)
    n_trees = rng.poisson(12 * spec.clutter)
    n_patches = rng.poisson(4 * spec.clutter)
    yy, xx = np.mgrid[0:size, 0:size]
    mix = spec.clutter_mimic
    soil = (1 - mix) * np.array([150.0, 128.0, 96.0]) + mix * np.array(spec.metal_rgb)
    shade = (1 - mix) * np.array([44.0, 70.0, 36.0]) + mix * np.array(spec.thatch_rgb)
    for _ in range(n_patches):  # bare soil
        cy, cx = rng.uniform(0, size, 2)
        ry, rx = rng.uniform(6, 18, 2)
        sel = ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1
        img[sel] = soil + rng.normal(0, 6, 3)
    for _ in range(n_trees):
        cy, cx = rng.uniform(0, size, 2)
        rad = rng.uniform(3, 7)
        sel = (yy - cy) ** 2 + (xx - cx) ** 2 <= rad * rad
        img[sel] = shade + rng.normal(0, 4, 3)
    for (r0, c0, h, w) in rects:  # shadows to the south-east
        img[r0 + 2:r0 + h + 2, c0 + 2:c0 + w + 2] *= 0.6
    for (r0, c0, h, w), roof, rgb in zip(rects, roofs, colors):
        patch = np.empty((h, w, 3))
        patch[:] = rgb
        if roof == "metal":  # corrugation along the long axis
            ridges = (np.arange(w if w >= h else h) % 4 < 2) * 6.0 - 3.0
            patch += ridges[None, :, None] if w >= h else ridges[:, None, None]
        img[r0:r0 + h, c0:c0 + w] = patch
    if spec.gain_sd > 0:
        img *= math.exp(rng.normal(0, spec.gain_sd))
    img += rng.normal(0, spec.pixel_noise, img.shape)
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def _slot_origin(g: int, spec: WorldSpec) -> tuple[tuple[float, float], tuple[float, float]]:
    col, row = g % SLOTS_PER_ROW, g // SLOTS_PER_ROW
    lon0 = GRID_ORIGIN[0] + col * SLOT_DEG + 0.001
    lat0 = GRID_ORIGIN[1] - row * SLOT_DEG - 0.001
    dlat = spec.meters_per_pixel / M_PER_DEG
    dlon = spec.meters_per_pixel / (M_PER_DEG * math.cos(math.radians(GRID_ORIGIN[1])))
    return (lon0, lat0), (dlon, dlat)


def generate_world(spec: WorldSpec) -> World:
    """Build a full world in memory. Same spec, same world, bit for bit."""
    master = np.random.SeedSequence([spec.seed, 7919])
    world_rng = np.random.default_rng(master.spawn(1)[0])
    n_wards = spec.n_counties * spec.wards_per_county
    ward_seqs = np.random.SeedSequence([spec.seed, 104729]).spawn(n_wards)

    county_wealth = world_rng.normal(0.0, spec.county_wealth_sd, spec.n_counties)
    if spec.biased_county is not None and spec.biased_county < spec.n_counties:
        county_wealth[spec.biased_county] = 1.5 * spec.county_wealth_sd
    palettes = _palettes(spec)
    margin = 64
    m2_per_px = spec.meters_per_pixel**2

    rasters: list[WardRaster] = []
    buildings: list[Building] = []
    g = 0
    for c in range(spec.n_counties):
        county_id = f"C{c:02d}"
        for w in range(spec.wards_per_county):
            ward_rng = np.random.default_rng(ward_seqs[g])
            ward_id = f"{county_id}W{w:02d}"
            constituency_id = f"{county_id}K{w % spec.constituencies_per_county}"
            wealth = county_wealth[c] + ward_rng.normal(0.0, spec.ward_wealth_sd)
            p_metal = _sigmoid(spec.metal_logit_slope * wealth)
            area_scale = math.exp(0.15 * wealth)
            areas_m2 = spec.area_median_m2 * area_scale * np.exp(ward_rng.normal(0, spec.area_sigma, spec.buildings_per_ward))
            areas_m2 = np.clip(areas_m2, 12.0, 300.0)
            rects = _place_rects(ward_rng, spec, areas_m2 / m2_per_px, margin)
            roofs = ["metal" if ward_rng.random() < p_metal else "thatch" for _ in rects]
            colors = []
            for roof in roofs:
                mean, sd = palettes[roof]
                colors.append(tuple(np.clip(mean + ward_rng.normal(0, sd) + ward_rng.normal(0, sd / 3, 3), 0, 255)))
            pixels = _render_ward(ward_rng, spec, rects, roofs, colors)
            origin, psize = _slot_origin(g, spec)
            acq = ward_rng.integers(2009 * 12, 2012 * 12 + 6)
            raster = WardRaster(ward_id, county_id, constituency_id, float(wealth), pixels, origin, psize, int(acq))
            rasters.append(raster)
            centers = np.array([(r0 + h / 2, c0 + w_ / 2) for r0, c0, h, w_ in rects]) if rects else np.zeros((0, 2))
            for i, ((r0, c0, h, w_), roof, rgb) in enumerate(zip(rects, roofs, colors)):
                d = np.hypot(*(centers - centers[i]).T) * spec.meters_per_pixel
                neighbors = int(np.sum(d <= 50.0)) - 1
                area = h * w_ * m2_per_px
                brightness = float(np.mean(rgb)) / 255.0
                latent = spec.a_area * area + spec.b_brightness * brightness + spec.c_density * neighbors
                latent += ward_rng.normal(0, spec.noise_sd) if spec.noise_sd > 0 else 0.0
                row, col = r0 + h // 2, c0 + w_ // 2
                lon, lat = raster.pixel_to_lonlat(row + 0.5, col + 0.5)
                shift = (0, 0)
                if spec.misalign_px and ward_rng.random() < spec.misalign_frac:
                    ang = ward_rng.uniform(0, 2 * math.pi)
                    shift = (int(round(spec.misalign_px * math.sin(ang))), int(round(spec.misalign_px * math.cos(ang))))
                buildings.append(Building(
                    f"B{g:04d}{i:03d}", county_id, constituency_id, ward_id, (r0, c0, h, w_), (row, col),
                    lon, lat, roof, tuple(float(v) for v in rgb), float(area), brightness, neighbors,
                    float(max(latent, 0.0)), label_shift=shift,
                ))
            g += 1

    _assign_connections(world_rng, spec, buildings)
    billing = _billing_rows(world_rng, spec, buildings)
    census = _census(world_rng, spec, rasters, buildings)
    grid, viirs = _nightlights(world_rng, spec, rasters, buildings)
    survey = _survey(world_rng, spec, buildings)
    return World(spec, rasters, buildings, billing, census, viirs, grid, survey)


def _assign_connections(rng, spec: WorldSpec, buildings: list[Building]) -> None:
    latent = np.array([b.latent_kwh for b in buildings])
    z = (latent - latent.mean()) / (latent.std() + 1e-12)
    score = spec.adoption_bias * z + rng.standard_normal(len(buildings))
    order = np.argsort(-score, kind="stable")
    years = np.empty(len(buildings), dtype=int)
    years[order] = spec.first_year + (np.arange(len(buildings)) * spec.n_years) // max(len(buildings), 1)
    months = rng.integers(0, 12, len(buildings))
    for b, y, m in zip(buildings, years, months):
        b.connection_month = int(y) * 12 + int(m)


def _billing_rows(rng, spec: WorldSpec, buildings: list[Building]) -> list[dict]:
    rows = []
    for b in buildings:
        accounts = [f"K{b.building_id[1:]}"]
        if rng.random() < spec.multi_customer_frac:
            accounts.append(f"K{b.building_id[1:]}X")
        for acct in accounts:
            for month in range(b.connection_month, BILLING_END_MONTH + 1):
                u = rng.uniform(-spec.bill_noise, spec.bill_noise)
                if rng.random() < spec.missing_bill_frac:
                    continue
                rows.append({
                    "customer_id": acct,
                    "building_id": b.building_id,
                    "lon": repr(b.lon),
                    "lat": repr(b.lat),
                    "connection_month": format_month(b.connection_month),
                    "bill_month": format_month(month),
                    "kwh": f"{max(b.latent_kwh * (1 + u), 0.0):.3f}",
                })
    return rows


def _split3(rng, good: float) -> tuple[float, float]:
    u = rng.uniform(0.3, 0.7)
    return (1 - good) * u, (1 - good) * (1 - u)


def _census(rng, spec: WorldSpec, rasters, buildings) -> dict[str, dict[str, float]]:
    by_ward: dict[str, list[Building]] = {}
    for b in buildings:
        by_ward.setdefault(b.ward_id, []).append(b)
    out = {}
    for r in rasters:
        members = by_ward.get(r.ward_id, [])
        metal = sum(b.roof == "metal" for b in members) / max(len(members), 1)

        def noisy(slope, noise):
            return float(_sigmoid(slope * r.wealth + rng.normal(0, noise * spec.proxy_noise)))

        v = {}
        improved = noisy(1.0, 1.0)
        v["water_surface"], v["water_unimproved"] = _split3(rng, improved)
        v["water_improved"] = improved
        v["sanitation_improved"] = noisy(1.0, 1.0)
        v["sanitation_unimproved"] = 1 - v["sanitation_improved"]
        v["lightfuel_finished"] = noisy(1.0, 1.0)
        v["lightfuel_rudimentary"] = 1 - v["lightfuel_finished"]
        v["floor_finished"] = noisy(0.8, 1.2)
        v["floor_rudimentary"] = 1 - v["floor_finished"]
        v["cookfuel_finished"] = noisy(0.6, 1.2)
        v["cookfuel_rudimentary"] = 1 - v["cookfuel_finished"]
        v["wall_finished"] = noisy(1.0, 1.0)
        v["wall_rudimentary"], v["wall_natural"] = _split3(rng, v["wall_finished"])
        v["roof_finished"] = metal
        v["roof_rudimentary"], v["roof_natural"] = _split3(rng, metal)
        out[r.ward_id] = {k: round(v[k], 6) for k in CENSUS_INDICATORS}
    return out


def _nightlights(rng, spec: WorldSpec, rasters, buildings):
    n_slots = len(rasters)
    n_rows = 3 * (-(-n_slots // SLOTS_PER_ROW))
    grid = CellGrid(GRID_ORIGIN[0], GRID_ORIGIN[1], CELL_DEG, 3 * SLOTS_PER_ROW, n_rows)
    by_ward: dict[str, list[Building]] = {}
    for b in buildings:
        by_ward.setdefault(b.ward_id, []).append(b)
    viirs: dict[tuple[int, int], float] = {}
    for r in rasters:
        members = by_ward.get(r.ward_id, [])
        cell = grid.cell_of(*r.pixel_to_lonlat(r.pixels.shape[0] / 2, r.pixels.shape[1] / 2))
        for year in range(VIIRS_FIRST_YEAR, VIIRS_LAST_YEAR + 1):
            elec = sum(b.connection_year < year for b in members) / max(len(members), 1)
            val = 1.0 + spec.viirs_signal * elec + rng.normal(0, spec.viirs_noise)
            viirs[(cell, year)] = round(max(val, 0.0), 4)
    return grid, viirs


def _survey(rng, spec: WorldSpec, buildings) -> list[dict]:
    by_county: dict[str, list[Building]] = {}
    for b in buildings:
        by_county.setdefault(b.county_id, []).append(b)
    rows = []
    for ci, county in enumerate(sorted(by_county)):
        members = by_county[county]
        if spec.biased_county is not None and ci == spec.biased_county:
            # over-sample the county's lowest consumers (an informal-settlement analog)
            cut = np.quantile([b.latent_kwh for b in members], 0.2)
            pool = [b for b in members if b.latent_kwh <= cut]
            n = spec.survey_max
        else:
            pool = members
            n = min(len(pool), int(rng.integers(spec.survey_min, spec.survey_max + 1)))
        picks = rng.choice(len(pool), size=n, replace=n > len(pool))
        for j, p in enumerate(sorted(picks)):
            b = pool[p]
            rows.append({
                "county_id": county,
                "household_id": f"{county}H{j:03d}",
                "reported_kwh": f"{b.latent_kwh * math.exp(rng.normal(0, 0.2)):.2f}",
                "sample_weight": f"{rng.uniform(0.5, 2.0):.3f}",
            })
    return rows


# ---------------------------------------------------------------- file output

def write_world(world: World, out_dir) -> Path:
    """Write the world in the on-disk formats read by :mod:`demandscope.pipeline.loaders`."""
    out = Path(out_dir)
    (out / "rasters").mkdir(parents=True, exist_ok=True)
    spec = world.spec
    for r in world.rasters:
        write_png(out / "rasters" / f"{r.ward_id}.png", r.pixels)
        sidecar = {
            "acquisition_month": format_month(r.acquisition_month),
            "meters_per_pixel": r.meters_per_pixel,
            "origin": list(r.origin),
            "pixel_size_deg": list(r.pixel_size),
        }
        (out / "rasters" / f"{r.ward_id}.json").write_text(json.dumps(sidecar, indent=1, sort_keys=True))

    features = []
    for b in world.buildings:
        r = world.raster_of(b.ward_id)
        r0, c0, h, w = b.rect
        r0 += b.label_shift[0]
        c0 += b.label_shift[1]
        ring = [r.pixel_to_lonlat(y, x) for y, x in ((r0, c0), (r0, c0 + w), (r0 + h, c0 + w), (r0 + h, c0), (r0, c0))]
        features.append({
            "type": "Feature",
            "properties": {"building_id": b.building_id},
            "geometry": {"type": "Polygon", "coordinates": [[list(p) for p in ring]]},
        })
    _dump_json(out / "footprints.geojson", {"type": "FeatureCollection", "features": features})

    wards = []
    for r in world.rasters:
        hgt, wid = r.pixels.shape[:2]
        ring = [r.pixel_to_lonlat(y, x) for y, x in ((0, 0), (0, wid), (hgt, wid), (hgt, 0), (0, 0))]
        wards.append({
            "type": "Feature",
            "properties": {"ward_id": r.ward_id, "constituency_id": r.constituency_id, "county_id": r.county_id},
            "geometry": {"type": "Polygon", "coordinates": [[list(p) for p in ring]]},
        })
    _dump_json(out / "wards.geojson", {"type": "FeatureCollection", "features": wards})

    _write_csv(out / "billing.csv", ["customer_id", "building_id", "lon", "lat", "connection_month", "bill_month", "kwh"], world.billing)
    _write_csv(out / "census.csv", ["ward_id", "indicator_name", "fraction"], [
        {"ward_id": w, "indicator_name": k, "fraction": repr(v)} for w, vals in world.census.items() for k, v in vals.items()
    ])
    _write_csv(out / "viirs.csv", ["cell_id", "year", "radiance"], [
        {"cell_id": c, "year": y, "radiance": repr(v)} for (c, y), v in sorted(world.viirs.items())
    ])
    _dump_json(out / "viirs_grid.json", world.grid.to_dict())
    _write_csv(out / "survey.csv", ["county_id", "household_id", "reported_kwh", "sample_weight"], world.survey)
    _write_csv(out / "ground_truth.csv", GROUND_TRUTH_FIELDS, [ground_truth_row(b) for b in world.buildings])
    _dump_json(out / "world.json", spec.to_dict())
    return out


GROUND_TRUTH_FIELDS = [
    "building_id", "county_id", "constituency_id", "ward_id", "lon", "lat", "roof", "area_m2",
    "brightness", "neighbors", "latent_kwh", "connection_month", "tier", "rect_row", "rect_col",
    "rect_h", "rect_w",
]


def ground_truth_row(b: Building) -> dict:
    return {
        "building_id": b.building_id, "county_id": b.county_id, "constituency_id": b.constituency_id,
        "ward_id": b.ward_id, "lon": repr(b.lon), "lat": repr(b.lat), "roof": b.roof,
        "area_m2": f"{b.area_m2:.2f}", "brightness": f"{b.brightness:.6f}", "neighbors": b.neighbors,
        "latent_kwh": f"{b.latent_kwh:.4f}", "connection_month": format_month(b.connection_month),
        "tier": b.tier.value, "rect_row": b.rect[0], "rect_col": b.rect[1], "rect_h": b.rect[2], "rect_w": b.rect[3],
    }


def _dump_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, separators=(",", ":")))


def _write_csv(path: Path, fields: list[str], rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        wr.writeheader()
        wr.writerows(rows)


# ------------------------------------------------------------ segmentation data

def segmentation_patches(
    world: World,
    n: int,
    seed: int,
    patch_size: int = 128,
    centered: bool = False,
    labels: bool = True,
    min_cover: float = 0.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Random ``(patches, masks)`` cut from ward rasters.

    ``labels=True`` uses the (possibly misaligned) footprint labels as targets;
    ``centered=True`` centres each patch on a building. Patches whose mask covers
    less than ``min_cover`` of the pixels are redrawn (up to 20 times).
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, 31337]))
    masks_by_ward = {r.ward_id: world.ward_mask(r.ward_id, labels=labels) for r in world.rasters}
    half = patch_size // 2
    xs = np.empty((n, patch_size, patch_size, 3), dtype=np.uint8)
    ys = np.empty((n, patch_size, patch_size), dtype=np.uint8)
    for i in range(n):
        for _ in range(20):
            if centered:
                b = world.buildings[rng.integers(len(world.buildings))]
                r = world.raster_of(b.ward_id)
                cy, cx = b.center_px
            else:
                r = world.rasters[rng.integers(len(world.rasters))]
                size = r.pixels.shape[0]
                cy, cx = rng.integers(half, size - half + 1, 2)
            m = masks_by_ward[r.ward_id][cy - half:cy + half, cx - half:cx + half]
            if m.mean() >= min_cover:
                break
        xs[i] = r.pixels[cy - half:cy + half, cx - half:cx + half]
        ys[i] = m
    return xs, ys


def rasterize_footprints(geojson: dict, raster: WardRaster) -> np.ndarray:
    """Pixel-centre-in-polygon mask of every footprint polygon over a raster."""
    polys = []
    lon0, lat0 = raster.origin
    dlon, dlat = raster.pixel_size
    for feat in geojson["features"]:
        ring = np.asarray(feat["geometry"]["coordinates"][0], dtype=np.float64)
        px = np.column_stack([(ring[:, 0] - lon0) / dlon, (lat0 - ring[:, 1]) / dlat])
        polys.append(px)
    h, w = raster.pixels.shape[:2]
    return rasterize_polygons(polys, h, w)
