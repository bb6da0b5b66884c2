"""Data ingestion and sample construction."""
from .dataset import (
    Sample,
    SampleSet,
    SplitSet,
    Standardizer,
    augment,
    build_samples,
    segmentation_windows,
    fit_image_stats,
    fit_standardizer,
    labels_of,
    nested_indices,
    nested_subsets,
    normalize,
    stack_patches,
    stratified_split,
)
from .patches import ImageIndex, ImagePatch, Raster, extract_patch, load_raster, match_pre_electrification_patch
from .records import (
    BillingRecord,
    StableConsumption,
    TierLabel,
    assign_label,
    binary_label,
    compute_stable_consumption,
)
from .tables import CensusTable, CellGrid, ViirsTable, attach_census, attach_nightlight
