"""Network builders: encoder, segmentation decoder, classifier head, tabular MLP."""
from __future__ import annotations

from dataclasses import asdict, dataclass

from .errors import InvalidConfig
from .nn import (
    Conv2D,
    Dense,
    Dropout,
    GlobalMaxPool,
    MaxPool,
    NetworkSpec,
    ReLU,
    Sigmoid,
    Softmax,
    Upsample,
)

MLP_HIDDEN = (64, 32, 16)


@dataclass(frozen=True)
class EncoderConfig:
    stages: int = 5
    convs_per_stage: int = 4
    filters: int = 64
    in_channels: int = 3
    patch_size: int = 128

    def validate(self) -> None:
        if self.stages < 1 or self.convs_per_stage < 1 or self.filters < 1:
            raise InvalidConfig(f"stages, convs_per_stage and filters must be positive: {self}")
        if self.in_channels not in (3, 4):
            raise InvalidConfig(f"in_channels must be 3 (RGB) or 4 (RGB + point), got {self.in_channels}")
        if self.patch_size % (2**self.stages):
            raise InvalidConfig(f"patch size {self.patch_size} not divisible by 2^{self.stages}")

    @property
    def bottleneck(self) -> int:
        return self.patch_size // 2**self.stages

    def to_dict(self) -> dict:
        return asdict(self)


DEFAULT_ENCODER = EncoderConfig()
# Desk-scale encoder: one fewer stage keeps an 8x8 bottleneck for the decoder.
QUICK_ENCODER = EncoderConfig(stages=4, convs_per_stage=2, filters=16)


def build_encoder(config: EncoderConfig = DEFAULT_ENCODER) -> NetworkSpec:
    """Stages of ``convs_per_stage`` x (3x3 conv, ReLU), each closed by a 2x2 max-pool.

    Layer names are prefixed ``enc.`` so that segmentation and classification
    networks share weight keys.
    """
    config.validate()
    layers = []
    ch = config.in_channels
    for s in range(config.stages):
        for c in range(config.convs_per_stage):
            layers.append(Conv2D(f"enc.s{s}.conv{c}", ch, config.filters))
            layers.append(ReLU(f"enc.s{s}.relu{c}"))
            ch = config.filters
        layers.append(MaxPool(f"enc.s{s}.pool"))
    return NetworkSpec((config.patch_size, config.patch_size, config.in_channels), tuple(layers))


def build_segmenter(encoder: NetworkSpec) -> NetworkSpec:
    """Append a skip-free decoder: per stage (upsample x2, 3x3 conv, ReLU), then 1x1 conv and sigmoid."""
    n_stages = sum(isinstance(l, MaxPool) for l in encoder.layers)
    h, w, f = encoder.output_shape
    layers = []
    for s in range(n_stages):
        layers.append(Upsample(f"dec.s{s}.up"))
        layers.append(Conv2D(f"dec.s{s}.conv", f, f))
        layers.append(ReLU(f"dec.s{s}.relu"))
    layers.append(Conv2D("dec.out", f, 1, kernel=1))
    layers.append(Sigmoid("dec.sigmoid"))
    return encoder + NetworkSpec((h, w, f), tuple(layers))


def build_classifier_head(encoder: NetworkSpec, n_classes: int = 2, dropout: float = 0.25) -> NetworkSpec:
    """Global max-pool, dropout, dense, softmax on top of ``encoder``."""
    f = encoder.output_shape[-1]
    head = NetworkSpec(
        encoder.output_shape,
        (
            GlobalMaxPool("head.gmp"),
            Dropout("head.drop", dropout),
            Dense("head.dense", f, n_classes),
            Softmax("head.softmax"),
        ),
    )
    return encoder + head


def build_classifier(config: EncoderConfig = DEFAULT_ENCODER, dropout: float = 0.25) -> NetworkSpec:
    return build_classifier_head(build_encoder(config), dropout=dropout)


def build_mlp_trunk(in_dim: int, dropout: float = 0.25, prefix: str = "mlp") -> NetworkSpec:
    """Three ReLU dense layers of 64, 32, 16 units, each followed by dropout."""
    layers = []
    d = in_dim
    for i, units in enumerate(MLP_HIDDEN):
        layers += [
            Dense(f"{prefix}.dense{i}", d, units),
            ReLU(f"{prefix}.relu{i}"),
            Dropout(f"{prefix}.drop{i}", dropout),
        ]
        d = units
    return NetworkSpec((in_dim,), tuple(layers))


def build_mlp(in_dim: int, n_classes: int = 2, dropout: float = 0.25, prefix: str = "mlp") -> NetworkSpec:
    trunk = build_mlp_trunk(in_dim, dropout, prefix)
    out = NetworkSpec((MLP_HIDDEN[-1],), (Dense(f"{prefix}.out", MLP_HIDDEN[-1], n_classes), Softmax(f"{prefix}.softmax")))
    return trunk + out


def encoder_layer_names(spec: NetworkSpec) -> list[str]:
    return [l.name for l in spec.layers if l.name.startswith("enc.")]
