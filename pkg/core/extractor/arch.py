"""
Architecture descriptions for the feature extractor.

An ArchSpec is an ordered list of layers (conv, relu, pool) plus a mapping
from tap names to the index of the relu layer whose output is exposed.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from ..errors import ConfigError

LAYER_KINDS = ('conv', 'relu', 'pool')


@dataclass(frozen=True)
class LayerSpec:
    """
    One layer of the trunk.

    conv layers carry their channel counts, kernel side, stride and padding;
    relu and pool layers carry nothing else.
    """

    kind: str
    in_ch: int = 0
    out_ch: int = 0
    kernel: int = 3
    stride: int = 1
    padding: str = 'zero'

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ConfigError(f"layer kind must be one of {LAYER_KINDS}, got {self.kind!r}")

    def to_dict(self) -> Dict:
        if self.kind != 'conv':
            return {'kind': self.kind}
        return {
            'kind': 'conv',
            'in_ch': self.in_ch,
            'out_ch': self.out_ch,
            'kernel': self.kernel,
            'stride': self.stride,
            'padding': self.padding,
        }


def conv(in_ch: int, out_ch: int, kernel: int = 3, stride: int = 1, padding: str = 'zero') -> LayerSpec:
    return LayerSpec('conv', in_ch, out_ch, kernel, stride, padding)


RELU = LayerSpec('relu')
POOL = LayerSpec('pool')


@dataclass
class ArchSpec:
    layers: Tuple[LayerSpec, ...]
    taps: Dict[str, int] = field(default_factory=dict)
    in_channels: int = 3

    def __post_init__(self):
        self.layers = tuple(self.layers)
        if not self.taps:
            raise ConfigError("an architecture needs at least one tap")

        channels = self.in_channels
        for index, layer in enumerate(self.layers):
            if layer.kind == 'conv':
                if layer.in_ch != channels:
                    raise ConfigError(
                        f"layer {index} expects {layer.in_ch} input channels, previous layer gives {channels}"
                    )
                channels = layer.out_ch

        for name, index in self.taps.items():
            if not 0 <= index < len(self.layers) or self.layers[index].kind != 'relu':
                raise ConfigError(f"tap {name!r} must point at a relu layer, got index {index}")

    @property
    def conv_indices(self) -> List[int]:
        return [i for i, layer in enumerate(self.layers) if layer.kind == 'conv']

    def stride_at(self, index: int) -> int:
        """Cumulative stride of the output of layer `index` relative to the image."""
        stride = 1
        for layer in self.layers[:index + 1]:
            if layer.kind == 'pool':
                stride *= 2
            elif layer.kind == 'conv':
                stride *= layer.stride
        return stride

    def channels_at(self, index: int) -> int:
        channels = self.in_channels
        for layer in self.layers[:index + 1]:
            if layer.kind == 'conv':
                channels = layer.out_ch
        return channels

    @property
    def tap_strides(self) -> Dict[str, int]:
        return {name: self.stride_at(index) for name, index in self.taps.items()}

    @property
    def tap_channels(self) -> Dict[str, int]:
        return {name: self.channels_at(index) for name, index in self.taps.items()}

    @property
    def depth(self) -> int:
        """Number of layers that must run to produce every tap."""
        return max(self.taps.values()) + 1

    def to_dict(self) -> Dict:
        return {
            'in_channels': self.in_channels,
            'layers': [layer.to_dict() for layer in self.layers],
            'taps': dict(self.taps),
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'ArchSpec':
        unknown = set(data) - {'in_channels', 'layers', 'taps'}
        if unknown:
            raise ConfigError(f"unknown architecture keys: {sorted(unknown)}")
        layers = []
        for entry in data['layers']:
            entry = dict(entry)
            kind = entry.pop('kind')
            layers.append(LayerSpec(kind, **entry) if kind == 'conv' else LayerSpec(kind))
        taps = {str(name): int(index) for name, index in data['taps'].items()}
        return cls(tuple(layers), taps, int(data.get('in_channels', 3)))


def default_arch(padding: str = 'zero', widths: Optional[Tuple[int, int, int, int]] = None) -> ArchSpec:
    """
    Desk-scale VGG-style trunk with taps "tapA" (stride 4) and "tapB" (stride 8).

    Layout: conv 3->16, relu, pool, conv 16->32, relu, pool, conv 32->64,
    relu [tapA], pool, conv 64->128, relu [tapB].
    """
    w1, w2, w3, w4 = widths or (16, 32, 64, 128)
    layers = (
        conv(3, w1, padding=padding), RELU, POOL,
        conv(w1, w2, padding=padding), RELU, POOL,
        conv(w2, w3, padding=padding), RELU,
        POOL,
        conv(w3, w4, padding=padding), RELU,
    )
    return ArchSpec(layers, {'tapA': 7, 'tapB': 10})


def vgg16_arch() -> ArchSpec:
    """VGG16 trunk up to relu4_1, tapped at relu3_1 (stride 4) and relu4_1 (stride 8)."""
    layers = (
        conv(3, 64), RELU, conv(64, 64), RELU, POOL,
        conv(64, 128), RELU, conv(128, 128), RELU, POOL,
        conv(128, 256), RELU, conv(256, 256), RELU, conv(256, 256), RELU, POOL,
        conv(256, 512), RELU,
    )
    return ArchSpec(layers, {'relu3_1': 11, 'relu4_1': 18})
