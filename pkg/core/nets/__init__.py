"""
Structure networks.

FixedStructureNet (FSeSim) and LearnedStructureNet (LSeSim) share one
interface so the harness can evaluate either.
"""

from .base import BaseStructureNet
from .fixed import FixedStructureNet
from .learned import LearnedStructureNet


class NetFactory:
    """
    Factory class for creating structure networks by name.
    """

    _nets = {
        'fsesim': FixedStructureNet,
        'lsesim': LearnedStructureNet,
    }

    @classmethod
    def create(cls, kind, weights, **kwargs):
        """
        Create a network.

        Args:
            kind: "fsesim" or "lsesim" (case-insensitive)
            weights: Frozen extractor weights
            **kwargs: Passed to the network, e.g. selection=...

        Raises:
            ValueError: If the kind is not registered
        """
        net_class = cls._nets.get(str(kind).lower())

        if net_class is None:
            raise ValueError(f"No structure network available for kind: {kind}")

        return net_class(weights, **kwargs)

    @classmethod
    def register_net(cls, kind, net_class):
        if not issubclass(net_class, BaseStructureNet):
            raise TypeError("Network class must inherit from BaseStructureNet")

        cls._nets[kind.lower()] = net_class

    @classmethod
    def get_supported_kinds(cls):
        return list(cls._nets.keys())


__all__ = ['BaseStructureNet', 'FixedStructureNet', 'LearnedStructureNet', 'NetFactory']
