"""
FSeSim: maps computed straight from the frozen trunk.
"""

from ..extractor import extract
from .base import BaseStructureNet


class FixedStructureNet(BaseStructureNet):
    kind = 'fsesim'

    def features(self, image):
        return extract(image, self.weights)
