"""
LSeSim: structure-preserving augmentation, contrastive pairs, InfoNCE and
training of the selection layers.
"""

from .augment import AugmentParams, AugmentSpec, apply_params, augment, draw_params
from .batch import EXTERNAL, INTERNAL, ContrastBatch, batch_backward, batch_from_features, build_batch
from .infonce import InfoNCEGrads, cosine_sim, infonce, infonce_maps, similarity_logits
from .train import TrainingLog, retrieval_rate, train_structure_net

__all__ = [
    'AugmentSpec',
    'AugmentParams',
    'augment',
    'apply_params',
    'draw_params',
    'ContrastBatch',
    'INTERNAL',
    'EXTERNAL',
    'build_batch',
    'batch_from_features',
    'batch_backward',
    'InfoNCEGrads',
    'cosine_sim',
    'similarity_logits',
    'infonce',
    'infonce_maps',
    'TrainingLog',
    'retrieval_rate',
    'train_structure_net',
]
