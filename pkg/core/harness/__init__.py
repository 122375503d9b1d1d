"""
Desk-scale applications of the structure losses.

Error maps, self-similarity heatmaps, stylization, the synthetic corpus,
the Adam optimizer and the gradient-check suite.
"""

from .optim import OptimizerConfig, OptState, adam_step
from .synth import SynthCorpus, SynthSpec, high_frequency_energy, synth_dataset
from .error_map import ErrorGrid, baseline_error_map, error_map, pair_auc, separation_report
from .heatmap import SelfSimHeatmap, colorize, colormap_lut, selfsim_heatmap
from .stylize import StylizeResult, gram, gram_style, stylize
from .gradcheck import CHECKS, GradcheckReport, gradcheck_suite

__all__ = [
    'OptimizerConfig',
    'OptState',
    'adam_step',
    'SynthSpec',
    'SynthCorpus',
    'synth_dataset',
    'high_frequency_energy',
    'ErrorGrid',
    'error_map',
    'baseline_error_map',
    'pair_auc',
    'separation_report',
    'SelfSimHeatmap',
    'selfsim_heatmap',
    'colorize',
    'colormap_lut',
    'StylizeResult',
    'stylize',
    'gram',
    'gram_style',
    'CHECKS',
    'GradcheckReport',
    'gradcheck_suite',
]
