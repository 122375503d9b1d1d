"""
Command-line entry point.

    python src/main.py selfsim [IMAGE] [--query ROW COL]
    python src/main.py error-map [X Y]
    python src/main.py train-structure
    python src/main.py stylize [CONTENT STYLE]
    python src/main.py synth
    python src/main.py gradcheck

Every subcommand accepts --config PATH, --seed N and --out DIR, writes its
resolved configuration to DIR/config.json and exits with 0 on success, 1 on
usage or input errors and 2 when a gradient check fails. Commands that take
images fall back to the synthetic corpus when none are given.
"""

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent.parent))

import numpy as np

from core.config import RunConfig, load_run_config
from core.contrast import train_structure_net
from core.errors import SesimError
from core.extractor import default_arch, init_random, load_selection, load_weights, save_selection, vgg16_arch
from core.harness import (CHECKS, colorize, error_map, gradcheck_suite, selfsim_heatmap, stylize,
                          synth_dataset)
from core.harness.heatmap import min_max
from core.images import load_image, save_image
from core.kernels import dtype_for
from core.nets import NetFactory
from core.utils import setup_logging, write_csv

logger = logging.getLogger('sesim')

EXIT_OK, EXIT_USAGE, EXIT_CHECK_FAILED = 0, 1, 2


class CliParser(argparse.ArgumentParser):
    """ArgumentParser that reports usage errors with exit status 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_net(cfg: RunConfig):
    arch = vgg16_arch() if cfg.arch == 'vgg16' else default_arch(cfg.padding)
    if cfg.weights:
        weights = load_weights(cfg.weights, arch)
    else:
        weights = init_random(arch, cfg.weight_seed)

    kwargs = {}
    if cfg.net == 'lsesim':
        kwargs['seed'] = cfg.sesim.seed
        if cfg.selection:
            kwargs['selection'] = load_selection(cfg.selection)
    return NetFactory.create(cfg.net, weights, **kwargs)


def _images(paths, count, cfg: RunConfig, fallback):
    if paths:
        if len(paths) != count:
            raise SesimError(f"expected {count} image path(s), got {len(paths)}")
        return [load_image(p, cfg.precision) for p in paths]
    logger.info("[CLI] no images given, using the synthetic corpus")
    corpus = synth_dataset(cfg.synth)
    return [image.astype(dtype_for(cfg.precision)) for image in fallback(corpus)]


def run_selfsim(args, cfg, out):
    net = build_net(cfg)
    (image,) = _images(args.images, 1, cfg, lambda c: [c.images_a[0]])
    query = args.query or cfg.query or [image.shape[2] // 2, image.shape[3] // 2]
    heat = selfsim_heatmap(image, query, cfg.sesim, net, cfg.tap)
    write_csv(out / 'selfsim.csv', ('row', 'col', 'value'), heat.rows())
    heat_rgb = colorize(heat.image)
    save_image(heat_rgb, out / 'selfsim.png')
    overlay = np.array(image, dtype=np.float64)
    rows, cols = heat.footprint()
    overlay[..., rows, cols] = 0.5 * overlay[..., rows, cols] + 0.5 * heat_rgb[..., rows, cols]
    save_image(overlay, out / 'selfsim_overlay.png')
    return EXIT_OK


def run_error_map(args, cfg, out):
    net = build_net(cfg)
    x, y = _images(args.images, 2, cfg, lambda c: [c.images_a[0], c.images_b[0]])
    grid = error_map(x, y, cfg.sesim, net, cfg.tap)
    write_csv(out / 'error_map.csv', ('row', 'col', 'value'), grid.rows())
    save_image(colorize(min_max(grid.heatmap)), out / 'error_map.png')
    logger.info("[CLI] mean error %.6f over a %dx%d lattice", grid.mean, *grid.shape)
    return EXIT_OK


def run_train_structure(args, cfg, out):
    net = build_net(cfg)
    corpus = synth_dataset(cfg.synth)
    images = corpus.images_a + corpus.images_b
    if cfg.holdout >= len(images) - 1:
        raise SesimError(f"holdout {cfg.holdout} leaves fewer than 2 of {len(images)} images for training")
    train = images[:len(images) - cfg.holdout]
    holdout = images[len(images) - cfg.holdout:]

    selection = net.selection if cfg.net == 'lsesim' and cfg.selection else None
    sel, log = train_structure_net(train, cfg.sesim, weights=net.weights, aug_spec=cfg.augment,
                                   optimizer=cfg.optimizer, selection=selection, holdout=holdout,
                                   progress=cfg.progress)
    log.to_csv(out / 'train_log.csv')
    save_selection(sel, out / 'selection.json')
    return EXIT_OK


def run_stylize(args, cfg, out):
    net = build_net(cfg)
    content, style = _images(args.images, 2, cfg, lambda c: [c.images_a[0], c.images_b[1]])
    result = stylize(content, style, cfg.sesim, cfg.stylize.steps, net, lr=cfg.stylize.lr, progress=cfg.progress)
    result.to_csv(out / 'stylize_trace.csv')
    save_image(result.image, out / 'stylized.png')
    return EXIT_OK


def run_synth(args, cfg, out):
    corpus = synth_dataset(cfg.synth)
    for index, (image_a, image_b) in enumerate(zip(corpus.images_a, corpus.images_b)):
        save_image(image_a, out / f'a_{index:03d}.png')
        save_image(image_b, out / f'b_{index:03d}.png')
    write_csv(out / 'pairs.csv', ('kind', 'a', 'b'), corpus.pair_rows())
    return EXIT_OK


def run_gradcheck(args, cfg, out):
    report = gradcheck_suite(cfg.sesim.seed, inject=args.inject)
    report.to_csv(out / 'gradcheck.csv')
    if not report.passed:
        logger.error("[CLI] gradient checks failed: %s", ', '.join(report.failures()))
        return EXIT_CHECK_FAILED
    return EXIT_OK


COMMANDS = {
    'selfsim': (run_selfsim, 'local self-similarity heatmap of one query point'),
    'error-map': (run_error_map, 'per-location structure error between two images'),
    'train-structure': (run_train_structure, 'train the LSeSim selection layers on the synthetic corpus'),
    'stylize': (run_stylize, 'structure-preserving stylization by pixel optimization'),
    'synth': (run_synth, 'generate the synthetic paired-structure corpus'),
    'gradcheck': (run_gradcheck, 'finite-difference check of every backward kernel'),
}


def build_parser() -> CliParser:
    common = CliParser(add_help=False)
    common.add_argument('--config', metavar='PATH', help='JSON run configuration')
    common.add_argument('--seed', type=int, metavar='N', help='overrides every seed in the configuration')
    common.add_argument('--out', metavar='DIR', help='output directory (default: out_dir from the configuration)')

    parser = CliParser(prog='sesim', description='Spatially-correlative structure losses')
    sub = parser.add_subparsers(dest='command', required=True, parser_class=CliParser)
    for name, (_, help_text) in COMMANDS.items():
        command = sub.add_parser(name, parents=[common], help=help_text, description=help_text)
        if name == 'selfsim':
            command.add_argument('images', nargs='*', metavar='IMAGE')
            command.add_argument('--query', type=int, nargs=2, metavar=('ROW', 'COL'))
        elif name in ('error-map', 'stylize'):
            command.add_argument('images', nargs='*', metavar='IMAGE')
        elif name == 'gradcheck':
            command.add_argument('--inject', choices=sorted(CHECKS), help=argparse.SUPPRESS)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return e.code

    try:
        cfg = load_run_config(args.config)
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        out = Path(args.out or cfg.out_dir)
        cfg = dataclasses.replace(cfg, out_dir=str(out))
        setup_logging(cfg.log_level)
        out.mkdir(parents=True, exist_ok=True)
        cfg.save(out / 'config.json')

        handler, _ = COMMANDS[args.command]
        logger.info("[CLI] %s -> %s", args.command, out)
        return handler(args, cfg, out)
    except SesimError as e:
        print(f"sesim {args.command}: error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
