"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""

import argparse
import logging
import sys

import torch

from .errors import ArchiveFormatError, DataError, NonFiniteLossError, SizingError

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("cartoon_renderer")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cartoon-renderer", description="Reference-guided photo cartoonization.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="train on unpaired photo / cartoon folders")
    p.add_argument("--config", required=True)
    p.add_argument("--photo-dir")
    p.add_argument("--cartoon-dir")
    p.add_argument("--epochs", type=int)
    p.add_argument("--max-steps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory for logs and checkpoints")
    p.add_argument("--resume", help="checkpoint to resume from")

    p = sub.add_parser("render", help="cartoonize a photo after a reference cartoon")
    p.add_argument("--photo", required=True)
    p.add_argument("--style", required=True)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--tile", type=int, help="enable tiled rendering with this tile size")
    p.add_argument("--overlap", type=int, default=64)

    p = sub.add_parser("reconstruct", help="encode and decode an image without coordination")
    p.add_argument("--input", required=True)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--out", required=True)

    sub.add_parser("check", help="run the built-in property checks")

    p = sub.add_parser("convert-vgg", help="convert a torchvision vgg19 .pth into a weight archive")
    p.add_argument("--src", required=True)
    p.add_argument("--out", required=True)
    return parser


def _train(args) -> int:
    from dataclasses import replace

    from .config import TrainingConfig
    from .training import train

    try:
        cfg = TrainingConfig.from_file(args.config)
        overrides = {k: v for k, v in {
            "photo_dir": args.photo_dir, "cartoon_dir": args.cartoon_dir, "epochs": args.epochs,
            "max_steps": args.max_steps, "seed": args.seed, "out_dir": args.out}.items() if v is not None}
        cfg = replace(cfg, **overrides)
    except (FileNotFoundError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE

    def progress(step, report):
        log.info("step %d total %.5f", step, report.total)

    final = train(cfg, resume=args.resume, progress=progress)
    print(final)
    return EXIT_OK


def _render(args) -> int:
    from .images import read_image, write_image
    from .inference import cartoonize, cartoonize_highres, load_pipeline

    pipe = load_pipeline(args.ckpt)
    photo, style = read_image(args.photo), read_image(args.style)
    if args.tile:
        out = cartoonize_highres(photo, style, pipe, tile=args.tile, overlap=args.overlap)
    else:
        out = cartoonize(photo, style, pipe)
    if not torch.isfinite(out).all():
        raise NonFiniteLossError("output image", float("nan"))
    write_image(args.out, out)
    return EXIT_OK


def _reconstruct(args) -> int:
    from .images import read_image, write_image
    from .inference import load_pipeline, reconstruct

    out = reconstruct(read_image(args.input), load_pipeline(args.ckpt))
    if not torch.isfinite(out).all():
        raise NonFiniteLossError("output image", float("nan"))
    write_image(args.out, out)
    return EXIT_OK


def _check(args) -> int:
    from .checks import run_all

    ok = True
    for name, passed, detail in run_all():
        print(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
        ok &= passed
    return EXIT_OK if ok else EXIT_NUMERIC


def _convert(args) -> int:
    from .archive import convert_torchvision_vgg19

    print(convert_torchvision_vgg19(args.src, args.out))
    return EXIT_OK


COMMANDS = {"train": _train, "render": _render, "reconstruct": _reconstruct,
            "check": _check, "convert-vgg": _convert}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except NonFiniteLossError as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, ArchiveFormatError, SizingError, FileNotFoundError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
