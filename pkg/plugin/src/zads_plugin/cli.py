"""Command-line entry: ``zads-plugin serve --mode {zero,echo,adapter}``."""

import argparse
import importlib
import sys

from .serve import MODES, serve


def load_denoiser(spec: str):
    """Resolve a ``module:attribute`` path to the wrapped network."""
    module_name, sep, attr = spec.partition(":")
    if not sep or not module_name or not attr:
        raise argparse.ArgumentTypeError(
            f"denoiser spec must look like module:attribute, got {spec!r}")
    module = importlib.import_module(module_name)
    try:
        return getattr(module, attr)
    except AttributeError:
        raise argparse.ArgumentTypeError(
            f"module {module_name!r} has no attribute {attr!r}") from None


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="zads-plugin",
        description="external denoiser worker over stdin/stdout")
    sub = parser.add_subparsers(dest="command", required=True)
    sp = sub.add_parser("serve", help="answer requests until stdin closes")
    sp.add_argument("--mode", choices=MODES, required=True)
    sp.add_argument("--denoiser", default=None,
                    help="module:attribute of the network to wrap "
                         "(adapter mode only)")
    args = parser.parse_args(argv)

    denoiser = None
    if args.mode == "adapter":
        if args.denoiser is None:
            parser.error("adapter mode needs --denoiser module:attribute")
        try:
            denoiser = load_denoiser(args.denoiser)
        except (argparse.ArgumentTypeError, ImportError) as exc:
            parser.error(str(exc))
    elif args.denoiser is not None:
        parser.error(f"--denoiser only applies to adapter mode, not {args.mode}")

    return serve(args.mode, denoiser)


if __name__ == "__main__":
    sys.exit(main())
