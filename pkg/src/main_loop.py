import argparse
import sys
from typing import List, Optional

from pyparsing import ParseBaseException

from command_switcher import switch_and_delegate
from errors import ConfigError, DimensionError, MeshError, NumericError
from utils.help import help
from utils.settings import Settings
from utils.utils import print_error, splash_screen

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO, EXIT_OTHER = 0, 2, 3, 4, 1

# first match wins
EXIT_CODES = (
    (NumericError, EXIT_NUMERIC),
    (ConfigError, EXIT_CONFIG),
    (DimensionError, EXIT_CONFIG),
    (MeshError, EXIT_CONFIG),
    (ParseBaseException, EXIT_CONFIG),
    (MemoryError, EXIT_CONFIG),
    (OSError, EXIT_IO),
)


def exit_code(e: BaseException) -> int:
    for kind, code in EXIT_CODES:
        if isinstance(e, kind):
            return code
    return EXIT_OTHER


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="triavatar", description="Clothed avatar reconstruction from a single image.",
                                     epilog=help(), formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--quiet", action="store_true", help="only warnings and errors")
    parser.add_argument("--debug", action="store_true", help="full tracebacks on error")
    parser.add_argument("--workers", type=int, help="processes for dataset generation")
    parser.add_argument("--memory-budget-mb", type=int, help="ceiling for dense grid evaluation")
    sub = parser.add_subparsers(dest="command")

    def command(name: str, text: str) -> argparse.ArgumentParser:
        return sub.add_parser(name, help=text, description=text)

    def config_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="run configuration JSON")
        p.add_argument("--seed", type=int, help="root seed")

    p = command("gen-data", "write a synthetic clothed-body dataset")
    config_flags(p)
    p.add_argument("--count", type=int)
    p.add_argument("--difficulty", choices=["rest", "easy", "medium", "hard"])
    p.add_argument("--out", required=True)

    p = command("train", "train a model on a dataset directory")
    config_flags(p)
    p.add_argument("--data", required=True)
    p.add_argument("--steps", type=int)
    p.add_argument("--mode", help="ablation mode")
    p.add_argument("--resume", help="checkpoint directory to continue from")
    p.add_argument("--out", required=True)

    p = command("reconstruct", "reconstruct a coloured mesh from one sample")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True, help="sample directory")
    p.add_argument("--res", type=int, help="grid resolution")
    p.add_argument("--chunk-size", type=int)
    p.add_argument("--iso", type=float, default=0.5)
    p.add_argument("--prior-only", action="store_true", help="prior-enhanced query alone")
    p.add_argument("--out", required=True, help="mesh path (.obj or .ply)")

    p = command("evaluate", "compare a mesh against ground truth")
    config_flags(p)
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True, help="mesh file or sample directory")
    p.add_argument("--samples", type=int)
    p.add_argument("--render-res", type=int)
    p.add_argument("--report", help="report JSON path")

    p = command("ablate", "train and evaluate several ablation modes")
    config_flags(p)
    p.add_argument("--data", required=True)
    p.add_argument("--modes", default="all", help="comma list or 'all'")
    p.add_argument("--steps", type=int)
    p.add_argument("--res", type=int)
    p.add_argument("--report", help="CSV table path")
    p.add_argument("--out", required=True)

    p = command("animate", "re-pose a subject through its prior-query features")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True, help="sample or rig directory")
    p.add_argument("--theta-new", required=True, help="pose spec or JSON file")
    p.add_argument("--res", type=int)
    p.add_argument("--chunk-size", type=int)
    p.add_argument("--rig-out", help="write the re-posed rig here")
    p.add_argument("--out", required=True)

    p = command("tryon", "swap the features of selected body parts")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--target", required=True, help="sample or rig directory")
    p.add_argument("--source", required=True, help="sample or rig directory")
    p.add_argument("--parts", required=True, help="comma list, 'all' or 'none'")
    p.add_argument("--res", type=int)
    p.add_argument("--chunk-size", type=int)
    p.add_argument("--rig-out")
    p.add_argument("--out", required=True)

    p = command("inspect-planes", "write channel grids of the tri-plane features")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--channels", type=int, default=16)
    p.add_argument("--out", required=True)
    return parser


def apply_runtime_flags(args: argparse.Namespace) -> None:
    Settings.set_verbose(not args.quiet)
    Settings.set_debug(args.debug)
    if args.workers is not None:
        Settings.set_workers(args.workers)
    if args.memory_budget_mb is not None:
        Settings.set_memory_budget_mb(args.memory_budget_mb)


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        splash_screen()
        return EXIT_OK
    apply_runtime_flags(args)

    parse_dict = {k: v for k, v in vars(args).items() if k not in ("quiet", "debug", "workers", "memory_budget_mb")}
    try:
        switch_and_delegate(parse_dict)
    except Exception as e:
        print_error(e)
        return exit_code(e)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
