# File: main.py
# Tujuan: CLI steinflow. Subcommand: run, sweep, validate, presets.

import argparse
import sys

from dotenv import load_dotenv

from core.errors import ConfigValidationError
from core.experiment_entry import ExperimentEntry
from core.run_config import config_to_text, sweep_to_text, validate_config, validate_sweep
from data_sources.presets import describe_presets
from utils.config_loader import ConfigLoader
from utils.logger import setup_logger

# Muat environment variables dari file .env di awal skrip
load_dotenv()


def _read(path: str) -> str:
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="steinflow", description="SVGD dan Ad-SVGD dengan artefak CSV/JSON.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Jalankan satu run dari file konfigurasi.")
    run.add_argument("config")
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--out", default=None, help="Direktori output (menimpa key output).")
    run.add_argument("--desk", action="store_true", help="Bagi nsteps dengan 20.")

    sweep = sub.add_parser("sweep", help="Jalankan sweep satu sumbu.")
    sweep.add_argument("config")
    sweep.add_argument("--jobs", type=int, default=1, help="Jumlah proses paralel antar run.")
    sweep.add_argument("--out", default=None)
    sweep.add_argument("--desk", action="store_true")

    validate = sub.add_parser("validate", help="Validasi konfigurasi dan tampilkan versi ternormalisasi.")
    validate.add_argument("config")

    sub.add_parser("presets", help="Daftar preset bawaan.")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logger = setup_logger("steinflow", ConfigLoader().get("STEINFLOW_LOG_LEVEL", "INFO"))

    if args.command == "presets":
        for name, description in describe_presets():
            print(f"{name:<12} {description}")
        return 0

    try:
        text = _read(args.config)
    except OSError as e:
        logger.error(f"❌ Tidak dapat membaca konfigurasi {args.config}: {e}")
        return 2

    try:
        if args.command == "validate":
            if "sweep_axis" in text:
                print(sweep_to_text(validate_sweep(text)), end="")
            else:
                print(config_to_text(validate_config(text)), end="")
            return 0
        if args.command == "run":
            overrides = {"seed": args.seed, "output": args.out, "desk": True if args.desk else None}
            cfg = validate_config(text, overrides)
            return ExperimentEntry().run(cfg).exit_code
        overrides = {"output": args.out, "desk": True if args.desk else None}
        _, code = ExperimentEntry().sweep(validate_sweep(text, overrides), jobs=max(1, args.jobs))
        return code
    except ConfigValidationError as e:
        logger.error(f"❌ {e}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
