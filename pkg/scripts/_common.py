"""Shared argument handling for the experiment scripts."""

import argparse
import logging

from prospectnet.config import build_config, load_config_file


def parser(description: str) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(description=description)
    p.add_argument("--config", help="JSON config file (same keys as the CLI)")
    p.add_argument("--full", action="store_true", help="use full training settings instead of the quick preset")
    p.add_argument("--seeds", default="0,1,2,3,4", help="comma-separated seeds")
    p.add_argument("--out", help="write the CSV result here")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def config_from(args, **overrides):
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    layers = [load_config_file(args.config) if args.config else None]
    layers.append({"preset": None if args.full else "quick", "seeds": [int(s) for s in args.seeds.split(",")], **overrides})
    if layers[-1]["preset"] is None:
        del layers[-1]["preset"]
    return build_config(*layers)
