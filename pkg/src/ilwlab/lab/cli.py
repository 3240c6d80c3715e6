"""Command line front end: ``lab <experiment> --config FILE [--out DIR]
[--threads N]``.

Exit status 0 on success, 2 on configuration errors and 3 on numerical
failures (partial outputs and the manifest are still written).  The
environment variables ``ILWLAB_OUTPUT_DIR`` and ``ILWLAB_THREADS`` override
the config file; command line flags override both.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from ..errors import ConfigError, LabError, NumericalError
from .config import Experiment, load_config, parse_config
from .experiments import run

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

log = logging.getLogger("ilwlab")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lab", description=__doc__.split("\n\n")[0])
    p.add_argument("experiment", choices=[e.value for e in Experiment])
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads over the delta grid")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _overrides(args) -> dict:
    upd = {}
    env_out = os.environ.get("ILWLAB_OUTPUT_DIR")
    env_threads = os.environ.get("ILWLAB_THREADS")
    if env_out:
        upd["output_dir"] = env_out
    if env_threads:
        try:
            upd["threads"] = int(env_threads)
        except ValueError:
            raise ConfigError(f"ILWLAB_THREADS must be an integer, "
                              f"got {env_threads!r}") from None
    if args.out is not None:
        upd["output_dir"] = args.out
    if args.threads is not None:
        upd["threads"] = args.threads
    return upd


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = load_config(args.config)
        if config.experiment.value != args.experiment:
            raise ConfigError(f"config describes {config.experiment.value}, "
                              f"command asked for {args.experiment}")
        upd = _overrides(args)
        if upd:
            data = config.model_dump(by_alias=False)
            data.update(upd)
            config = parse_config(data)
        manifest = run(config)
    except ConfigError as exc:
        print(f"lab: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"lab: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except LabError as exc:
        print(f"lab: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(f"{config.experiment.value}: {manifest.status}, "
          f"{len(manifest.files)} files in {config.output_dir}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
