import argparse
import json
import logging
import os
import sys
from typing import Any, Dict, List, Optional

from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

# Add the repository root to the path so the streambp package imports when run as a script
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from streambp.logging_config import setup_logging

# Configure logging
setup_logging()
logger = logging.getLogger(__name__)

from streambp.config import configs, get_experiment_preset
from streambp.runner import ConfigError, build_config, columns_for, run_experiment, write_rows

MODES = ["generate", "run", "sweep", "estimate-params", "trace"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="streambp",
        description="Streaming community detection experiments: sample streaming block models, "
                    "run streaming and offline BP and voting baselines, and write CSV results.",
    )
    parser.add_argument("mode", nargs="?", choices=MODES, help="What to do (default: from preset/config, else sweep)")
    parser.add_argument("--preset", help="Named experiment from experiments.json")
    parser.add_argument("--config", help="JSON file with experiment settings (overrides the preset)")
    parser.add_argument("--list-presets", action="store_true", help="Print preset names and exit")

    model = parser.add_argument_group("model")
    model.add_argument("--model-id", help="Label for the model_id column")
    model.add_argument("--n", type=int, help="Number of vertices")
    model.add_argument("--k", type=int, help="Number of communities")
    model.add_argument("--a", type=float, help="Within-community intensity")
    model.add_argument("--b", type=float, help="Cross-community intensity")
    model.add_argument("--a-plus-b", type=float, help="Total intensity for SNR sweeps")
    model.add_argument("--lambdas", type=float, nargs="+", help="SNR values; a and b are derived from --a-plus-b")
    model.add_argument("--alphas", type=float, nargs="+", help="Side-information noise levels")

    data = parser.add_argument_group("dataset")
    data.add_argument("--dataset", help="Dataset name from datasets.json ('all' with estimate-params)")
    data.add_argument("--edges-path", help="Edge list file")
    data.add_argument("--labels-path", help="Label file")

    algo = parser.add_argument_group("algorithms")
    algo.add_argument("--algorithms", nargs="+",
                      help="streambp, streambp-star, offline-bp, vote1x, vote2x, vote3x or summary:<name>")
    algo.add_argument("--radii", type=int, nargs="+", help="BP radii R")
    algo.add_argument("--eps", type=float, help="Message clamp threshold (0 disables clamping)")
    algo.add_argument("--engine", choices=["auto", "probability", "llr"], help="Message representation")
    algo.add_argument("--a-shifts", type=float, nargs="+", help="Percent shifts of a fed to BP (e.g. 200 triples a)")
    algo.add_argument("--b-shifts", type=float, nargs="+", help="Percent shifts of b fed to BP (e.g. -67 keeps 33%%)")

    run = parser.add_argument_group("run")
    run.add_argument("--trials", type=int, help="Independent trials")
    run.add_argument("--seed", type=int, help="Base seed; trial seeds derive from (seed, trial)")
    run.add_argument("--checkpoints", type=int, nargs="+", help="Arrival steps scored in trace mode")
    run.add_argument("--output", help="CSV file (instance directory in generate mode); stdout when omitted")
    run.add_argument("--workers", type=int, help="Parallel trial processes (default STREAMBP_WORKERS or 1)")
    run.add_argument("--no-timing", dest="timing", action="store_false", default=None,
                     help="Leave runtime_ms empty so reruns are byte-identical")
    return parser


def merge_settings(args: argparse.Namespace) -> Dict[str, Any]:
    """Preset, then --config file, then explicit flags, each overriding the previous."""
    settings: Dict[str, Any] = {}
    if args.preset:
        settings.update(get_experiment_preset(args.preset))
    if args.config:
        with open(args.config, "r", encoding="utf-8") as f:
            settings.update(json.load(f))
    for key, value in vars(args).items():
        if key in ("preset", "config", "list_presets") or value is None:
            continue
        settings[key] = value
    return settings


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.list_presets:
        for name in sorted(configs.get("presets", {})):
            print(name)
        return 0

    try:
        config = build_config(merge_settings(args))
    except (ConfigError, ValueError, OSError) as e:
        logger.error(f"Invalid experiment configuration: {e}")
        return 2

    try:
        rows = run_experiment(config)
    except ConfigError as e:
        logger.error(f"Invalid experiment configuration: {e}")
        return 2
    except ValueError as e:
        logger.error(f"Experiment failed: {e}")
        return 1

    if config.mode == "generate":
        write_rows(rows, columns_for(config))
    else:
        write_rows(rows, columns_for(config), output=config.output)
    return 0


if __name__ == "__main__":
    sys.exit(main())
