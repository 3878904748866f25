import os
import json
import logging
import re
from pathlib import Path
from typing import List, Union, Dict, Any

logger = logging.getLogger(__name__)

# Get configuration directory from environment variable, or use default if not set
CONFIG_DIR = os.environ.get('STREAMBP_CONFIG_DIR', None)

# Directory holding real-world dataset files (never redistributed with the package)
DATA_DIR = Path(os.environ.get('STREAMBP_DATA_DIR', 'data'))

# Default trial parallelism for the experiment runner
try:
    DEFAULT_WORKERS = max(1, int(os.environ.get('STREAMBP_WORKERS', 1)))
except ValueError:
    logger.warning("STREAMBP_WORKERS is not an integer, falling back to 1 worker")
    DEFAULT_WORKERS = 1

PLACEHOLDER_PATTERN = re.compile(r"\$\{([A-Z0-9_]+)\}")


def replace_env_placeholders(config: Union[Dict[str, Any], List[Any], str, Any]) -> Union[Dict[str, Any], List[Any], str, Any]:
    """
    Recursively replace placeholders like "${ENV_VAR}" in string values
    within a nested configuration structure (dicts, lists, strings)
    with environment variable values. Logs a warning if a placeholder is not found.
    """

    def replacer(match: re.Match[str]) -> str:
        env_var_name = match.group(1)
        original_placeholder = match.group(0)
        env_var_value = os.environ.get(env_var_name)
        if env_var_value is None:
            logger.warning(
                f"Environment variable placeholder '{original_placeholder}' was not found in the environment. "
                f"The placeholder string will be used as is."
            )
            return original_placeholder
        return env_var_value

    if isinstance(config, dict):
        return {k: replace_env_placeholders(v) for k, v in config.items()}
    elif isinstance(config, list):
        return [replace_env_placeholders(item) for item in config]
    elif isinstance(config, str):
        return PLACEHOLDER_PATTERN.sub(replacer, config)
    else:
        # Handles numbers, booleans, None, etc.
        return config


def has_unresolved_placeholder(value: Any) -> bool:
    return isinstance(value, str) and PLACEHOLDER_PATTERN.search(value) is not None


# Load JSON configuration file
def load_json_config(filename):
    try:
        if CONFIG_DIR:
            config_path = Path(CONFIG_DIR) / filename
        else:
            config_path = Path(__file__).parent / "config" / filename

        logger.debug(f"Loading configuration from {config_path}")

        if not config_path.exists():
            logger.warning(f"Configuration file {config_path} does not exist")
            return {}

        with open(config_path, 'r', encoding='utf-8') as f:
            config = json.load(f)
            config = replace_env_placeholders(config)
            return config
    except Exception as e:
        logger.error(f"Error loading configuration file {filename}: {str(e)}")
        return {}


# Load algorithm defaults (kernel, voting weights, summary specs)
def load_algorithm_config():
    default_config = {
        "kernel": {"eps": 1e-6, "engine": "auto"},
        "voting": {"vote1x": 1, "vote2x": 2, "vote3x": 3},
        "summary": {},
    }

    loaded_config = load_json_config("algorithms.json")
    if not loaded_config:
        return default_config

    if "kernel" not in loaded_config or "voting" not in loaded_config:
        logger.warning("Algorithm configuration file 'algorithms.json' is malformed. Using default algorithm configuration.")
        return default_config

    loaded_config.setdefault("summary", {})
    return loaded_config


# Load named experiment presets
def load_experiment_presets():
    return load_json_config("experiments.json").get("presets", {})


# Load dataset manifest (sources, checksums, expected statistics)
def load_dataset_manifest():
    return load_json_config("datasets.json").get("datasets", {})


# Initialize empty configuration
configs = {}

algorithm_config = load_algorithm_config()
experiment_presets = load_experiment_presets()
dataset_manifest = load_dataset_manifest()

configs["kernel"] = algorithm_config["kernel"]
configs["voting"] = algorithm_config["voting"]
configs["summary"] = algorithm_config["summary"]
configs["presets"] = experiment_presets
configs["datasets"] = dataset_manifest


def get_kernel_defaults() -> Dict[str, Any]:
    """
    Get the default numeric settings shared by every BP variant.

    Returns:
        dict: ``eps`` (message clamp threshold) and ``engine`` (``auto``, ``probability`` or ``llr``)
    """
    return dict(configs.get("kernel", {}))


def get_vote_weight(algorithm: str) -> int:
    """
    Get the side-information weight for a named voting baseline.

    Parameters:
        algorithm (str): Voting algorithm name, e.g. ``vote2x``

    Returns:
        int: The weight given to the vertex's own noisy label
    """
    weights = configs.get("voting", {})
    if algorithm not in weights:
        raise ValueError(f"Unknown voting algorithm '{algorithm}'. Known: {sorted(weights)}")
    return int(weights[algorithm])


def get_summary_config(name: str) -> Dict[str, Any]:
    return dict(configs.get("summary", {}).get(name, {}))


def get_experiment_preset(name: str) -> Dict[str, Any]:
    presets = configs.get("presets", {})
    if name not in presets:
        raise ValueError(f"Experiment preset '{name}' not found. Available presets: {sorted(presets)}")
    return dict(presets[name])


def get_dataset_entry(name: str) -> Dict[str, Any]:
    datasets = configs.get("datasets", {})
    if name not in datasets:
        raise ValueError(f"Dataset '{name}' is not listed in the dataset manifest")
    return dict(datasets[name])
