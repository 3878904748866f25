#!/usr/bin/env python3
"""
Fetch Real-World Datasets Utility

This script downloads the edge and label files listed in streambp/config/datasets.json
into the data directory and checks them against the recorded sha256 checksums.
Dataset files are not shipped with the package; source URLs come from environment
variables (see the ``*_url`` placeholders in the manifest, a .env file works too).

Usage:
    python fetch_datasets.py [dataset_name ...]

If no dataset name is provided, every dataset in the manifest is fetched.
"""

import os
import sys
import logging
from pathlib import Path

import requests
from dotenv import load_dotenv

load_dotenv()

# Configure logging
logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)

sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from streambp.config import DATA_DIR, configs, has_unresolved_placeholder
from streambp.datasets import sha256_of


def download(url, target):
    """Stream a URL to a file, replacing it only once the download completes"""
    target.parent.mkdir(parents=True, exist_ok=True)
    partial = target.with_suffix(target.suffix + ".part")
    with requests.get(url, stream=True, timeout=60) as response:
        response.raise_for_status()
        with open(partial, "wb") as f:
            for chunk in response.iter_content(chunk_size=1 << 16):
                f.write(chunk)
    partial.replace(target)
    logger.info(f"Downloaded {url} -> {target}")


def fetch_dataset(name, entry):
    """Fetch both files of one dataset; returns True when they are present and not known to be corrupt"""
    ok = True
    checksums = entry.get("sha256") or {}
    for role in ("edges", "labels"):
        target = DATA_DIR / entry[role]
        url = entry.get(f"{role}_url")

        if not target.exists():
            if not url or has_unresolved_placeholder(url):
                logger.warning(f"{name}: no source URL configured for {role} ({url}); place the file at {target}")
                ok = False
                continue
            try:
                download(url, target)
            except requests.RequestException as e:
                logger.error(f"{name}: failed to download {role} from {url}: {e}")
                ok = False
                continue

        expected = checksums.get(role)
        actual = sha256_of(target)
        if not expected:
            logger.warning(f"{name}: no checksum recorded for {role}; sha256 is {actual}")
        elif actual != expected:
            logger.error(f"{name}: checksum mismatch for {target} (expected {expected}, got {actual})")
            ok = False
        else:
            logger.info(f"{name}: {role} checksum verified")
    return ok


def main():
    datasets = configs.get("datasets", {})
    names = sys.argv[1:] or sorted(datasets)
    unknown = [name for name in names if name not in datasets]
    if unknown:
        logger.error(f"Unknown datasets: {', '.join(unknown)}. Known: {', '.join(sorted(datasets))}")
        return 1

    logger.info(f"Fetching {', '.join(names)} into {Path(DATA_DIR).resolve()}")
    failed = [name for name in names if not fetch_dataset(name, datasets[name])]
    if failed:
        logger.warning(f"Incomplete datasets: {', '.join(failed)}")
        return 1
    logger.info("All datasets present")
    return 0


if __name__ == "__main__":
    sys.exit(main())
