"""Paths to the packaged seeds, configs, and scenario corpus."""

from __future__ import annotations

from importlib import resources
from pathlib import Path


def data_dir() -> Path:
    return Path(str(resources.files("storefront") / "data"))


def catalog_seed() -> Path:
    return data_dir() / "seeds" / "catalog.json"


def stock_seed() -> Path:
    return data_dir() / "seeds" / "stock.json"


def rbac_config() -> Path:
    return data_dir() / "config" / "rbac.json"


def policies_config() -> Path:
    return data_dir() / "config" / "policies.json"


def scenario_dir() -> Path:
    return data_dir() / "scenarios"


def scenario_files() -> list[Path]:
    return sorted(scenario_dir().glob("*.json"))
