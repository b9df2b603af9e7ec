import json

import pytest

from storefront import Engine, bundled, permissive_matrix
from storefront.rbac import default_matrix

CATALOG_SEED = json.loads(bundled.catalog_seed().read_text(encoding="utf-8"))
STOCK_SEED = json.loads(bundled.stock_seed().read_text(encoding="utf-8"))


def fresh_engine(rbac=None, seed_catalog=True, seed_stock=True, **kwargs) -> Engine:
    engine = Engine(rbac_matrix=rbac or permissive_matrix(), **kwargs)
    if seed_catalog:
        engine.seed_catalog(CATALOG_SEED)
    if seed_stock:
        engine.seed_stock(STOCK_SEED)
    return engine


@pytest.fixture
def eng() -> Engine:
    """Seeded engine in permissive mode, for pattern-module tests."""
    return fresh_engine()


@pytest.fixture
def rbac_eng() -> Engine:
    """Seeded engine enforcing the default six-role matrix."""
    return fresh_engine(rbac=default_matrix())
