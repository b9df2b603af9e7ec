"""Shared lookups and builders for driving a seeded engine in tests."""

from storefront import SYSTEM, Engine


def product_id(engine: Engine, name: str) -> str:
    for pid, product in engine.state.stores["products"].items():
        if product.name == name:
            return str(pid)
    raise LookupError(name)


def stock_item_id(engine: Engine, name: str) -> str:
    for iid, item in engine.state.stores["stock_items"].items():
        if item.name == name:
            return str(iid)
    raise LookupError(name)


def room_id(engine: Engine, name: str) -> str:
    for rid, room in engine.state.stores["stockrooms"].items():
        if room.name == name:
            return str(rid)
    raise LookupError(name)


def catalog_id(engine: Engine) -> str:
    return str(next(iter(engine.state.stores["catalogs"])))


def new_customer(engine: Engine, name="Ana", loyalty=False, roles=("Shopper",)) -> str:
    result = engine.execute(SYSTEM, "create_customer", name=name,
                            loyalty_member=loyalty, roles=list(roles))
    return result["customer"]


def new_employee(engine: Engine, name="Iris", roles=()) -> str:
    result = engine.execute(SYSTEM, "create_employee", name=name, roles=list(roles))
    return result["employee"]


def validated_invoice(engine: Engine, customer: str, items=((1000, 1), (500, 1)),
                      policies=("loyalty-5pct",)) -> str:
    """Create, prepare, and validate an invoice; returns its id."""
    clerk = new_employee(engine, name="clerk-for-invoice", roles=["InvoiceClerk"])
    checker = new_employee(engine, name="validator-for-invoice",
                           roles=["InvoiceValidator"])
    invoice = engine.execute(clerk, "create_invoice", creator=clerk,
                             customer=customer)["invoice"]
    edits = [{"add": {"description": f"item-{i}", "quantity": qty,
                      "unit_price": price}}
             for i, (price, qty) in enumerate(items)]
    engine.execute(clerk, "prepare_invoice", invoice=invoice, edits=edits,
                   policies=list(policies))
    engine.execute(checker, "validate_invoice", validator=checker, invoice=invoice,
                   rules=["nonempty-items", "nonnegative-total"])
    return invoice
