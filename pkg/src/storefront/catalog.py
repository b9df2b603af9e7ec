"""Product registry: catalogs, detail records, similar-product links, and
per-subscriber change notifications.

Products model sellable *types*; unit-level identity lives in the stock
modules. Notifications are append-only records — the observable stand-in
for outbound customer messaging.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .foundation import DomainError, EntityId, Money


class UnknownCatalog(DomainError):
    code = "UnknownCatalog"


class UnknownProduct(DomainError):
    code = "UnknownProduct"


class UnknownCustomer(DomainError):
    code = "UnknownCustomer"


class NegativePrice(DomainError):
    code = "NegativePrice"


class EmptyChange(DomainError):
    code = "EmptyChange"


class SelfLink(DomainError):
    code = "SelfLink"


class ProductStatus(str, Enum):
    REGULAR = "Regular"
    NEW = "New"
    DISCONTINUED = "Discontinued"


@dataclass(frozen=True)
class ProductInfo:
    """Optional detail record; at most one per product by construction."""

    description: str
    comparison_notes: str

    def to_dict(self) -> dict:
        return {
            "description": self.description,
            "comparison_notes": self.comparison_notes,
        }

    @classmethod
    def from_dict(cls, data: dict) -> ProductInfo:
        return cls(str(data["description"]), str(data["comparison_notes"]))


@dataclass
class Product:
    id: EntityId
    name: str
    price: Money
    status: ProductStatus
    similar: set[EntityId] = field(default_factory=set)
    info: ProductInfo | None = None

    def clone(self) -> Product:
        return Product(self.id, self.name, self.price, self.status,
                       set(self.similar), self.info)

    def to_dict(self) -> dict:
        return {
            "id": str(self.id),
            "name": self.name,
            "price": self.price.to_dict(),
            "status": self.status.value,
            "similar": sorted(str(pid) for pid in self.similar),
            "info": self.info.to_dict() if self.info else None,
        }

    @classmethod
    def from_dict(cls, data: dict) -> Product:
        return cls(
            id=EntityId.parse(data["id"]),
            name=data["name"],
            price=Money.from_dict(data["price"]),
            status=ProductStatus(data["status"]),
            similar={EntityId.parse(p) for p in data["similar"]},
            info=ProductInfo.from_dict(data["info"]) if data["info"] else None,
        )


@dataclass
class Catalog:
    id: EntityId
    name: str
    products: set[EntityId] = field(default_factory=set)
    # per-product subscriber sets; customers subscribe to individual products
    subscribers: dict[EntityId, set[EntityId]] = field(default_factory=dict)

    def clone(self) -> Catalog:
        return Catalog(self.id, self.name, set(self.products),
                       {pid: set(subs) for pid, subs in self.subscribers.items()})

    def to_dict(self) -> dict:
        return {
            "id": str(self.id),
            "name": self.name,
            "products": sorted(str(p) for p in self.products),
            "subscribers": {
                str(pid): sorted(str(c) for c in subs)
                for pid, subs in self.subscribers.items()
                if subs
            },
        }

    @classmethod
    def from_dict(cls, data: dict) -> Catalog:
        return cls(
            id=EntityId.parse(data["id"]),
            name=data["name"],
            products={EntityId.parse(p) for p in data["products"]},
            subscribers={
                EntityId.parse(pid): {EntityId.parse(c) for c in subs}
                for pid, subs in data["subscribers"].items()
            },
        )


@dataclass
class Notification:
    """One recorded product-change message to one subscriber. Append-only."""

    id: EntityId
    customer: EntityId
    product: EntityId
    change_summary: str
    at: int

    def clone(self) -> Notification:
        return Notification(self.id, self.customer, self.product,
                            self.change_summary, self.at)

    def to_dict(self) -> dict:
        return {
            "id": str(self.id),
            "customer": str(self.customer),
            "product": str(self.product),
            "change_summary": self.change_summary,
            "at": self.at,
        }

    @classmethod
    def from_dict(cls, data: dict) -> Notification:
        return cls(
            id=EntityId.parse(data["id"]),
            customer=EntityId.parse(data["customer"]),
            product=EntityId.parse(data["product"]),
            change_summary=data["change_summary"],
            at=int(data["at"]),
        )


def create_catalog(txn, name: str) -> EntityId:
    catalog_id = txn.next_id("catalog")
    txn.create("catalogs", Catalog(id=catalog_id, name=name))
    return catalog_id


def catalog_of(state, product_id: EntityId) -> Catalog:
    """The catalog a product was added to. Every product belongs to one."""
    for catalog in state.stores["catalogs"].values():
        if product_id in catalog.products:
            return catalog
    raise UnknownProduct(f"product {product_id} is not in any catalog")


def subscribers_of(state, product_id: EntityId) -> set[EntityId]:
    catalog = catalog_of(state, product_id)
    return set(catalog.subscribers.get(product_id, ()))


def add_product(txn, catalog_id: EntityId, name: str, price: Money,
                status: ProductStatus) -> EntityId:
    if catalog_id not in txn.state.stores["catalogs"]:
        raise UnknownCatalog(f"no catalog {catalog_id}")
    if price.amount < 0:
        raise NegativePrice(f"price must be >= 0, got {price.amount}")
    product_id = txn.next_id("product")
    txn.create("products", Product(id=product_id, name=name, price=price,
                                   status=status))
    catalog = txn.get_mut("catalogs", catalog_id, UnknownCatalog)
    catalog.products.add(product_id)
    return product_id


def set_product_info(txn, product_id: EntityId, description: str,
                     comparison_notes: str) -> None:
    product = txn.get_mut("products", product_id, UnknownProduct)
    product.info = ProductInfo(description, comparison_notes)


def update_product(txn, product_id: EntityId, changes: dict) -> list[EntityId]:
    """Apply field changes and record one Notification per subscriber.

    ``changes`` may set ``name``, ``price``, or ``status``. Returns the ids
    of the notifications recorded for this update, in subscriber-id order.
    """
    if not changes:
        raise EmptyChange("update requires at least one field change")
    unknown = set(changes) - {"name", "price", "status"}
    if unknown:
        raise EmptyChange(f"unknown product fields: {sorted(unknown)}")
    if "price" in changes and changes["price"].amount < 0:
        raise NegativePrice(f"price must be >= 0, got {changes['price'].amount}")

    product = txn.get_mut("products", product_id, UnknownProduct)

    summary_parts = []
    for field_name in sorted(changes):
        new_value = changes[field_name]
        old_value = getattr(product, field_name)
        old_text = _field_text(old_value)
        setattr(product, field_name, new_value)
        summary_parts.append(f"{field_name}: {old_text} -> {_field_text(new_value)}")
    summary = f"{product.name}: " + "; ".join(summary_parts)

    notification_ids = []
    for customer_id in sorted(subscribers_of(txn.state, product_id)):
        notification_id = txn.next_id("notification")
        txn.create("notifications", Notification(
            id=notification_id,
            customer=customer_id,
            product=product_id,
            change_summary=summary,
            at=txn.state.clock,
        ))
        notification_ids.append(notification_id)
    return notification_ids


def _field_text(value) -> str:
    if isinstance(value, Money):
        return f"{value.amount} {value.currency}"
    if isinstance(value, ProductStatus):
        return value.value
    return str(value)


def link_similar(txn, a: EntityId, b: EntityId) -> None:
    if a == b:
        raise SelfLink(f"product {a} cannot be similar to itself")
    product_a = txn.get_mut("products", a, UnknownProduct)
    product_b = txn.get_mut("products", b, UnknownProduct)
    product_a.similar.add(b)
    product_b.similar.add(a)


def subscribe(txn, customer_id: EntityId, product_id: EntityId) -> None:
    if customer_id not in txn.state.stores["customers"]:
        raise UnknownCustomer(f"no customer {customer_id}")
    if product_id not in txn.state.stores["products"]:
        raise UnknownProduct(f"no product {product_id}")
    catalog = catalog_of(txn.state, product_id)
    catalog = txn.get_mut("catalogs", catalog.id, UnknownCatalog)
    catalog.subscribers.setdefault(product_id, set()).add(customer_id)


def search(state, catalog_id: EntityId, name_substring: str | None = None,
           status: ProductStatus | None = None,
           max_price: Money | None = None) -> list[EntityId]:
    """Products matching every given criterion, ordered by (name, id).

    Name matching is a case-insensitive substring test; empty criteria
    return the whole catalog.
    """
    catalog = state.stores["catalogs"].get(catalog_id)
    if catalog is None:
        raise UnknownCatalog(f"no catalog {catalog_id}")
    needle = name_substring.lower() if name_substring is not None else None
    matches = []
    for product_id in catalog.products:
        product = state.stores["products"][product_id]
        if needle is not None and needle not in product.name.lower():
            continue
        if status is not None and product.status != status:
            continue
        if max_price is not None and product.price.amount > max_price.amount:
            continue
        matches.append(product)
    matches.sort(key=lambda p: (p.name, p.id))
    return [p.id for p in matches]


def new_products(state, catalog_id: EntityId) -> list[EntityId]:
    """The dedicated feed of products still flagged as new."""
    return search(state, catalog_id, status=ProductStatus.NEW)
