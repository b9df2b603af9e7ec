"""Shared value types: money, discrete quantities, entity ids, and the error base.

Everything here is immutable and freely shareable. Mutation happens only in
the engine's entity stores, never inside these values.
"""

from __future__ import annotations

from dataclasses import dataclass


class DomainError(Exception):
    """Base for every business-rule rejection.

    ``code`` is the stable machine-readable name used in event-log audit
    records and scenario ``expect_error`` clauses.
    """

    code = "DomainError"

    def __init__(self, message: str = "", **details):
        self.message = message or self.code
        self.details = details
        super().__init__(self.message)

    def __str__(self) -> str:
        if self.details:
            extras = ", ".join(f"{k}={v}" for k, v in sorted(self.details.items()))
            return f"{self.message} ({extras})"
        return self.message


class CurrencyMismatch(DomainError):
    code = "CurrencyMismatch"


class NegativeQuantity(DomainError):
    code = "NegativeQuantity"


class SchemaError(DomainError):
    code = "SchemaError"


class AccessDenied(DomainError):
    code = "AccessDenied"


@dataclass(frozen=True)
class Money:
    """An amount in integer minor units (cents) of a single currency.

    Negative amounts are legal only for adjustments and balance arithmetic;
    prices and payments are validated non-negative at their use sites.
    """

    amount: int
    currency: str

    def add(self, other: Money) -> Money:
        if self.currency != other.currency:
            raise CurrencyMismatch(
                f"cannot add {other.currency} to {self.currency}"
            )
        return Money(self.amount + other.amount, self.currency)

    def sub(self, other: Money) -> Money:
        if self.currency != other.currency:
            raise CurrencyMismatch(
                f"cannot subtract {other.currency} from {self.currency}"
            )
        return Money(self.amount - other.amount, self.currency)

    def scale(self, qty: Quantity) -> Money:
        return Money(self.amount * qty.value, self.currency)

    def negate(self) -> Money:
        return Money(-self.amount, self.currency)

    @staticmethod
    def zero(currency: str) -> Money:
        return Money(0, currency)

    def to_dict(self) -> dict:
        return {"amount": self.amount, "currency": self.currency}

    @classmethod
    def from_dict(cls, data: dict) -> Money:
        return cls(int(data["amount"]), str(data["currency"]))


def money_add(a: Money, b: Money) -> Money:
    return a.add(b)


def money_scale(a: Money, q: Quantity) -> Money:
    return a.scale(q)


def money_sum(values, currency: str) -> Money:
    """Left-fold sum; empty input yields zero in the given currency."""
    total = Money.zero(currency)
    for value in values:
        total = total.add(value)
    return total


@dataclass(frozen=True)
class Quantity:
    """A non-negative count of discrete items."""

    value: int

    def __post_init__(self):
        if self.value < 0:
            raise NegativeQuantity(f"quantity cannot be negative: {self.value}")

    def add(self, other: Quantity) -> Quantity:
        return Quantity(self.value + other.value)

    def sub(self, other: Quantity) -> Quantity:
        if other.value > self.value:
            raise NegativeQuantity(
                f"cannot subtract {other.value} from {self.value}"
            )
        return Quantity(self.value - other.value)

    def is_zero(self) -> bool:
        return self.value == 0


@dataclass(frozen=True, order=True)
class EntityId:
    """Identity of one stored entity: a kind tag plus a per-kind serial.

    Serials are allocated monotonically by the engine, so the string form
    ``kind:serial`` is unique and stable across replays.
    """

    kind: str
    serial: int

    def __str__(self) -> str:
        return f"{self.kind}:{self.serial}"

    @classmethod
    def parse(cls, text: str) -> EntityId:
        kind, sep, serial = text.partition(":")
        if not sep or not kind or not serial.lstrip("-").isdigit():
            raise SchemaError(f"malformed entity id: {text!r}")
        return cls(kind, int(serial))


SYSTEM = EntityId("system", 0)
"""Sentinel actor for engine-internal command paths (seeding, checkout)."""


def round_half_away(numerator: int, denominator: int) -> int:
    """Integer division rounding halves away from zero.

    Used for percentage adjustments so that independently computed expected
    values agree bit-exactly with the engine.
    """
    if denominator <= 0:
        raise ValueError("denominator must be positive")
    sign = -1 if numerator < 0 else 1
    q, r = divmod(abs(numerator), denominator)
    if 2 * r >= denominator:
        q += 1
    return sign * q
