"""Invoice lifecycle: creation, preparation under billing policies,
rule-based validation with separation of duty, and payment settlement.

Billing policies and validation rules are declarative config, referenced by
name, so scenario scripts never embed rule logic. Who created, validated,
and accepted what is recorded on the documents themselves.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .catalog import UnknownCustomer
from .foundation import (
    SYSTEM,
    CurrencyMismatch,
    DomainError,
    EntityId,
    Money,
    Quantity,
    SchemaError,
    money_sum,
    round_half_away,
)


class NotDraft(DomainError):
    code = "NotDraft"


class UnknownItem(DomainError):
    code = "UnknownItem"


class UnknownPolicy(DomainError):
    code = "UnknownPolicy"


class UnknownRule(DomainError):
    code = "UnknownRule"


class UnknownInvoice(DomainError):
    code = "UnknownInvoice"


class UnknownPayment(DomainError):
    code = "UnknownPayment"


class UnknownEmployee(DomainError):
    code = "UnknownEmployee"


class SeparationOfDutyViolation(DomainError):
    code = "SeparationOfDutyViolation"


class InvoiceNotPayable(DomainError):
    code = "InvoiceNotPayable"


class WrongCustomer(DomainError):
    code = "WrongCustomer"


class NonpositiveAmount(DomainError):
    code = "NonpositiveAmount"


class AlreadyValidated(DomainError):
    code = "AlreadyValidated"


class InvoiceState(str, Enum):
    DRAFT = "Draft"
    VALIDATED = "Validated"
    REJECTED = "Rejected"
    PARTIALLY_PAID = "PartiallyPaid"
    PAID = "Paid"


class PaymentMethod(str, Enum):
    CARD = "Card"
    TRANSFER = "Transfer"
    CASH = "Cash"


class PaymentState(str, Enum):
    RECEIVED = "Received"
    ACCEPTED = "Accepted"
    REJECTED = "Rejected"


@dataclass
class Employee:
    id: EntityId
    name: str
    roles: set[str] = field(default_factory=set)

    def clone(self) -> Employee:
        return Employee(self.id, self.name, set(self.roles))

    def to_dict(self) -> dict:
        return {"id": str(self.id), "name": self.name, "roles": sorted(self.roles)}

    @classmethod
    def from_dict(cls, data: dict) -> Employee:
        return cls(EntityId.parse(data["id"]), data["name"], set(data["roles"]))


@dataclass(frozen=True)
class InvoiceItem:
    description: str
    product: EntityId | None
    quantity: Quantity
    unit_price: Money

    def extended_price(self) -> Money:
        return self.unit_price.scale(self.quantity)

    def to_dict(self) -> dict:
        return {
            "description": self.description,
            "product": str(self.product) if self.product else None,
            "quantity": self.quantity.value,
            "unit_price": self.unit_price.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> InvoiceItem:
        return cls(
            description=data["description"],
            product=EntityId.parse(data["product"]) if data["product"] else None,
            quantity=Quantity(int(data["quantity"])),
            unit_price=Money.from_dict(data["unit_price"]),
        )


@dataclass
class Invoice:
    id: EntityId
    customer: EntityId
    items: list[InvoiceItem] = field(default_factory=list)
    state: InvoiceState = InvoiceState.DRAFT
    created_by: EntityId = SYSTEM
    validated_by: EntityId | None = None
    applied_policies: list[str] = field(default_factory=list)
    adjustments: list[tuple[str, Money]] = field(default_factory=list)
    # provenance back-references for cross-subsystem audits
    source_cart: EntityId | None = None
    source_shipment: EntityId | None = None

    def clone(self) -> Invoice:
        return Invoice(self.id, self.customer, list(self.items), self.state,
                       self.created_by, self.validated_by,
                       list(self.applied_policies), list(self.adjustments),
                       self.source_cart, self.source_shipment)

    def subtotal(self, currency: str) -> Money:
        return money_sum((item.extended_price() for item in self.items), currency)

    def total(self, currency: str) -> Money:
        total = self.subtotal(currency)
        for _, adjustment in self.adjustments:
            total = total.add(adjustment)
        return total

    def to_dict(self) -> dict:
        return {
            "id": str(self.id),
            "customer": str(self.customer),
            "items": [item.to_dict() for item in self.items],
            "state": self.state.value,
            "created_by": str(self.created_by),
            "validated_by": str(self.validated_by) if self.validated_by else None,
            "applied_policies": list(self.applied_policies),
            "adjustments": [[name, money.to_dict()] for name, money in self.adjustments],
            "source_cart": str(self.source_cart) if self.source_cart else None,
            "source_shipment": str(self.source_shipment) if self.source_shipment else None,
        }

    @classmethod
    def from_dict(cls, data: dict) -> Invoice:
        return cls(
            id=EntityId.parse(data["id"]),
            customer=EntityId.parse(data["customer"]),
            items=[InvoiceItem.from_dict(i) for i in data["items"]],
            state=InvoiceState(data["state"]),
            created_by=EntityId.parse(data["created_by"]),
            validated_by=EntityId.parse(data["validated_by"]) if data["validated_by"] else None,
            applied_policies=list(data["applied_policies"]),
            adjustments=[(name, Money.from_dict(m)) for name, m in data["adjustments"]],
            source_cart=EntityId.parse(data["source_cart"]) if data["source_cart"] else None,
            source_shipment=EntityId.parse(data["source_shipment"]) if data["source_shipment"] else None,
        )


@dataclass
class Payment:
    id: EntityId
    invoice: EntityId
    customer: EntityId
    amount: Money
    method: PaymentMethod
    state: PaymentState = PaymentState.RECEIVED
    validated_by: EntityId | None = None
    reasons: list[str] = field(default_factory=list)

    def clone(self) -> Payment:
        return Payment(self.id, self.invoice, self.customer, self.amount,
                       self.method, self.state, self.validated_by,
                       list(self.reasons))

    def to_dict(self) -> dict:
        return {
            "id": str(self.id),
            "invoice": str(self.invoice),
            "customer": str(self.customer),
            "amount": self.amount.to_dict(),
            "method": self.method.value,
            "state": self.state.value,
            "validated_by": str(self.validated_by) if self.validated_by else None,
            "reasons": list(self.reasons),
        }

    @classmethod
    def from_dict(cls, data: dict) -> Payment:
        return cls(
            id=EntityId.parse(data["id"]),
            invoice=EntityId.parse(data["invoice"]),
            customer=EntityId.parse(data["customer"]),
            amount=Money.from_dict(data["amount"]),
            method=PaymentMethod(data["method"]),
            state=PaymentState(data["state"]),
            validated_by=EntityId.parse(data["validated_by"]) if data["validated_by"] else None,
            reasons=list(data["reasons"]),
        )


# --- declarative policies and rules -----------------------------------------

BILLING_POLICY_KINDS = ("percentage-discount", "flat-fee")
INVOICE_RULE_KINDS = ("nonempty-items", "nonnegative-total")
PAYMENT_RULE_KINDS = ("amount-positive", "method-allowed", "overpayment-guard")


@dataclass(frozen=True)
class BillingPolicy:
    """A named, deterministic invoice adjustment.

    ``percentage-discount`` subtracts a whole-number percent of the item
    subtotal (halves rounded away from zero); with ``loyalty_only`` it
    applies a zero adjustment to non-members. ``flat-fee`` adds a fixed
    non-negative charge.
    """

    name: str
    kind: str
    percent: int = 0
    fee: int = 0
    loyalty_only: bool = False

    def adjustment(self, item_subtotal: Money, loyalty_member: bool) -> Money:
        if self.kind == "percentage-discount":
            if self.loyalty_only and not loyalty_member:
                return Money.zero(item_subtotal.currency)
            discount = round_half_away(item_subtotal.amount * self.percent, 100)
            return Money(-discount, item_subtotal.currency)
        return Money(self.fee, item_subtotal.currency)


@dataclass(frozen=True)
class ValidationRule:
    """A named pure predicate over an invoice or a payment."""

    name: str
    target: str  # "Invoice" or "Payment"
    kind: str
    methods: tuple[str, ...] = ()

    def check_invoice(self, invoice: Invoice, currency: str) -> bool:
        if self.kind == "nonempty-items":
            return len(invoice.items) > 0
        return invoice.total(currency).amount >= 0

    def check_payment(self, payment: Payment, invoice_total: Money,
                      accepted_before: Money) -> bool:
        if self.kind == "amount-positive":
            return payment.amount.amount > 0
        if self.kind == "method-allowed":
            return payment.method.value in self.methods
        return accepted_before.amount + payment.amount.amount <= invoice_total.amount


@dataclass(frozen=True)
class RuleBook:
    """The loaded policy/rule config, keyed by name."""

    policies: dict[str, BillingPolicy]
    rules: dict[str, ValidationRule]

    @classmethod
    def from_dict(cls, data: dict) -> RuleBook:
        policies: dict[str, BillingPolicy] = {}
        for raw in data.get("billing_policies", []):
            name, kind = raw.get("name"), raw.get("kind")
            if not name or kind not in BILLING_POLICY_KINDS:
                raise SchemaError(f"bad billing policy entry: {raw}")
            if name in policies:
                raise SchemaError(f"duplicate billing policy: {name}")
            percent = int(raw.get("percent", 0))
            fee = int(raw.get("amount", 0))
            if kind == "percentage-discount" and not 0 <= percent <= 100:
                raise SchemaError(f"percent must be 0..100 in policy {name}")
            if kind == "flat-fee" and fee < 0:
                raise SchemaError(f"fee must be >= 0 in policy {name}")
            policies[name] = BillingPolicy(
                name=name, kind=kind, percent=percent, fee=fee,
                loyalty_only=bool(raw.get("loyalty_only", False)))

        rules: dict[str, ValidationRule] = {}
        for raw in data.get("validation_rules", []):
            name, target, kind = raw.get("name"), raw.get("target"), raw.get("kind")
            if not name or target not in ("Invoice", "Payment"):
                raise SchemaError(f"bad validation rule entry: {raw}")
            if name in rules:
                raise SchemaError(f"duplicate validation rule: {name}")
            expected = INVOICE_RULE_KINDS if target == "Invoice" else PAYMENT_RULE_KINDS
            if kind not in expected:
                raise SchemaError(f"rule kind {kind!r} invalid for target {target}")
            methods = tuple(raw.get("methods", ()))
            for method in methods:
                PaymentMethod(method)
            rules[name] = ValidationRule(name=name, target=target, kind=kind,
                                         methods=methods)
        return cls(policies=policies, rules=rules)

    def policy(self, name: str) -> BillingPolicy:
        policy = self.policies.get(name)
        if policy is None:
            raise UnknownPolicy(f"no billing policy named {name!r}")
        return policy

    def rule(self, name: str, target: str) -> ValidationRule:
        rule = self.rules.get(name)
        if rule is None:
            raise UnknownRule(f"no validation rule named {name!r}")
        if rule.target != target:
            raise UnknownRule(f"rule {name!r} targets {rule.target}, not {target}")
        return rule


DEFAULT_RULEBOOK_CONFIG = {
    "billing_policies": [
        {"name": "loyalty-5pct", "kind": "percentage-discount", "percent": 5,
         "loyalty_only": True},
        {"name": "handling-fee", "kind": "flat-fee", "amount": 200},
    ],
    "validation_rules": [
        {"name": "nonempty-items", "target": "Invoice", "kind": "nonempty-items"},
        {"name": "nonnegative-total", "target": "Invoice", "kind": "nonnegative-total"},
        {"name": "amount-positive", "target": "Payment", "kind": "amount-positive"},
        {"name": "method-allowed", "target": "Payment", "kind": "method-allowed",
         "methods": ["Card", "Transfer"]},
        {"name": "overpayment-guard", "target": "Payment", "kind": "overpayment-guard"},
    ],
}


def default_rulebook() -> RuleBook:
    return RuleBook.from_dict(DEFAULT_RULEBOOK_CONFIG)


# --- operations --------------------------------------------------------------

def create_employee(txn, name: str, roles: set[str] | None = None) -> EntityId:
    employee_id = txn.next_id("employee")
    txn.create("employees", Employee(id=employee_id, name=name,
                                     roles=set(roles or ())))
    return employee_id


def _require_invoice(state, invoice_id: EntityId) -> Invoice:
    invoice = state.stores["invoices"].get(invoice_id)
    if invoice is None:
        raise UnknownInvoice(f"no invoice {invoice_id}")
    return invoice


def create_invoice(txn, creator: EntityId, customer_id: EntityId) -> EntityId:
    if creator != SYSTEM and creator not in txn.state.stores["employees"]:
        raise UnknownEmployee(f"no employee {creator}")
    if customer_id not in txn.state.stores["customers"]:
        raise UnknownCustomer(f"no customer {customer_id}")
    invoice_id = txn.next_id("invoice")
    txn.create("invoices", Invoice(id=invoice_id, customer=customer_id,
                                   created_by=creator))
    return invoice_id


def create_invoice_for_cart(txn, cart) -> EntityId:
    """Checkout path: a draft invoice with one item per cart line."""
    items = []
    for line in cart.items:
        product = txn.state.stores["products"][line.product]
        items.append(InvoiceItem(description=product.name, product=line.product,
                                 quantity=line.quantity,
                                 unit_price=line.unit_price))
    invoice_id = txn.next_id("invoice")
    txn.create("invoices", Invoice(id=invoice_id, customer=cart.customer,
                                   items=items, created_by=SYSTEM,
                                   source_cart=cart.id))
    return invoice_id


def create_invoice_for_shipment(txn, customer_id: EntityId,
                                items: list[InvoiceItem],
                                shipment_id: EntityId) -> EntityId:
    """Shipping path: an already-validated invoice for the dispatched goods."""
    invoice_id = txn.next_id("invoice")
    txn.create("invoices", Invoice(id=invoice_id, customer=customer_id,
                                   items=items, state=InvoiceState.VALIDATED,
                                   created_by=SYSTEM, validated_by=SYSTEM,
                                   source_shipment=shipment_id))
    return invoice_id


def prepare_invoice(txn, rulebook: RuleBook, invoice_id: EntityId,
                    edits: list, policies: list[str], currency: str) -> Money:
    """Apply item edits in order, then the named policies once each.

    Each edit is ``("add", InvoiceItem)`` or ``("delete", description)``;
    deletes remove the first item with that description. Returns the new
    total after the recorded adjustments.
    """
    invoice = _require_invoice(txn.state, invoice_id)
    if invoice.state is not InvoiceState.DRAFT:
        raise NotDraft(f"invoice {invoice_id} is {invoice.state.value}")
    for name in policies:
        rulebook.policy(name)

    invoice = txn.get_mut("invoices", invoice_id, UnknownInvoice)
    for action, value in edits:
        if action == "add":
            invoice.items.append(value)
        else:
            for item in invoice.items:
                if item.description == value:
                    invoice.items.remove(item)
                    break
            else:
                raise UnknownItem(f"no invoice item described as {value!r}")

    customer = txn.state.stores["customers"][invoice.customer]
    item_subtotal = invoice.subtotal(currency)
    for name in policies:
        policy = rulebook.policy(name)
        adjustment = policy.adjustment(item_subtotal, customer.loyalty_member)
        invoice.applied_policies.append(name)
        invoice.adjustments.append((name, adjustment))
    return invoice.total(currency)


def validate_invoice(txn, rulebook: RuleBook, validator: EntityId,
                     invoice_id: EntityId, rule_names: list[str],
                     currency: str) -> tuple[str, list[str]]:
    """Run the named invoice rules; all-pass validates, any-fail rejects.

    The creator may never validate their own invoice. System-created
    invoices may be validated by any employee.
    """
    if validator not in txn.state.stores["employees"]:
        raise UnknownEmployee(f"no employee {validator}")
    invoice = _require_invoice(txn.state, invoice_id)
    if invoice.state is not InvoiceState.DRAFT:
        raise NotDraft(f"invoice {invoice_id} is {invoice.state.value}")
    rules = [rulebook.rule(name, "Invoice") for name in rule_names]
    if invoice.created_by.kind == "employee" and validator == invoice.created_by:
        raise SeparationOfDutyViolation(
            f"{validator} created invoice {invoice_id} and cannot validate it")

    failed = [rule.name for rule in rules
              if not rule.check_invoice(invoice, currency)]
    invoice = txn.get_mut("invoices", invoice_id, UnknownInvoice)
    invoice.validated_by = validator
    invoice.state = InvoiceState.REJECTED if failed else InvoiceState.VALIDATED
    return invoice.state.value, failed


def accepted_sum(state, invoice_id: EntityId, currency: str) -> Money:
    amounts = (payment.amount for payment in state.stores["payments"].values()
               if payment.invoice == invoice_id
               and payment.state is PaymentState.ACCEPTED)
    return money_sum(amounts, currency)


def record_payment(txn, customer_id: EntityId, invoice_id: EntityId,
                   amount: Money, method: PaymentMethod,
                   currency: str) -> EntityId:
    invoice = _require_invoice(txn.state, invoice_id)
    if invoice.state not in (InvoiceState.VALIDATED, InvoiceState.PARTIALLY_PAID):
        raise InvoiceNotPayable(f"invoice {invoice_id} is {invoice.state.value}")
    if customer_id != invoice.customer:
        raise WrongCustomer(
            f"invoice {invoice_id} belongs to {invoice.customer}, not {customer_id}")
    if amount.currency != currency:
        raise CurrencyMismatch(f"payments must be in {currency}")
    if amount.amount <= 0:
        raise NonpositiveAmount(f"payment must be > 0, got {amount.amount}")
    payment_id = txn.next_id("payment")
    txn.create("payments", Payment(id=payment_id, invoice=invoice_id,
                                   customer=customer_id, amount=amount,
                                   method=method))
    return payment_id


def validate_payment(txn, rulebook: RuleBook, validator: EntityId,
                     payment_id: EntityId, rule_names: list[str],
                     currency: str) -> tuple[str, list[str]]:
    """Accept or reject a received payment and advance the invoice.

    Acceptance that would push the accepted sum past the invoice total is
    always rejected with reason ``overpayment``, whether or not the guard
    rule was named.
    """
    if validator not in txn.state.stores["employees"]:
        raise UnknownEmployee(f"no employee {validator}")
    payment = txn.state.stores["payments"].get(payment_id)
    if payment is None:
        raise UnknownPayment(f"no payment {payment_id}")
    if payment.state is not PaymentState.RECEIVED:
        raise AlreadyValidated(f"payment {payment_id} is {payment.state.value}")
    rules = [rulebook.rule(name, "Payment") for name in rule_names]

    invoice = _require_invoice(txn.state, payment.invoice)
    total = invoice.total(currency)
    accepted_before = accepted_sum(txn.state, invoice.id, currency)

    reasons = [rule.name for rule in rules
               if not rule.check_payment(payment, total, accepted_before)]
    if accepted_before.amount + payment.amount.amount > total.amount:
        if "overpayment" not in reasons:
            reasons.append("overpayment")
    # the named guard rule reports under the canonical reason
    reasons = ["overpayment" if r == "overpayment-guard" else r for r in reasons]
    reasons = sorted(set(reasons))

    payment = txn.get_mut("payments", payment_id, UnknownPayment)
    payment.validated_by = validator
    if reasons:
        payment.state = PaymentState.REJECTED
        payment.reasons = reasons
        return payment.state.value, reasons

    payment.state = PaymentState.ACCEPTED
    invoice = txn.get_mut("invoices", invoice.id, UnknownInvoice)
    accepted_now = accepted_before.add(payment.amount)
    if accepted_now.amount == total.amount:
        invoice.state = InvoiceState.PAID
    else:
        invoice.state = InvoiceState.PARTIALLY_PAID
    return payment.state.value, []


def invoice_balance(state, invoice_id: EntityId, currency: str) -> Money:
    invoice = _require_invoice(state, invoice_id)
    return invoice.total(currency).sub(accepted_sum(state, invoice_id, currency))
