"""Scenario runner and CLI contract: exit codes, reports, log verification."""

import contextlib
import io
import json

import pytest

from storefront import bundled
from storefront.cli import main
from storefront.scenario import ParseError, parse_scenario

RBAC = str(bundled.rbac_config())


def run_cli(*argv):
    buffer = io.StringIO()
    with contextlib.redirect_stdout(buffer), contextlib.redirect_stderr(buffer):
        code = main(list(argv))
    return code, buffer.getvalue()


def test_every_bundled_scenario_runs_clean(tmp_path):
    assert len(bundled.scenario_files()) == 13
    for path in bundled.scenario_files():
        out_dir = tmp_path / path.stem
        code, output = run_cli("run", str(path), "--rbac", RBAC,
                               "--out", str(out_dir))
        assert code == 0, f"{path.stem}:\n{output}"
        assert (out_dir / "events.jsonl").exists()
        report = json.loads((out_dir / "report.json").read_text())
        assert report["ok"] is True
        assert report["invariants"]["violations"] == []


def test_verify_accepts_every_emitted_log(tmp_path):
    for path in bundled.scenario_files():
        out_dir = tmp_path / path.stem
        code, _ = run_cli("run", str(path), "--rbac", RBAC, "--out", str(out_dir))
        assert code == 0
        code, output = run_cli("verify", str(out_dir / "events.jsonl"))
        assert code == 0, output


def test_verify_flags_missing_line(tmp_path):
    scenario = bundled.scenario_dir() / "cart-checkout.json"
    out_dir = tmp_path / "run"
    run_cli("run", str(scenario), "--rbac", RBAC, "--out", str(out_dir))
    log = out_dir / "events.jsonl"
    lines = log.read_text().splitlines()
    log.write_text("\n".join(lines[:3] + lines[4:]) + "\n")
    code, output = run_cli("verify", str(log))
    assert code == 1
    assert "seq" in output


def test_verify_flags_tampered_quantity(tmp_path):
    scenario = bundled.scenario_dir() / "stock-intake.json"
    out_dir = tmp_path / "run"
    run_cli("run", str(scenario), "--rbac", RBAC, "--out", str(out_dir))
    log = out_dir / "events.jsonl"
    # edit the item's final snapshot so no later put masks the tamper
    tampered = log.read_text().replace('"on_hand":206', '"on_hand":999')
    assert '"on_hand":999' in tampered
    log.write_text(tampered)
    code, output = run_cli("verify", str(log))
    assert code == 1
    assert "stock-conservation" in output


def test_unparsable_scenario_exits_two(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    code, _ = run_cli("run", str(bad))
    assert code == 2
    shapeless = tmp_path / "shapeless.json"
    shapeless.write_text(json.dumps({"name": "x"}))
    code, _ = run_cli("run", str(shapeless))
    assert code == 2


def test_failed_expectation_exits_one(tmp_path):
    scenario = {
        "name": "wrong-expectation",
        "commands": [
            {"op": "create_customer", "actor": "system",
             "args": {"name": "Ana", "roles": ["Shopper"]}, "as": "ana"}
        ],
        "expectations": [
            {"query": "product_price", "args": {"product": "@product:WidgetA"},
             "expect": {"amount": 1, "currency": "USD"}}
        ],
    }
    path = tmp_path / "wrong.json"
    path.write_text(json.dumps(scenario))
    code, output = run_cli("run", str(path), "--out", str(tmp_path / "out"))
    assert code == 1
    assert "FAIL" in output


def test_unexpected_domain_error_fails_run(tmp_path):
    scenario = {
        "name": "unexpected-error",
        "commands": [
            {"op": "create_customer", "actor": "system",
             "args": {"name": "Ana", "roles": ["Shopper"]}, "as": "ana"},
            {"op": "create_cart", "actor": "$ana", "args": {"customer": "$ana"},
             "as": "cart"},
            {"op": "checkout", "actor": "$ana", "args": {"cart": "$cart"}}
        ],
    }
    path = tmp_path / "boom.json"
    path.write_text(json.dumps(scenario))
    code, output = run_cli("run", str(path), "--out", str(tmp_path / "out"))
    assert code == 1
    assert "EmptyCart" in output


def test_expected_error_must_match(tmp_path):
    scenario = {
        "name": "expected-error-mismatch",
        "commands": [
            {"op": "create_customer", "actor": "system",
             "args": {"name": "Ana", "roles": ["Shopper"]}, "as": "ana"},
            {"op": "create_cart", "actor": "$ana", "args": {"customer": "$ana"},
             "as": "cart", "expect_error": "EmptyCart"}
        ],
    }
    path = tmp_path / "mismatch.json"
    path.write_text(json.dumps(scenario))
    code, _ = run_cli("run", str(path), "--out", str(tmp_path / "out"))
    assert code == 1


def test_reports_are_pure_functions_of_inputs(tmp_path):
    scenario = bundled.scenario_dir() / "full-purchase.json"
    outputs = []
    for tag in ("a", "b"):
        out_dir = tmp_path / tag
        code, _ = run_cli("run", str(scenario), "--rbac", RBAC,
                          "--out", str(out_dir))
        assert code == 0
        outputs.append(((out_dir / "report.json").read_bytes(),
                        (out_dir / "events.jsonl").read_bytes()))
    assert outputs[0] == outputs[1]


def test_unresolved_reference_fails_step(tmp_path):
    scenario = {
        "name": "dangling",
        "commands": [
            {"op": "create_cart", "actor": "$ghost", "args": {"customer": "$ghost"}}
        ],
    }
    path = tmp_path / "dangling.json"
    path.write_text(json.dumps(scenario))
    code, output = run_cli("run", str(path), "--out", str(tmp_path / "out"))
    assert code == 1
    assert "UnresolvedReference" in output


def test_verify_rejects_negative_quantity_fact(tmp_path):
    """Negative quantities are outside the value domain; replay refuses them."""
    scenario = bundled.scenario_dir() / "stock-intake.json"
    out_dir = tmp_path / "run"
    run_cli("run", str(scenario), "--rbac", RBAC, "--out", str(out_dir))
    log = out_dir / "events.jsonl"
    log.write_text(log.read_text().replace('"on_hand":206', '"on_hand":-206'))
    code, output = run_cli("verify", str(log))
    assert code == 2
    assert "NegativeQuantity" in output


def test_explicit_policy_and_currency_flags(tmp_path):
    scenario = bundled.scenario_dir() / "invoice-preparation.json"
    code, _ = run_cli("run", str(scenario), "--rbac", RBAC,
                      "--policies", str(bundled.policies_config()),
                      "--currency", "USD", "--out", str(tmp_path / "out"))
    assert code == 0


def test_parse_scenario_rejects_unknown_keys():
    with pytest.raises(ParseError):
        parse_scenario({"name": "x", "commands": [], "extra": 1})
    with pytest.raises(ParseError):
        parse_scenario({"name": "x",
                        "commands": [{"op": "create_cart", "typo": 1}]})
    with pytest.raises(ParseError):
        parse_scenario({"name": "x", "commands": [],
                        "expectations": [{"query": "cart_total"}]})
