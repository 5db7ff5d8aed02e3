"""Declarative simulation scenarios.

A scenario file is self-contained: named actors (with key seeds), the
validator set and organizations drawn from those actors, a fault schedule,
and a workload of contract calls stamped with submission ticks. The runner
derives every wallet, builds the genesis, signs and injects the workload,
and runs the network to quiescence — deterministically, so two runs of the
same file produce the same report.

Example::

    {
      "name": "demo",
      "actors": {"v0": {}, "v1": {}, "v2": {}, "v3": {}, "boss": {}, "ann": {}},
      "validators": ["v0", "v1", "v2", "v3"],
      "orgs": [{"org_id": "acme", "admins": ["boss"],
                "role_catalog": {"member": {"self_assignable": true, "max_holders": null}}}],
      "network": {"rng_seed": 7},
      "workload": [
        {"tick": 1, "op": "register_user", "actor": "ann", "org": "acme", "role": "member"}
      ],
      "max_ticks": 300
    }
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

from .consensus import (
    CrashRule,
    DropRule,
    Network,
    NetworkConfig,
    PartitionRule,
    run_until_quiescent,
    step,
    submit_tx,
)
from .errors import SimTimeout
from .payloads import (
    GrantPermissionPayload,
    RegisterUserPayload,
    RevokePermissionPayload,
    UpdateUserRolePayload,
)
from .state import OrgRecord, Permission, RolePolicy
from .store import GenesisFile, build_genesis_state
from .wallet import Wallet, create_wallet, sign_transaction

DEFAULT_PASSPHRASE = "scenario-passphrase"
_KDF_ITERATIONS = 100  # simulation wallets are throwaway; favor speed


@dataclass
class Scenario:
    name: str
    actors: dict[str, Wallet]
    passphrases: dict[str, str]
    genesis: GenesisFile
    config: NetworkConfig
    workload: list[dict]
    max_ticks: int = 300


def _actor_wallet(name: str, entry: dict) -> tuple[Wallet, str]:
    seed_hex = entry.get("seed")
    seed = bytes.fromhex(seed_hex) if seed_hex else hashlib.sha256(
        b"rolechain-scenario-actor:" + name.encode("utf-8")
    ).digest()
    passphrase = entry.get("passphrase", DEFAULT_PASSPHRASE)
    salt = hashlib.sha256(b"salt:" + name.encode("utf-8")).digest()[:16]
    return create_wallet(seed, passphrase, kdf_salt=salt, iterations=_KDF_ITERATIONS), passphrase


def load_scenario(source: str | Path | dict) -> Scenario:
    doc = source if isinstance(source, dict) else json.loads(Path(source).read_text("utf-8"))
    name = doc.get("name", "scenario")
    actors: dict[str, Wallet] = {}
    passphrases: dict[str, str] = {}
    for actor_name, entry in doc["actors"].items():
        actors[actor_name], passphrases[actor_name] = _actor_wallet(actor_name, entry or {})

    def addr(actor_name: str) -> str:
        if actor_name not in actors:
            raise ValueError(f"workload references unknown actor {actor_name!r}")
        return actors[actor_name].address

    validators = [addr(v) for v in doc["validators"]]
    orgs = tuple(
        OrgRecord(
            org_id=o["org_id"],
            admins=frozenset(addr(a) for a in o["admins"]),
            role_catalog={
                role: RolePolicy(
                    role_id=role,
                    self_assignable=bool(policy.get("self_assignable", False)),
                    max_holders=policy.get("max_holders"),
                )
                for role, policy in o["role_catalog"].items()
            },
        )
        for o in doc["orgs"]
    )
    genesis = GenesisFile(chain_id=name, validators=tuple(validators), orgs=orgs)

    net = doc.get("network", {})
    config = NetworkConfig(
        validators=validators,
        rng_seed=net.get("rng_seed", 0),
        crash_rules=[CrashRule(**r) for r in net.get("crash_rules", [])],
        partition_rules=[
            PartitionRule(
                from_tick=r["from_tick"],
                to_tick=r["to_tick"],
                groups=tuple(tuple(g) for g in r["groups"]),
            )
            for r in net.get("partition_rules", [])
        ],
        drop_rules=[DropRule(**r) for r in net.get("drop_rules", [])],
    )
    workload = sorted(doc.get("workload", []), key=lambda w: w["tick"])
    return Scenario(
        name=name,
        actors=actors,
        passphrases=passphrases,
        genesis=genesis,
        config=config,
        workload=workload,
        max_ticks=doc.get("max_ticks", 300),
    )


def _build_payload(sc: Scenario, item: dict):
    op = item["op"]
    actor = sc.actors[item["actor"]]
    if op == "register_user":
        return RegisterUserPayload(
            user=actor.address,
            public_key=actor.public_key,
            password_digest=actor.password_digest,
            org=item["org"],
            requested_role=item["role"],
        )
    if op == "update_user_role":
        return UpdateUserRolePayload(
            user=sc.actors[item["user"]].address,
            org=item["org"],
            old_role=item["old_role"],
            new_role=item["new_role"],
        )
    if op == "grant_permission":
        return GrantPermissionPayload(
            org=item["org"], role=item["role"],
            permission=Permission(item["resource"], item["action"]),
        )
    if op == "revoke_permission":
        return RevokePermissionPayload(
            org=item["org"], role=item["role"],
            permission=Permission(item["resource"], item["action"]),
        )
    raise ValueError(f"unknown workload op {op!r}")


def run_scenario(sc: Scenario) -> tuple[Network, dict]:
    """Execute the scenario and return (network, report)."""
    network = Network(sc.config, build_genesis_state(sc.genesis))
    nonces: dict[str, int] = {}
    submitted = []

    pending = list(sc.workload)
    while pending and network.tick < sc.max_ticks:
        while pending and pending[0]["tick"] <= network.tick:
            item = pending.pop(0)
            actor_name = item["actor"]
            wallet = sc.actors[actor_name]
            payload = _build_payload(sc, item)
            nonce = nonces.get(actor_name, 0)
            tx = sign_transaction(
                wallet, sc.passphrases[actor_name], wallet.address, nonce, payload
            )
            via = None
            if "via" in item:
                via = sc.config.validators[item["via"]]
            ok, reason, tx_id = submit_tx(network, tx, via=via)
            if ok:
                nonces[actor_name] = nonce + 1
            submitted.append(
                {"tick": network.tick, "op": item["op"], "actor": actor_name,
                 "accepted": ok, "reason": reason, "tx_id": tx_id}
            )
        step(network)

    budget = sc.max_ticks - network.tick
    try:
        result = run_until_quiescent(network, max(budget, 1))
    except SimTimeout as exc:
        result = exc.report
    result["scenario"] = sc.name
    result["submissions"] = submitted
    return network, result


def run_scenario_file(path: str | Path) -> tuple[Network, dict]:
    return run_scenario(load_scenario(path))
