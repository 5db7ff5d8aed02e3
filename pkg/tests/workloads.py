"""Seeded generation of valid transaction workloads with a parallel plain model.

The generator picks random contract calls that its own dict/set model says
must succeed, signs them for real, and advances the model. Tests then drive
the actual state machine with the stream and compare endpoints: relations,
event folds, replayed roots. The model implements the rules independently —
it is the oracle, not a wrapper.
"""

from __future__ import annotations

import hashlib
import random

from rolechain.payloads import (
    GrantPermissionPayload,
    RegisterUserPayload,
    RevokePermissionPayload,
    UpdateUserRolePayload,
)
from rolechain.state import Permission
from rolechain.wallet import create_wallet, sign_transaction

PASSPHRASE = "workload passphrase 9"

RESOURCES = ["ledger", "vault", "report", "api"]
ACTIONS = ["read", "write", "audit", "exec"]


class WorkloadBuilder:
    """Generates a valid transaction sequence against the standard test genesis."""

    def __init__(self, genesis_file, seed: int, n_users: int = 12):
        self.rng = random.Random(seed)
        self.genesis = genesis_file
        self.orgs = {
            org.org_id: {
                role: (policy.self_assignable, policy.max_holders)
                for role, policy in org.role_catalog.items()
            }
            for org in genesis_file.orgs
        }
        self.admins = {org.org_id: sorted(org.admins)[0] for org in genesis_file.orgs}

        self.wallets = {}
        self.passphrases: dict[str, str] = {}
        for i in range(n_users):
            w = create_wallet(
                hashlib.sha256(f"workload-user-{seed}-{i}".encode()).digest(),
                PASSPHRASE,
                kdf_salt=hashlib.sha256(f"ws-{seed}-{i}".encode()).digest()[:16],
                iterations=10,
            )
            self.wallets[w.address] = w
            self.passphrases[w.address] = PASSPHRASE
        self.admin_wallets = {}
        for org in genesis_file.orgs:
            for addr in org.admins:
                self.admin_wallets[addr] = None  # filled by caller via attach_admins

        # plain model
        self.registered: set[str] = set()
        self.ura: set[tuple[str, str, str]] = set()
        self.pra: set[tuple[str, str, tuple[str, str]]] = set()
        self.nonces: dict[str, int] = {}

    def attach_admins(self, wallets_by_addr: dict, passphrase: str) -> None:
        for addr in list(self.admin_wallets):
            self.admin_wallets[addr] = wallets_by_addr[addr]
            self.passphrases[addr] = passphrase

    # --- helpers -------------------------------------------------------------

    def _sign(self, wallet, payload):
        nonce = self.nonces.get(wallet.address, 0)
        tx = sign_transaction(
            wallet, self.passphrases[wallet.address], wallet.address, nonce, payload
        )
        self.nonces[wallet.address] = nonce + 1
        return tx

    def _holders(self, org: str, role: str) -> int:
        return sum(1 for _, o, r in self.ura if o == org and r == role)

    def _capacity_ok(self, user: str, org: str, role: str) -> bool:
        _, cap = self.orgs[org][role]
        if (user, org, role) in self.ura:
            return True
        return cap is None or self._holders(org, role) < cap

    # --- op generators: each returns a tx or None if not constructible --------

    def _op_register(self):
        pool = [a for a in self.wallets if a not in self.registered]
        if not pool:
            return None
        user = self.rng.choice(sorted(pool))
        org = self.rng.choice(sorted(self.orgs))
        candidates = [
            role for role, (selfa, _) in self.orgs[org].items()
            if selfa and self._capacity_ok(user, org, role)
        ]
        if not candidates:
            return None
        role = self.rng.choice(sorted(candidates))
        w = self.wallets[user]
        tx = self._sign(w, RegisterUserPayload(
            user=user, public_key=w.public_key, password_digest=w.password_digest,
            org=org, requested_role=role,
        ))
        self.registered.add(user)
        self.ura.add((user, org, role))
        return tx

    def _op_update(self):
        held = sorted(t for t in self.ura if t[0] in self.wallets)
        if not held:
            return None
        user, org, old = self.rng.choice(held)
        choices = [
            r for r in self.orgs[org]
            if r != old and self._capacity_ok(user, org, r)
        ]
        if not choices:
            return None
        new = self.rng.choice(sorted(choices))
        self_assignable, _ = self.orgs[org][new]
        payload = UpdateUserRolePayload(user=user, org=org, old_role=old, new_role=new)
        if self_assignable and self.rng.random() < 0.5:
            tx = self._sign(self.wallets[user], payload)
        else:
            tx = self._sign(self.admin_wallets[self.admins[org]], payload)
        self.ura.discard((user, org, old))
        self.ura.add((user, org, new))
        return tx

    def _op_add_role(self):
        if not self.registered:
            return None
        user = self.rng.choice(sorted(self.registered))
        org = self.rng.choice(sorted(self.orgs))
        choices = [r for r in self.orgs[org] if self._capacity_ok(user, org, r)]
        if not choices:
            return None
        new = self.rng.choice(sorted(choices))
        tx = self._sign(
            self.admin_wallets[self.admins[org]],
            UpdateUserRolePayload(user=user, org=org, old_role="none", new_role=new),
        )
        self.ura.add((user, org, new))
        return tx

    def _op_grant(self):
        org = self.rng.choice(sorted(self.orgs))
        free = [
            (role, (res, act))
            for role in self.orgs[org]
            for res in RESOURCES
            for act in ACTIONS
            if (org, role, (res, act)) not in self.pra
        ]
        if not free:
            return None
        role, (res, act) = self.rng.choice(free)
        tx = self._sign(
            self.admin_wallets[self.admins[org]],
            GrantPermissionPayload(org=org, role=role, permission=Permission(res, act)),
        )
        self.pra.add((org, role, (res, act)))
        return tx

    def _op_revoke(self):
        if not self.pra:
            return None
        org, role, (res, act) = self.rng.choice(sorted(self.pra))
        tx = self._sign(
            self.admin_wallets[self.admins[org]],
            RevokePermissionPayload(org=org, role=role, permission=Permission(res, act)),
        )
        self.pra.discard((org, role, (res, act)))
        return tx

    def generate(self, n: int):
        """Produce *n* valid transactions (fewer only if nothing is constructible)."""
        ops = [
            (self._op_register, 30),
            (self._op_update, 20),
            (self._op_add_role, 15),
            (self._op_grant, 25),
            (self._op_revoke, 10),
        ]
        txs = []
        stall = 0
        while len(txs) < n and stall < 50:
            fn = self.rng.choices([f for f, _ in ops], weights=[w for _, w in ops])[0]
            tx = fn()
            if tx is None:
                stall += 1
                continue
            stall = 0
            txs.append(tx)
        return txs
