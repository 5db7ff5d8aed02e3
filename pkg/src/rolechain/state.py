"""The replicated identity state: users, organizations, role and permission relations.

The world state is a value. Applying a transaction never mutates the input
state; it validates against it, then returns a fresh copy with the change
plus the audit events the change emitted. Replaying a chain of blocks from
the genesis state reconstructs the exact same value on every node, which is
what the per-block ``state_root`` digests pin down.

Two relations carry the access-control model:

* ``ura`` — (user address, org id, role id): who holds which role where.
* ``pra`` — (org id, role id, permission): what each role may do.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any

from . import codec, keys
from .errors import BadNonce, BadSignature, ReplayDivergence

if TYPE_CHECKING:  # pragma: no cover
    from .ledger import Chain
    from .payloads import SignedTransaction

MAX_ID_LENGTH = 64

EVENT_USER_REGISTERED = "UserRegistered"
EVENT_USER_ROLE_UPDATED = "UserRoleUpdated"
EVENT_PERMISSION_GRANTED = "PermissionGranted"
EVENT_PERMISSION_REVOKED = "PermissionRevoked"
EVENT_KINDS = (
    EVENT_USER_REGISTERED,
    EVENT_USER_ROLE_UPDATED,
    EVENT_PERMISSION_GRANTED,
    EVENT_PERMISSION_REVOKED,
)


def _check_id(value: str, label: str) -> str:
    if not isinstance(value, str) or not value or len(value) > MAX_ID_LENGTH:
        raise ValueError(f"{label} must be a non-empty string of at most {MAX_ID_LENGTH} chars")
    return value


@dataclass(frozen=True)
class Permission:
    """A (resource, action) capability, e.g. ("ledger", "read")."""

    resource: str
    action: str

    def __post_init__(self):
        _check_id(self.resource, "permission resource")
        _check_id(self.action, "permission action")

    def to_dict(self) -> dict:
        return {"action": self.action, "resource": self.resource}

    @classmethod
    def from_dict(cls, d: dict) -> "Permission":
        return cls(resource=d["resource"], action=d["action"])


@dataclass(frozen=True)
class RolePolicy:
    """Assignment policy for one role: who may take it and how many may hold it."""

    role_id: str
    self_assignable: bool = False
    max_holders: int | None = None  # None = unlimited

    def __post_init__(self):
        _check_id(self.role_id, "role id")
        if self.max_holders is not None and self.max_holders < 1:
            raise ValueError("max_holders must be positive or None")

    def to_dict(self) -> dict:
        return {
            "max_holders": self.max_holders,
            "role_id": self.role_id,
            "self_assignable": self.self_assignable,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RolePolicy":
        return cls(
            role_id=d["role_id"],
            self_assignable=bool(d["self_assignable"]),
            max_holders=d["max_holders"],
        )


@dataclass(frozen=True)
class OrgRecord:
    """An organization fixed at genesis: its admins and its role catalog."""

    org_id: str
    admins: frozenset[str]
    role_catalog: dict[str, RolePolicy]

    def __post_init__(self):
        _check_id(self.org_id, "org id")
        if not self.admins:
            raise ValueError(f"org {self.org_id!r} has no admins")

    def to_dict(self) -> dict:
        return {
            "admins": sorted(self.admins),
            "org_id": self.org_id,
            "role_catalog": {r: p.to_dict() for r, p in sorted(self.role_catalog.items())},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "OrgRecord":
        return cls(
            org_id=d["org_id"],
            admins=frozenset(codec.require_hex(a, 20, "admin address") for a in d["admins"]),
            role_catalog={r: RolePolicy.from_dict(p) for r, p in d["role_catalog"].items()},
        )


@dataclass(frozen=True)
class UserRecord:
    address: str
    public_key: str
    password_digest: str
    registered_at: tuple[int, int]  # (block height, tx index)

    def to_dict(self) -> dict:
        return {
            "address": self.address,
            "password_digest": self.password_digest,
            "public_key": self.public_key,
            "registered_at": list(self.registered_at),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "UserRecord":
        return cls(
            address=d["address"],
            public_key=d["public_key"],
            password_digest=d["password_digest"],
            registered_at=(d["registered_at"][0], d["registered_at"][1]),
        )


@dataclass(frozen=True)
class Event:
    """One immutable audit record, anchored to its (block height, tx index)."""

    kind: str
    attributes: tuple[tuple[str, Any], ...]
    height: int
    tx_index: int

    @classmethod
    def make(cls, kind: str, attributes: dict, height: int, tx_index: int) -> "Event":
        if kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {kind!r}")
        return cls(
            kind=kind,
            attributes=tuple(sorted(attributes.items())),
            height=height,
            tx_index=tx_index,
        )

    @property
    def attrs(self) -> dict:
        return dict(self.attributes)

    def to_dict(self) -> dict:
        return {
            "attributes": {
                k: (v.to_dict() if isinstance(v, Permission) else v)
                for k, v in self.attributes
            },
            "height": self.height,
            "kind": self.kind,
            "tx_index": self.tx_index,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Event":
        attrs = dict(d["attributes"])
        if "permission" in attrs and isinstance(attrs["permission"], dict):
            attrs["permission"] = Permission.from_dict(attrs["permission"])
        return cls.make(d["kind"], attrs, d["height"], d["tx_index"])


@dataclass
class WorldState:
    """The full replicated state; see module docstring for the relations."""

    users: dict[str, UserRecord] = field(default_factory=dict)
    orgs: dict[str, OrgRecord] = field(default_factory=dict)
    ura: set[tuple[str, str, str]] = field(default_factory=set)
    pra: set[tuple[str, str, Permission]] = field(default_factory=set)
    nonces: dict[str, int] = field(default_factory=dict)

    def clone(self) -> "WorldState":
        # Records are immutable, so container-level copies are enough.
        return WorldState(
            users=dict(self.users),
            orgs=dict(self.orgs),
            ura=set(self.ura),
            pra=set(self.pra),
            nonces=dict(self.nonces),
        )

    def to_dict(self) -> dict:
        return {
            "nonces": {a: n for a, n in sorted(self.nonces.items())},
            "orgs": {o: rec.to_dict() for o, rec in sorted(self.orgs.items())},
            "pra": [
                [o, r, p.to_dict()]
                for o, r, p in sorted(self.pra, key=lambda t: (t[0], t[1], t[2].resource, t[2].action))
            ],
            "ura": [list(t) for t in sorted(self.ura)],
            "users": {a: rec.to_dict() for a, rec in sorted(self.users.items())},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "WorldState":
        return cls(
            users={a: UserRecord.from_dict(u) for a, u in d["users"].items()},
            orgs={o: OrgRecord.from_dict(rec) for o, rec in d["orgs"].items()},
            ura={(u, o, r) for u, o, r in d["ura"]},
            pra={(o, r, Permission.from_dict(p)) for o, r, p in d["pra"]},
            nonces=dict(d["nonces"]),
        )


def state_root(state: WorldState) -> str:
    """SHA-256 over the canonical serialization of the whole state."""
    return codec.digest(state.to_dict())


def role_holder_count(state: WorldState, org: str, role: str) -> int:
    return sum(1 for _, o, r in state.ura if o == org and r == role)


def expected_nonce(state: WorldState, sender: str) -> int:
    """Next-acceptable nonce: the count of transactions already applied for *sender*."""
    return state.nonces.get(sender, 0)


def apply_transaction(
    state: WorldState,
    tx: "SignedTransaction",
    *,
    height: int = 0,
    tx_index: int = 0,
) -> tuple[WorldState, list[Event]]:
    """Validate the envelope, dispatch to the contract handler, return (new state, events).

    The input state is never touched: on any failure the exception propagates
    and the caller keeps the exact value it passed in.
    """
    # Handler modules depend on the types above, so import them lazily here.
    from . import payloads, sco, scu

    pk = bytes.fromhex(tx.public_key) if codec.is_hex(tx.public_key, 32) else b""
    if not pk or keys.derive_address(pk) != tx.sender:
        raise BadSignature("public key does not bind to the sender address")
    record = state.users.get(tx.sender)
    if record is not None and record.public_key != tx.public_key:
        raise BadSignature("public key differs from the registered key")
    if not tx.verify(tx.public_key):
        raise BadSignature("signature verification failed")

    expected = expected_nonce(state, tx.sender)
    if tx.nonce != expected:
        raise BadNonce(f"expected nonce {expected}, got {tx.nonce}")

    payload = tx.payload
    if isinstance(payload, payloads.RegisterUserPayload):
        handler = scu.register_user
    elif isinstance(payload, payloads.UpdateUserRolePayload):
        handler = scu.update_user_role
    elif isinstance(payload, payloads.GrantPermissionPayload):
        handler = sco.grant_permission
    elif isinstance(payload, payloads.RevokePermissionPayload):
        handler = sco.revoke_permission
    else:  # pragma: no cover - payload decoding precludes this
        raise TypeError(f"unknown payload type {type(payload).__name__}")

    new_state, events = handler(state, tx, height=height, tx_index=tx_index)
    new_state.nonces[tx.sender] = expected + 1
    return new_state, events


def replay(genesis: WorldState, chain: "Chain") -> WorldState:
    """Fold every transaction of *chain* over *genesis*, checking each block's state root."""
    st = genesis
    blocks = chain.blocks
    if blocks and blocks[0].header.state_root != state_root(st):
        raise ReplayDivergence(0)
    for block in blocks[1:]:
        h = block.header.height
        for i, tx in enumerate(block.transactions):
            st, _ = apply_transaction(st, tx, height=h, tx_index=i)
        if block.header.state_root != state_root(st):
            raise ReplayDivergence(h)
    return st


def query_user(state: WorldState, addr: str) -> UserRecord | None:
    return state.users.get(addr)


def query_roles(state: WorldState, addr: str) -> dict[str, set[str]]:
    """All org → role-set pairs in which *addr* currently holds roles."""
    out: dict[str, set[str]] = {}
    for user, org, role in state.ura:
        if user == addr:
            out.setdefault(org, set()).add(role)
    return out


def check_integrity(state: WorldState) -> None:
    """Full-scan referential integrity check; raises ValueError on the first violation."""
    for user, org, role in state.ura:
        if user not in state.users:
            raise ValueError(f"ura references unknown user {user}")
        org_rec = state.orgs.get(org)
        if org_rec is None:
            raise ValueError(f"ura references unknown org {org}")
        if role not in org_rec.role_catalog:
            raise ValueError(f"ura references role {role!r} missing from org {org}")
    for org, role, permission in state.pra:
        org_rec = state.orgs.get(org)
        if org_rec is None:
            raise ValueError(f"pra references unknown org {org}")
        if role not in org_rec.role_catalog:
            raise ValueError(f"pra references role {role!r} missing from org {org}")
        if not isinstance(permission, Permission):
            raise ValueError("pra entry does not hold a Permission")
    for org, rec in state.orgs.items():
        policy = rec.role_catalog
        for role, p in policy.items():
            if p.max_holders is not None:
                held = role_holder_count(state, org, role)
                if held > p.max_holders:
                    raise ValueError(f"role {org}/{role} over capacity: {held}")
    for addr, record in state.users.items():
        if keys.derive_address(bytes.fromhex(record.public_key)) != addr:
            raise ValueError(f"user record {addr} fails address derivation")
    for addr, nonce in state.nonces.items():
        if nonce < 0:
            raise ValueError(f"negative nonce for {addr}")
