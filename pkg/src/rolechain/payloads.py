"""Transaction wire types: the four contract payloads and the signed envelope.

The signing preimage for an envelope is the canonical JSON of
``{"nonce": ..., "payload": ..., "sender": ...}``; the full wire form adds
``public_key`` and ``signature``. A transaction id is the SHA-256 of the full
canonical wire bytes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

from . import codec, keys
from .state import Permission

KIND_REGISTER_USER = "register_user"
KIND_UPDATE_USER_ROLE = "update_user_role"
KIND_GRANT_PERMISSION = "grant_permission"
KIND_REVOKE_PERMISSION = "revoke_permission"


@dataclass(frozen=True)
class RegisterUserPayload:
    user: str
    public_key: str
    password_digest: str
    org: str
    requested_role: str

    kind = KIND_REGISTER_USER

    def __post_init__(self):
        codec.require_hex(self.user, 20, "user address")
        codec.require_hex(self.public_key, 32, "public key")
        codec.require_hex(self.password_digest, 32, "password digest")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "org": self.org,
            "password_digest": self.password_digest,
            "public_key": self.public_key,
            "requested_role": self.requested_role,
            "user": self.user,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RegisterUserPayload":
        return cls(
            user=d["user"],
            public_key=d["public_key"],
            password_digest=d["password_digest"],
            org=d["org"],
            requested_role=d["requested_role"],
        )


@dataclass(frozen=True)
class UpdateUserRolePayload:
    user: str
    org: str
    old_role: str
    new_role: str

    kind = KIND_UPDATE_USER_ROLE

    def __post_init__(self):
        codec.require_hex(self.user, 20, "user address")
        if self.old_role == self.new_role:
            raise ValueError("old_role and new_role must differ")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "new_role": self.new_role,
            "old_role": self.old_role,
            "org": self.org,
            "user": self.user,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "UpdateUserRolePayload":
        return cls(user=d["user"], org=d["org"], old_role=d["old_role"], new_role=d["new_role"])


@dataclass(frozen=True)
class GrantPermissionPayload:
    org: str
    role: str
    permission: Permission

    kind = KIND_GRANT_PERMISSION

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "org": self.org,
            "permission": self.permission.to_dict(),
            "role": self.role,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GrantPermissionPayload":
        return cls(org=d["org"], role=d["role"], permission=Permission.from_dict(d["permission"]))


@dataclass(frozen=True)
class RevokePermissionPayload:
    org: str
    role: str
    permission: Permission

    kind = KIND_REVOKE_PERMISSION

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "org": self.org,
            "permission": self.permission.to_dict(),
            "role": self.role,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RevokePermissionPayload":
        return cls(org=d["org"], role=d["role"], permission=Permission.from_dict(d["permission"]))


Payload = Union[
    RegisterUserPayload,
    UpdateUserRolePayload,
    GrantPermissionPayload,
    RevokePermissionPayload,
]

_PAYLOAD_TYPES = {
    KIND_REGISTER_USER: RegisterUserPayload,
    KIND_UPDATE_USER_ROLE: UpdateUserRolePayload,
    KIND_GRANT_PERMISSION: GrantPermissionPayload,
    KIND_REVOKE_PERMISSION: RevokePermissionPayload,
}


def payload_from_dict(d: dict) -> Payload:
    kind = d.get("kind")
    cls = _PAYLOAD_TYPES.get(kind)
    if cls is None:
        raise ValueError(f"unknown payload kind {kind!r}")
    return cls.from_dict(d)


@dataclass(frozen=True)
class SignedTransaction:
    """A single contract call, authenticated by its sender."""

    sender: str
    nonce: int
    payload: Payload
    public_key: str
    signature: str

    def __post_init__(self):
        codec.require_hex(self.sender, 20, "sender address")
        if not isinstance(self.nonce, int) or self.nonce < 0:
            raise ValueError("nonce must be a non-negative integer")

    def signing_dict(self) -> dict:
        return {"nonce": self.nonce, "payload": self.payload.to_dict(), "sender": self.sender}

    def signing_bytes(self) -> bytes:
        return codec.canonical_bytes(self.signing_dict())

    def verify(self, public_key_hex: str) -> bool:
        """Check the signature against *public_key_hex*; False on malformed input."""
        if not codec.is_hex(public_key_hex, 32) or not codec.is_hex(self.signature, 64):
            return False
        return keys.verify(
            bytes.fromhex(public_key_hex), self.signing_bytes(), bytes.fromhex(self.signature)
        )

    def to_dict(self) -> dict:
        d = self.signing_dict()
        d["public_key"] = self.public_key
        d["signature"] = self.signature
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SignedTransaction":
        return cls(
            sender=d["sender"],
            nonce=d["nonce"],
            payload=payload_from_dict(d["payload"]),
            public_key=d["public_key"],
            signature=d["signature"],
        )

    @property
    def tx_id(self) -> str:
        return codec.digest(self.to_dict())
