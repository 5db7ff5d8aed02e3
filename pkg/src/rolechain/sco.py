"""Organization contract: the permission-role relation and the live check.

Grants and revocations are admin-signed transactions and always emit one
event. ``check_permission`` is a pure read over committed state — it is how
services ask "may this user do this here, right now" without touching the
chain.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import DuplicateGrant, NotAuthorized, NotGranted, UnknownOrg, UnknownRole
from .payloads import GrantPermissionPayload, RevokePermissionPayload, SignedTransaction
from .state import (
    EVENT_PERMISSION_GRANTED,
    EVENT_PERMISSION_REVOKED,
    Event,
    Permission,
    WorldState,
)


def _admin_checked_org(state: WorldState, org_id: str, sender: str):
    org = state.orgs.get(org_id)
    if org is None:
        raise UnknownOrg(org_id)
    if sender not in org.admins:
        raise NotAuthorized(f"{sender} is not an admin of {org_id}")
    return org


def grant_permission(
    state: WorldState, tx: SignedTransaction, *, height: int = 0, tx_index: int = 0
) -> tuple[WorldState, list[Event]]:
    """Add (org, role, permission) to the permission-role relation."""
    payload: GrantPermissionPayload = tx.payload
    org = _admin_checked_org(state, payload.org, tx.sender)
    if payload.role not in org.role_catalog:
        raise UnknownRole(f"{payload.org} has no role {payload.role!r}")
    triple = (payload.org, payload.role, payload.permission)
    if triple in state.pra:
        raise DuplicateGrant(f"{payload.role!r} already holds {payload.permission}")

    new = state.clone()
    new.pra.add(triple)
    event = Event.make(
        EVENT_PERMISSION_GRANTED,
        {"org": payload.org, "role": payload.role, "permission": payload.permission},
        height,
        tx_index,
    )
    return new, [event]


def revoke_permission(
    state: WorldState, tx: SignedTransaction, *, height: int = 0, tx_index: int = 0
) -> tuple[WorldState, list[Event]]:
    """Remove (org, role, permission) from the permission-role relation."""
    payload: RevokePermissionPayload = tx.payload
    org = _admin_checked_org(state, payload.org, tx.sender)
    if payload.role not in org.role_catalog:
        raise UnknownRole(f"{payload.org} has no role {payload.role!r}")
    triple = (payload.org, payload.role, payload.permission)
    if triple not in state.pra:
        raise NotGranted(f"{payload.role!r} does not hold {payload.permission}")

    new = state.clone()
    new.pra.discard(triple)
    event = Event.make(
        EVENT_PERMISSION_REVOKED,
        {"org": payload.org, "role": payload.role, "permission": payload.permission},
        height,
        tx_index,
    )
    return new, [event]


@dataclass(frozen=True)
class PermissionCheck:
    granted: bool
    via_roles: frozenset[str]

    def to_dict(self) -> dict:
        return {"granted": self.granted, "via_roles": sorted(self.via_roles)}


def check_permission(
    state: WorldState, user: str, org: str, permission: Permission
) -> PermissionCheck:
    """Does *user* hold, in *org*, any role that carries *permission*?

    Unknown users or orgs simply yield a negative answer; a query is never an
    error and is never recorded.
    """
    via = frozenset(
        role
        for u, o, role in state.ura
        if u == user and o == org and (org, role, permission) in state.pra
    )
    return PermissionCheck(granted=bool(via), via_roles=via)
