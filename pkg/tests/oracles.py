"""Independent reference implementations used as oracles.

Everything here is deliberately primitive — plain tuples, sets, and loops,
sharing no code with the modules under test — so agreement between the two
sides actually means something.
"""

from __future__ import annotations


def brute_force_check(ura, pra, user: str, org: str, perm: tuple[str, str]):
    """Enumerate ura x pra exhaustively. perm is a plain (resource, action) tuple."""
    roles = set()
    for u, o, r in ura:
        if u != user or o != org:
            continue
        for po, pr, pp in pra:
            if po == org and pr == r and pp == perm:
                roles.add(r)
    return bool(roles), roles


def fold_events(event_dicts):
    """Reconstruct (ura, pra) purely from an ordered audit event stream.

    pra entries use plain (resource, action) tuples.
    """
    ura: set[tuple[str, str, str]] = set()
    pra: set[tuple[str, str, tuple[str, str]]] = set()
    for e in sorted(event_dicts, key=lambda d: (d["height"], d["tx_index"])):
        kind, a = e["kind"], e["attributes"]
        if kind == "UserRegistered":
            ura.add((a["user"], a["org"], a["role"]))
        elif kind == "UserRoleUpdated":
            ura.discard((a["user"], a["org"], a["old_role"]))
            ura.add((a["user"], a["org"], a["new_role"]))
        elif kind == "PermissionGranted":
            p = a["permission"]
            pra.add((a["org"], a["role"], (p["resource"], p["action"])))
        elif kind == "PermissionRevoked":
            p = a["permission"]
            pra.discard((a["org"], a["role"], (p["resource"], p["action"])))
        else:
            raise AssertionError(f"unexpected event kind {kind}")
    return ura, pra


def plain_relations(state):
    """Project a WorldState's relations onto oracle-friendly plain tuples."""
    ura = set(state.ura)
    pra = {(o, r, (p.resource, p.action)) for o, r, p in state.pra}
    return ura, pra


def mutate_one_byte(data: bytes, rng) -> tuple[bytes, int]:
    """Flip one random byte to a different value; returns (mutated, position)."""
    pos = rng.randrange(len(data))
    old = data[pos]
    new = rng.randrange(256)
    while new == old:
        new = rng.randrange(256)
    return data[:pos] + bytes([new]) + data[pos + 1 :], pos
