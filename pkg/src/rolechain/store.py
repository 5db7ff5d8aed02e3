"""Durable chain storage and the genesis file.

The block store is one JSONL file per chain, blocks in height order, each
line carrying a CRC32 of the canonical block bytes. A torn final line (the
classic crash artifact) is detected, logged, and truncated away; a damaged
interior line means real corruption and is reported as such, never skipped.

The genesis file fixes everything a network must agree on before it starts:
chain id, the validator set, and each organization with its admins and role
catalog. All nodes of a network must load byte-identical genesis files — the
genesis state root pins that.
"""

from __future__ import annotations

import json
import logging
import os
import zlib
from dataclasses import dataclass, field
from pathlib import Path

from . import codec
from .errors import CorruptStore
from .ledger import Block, Chain, append_block
from .scu import ROLE_NONE
from .state import OrgRecord, WorldState

logger = logging.getLogger(__name__)

CHAIN_FILE = "chain.jsonl"
GENESIS_FILE = "genesis.json"
NODE_KEY_FILE = "node_key.json"


# --- genesis -----------------------------------------------------------------

@dataclass(frozen=True)
class GenesisFile:
    chain_id: str
    validators: tuple[str, ...]
    orgs: tuple[OrgRecord, ...] = field(default=())

    def to_dict(self) -> dict:
        return {
            "chain_id": self.chain_id,
            "orgs": [o.to_dict() for o in self.orgs],
            "validators": list(self.validators),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GenesisFile":
        return cls(
            chain_id=d["chain_id"],
            validators=tuple(codec.require_hex(v, 20, "validator address") for v in d["validators"]),
            orgs=tuple(OrgRecord.from_dict(o) for o in d["orgs"]),
        )


def build_genesis_state(genesis: GenesisFile) -> WorldState:
    """Validate the genesis configuration and produce the initial world state."""
    if not genesis.chain_id:
        raise ValueError("chain_id must be non-empty")
    if not genesis.validators:
        raise ValueError("genesis must list at least one validator")
    if len(set(genesis.validators)) != len(genesis.validators):
        raise ValueError("duplicate validator addresses in genesis")
    orgs: dict[str, OrgRecord] = {}
    for org in genesis.orgs:
        if org.org_id in orgs:
            raise ValueError(f"duplicate org {org.org_id!r} in genesis")
        if ROLE_NONE in org.role_catalog:
            raise ValueError(f"role id {ROLE_NONE!r} is reserved")
        orgs[org.org_id] = org
    return WorldState(orgs=orgs)


def save_genesis(genesis: GenesisFile, path: str | Path) -> None:
    Path(path).write_text(codec.canonical_dumps(genesis.to_dict()) + "\n", encoding="utf-8")


def load_genesis(path: str | Path) -> GenesisFile:
    return GenesisFile.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


# --- block store ---------------------------------------------------------------

class Store:
    """Append-only block file; one writer, crash-safe appends."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.touch(exist_ok=True)

    def append(self, block: Block) -> None:
        block_bytes = codec.canonical_bytes(block.to_dict())
        line = codec.canonical_dumps(
            {"block": block.to_dict(), "crc32": f"{zlib.crc32(block_bytes):08x}"}
        )
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(line + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    def load_chain(self) -> Chain:
        return load_chain(self)


def open_store(path: str | Path) -> Store:
    return Store(path)


def append(store: Store, block: Block) -> None:
    store.append(block)


def _parse_line(line: str) -> Block:
    doc = json.loads(line)
    block_dict = doc["block"]
    crc_stated = doc["crc32"]
    crc_actual = f"{zlib.crc32(codec.canonical_bytes(block_dict)):08x}"
    if crc_stated != crc_actual:
        raise ValueError("crc mismatch")
    return Block.from_dict(block_dict)


def load_chain(store: Store) -> Chain:
    """Read back the stored chain, verifying every line and every link.

    An append is durable only once its full line, newline included, hit the
    disk. A final segment without its newline, or one that fails to parse,
    is a torn write: it is truncated away with a warning. Damage anywhere
    earlier raises CorruptStore with the offending height.
    """
    raw = store.path.read_bytes()
    segments = raw.split(b"\n")
    torn_tail = segments[-1] != b""  # a clean file always ends with a newline
    if not torn_tail:
        segments.pop()

    blocks: list[Block] = []
    good_bytes = 0
    for i, segment in enumerate(segments):
        last = i == len(segments) - 1
        try:
            if last and torn_tail:
                raise ValueError("no trailing newline")
            block = _parse_line(segment.decode("utf-8"))
        except (ValueError, KeyError, TypeError, UnicodeDecodeError) as exc:
            if last:
                logger.warning(
                    "truncating torn final line %d of %s (%s)", i, store.path, exc
                )
                with open(store.path, "r+b") as fh:
                    fh.truncate(good_bytes)
                break
            raise CorruptStore(i, f"store line {i} unreadable: {exc}") from exc
        if block.header.height != i:
            raise CorruptStore(i, f"height {block.header.height} at store line {i}")
        blocks.append(block)
        good_bytes += len(segment) + 1

    if not blocks:
        raise CorruptStore(0, "store holds no usable blocks")
    if blocks[0].header.height != 0 or blocks[0].header.prev_hash != codec.ZERO_DIGEST:
        raise CorruptStore(0, "first stored block is not a genesis block")
    chain = Chain(blocks=(blocks[0],))
    for block in blocks[1:]:
        try:
            chain = append_block(chain, block)
        except Exception as exc:
            raise CorruptStore(block.header.height, str(exc)) from exc
    return chain


# --- data directory conventions ---------------------------------------------

def chain_path(data_dir: str | Path) -> Path:
    return Path(data_dir) / CHAIN_FILE

def genesis_path(data_dir: str | Path) -> Path:
    return Path(data_dir) / GENESIS_FILE

def node_key_path(data_dir: str | Path) -> Path:
    return Path(data_dir) / NODE_KEY_FILE
