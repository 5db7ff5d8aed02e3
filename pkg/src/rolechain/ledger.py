"""Hash-linked block chain.

Headers commit to the ordered transaction list (``tx_root``), to the world
state after applying it (``state_root``), and to the previous header
(``prev_hash``), so any byte of committed history is covered by some digest
a verifier recomputes. Timestamps are logical ticks handed in by consensus;
nothing here reads a clock. Empty blocks are legal.

One caveat is inherent to hash chains: the tip header's own non-root fields
(proposer, timestamp) are only pinned by the *next* block. ``verify_chain``
therefore accepts an optional externally trusted tip digest, which auditors
should record out of band.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import codec
from .errors import HeightGap, InvalidTransaction, LinkMismatch, RootMismatch, TransactionError
from .payloads import SignedTransaction
from .state import Event, WorldState, apply_transaction, state_root

GENESIS_PREV_HASH = codec.ZERO_DIGEST


@dataclass(frozen=True)
class BlockHeader:
    height: int
    prev_hash: str
    tx_root: str
    state_root: str
    proposer: str
    timestamp: int

    def __post_init__(self):
        if self.height < 0:
            raise ValueError("height must be non-negative")
        codec.require_hex(self.prev_hash, 32, "prev_hash")
        codec.require_hex(self.tx_root, 32, "tx_root")
        codec.require_hex(self.state_root, 32, "state_root")
        codec.require_hex(self.proposer, 20, "proposer")
        if not isinstance(self.timestamp, int):
            raise ValueError("timestamp must be an integer tick")

    def to_dict(self) -> dict:
        return {
            "height": self.height,
            "prev_hash": self.prev_hash,
            "proposer": self.proposer,
            "state_root": self.state_root,
            "timestamp": self.timestamp,
            "tx_root": self.tx_root,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BlockHeader":
        return cls(
            height=d["height"],
            prev_hash=d["prev_hash"],
            tx_root=d["tx_root"],
            state_root=d["state_root"],
            proposer=d["proposer"],
            timestamp=d["timestamp"],
        )


@dataclass(frozen=True)
class Block:
    header: BlockHeader
    transactions: tuple[SignedTransaction, ...]
    events: tuple[Event, ...]

    def to_dict(self) -> dict:
        return {
            "events": [e.to_dict() for e in self.events],
            "header": self.header.to_dict(),
            "transactions": [t.to_dict() for t in self.transactions],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Block":
        return cls(
            header=BlockHeader.from_dict(d["header"]),
            transactions=tuple(SignedTransaction.from_dict(t) for t in d["transactions"]),
            events=tuple(Event.from_dict(e) for e in d["events"]),
        )


@dataclass(frozen=True)
class Chain:
    blocks: tuple[Block, ...]

    @property
    def tip(self) -> Block:
        return self.blocks[-1]

    @property
    def height(self) -> int:
        return self.tip.header.height

    def __len__(self) -> int:
        return len(self.blocks)


@dataclass(frozen=True)
class FailureAt:
    """Verification outcome: the first height that fails, and why."""

    height: int
    reason: str


def hash_header(header: BlockHeader) -> str:
    return codec.digest(header.to_dict())


def tx_root(transactions) -> str:
    return codec.digest([t.to_dict() for t in transactions])


def genesis_block(genesis_state: WorldState, *, timestamp: int = 0) -> Block:
    header = BlockHeader(
        height=0,
        prev_hash=GENESIS_PREV_HASH,
        tx_root=tx_root(()),
        state_root=state_root(genesis_state),
        proposer=codec.ZERO_ADDRESS,
        timestamp=timestamp,
    )
    return Block(header=header, transactions=(), events=())


def new_chain(genesis_state: WorldState) -> Chain:
    return Chain(blocks=(genesis_block(genesis_state),))


def _apply_all(
    state: WorldState, transactions, height: int
) -> tuple[WorldState, list[Event]]:
    st = state
    events: list[Event] = []
    for i, tx in enumerate(transactions):
        try:
            st, evs = apply_transaction(st, tx, height=height, tx_index=i)
        except TransactionError as exc:
            raise InvalidTransaction(i, exc.code) from exc
        events.extend(evs)
    return st, events


def build_block(
    prev: BlockHeader,
    txs: list[SignedTransaction],
    state: WorldState,
    proposer: str,
    tick: int,
) -> Block:
    """Assemble the block at ``prev.height + 1``; all-or-nothing over *txs*."""
    height = prev.height + 1
    post, events = _apply_all(state, txs, height)
    header = BlockHeader(
        height=height,
        prev_hash=hash_header(prev),
        tx_root=tx_root(txs),
        state_root=state_root(post),
        proposer=proposer,
        timestamp=tick,
    )
    return Block(header=header, transactions=tuple(txs), events=tuple(events))


def execute_block(state: WorldState, block: Block) -> WorldState:
    """Replay *block* against *state*, checking every digest it commits to.

    Raises RootMismatch / InvalidTransaction when the block's content does
    not withstand recomputation; returns the post-state on success.
    """
    h = block.header.height
    if tx_root(block.transactions) != block.header.tx_root:
        raise RootMismatch(f"tx root mismatch at height {h}")
    post, events = _apply_all(state, block.transactions, h)
    if tuple(events) != tuple(block.events):
        raise RootMismatch(f"event log does not match transaction replay at height {h}")
    if state_root(post) != block.header.state_root:
        raise RootMismatch(f"state root mismatch at height {h}")
    return post


def append_block(chain: Chain, block: Block) -> Chain:
    """Extend the chain by one block after structural checks; prior blocks are shared."""
    tip = chain.tip
    if block.header.height != tip.header.height + 1:
        raise HeightGap(
            f"expected height {tip.header.height + 1}, block claims {block.header.height}"
        )
    if block.header.prev_hash != hash_header(tip.header):
        raise LinkMismatch(f"block at height {block.header.height} does not link to tip")
    if tx_root(block.transactions) != block.header.tx_root:
        raise RootMismatch(f"tx root mismatch at height {block.header.height}")
    return Chain(blocks=(*chain.blocks, block))


def verify_chain(
    chain: Chain,
    genesis_state: WorldState,
    expected_tip_hash: str | None = None,
) -> FailureAt | None:
    """Full audit: links, roots, signatures, and event logs, by deterministic replay.

    Returns None when everything holds, else the first failing height. A
    broken hash link between consecutive headers is attributed to the earlier
    height, since either side of the link may be the corrupted one.
    """
    blocks = chain.blocks
    if not blocks:
        return FailureAt(0, "chain has no genesis block")
    g = blocks[0]
    if g.header.height != 0:
        return FailureAt(0, "genesis height is not 0")
    if g.header.prev_hash != GENESIS_PREV_HASH:
        return FailureAt(0, "genesis prev_hash is not all zero")
    if g.transactions or g.events:
        return FailureAt(0, "genesis block must carry no transactions or events")
    if g.header.tx_root != tx_root(()):
        return FailureAt(0, "genesis tx root mismatch")
    if g.header.state_root != state_root(genesis_state):
        return FailureAt(0, "genesis state root does not match the genesis state")

    st = genesis_state
    for h in range(1, len(blocks)):
        block = blocks[h]
        if block.header.height != h:
            return FailureAt(h, f"height {block.header.height} at chain position {h}")
        if block.header.prev_hash != hash_header(blocks[h - 1].header):
            return FailureAt(h - 1, f"hash link broken between heights {h - 1} and {h}")
        try:
            st = execute_block(st, block)
        except (RootMismatch, InvalidTransaction) as exc:
            return FailureAt(h, str(exc))
    if expected_tip_hash is not None:
        if hash_header(blocks[-1].header) != expected_tip_hash:
            return FailureAt(len(blocks) - 1, "tip header does not match the trusted anchor")
    return None
