"""Deterministic in-process simulation of the validator network.

Replication protocol (crash faults and partitions in scope, equivocation out
of scope, per the trusted-validator setting):

* Round-robin proposer per (height, view): ``validators[(h + v) mod N]``.
  A view times out after a fixed number of ticks without progress, rotating
  the proposer past crashed or partitioned nodes.
* Two vote phases. Nodes broadcast a ``vote`` for the first valid proposal
  they see in a view. On a quorum of votes (⌊2N/3⌋+1) a node locks on the
  block and broadcasts a ``commit`` carrying it. On a quorum of commits the
  block is final — instantly and forever; there are no forks to resolve.
  Locks make finality unique: once a quorum has locked a block at a height,
  no other block can gather a vote quorum there, because locked nodes vote
  only for their lock until the height commits.
* Transactions enter through any node and gossip to every reachable peer;
  voters also adopt the transactions of valid proposals, so any block that
  gathered votes can be re-proposed by whoever becomes proposer next.
* Lagging replicas catch up by requesting missing blocks and validating
  them by full replay. When a fault window closes (partition heals, node
  revives) every node announces its tip once, modeling the handshake of a
  re-established connection; that exchange triggers the block sync.

Everything is a pure function of (config, workload, seed): messages carry a
global sequence number and deliver in (tick, sender, sequence) order, and
per-message latency comes from one seeded RNG. Two runs with equal inputs
produce byte-identical message traces and reports.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from . import codec
from .errors import ChainError, SimTimeout, TransactionError
from .ledger import Block, Chain, append_block, build_block, execute_block, hash_header, new_chain
from .payloads import SignedTransaction
from .state import WorldState, apply_transaction, expected_nonce, state_root
from .wallet import verify_envelope

VIEW_TIMEOUT_TICKS = 12   # must exceed a full propose/vote/commit exchange
MAX_BLOCK_TXS = 100
MAX_SYNC_BLOCKS = 100
# A transaction whose nonce stays ahead of its sender's committed nonce for
# this long is an orphan (its predecessor was lost, not delayed) and is
# evicted so the network can go quiet instead of churning views forever.
MEMPOOL_GAP_TTL_TICKS = 100

PROPOSAL = "Proposal"
VOTE = "Vote"
COMMIT = "Commit"
TX_GOSSIP = "TxGossip"
STATUS = "Status"
SYNC_REQUEST = "SyncRequest"
SYNC_RESPONSE = "SyncResponse"

STATUS_UP = "up"
STATUS_CRASHED = "crashed"


@dataclass(frozen=True)
class CrashRule:
    """Node is down for ticks in [from_tick, to_tick]; to_tick None = forever."""

    node: int
    from_tick: int
    to_tick: int | None = None

    def active(self, tick: int) -> bool:
        return tick >= self.from_tick and (self.to_tick is None or tick <= self.to_tick)


@dataclass(frozen=True)
class PartitionRule:
    """During [from_tick, to_tick], messages pass only within a group.

    Nodes not listed in any group are isolated for the window.
    """

    from_tick: int
    to_tick: int
    groups: tuple[tuple[int, ...], ...]

    def active(self, tick: int) -> bool:
        return self.from_tick <= tick <= self.to_tick

    def blocks(self, a: int, b: int) -> bool:
        for group in self.groups:
            if a in group and b in group:
                return False
        return True


@dataclass(frozen=True)
class DropRule:
    """Drop messages from src to dst during [from_tick, to_tick]."""

    src: int
    dst: int
    from_tick: int
    to_tick: int

    def blocks(self, a: int, b: int, tick: int) -> bool:
        return a == self.src and b == self.dst and self.from_tick <= tick <= self.to_tick


@dataclass
class NetworkConfig:
    validators: list[str]
    rng_seed: int = 0
    crash_rules: list[CrashRule] = field(default_factory=list)
    partition_rules: list[PartitionRule] = field(default_factory=list)
    drop_rules: list[DropRule] = field(default_factory=list)

    @property
    def quorum(self) -> int:
        n = len(self.validators)
        return (2 * n) // 3 + 1


@dataclass
class Message:
    kind: str
    sender: str
    recipient: str
    body: dict
    deliver_at_tick: int
    seq: int

    def fingerprint(self) -> dict:
        return {
            "body": codec.digest(self.body),
            "kind": self.kind,
            "recipient": self.recipient,
            "sender": self.sender,
            "seq": self.seq,
            "tick": self.deliver_at_tick,
        }


@dataclass
class ValidatorNode:
    """One replica: its committed chain/state plus per-height voting bookkeeping."""

    id: str
    chain: Chain
    state: WorldState
    mempool: dict[str, SignedTransaction] = field(default_factory=dict)
    mempool_arrival: dict[str, int] = field(default_factory=dict)
    status: str = STATUS_UP

    view: int = 0
    view_entered: int = 0
    proposed: set = field(default_factory=set)          # views proposed at current height
    voted: set = field(default_factory=set)             # views voted at current height
    commit_sent: set = field(default_factory=set)       # views commit-voted at current height
    vote_tally: dict = field(default_factory=dict)      # (view, hash) -> set of voters
    commit_tally: dict = field(default_factory=dict)    # hash -> set of committers
    proposals: dict = field(default_factory=dict)       # hash -> (Block, post_state)
    proposal_views: dict = field(default_factory=dict)  # view -> hash
    lock: str | None = None                             # hash of locked block
    committed_ids: set = field(default_factory=set)     # tx ids already on chain
    sync_inflight_until: int = -1

    @property
    def next_height(self) -> int:
        return len(self.chain.blocks)

    def pending_work(self) -> bool:
        return bool(self.mempool or self.lock or self.proposals or self.vote_tally
                    or self.commit_tally)

    def admit(self, tx: SignedTransaction, tick: int) -> None:
        if tx.tx_id not in self.mempool:
            self.mempool[tx.tx_id] = tx
            self.mempool_arrival[tx.tx_id] = tick

    def evict(self, tx_id: str) -> None:
        self.mempool.pop(tx_id, None)
        self.mempool_arrival.pop(tx_id, None)


class Network:
    """The simulated validator set plus its in-flight messages."""

    def __init__(self, config: NetworkConfig, genesis_state: WorldState):
        if not config.validators:
            raise ValueError("at least one validator is required")
        self.config = config
        self.genesis_state = genesis_state
        self.tick = 0
        self.queue: list[Message] = []
        self.seq = 0
        self.rng = random.Random(config.rng_seed)
        self.trace: list[dict] = []
        self.nodes: dict[str, ValidatorNode] = {
            v: ValidatorNode(id=v, chain=new_chain(genesis_state), state=genesis_state)
            for v in config.validators
        }
        # Ticks at which connectivity changes back: every node announces its
        # tip then, standing in for a transport-level reconnect handshake.
        self.handshake_ticks = {r.to_tick + 1 for r in config.partition_rules}
        self.handshake_ticks |= {r.to_tick + 1 for r in config.drop_rules}
        self.handshake_ticks |= {
            r.to_tick + 1 for r in config.crash_rules if r.to_tick is not None
        }

    # --- fault model -------------------------------------------------------

    def _index(self, node_id: str) -> int:
        return self.config.validators.index(node_id)

    def crashed(self, node_id: str, tick: int) -> bool:
        idx = self._index(node_id)
        return any(r.node == idx and r.active(tick) for r in self.config.crash_rules)

    def link_open(self, sender: str, recipient: str, tick: int) -> bool:
        a, b = self._index(sender), self._index(recipient)
        for rule in self.config.partition_rules:
            if rule.active(tick) and rule.blocks(a, b):
                return False
        return not any(rule.blocks(a, b, tick) for rule in self.config.drop_rules)

    def up_nodes(self) -> list[ValidatorNode]:
        return [
            self.nodes[v]
            for v in self.config.validators
            if not self.crashed(v, self.tick)
        ]

    # --- messaging ---------------------------------------------------------

    def _send(self, kind: str, sender: str, recipient: str, body: dict) -> None:
        self.seq += 1
        latency = 1 + self.rng.randrange(2)
        self.queue.append(
            Message(kind, sender, recipient, body, self.tick + latency, self.seq)
        )

    def broadcast(self, kind: str, sender: str, body: dict) -> None:
        # Includes the sender itself: every node handles every message the
        # same way, which keeps the protocol logic uniform.
        for v in self.config.validators:
            self._send(kind, sender, v, body)

    def proposer_for(self, height: int, view: int) -> str:
        vals = self.config.validators
        return vals[(height + view) % len(vals)]


def submit_tx(network: Network, tx: SignedTransaction, via: str | None = None):
    """Inject a transaction at one entry node; it gossips from there.

    Returns (accepted: bool, reason: str | None, tx_id: str | None).
    Only stateless checks run here — state-dependent validation happens when
    a proposer builds a block. A crashed entry node cannot take submissions,
    so the first up validator stands in when *via* is down or unspecified.
    """
    if not verify_envelope(tx):
        return False, "BadSignature", None
    entry = via if via is not None and not network.crashed(via, network.tick) else next(
        (v for v in network.config.validators if not network.crashed(v, network.tick)),
        None,
    )
    if entry is None:
        return False, "BadSignature", None
    network.broadcast(TX_GOSSIP, entry, {"tx": tx.to_dict()})
    return True, None, tx.tx_id


def step(network: Network) -> Network:
    """Advance the simulation one tick: deliver due messages, then let nodes act."""
    network.tick += 1
    tick = network.tick

    due = sorted(
        (m for m in network.queue if m.deliver_at_tick <= tick),
        key=lambda m: (m.deliver_at_tick, m.sender, m.seq),
    )
    network.queue = [m for m in network.queue if m.deliver_at_tick > tick]
    for msg in due:
        if network.crashed(msg.recipient, tick):
            continue
        if not network.link_open(msg.sender, msg.recipient, tick):
            continue
        network.trace.append(msg.fingerprint())
        _handle(network, network.nodes[msg.recipient], msg)

    announce = tick in network.handshake_ticks
    for vid in network.config.validators:
        if network.crashed(vid, tick):
            network.nodes[vid].status = STATUS_CRASHED
            continue
        node = network.nodes[vid]
        node.status = STATUS_UP
        if announce:
            network.broadcast(STATUS, vid, {"height": node.next_height - 1})
        _local_actions(network, node)
    return network


def _reset_height_runtime(node: ValidatorNode) -> None:
    node.view = 0
    node.proposed = set()
    node.voted = set()
    node.commit_sent = set()
    node.vote_tally = {}
    node.commit_tally = {}
    node.proposals = {}
    node.proposal_views = {}
    node.lock = None


def _prune_mempool(node: ValidatorNode) -> None:
    """Drop transactions that can never apply to the committed state."""
    scratch = node.state
    for tx_id, tx in list(node.mempool.items()):
        if tx_id in node.committed_ids:
            node.evict(tx_id)
            continue
        expected = expected_nonce(scratch, tx.sender)
        if tx.nonce > expected:
            continue  # may become valid after earlier nonces land
        if tx.nonce < expected:
            node.evict(tx_id)
            continue
        try:
            scratch, _ = apply_transaction(scratch, tx)
        except TransactionError:
            node.evict(tx_id)


def _finalize(network: Network, node: ValidatorNode, block: Block, post: WorldState) -> None:
    node.chain = append_block(node.chain, block)
    node.state = post
    for tx in block.transactions:
        node.committed_ids.add(tx.tx_id)
    _reset_height_runtime(node)
    node.view_entered = network.tick
    _prune_mempool(node)


def _validate_proposal(network: Network, node: ValidatorNode, block: Block) -> WorldState | None:
    header = block.header
    if header.height != node.next_height:
        return None
    if header.prev_hash != hash_header(node.chain.tip.header):
        return None
    try:
        return execute_block(node.state, block)
    except (ChainError, TransactionError):
        return None


def _adopt_block(network: Network, node: ValidatorNode, block: Block) -> bool:
    """Validate and finalize a block learned through sync or a commit quorum."""
    post = _validate_proposal(network, node, block)
    if post is None:
        return False
    _finalize(network, node, block, post)
    return True


def _request_sync(network: Network, node: ValidatorNode, peer: str) -> None:
    if network.tick < node.sync_inflight_until:
        return
    node.sync_inflight_until = network.tick + VIEW_TIMEOUT_TICKS
    network._send(SYNC_REQUEST, node.id, peer, {"from_height": node.next_height})


def _handle(network: Network, node: ValidatorNode, msg: Message) -> None:
    kind, body = msg.kind, msg.body

    if kind == TX_GOSSIP:
        tx = SignedTransaction.from_dict(body["tx"])
        if not verify_envelope(tx):
            return
        if tx.tx_id not in node.committed_ids:
            node.admit(tx, network.tick)
        return

    if kind == STATUS:
        theirs = body["height"]
        mine = node.next_height - 1
        if theirs > mine:
            _request_sync(network, node, msg.sender)
        elif theirs < mine:
            blocks = node.chain.blocks[theirs + 1 : theirs + 1 + MAX_SYNC_BLOCKS]
            network._send(
                SYNC_RESPONSE, node.id, msg.sender,
                {"blocks": [b.to_dict() for b in blocks]},
            )
        return

    if kind == SYNC_REQUEST:
        start = body["from_height"]
        if start < node.next_height:
            blocks = node.chain.blocks[start : start + MAX_SYNC_BLOCKS]
            network._send(
                SYNC_RESPONSE, node.id, msg.sender,
                {"blocks": [b.to_dict() for b in blocks]},
            )
        return

    if kind == SYNC_RESPONSE:
        node.sync_inflight_until = -1
        for raw in body["blocks"]:
            try:
                block = Block.from_dict(raw)
            except (ValueError, KeyError):
                return
            if block.header.height < node.next_height:
                continue
            if not _adopt_block(network, node, block):
                return
        return

    height = body.get("height")
    if height is None:
        return
    if height > node.next_height:
        _request_sync(network, node, msg.sender)
        return
    if height < node.next_height:
        if kind in (PROPOSAL, VOTE) and height >= 1:
            # The sender is behind; hand it the blocks it is missing.
            blocks = node.chain.blocks[height : height + MAX_SYNC_BLOCKS]
            network._send(
                SYNC_RESPONSE, node.id, msg.sender,
                {"blocks": [b.to_dict() for b in blocks]},
            )
        return

    if kind == PROPOSAL:
        view = body["view"]
        if body["proposer"] != network.proposer_for(height, view):
            return
        try:
            block = Block.from_dict(body["block"])
        except (ValueError, KeyError):
            return
        block_hash = hash_header(block.header)
        if block_hash not in node.proposals:
            post = _validate_proposal(network, node, block)
            if post is None:
                return
            node.proposals[block_hash] = (block, post)
            for tx in block.transactions:
                # Adopt the proposal's transactions so a later proposer can
                # rebuild an equivalent block if this one stalls.
                if tx.tx_id not in node.committed_ids:
                    node.admit(tx, network.tick)
        node.proposal_views[view] = block_hash
        _vote_if_possible(network, node)
        _check_tallies(network, node)
        return

    if kind == VOTE:
        key = (body["view"], body["block_hash"])
        node.vote_tally.setdefault(key, set()).add(msg.sender)
        _check_tallies(network, node)
        return

    if kind == COMMIT:
        block_hash = body["block_hash"]
        node.commit_tally.setdefault(block_hash, set()).add(msg.sender)
        if block_hash not in node.proposals:
            try:
                block = Block.from_dict(body["block"])
            except (ValueError, KeyError):
                return
            post = _validate_proposal(network, node, block)
            if post is not None:
                node.proposals[block_hash] = (block, post)
        _check_tallies(network, node)
        return


def _vote_if_possible(network: Network, node: ValidatorNode) -> None:
    """Cast the one vote this node may make in its current view, if any."""
    view = node.view
    if view in node.voted:
        return
    block_hash = node.proposal_views.get(view)
    if block_hash is None or block_hash not in node.proposals:
        return
    if node.lock is not None and node.lock != block_hash:
        return
    node.voted.add(view)
    network.broadcast(
        VOTE, node.id,
        {"height": node.next_height, "view": view, "block_hash": block_hash},
    )


def _check_tallies(network: Network, node: ValidatorNode) -> None:
    """Fire phase transitions enabled by the tallies gathered so far."""
    quorum = network.config.quorum

    for (view, block_hash), voters in sorted(
        node.vote_tally.items(), key=lambda kv: (kv[0][0], kv[0][1])
    ):
        if len(voters) >= quorum and block_hash in node.proposals:
            if view not in node.commit_sent:
                node.commit_sent.add(view)
                node.lock = block_hash
                block, _ = node.proposals[block_hash]
                network.broadcast(
                    COMMIT, node.id,
                    {
                        "height": node.next_height,
                        "block_hash": block_hash,
                        "block": block.to_dict(),
                    },
                )

    for block_hash, committers in sorted(node.commit_tally.items()):
        if len(committers) >= quorum and block_hash in node.proposals:
            block, post = node.proposals[block_hash]
            _finalize(network, node, block, post)
            return


def _local_actions(network: Network, node: ValidatorNode) -> None:
    height = node.next_height

    for tx_id, tx in list(node.mempool.items()):
        if (
            tx.nonce > expected_nonce(node.state, tx.sender)
            and network.tick - node.mempool_arrival.get(tx_id, network.tick)
            >= MEMPOOL_GAP_TTL_TICKS
        ):
            node.evict(tx_id)

    if node.pending_work() and network.tick - node.view_entered >= VIEW_TIMEOUT_TICKS:
        node.view += 1
        node.view_entered = network.tick
        _vote_if_possible(network, node)

    if network.proposer_for(height, node.view) != node.id:
        return
    if node.view in node.proposed:
        return

    if node.lock is not None and node.lock in node.proposals:
        block = node.proposals[node.lock][0]
    else:
        txs = _select_txs(node)
        if not txs:
            return
        block = build_block(
            node.chain.tip.header, txs, node.state, node.id, network.tick
        )
    node.proposed.add(node.view)
    network.broadcast(
        PROPOSAL, node.id,
        {
            "height": height,
            "view": node.view,
            "proposer": node.id,
            "block": block.to_dict(),
        },
    )


def _select_txs(node: ValidatorNode) -> list[SignedTransaction]:
    """Greedily pick mempool transactions that apply cleanly, dropping dead ones."""
    selected: list[SignedTransaction] = []
    scratch = node.state
    dead: list[str] = []
    for tx_id, tx in node.mempool.items():
        if len(selected) >= MAX_BLOCK_TXS:
            break
        if tx_id in node.committed_ids:
            dead.append(tx_id)
            continue
        expected = expected_nonce(scratch, tx.sender)
        if tx.nonce > expected:
            continue
        if tx.nonce < expected:
            dead.append(tx_id)
            continue
        try:
            scratch, _ = apply_transaction(scratch, tx)
            selected.append(tx)
        except TransactionError:
            dead.append(tx_id)
    for tx_id in dead:
        node.evict(tx_id)
    return selected


def quiescent(network: Network) -> bool:
    if network.queue:
        return False
    if any(h > network.tick for h in network.handshake_ticks):
        return False  # a fault window is still due to close and wake nodes up
    return not any(node.pending_work() for node in network.up_nodes())


def report(network: Network) -> dict:
    """Snapshot of per-node tips plus the committed event log of the best node."""
    nodes = {}
    best = None
    for vid in network.config.validators:
        node = network.nodes[vid]
        nodes[vid] = {
            "height": node.next_height - 1,
            "state_root": state_root(node.state),
            "status": "crashed" if network.crashed(vid, network.tick) else "up",
        }
        if best is None or node.next_height > best.next_height:
            best = node
    events = [
        e.to_dict() for block in best.chain.blocks for e in block.events
    ]
    return {
        "tick": network.tick,
        "quiescent": quiescent(network),
        "nodes": nodes,
        "committed_events": events,
        "trace_digest": codec.digest(network.trace),
    }


def run_until_quiescent(network: Network, max_ticks: int) -> dict:
    """Step until nothing is pending anywhere, or raise SimTimeout at the budget."""
    if max_ticks <= 0:
        raise SimTimeout(max_ticks, report(network))
    for _ in range(max_ticks):
        if quiescent(network):
            return report(network)
        step(network)
    if quiescent(network):
        return report(network)
    raise SimTimeout(max_ticks, report(network))
