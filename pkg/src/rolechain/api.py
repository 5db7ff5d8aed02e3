"""Per-node HTTP/JSON service.

Each server fronts one validator of an in-process network: writes go through
``POST /v1/transactions`` into the consensus path, reads are served from that
node's committed snapshot and stamped with the height they were evaluated
at. Signing always happens client-side; no passphrase or key material ever
reaches these endpoints.

Error bodies are ``{"code", "message"}`` with ``code`` drawn from the closed
vocabulary in :mod:`rolechain.errors` (contract codes plus ``Malformed``,
``MissingParam``, ``NotFound``).
"""

from __future__ import annotations

import json
import re
import threading
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

from . import codec
from .consensus import Network, run_until_quiescent, submit_tx
from .errors import SimTimeout
from .ledger import hash_header
from .payloads import SignedTransaction
from .sco import check_permission
from .state import (
    EVENT_KINDS,
    Permission,
    WorldState,
    expected_nonce,
    query_roles,
    query_user,
    state_root,
)
from .store import Store

DEFAULT_PUMP_TICKS = 400

_ADDR_RE = re.compile(r"^[0-9a-f]{40}$")


class ApiFailure(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


@dataclass
class ServiceConfig:
    """Node service configuration (JSON file keys, overridable per environment)."""

    listen: str = "127.0.0.1:8545"
    data_dir: str = "./data"
    genesis: str = ""
    node_key: str = ""

    ENV_KEYS = {
        "listen": "ROLECHAIN_LISTEN",
        "data_dir": "ROLECHAIN_DATA_DIR",
        "genesis": "ROLECHAIN_GENESIS",
        "node_key": "ROLECHAIN_NODE_KEY",
    }

    @classmethod
    def load(cls, path: str | Path | None, env: dict | None = None) -> "ServiceConfig":
        import os

        env = os.environ if env is None else env
        data = {}
        if path:
            data = json.loads(Path(path).read_text("utf-8"))
        cfg = cls(**{k: v for k, v in data.items() if k in cls.__dataclass_fields__})
        for field_name, env_key in cls.ENV_KEYS.items():
            if env.get(env_key):
                setattr(cfg, field_name, env[env_key])
        return cfg


class NodeHandle:
    """One validator's view of the shared network, with a serialized write path."""

    def __init__(
        self,
        network: Network,
        node_id: str,
        *,
        chain_id: str = "",
        store: Store | None = None,
        persisted_height: int = -1,
        pump_ticks: int = DEFAULT_PUMP_TICKS,
        lock: threading.Lock | None = None,
    ):
        if node_id not in network.nodes:
            raise ValueError(f"{node_id} is not a validator of this network")
        self.network = network
        self.node_id = node_id
        self.chain_id = chain_id
        self.store = store
        self.pump_ticks = pump_ticks
        # Handles serving the same network must share one lock.
        self.lock = lock if lock is not None else threading.Lock()
        self._persisted_height = persisted_height
        if store is not None:
            self._persist_locked()

    @property
    def node(self):
        return self.network.nodes[self.node_id]

    def _persist_locked(self) -> None:
        if self.store is None:
            return
        for block in self.node.chain.blocks:
            if block.header.height > self._persisted_height:
                self.store.append(block)
                self._persisted_height = block.header.height

    def submit(self, tx: SignedTransaction) -> dict:
        with self.lock:
            accepted, reason, tx_id = submit_tx(self.network, tx, via=self.node_id)
            if not accepted:
                raise ApiFailure(422, reason or "BadSignature", "transaction rejected")
            submitted_at = self.node.next_height
            try:
                run_until_quiescent(self.network, self.pump_ticks)
            except SimTimeout:
                pass  # accepted but not yet committed; reads will say so
            committed_height = None
            for block in self.node.chain.blocks[submitted_at:]:
                if any(t.tx_id == tx_id for t in block.transactions):
                    committed_height = block.header.height
                    break
            self._persist_locked()
            return {
                "accepted": True,
                "tx_id": tx_id,
                "committed_height": committed_height,
                "node_height": self.node.next_height - 1,
            }

    def snapshot(self) -> tuple[int, WorldState, tuple]:
        with self.lock:
            node = self.node
            return node.next_height - 1, node.state, node.chain.blocks

    def pump(self, ticks: int | None = None) -> None:
        with self.lock:
            try:
                run_until_quiescent(self.network, ticks or self.pump_ticks)
            except SimTimeout:
                pass
            self._persist_locked()


def _missing(params: dict, *names: str) -> list[str]:
    return [n for n in names if not params.get(n)]


class _Handler(BaseHTTPRequestHandler):
    server_version = "rolechain/0.1"
    protocol_version = "HTTP/1.1"

    # --- plumbing ---------------------------------------------------------

    @property
    def handle_ref(self) -> NodeHandle:
        return self.server.node_handle  # type: ignore[attr-defined]

    def log_message(self, fmt, *args):  # noqa: N802 - stdlib naming
        pass

    def _reply(self, status: int, body: dict) -> None:
        data = codec.canonical_dumps(body).encode("utf-8") + b"\n"
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def _error(self, status: int, code: str, message: str) -> None:
        self._reply(status, {"code": code, "message": message})

    # --- routing ----------------------------------------------------------

    def do_POST(self):  # noqa: N802
        try:
            url = urlparse(self.path)
            if url.path != "/v1/transactions":
                return self._error(404, "NotFound", f"no such endpoint {url.path}")
            length = int(self.headers.get("Content-Length") or 0)
            raw = self.rfile.read(length)
            try:
                doc = json.loads(raw)
                tx = SignedTransaction.from_dict(doc)
            except (ValueError, KeyError, TypeError) as exc:
                return self._error(400, "Malformed", f"body is not a transaction: {exc}")
            try:
                result = self.handle_ref.submit(tx)
            except ApiFailure as exc:
                return self._error(exc.status, exc.code, exc.message)
            return self._reply(202, result)
        except BrokenPipeError:  # pragma: no cover - client went away
            pass

    def do_GET(self):  # noqa: N802
        try:
            url = urlparse(self.path)
            params = {k: v[0] for k, v in parse_qs(url.query).items()}
            route = url.path.rstrip("/") or "/"
            try:
                self._route_get(route, params)
            except ApiFailure as exc:
                self._error(exc.status, exc.code, exc.message)
        except BrokenPipeError:  # pragma: no cover
            pass

    def _route_get(self, route: str, params: dict) -> None:
        if route == "/v1/status":
            return self._get_status()
        if route == "/v1/permissions/check":
            return self._get_check(params)
        if route == "/v1/events":
            return self._get_events(params)
        m = re.fullmatch(r"/v1/accounts/([^/]+)", route)
        if m:
            return self._get_account(m.group(1))
        m = re.fullmatch(r"/v1/users/([^/]+)", route)
        if m:
            return self._get_user(m.group(1))
        m = re.fullmatch(r"/v1/users/([^/]+)/roles", route)
        if m:
            return self._get_user_roles(m.group(1))
        m = re.fullmatch(r"/v1/blocks/(\d+)", route)
        if m:
            return self._get_block(int(m.group(1)))
        self._error(404, "NotFound", f"no such endpoint {route}")

    # --- endpoints ----------------------------------------------------------

    @staticmethod
    def _checked_address(value: str) -> str:
        if not _ADDR_RE.fullmatch(value):
            raise ApiFailure(400, "Malformed", "address must be 40 lowercase hex chars")
        return value

    def _get_status(self) -> None:
        height, state, blocks = self.handle_ref.snapshot()
        self._reply(200, {
            "chain_id": self.handle_ref.chain_id,
            "node": self.handle_ref.node_id,
            "height": height,
            "state_root": state_root(state),
            "tip_hash": hash_header(blocks[-1].header),
        })

    def _get_check(self, params: dict) -> None:
        missing = _missing(params, "user", "org", "resource", "action")
        if missing:
            raise ApiFailure(400, "MissingParam", f"missing query params: {', '.join(missing)}")
        user = self._checked_address(params["user"])
        try:
            permission = Permission(params["resource"], params["action"])
        except ValueError as exc:
            raise ApiFailure(400, "Malformed", str(exc)) from None
        height, state, _ = self.handle_ref.snapshot()
        result = check_permission(state, user, params["org"], permission)
        body = result.to_dict()
        body.update({
            "height": height,
            "user": user,
            "org": params["org"],
            "permission": permission.to_dict(),
        })
        self._reply(200, body)

    def _get_account(self, raw_addr: str) -> None:
        addr = self._checked_address(raw_addr)
        height, state, _ = self.handle_ref.snapshot()
        self._reply(200, {
            "address": addr,
            "next_nonce": expected_nonce(state, addr),
            "registered": addr in state.users,
            "height": height,
        })

    def _get_user(self, raw_addr: str) -> None:
        addr = self._checked_address(raw_addr)
        height, state, _ = self.handle_ref.snapshot()
        record = query_user(state, addr)
        if record is None:
            raise ApiFailure(404, "NotRegistered", f"no user record for {addr}")
        body = record.to_dict()
        body["height"] = height
        self._reply(200, body)

    def _get_user_roles(self, raw_addr: str) -> None:
        addr = self._checked_address(raw_addr)
        height, state, _ = self.handle_ref.snapshot()
        roles = query_roles(state, addr)
        self._reply(200, {
            "address": addr,
            "roles": {org: sorted(rs) for org, rs in sorted(roles.items())},
            "height": height,
        })

    def _get_block(self, height: int) -> None:
        _, _, blocks = self.handle_ref.snapshot()
        if height >= len(blocks):
            raise ApiFailure(404, "NotFound", f"no block at height {height}")
        block = blocks[height]
        body = block.to_dict()
        body["hash"] = hash_header(block.header)
        self._reply(200, body)

    def _get_events(self, params: dict) -> None:
        kind = params.get("kind")
        org = params.get("org")
        try:
            from_height = max(0, int(params.get("from_height", 0)))
        except ValueError:
            raise ApiFailure(400, "Malformed", "from_height must be an integer") from None
        if kind is not None and kind not in EVENT_KINDS:
            raise ApiFailure(400, "Malformed", f"unknown event kind {kind!r}")
        height, _, blocks = self.handle_ref.snapshot()
        events = []
        for block in blocks[from_height:]:
            for event in block.events:
                if kind is not None and event.kind != kind:
                    continue
                if org is not None and event.attrs.get("org") != org:
                    continue
                events.append(event.to_dict())
        self._reply(200, {"events": events, "height": height})


class ApiServer:
    """Threaded HTTP server bound to one NodeHandle."""

    def __init__(self, handle: NodeHandle, listen: str = "127.0.0.1:0"):
        host, _, port = listen.partition(":")
        self._httpd = ThreadingHTTPServer((host, int(port or 0)), _Handler)
        self._httpd.node_handle = handle  # type: ignore[attr-defined]
        self._thread: threading.Thread | None = None
        self.handle = handle

    @property
    def port(self) -> int:
        return self._httpd.server_port

    @property
    def url(self) -> str:
        host, port = self._httpd.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> "ApiServer":
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        if self._thread is not None:
            self._httpd.shutdown()  # only meaningful once serve_forever is running
        self._httpd.server_close()
        if self._thread:
            self._thread.join(timeout=5)
            self._thread = None


def build_node_service(config: ServiceConfig) -> ApiServer:
    """Assemble a full node from its config: genesis, key, storage, network, server.

    The process simulates the whole validator set deterministically and
    exposes the keyed validator's view over HTTP; an existing chain file is
    loaded, verified, and fast-forwarded into every replica first.
    """
    from .consensus import NetworkConfig
    from .ledger import verify_chain
    from .store import build_genesis_state, chain_path, load_genesis
    from .wallet import load_wallet

    genesis = load_genesis(config.genesis)
    genesis_state = build_genesis_state(genesis)
    node_key = load_wallet(config.node_key)
    if node_key.address not in genesis.validators:
        raise ValueError(f"node key {node_key.address} is not a genesis validator")

    network = Network(NetworkConfig(validators=list(genesis.validators)), genesis_state)
    store = Store(chain_path(config.data_dir))
    persisted_height = -1
    if store.path.stat().st_size > 0:
        chain = store.load_chain()
        failure = verify_chain(chain, genesis_state)
        if failure is not None:
            raise ValueError(
                f"stored chain fails verification at height {failure.height}: {failure.reason}"
            )
        persisted_height = chain.height
        from .ledger import append_block, execute_block

        state = genesis_state
        for block in chain.blocks[1:]:
            state = execute_block(state, block)
        committed = {tx.tx_id for block in chain.blocks for tx in block.transactions}
        for node in network.nodes.values():
            for block in chain.blocks[1:]:
                node.chain = append_block(node.chain, block)
            node.state = state
            node.committed_ids |= committed

    handle = NodeHandle(
        network, node_key.address, chain_id=genesis.chain_id,
        store=store, persisted_height=persisted_height,
    )
    return ApiServer(handle, listen=config.listen)
