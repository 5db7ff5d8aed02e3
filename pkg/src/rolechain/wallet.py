"""Wallets: encrypted key custody plus transaction signing.

A wallet file holds the account address, the verifying key, the signing key
sealed under a passphrase-derived AES-256-GCM key, and the password digest
that registration places on chain. The raw signing key never appears in a
serialized wallet and never leaves this module unencrypted.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path

from . import codec, keys
from .errors import BadPassphrase, SenderMismatch, WeakPassphrase
from .payloads import Payload, SignedTransaction

MIN_PASSPHRASE_LENGTH = 8
DEFAULT_KDF_ITERATIONS = 10_000  # tunable; kept modest so test suites stay fast
KDF_SALT_BYTES = 16


@dataclass(frozen=True)
class Wallet:
    """Immutable wallet value; secrets are present only in sealed form."""

    address: str
    public_key: str
    enc_private_key: str
    kdf_salt: str
    kdf_iterations: int
    password_digest: str

    def to_dict(self) -> dict:
        return {
            "address": self.address,
            "enc_private_key": self.enc_private_key,
            "kdf_iterations": self.kdf_iterations,
            "kdf_salt": self.kdf_salt,
            "password_digest": self.password_digest,
            "public_key": self.public_key,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Wallet":
        return cls(
            address=d["address"],
            public_key=d["public_key"],
            enc_private_key=d["enc_private_key"],
            kdf_salt=d["kdf_salt"],
            kdf_iterations=d["kdf_iterations"],
            password_digest=d["password_digest"],
        )


def password_digest(passphrase: str, kdf_salt: bytes) -> str:
    """The on-chain registration credential: SHA-256(passphrase bytes || salt)."""
    return codec.sha256_hex(passphrase.encode("utf-8") + kdf_salt)


def create_wallet(
    seed: bytes,
    passphrase: str,
    *,
    kdf_salt: bytes | None = None,
    iterations: int = DEFAULT_KDF_ITERATIONS,
) -> Wallet:
    """Derive a wallet from a 32-byte seed.

    Fully deterministic for a fixed (seed, passphrase, kdf_salt); a fresh
    random salt is drawn when none is supplied.
    """
    if len(passphrase) < MIN_PASSPHRASE_LENGTH:
        raise WeakPassphrase(f"passphrase must be at least {MIN_PASSPHRASE_LENGTH} characters")
    signing_key, public_key = keys.keypair_from_seed(seed)
    salt = os.urandom(KDF_SALT_BYTES) if kdf_salt is None else kdf_salt
    if len(salt) != KDF_SALT_BYTES:
        raise ValueError(f"kdf_salt must be {KDF_SALT_BYTES} bytes")
    sealed = keys.seal(keys.derive_key(passphrase, salt, iterations), signing_key, salt)
    return Wallet(
        address=keys.derive_address(public_key),
        public_key=public_key.hex(),
        enc_private_key=sealed.hex(),
        kdf_salt=salt.hex(),
        kdf_iterations=iterations,
        password_digest=password_digest(passphrase, salt),
    )


def decrypt_signing_key(wallet: Wallet, passphrase: str) -> bytes:
    """Unseal the signing key; raises BadPassphrase on a wrong passphrase."""
    salt = bytes.fromhex(wallet.kdf_salt)
    key = keys.derive_key(passphrase, salt, wallet.kdf_iterations)
    try:
        signing_key = keys.unseal(key, bytes.fromhex(wallet.enc_private_key), salt)
    except keys.InvalidTag:
        raise BadPassphrase("passphrase does not decrypt this wallet") from None
    return signing_key


def sign_transaction(
    wallet: Wallet, passphrase: str, sender: str, nonce: int, payload: Payload
) -> SignedTransaction:
    """Sign (sender, nonce, payload) with the wallet's key. Deterministic."""
    if sender != wallet.address:
        raise SenderMismatch(f"wallet holds {wallet.address}, body names {sender}")
    signing_key = decrypt_signing_key(wallet, passphrase)
    unsigned = SignedTransaction(
        sender=sender, nonce=nonce, payload=payload, public_key=wallet.public_key, signature="0" * 128
    )
    signature = keys.sign(signing_key, unsigned.signing_bytes())
    return SignedTransaction(
        sender=sender,
        nonce=nonce,
        payload=payload,
        public_key=wallet.public_key,
        signature=signature.hex(),
    )


def verify_signature(tx: SignedTransaction, public_key: bytes | str) -> bool:
    """True iff the envelope signature is valid under *public_key*."""
    pk_hex = public_key.hex() if isinstance(public_key, bytes) else public_key
    try:
        return tx.verify(pk_hex)
    except Exception:
        return False


def verify_envelope(tx: SignedTransaction) -> bool:
    """Stateless check: the embedded key binds to the sender and signed this body."""
    if not codec.is_hex(tx.public_key, 32):
        return False
    if keys.derive_address(bytes.fromhex(tx.public_key)) != tx.sender:
        return False
    return tx.verify(tx.public_key)


def save_wallet(wallet: Wallet, path: str | Path) -> None:
    """Write the wallet file (canonical JSON, owner read/write only)."""
    p = Path(path)
    p.write_text(codec.canonical_dumps(wallet.to_dict()) + "\n", encoding="utf-8")
    os.chmod(p, 0o600)


def load_wallet(path: str | Path) -> Wallet:
    return Wallet.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
