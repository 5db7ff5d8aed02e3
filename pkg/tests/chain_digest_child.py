"""Child process for the cross-process determinism check.

Builds the standard test genesis and a seeded workload chain, then prints
one digest over all canonical block bytes. Two invocations with the same
seed must print the same digest regardless of PYTHONHASHSEED.
"""

import hashlib
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from conftest import WALLET_NAMES, make_chain, make_genesis_file, make_wallet  # noqa: E402
from workloads import WorkloadBuilder  # noqa: E402

from rolechain import codec  # noqa: E402
from rolechain.store import build_genesis_state  # noqa: E402

from conftest import PASSPHRASE  # noqa: E402


def main(seed: int) -> str:
    wallets = {name: make_wallet(name) for name in WALLET_NAMES}
    genesis_file = make_genesis_file(wallets)
    genesis_state = build_genesis_state(genesis_file)
    wb = WorkloadBuilder(genesis_file, seed=seed)
    wb.attach_admins({w.address: w for w in wallets.values()}, PASSPHRASE)
    txs = wb.generate(40)
    chain = make_chain(genesis_state, txs, proposer=wallets["v0"].address, per_block=4)
    h = hashlib.sha256()
    for block in chain.blocks:
        h.update(codec.canonical_bytes(block.to_dict()))
    return h.hexdigest()


if __name__ == "__main__":
    print(main(int(sys.argv[1])))
