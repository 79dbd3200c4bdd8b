# %% [markdown]
# # Editing history does not go unnoticed
#
# Run a scenario, dump its ledger, quietly change one transaction, and see
# where verification points.

# %%
import json
import tempfile
from pathlib import Path

from sapiens_sim import bundled_scenario, load_scenario, run, verify_chain
from sapiens_sim.ledger import dump_ledger, load_ledger

result = run(load_scenario(bundled_scenario("economy")))
out = Path(tempfile.mkdtemp()) / "ledger.jsonl"
dump_ledger(result.ledger, out)
print(len(result.ledger), "blocks, head", result.ledger.head_digest()[:16])
print(verify_chain(load_ledger(out)))

# %% [markdown]
# Give a reward recipient a larger payout in block 7.

# %%
lines = out.read_text().splitlines()
block = json.loads(lines[8])  # line 0 is the header
reward = next(tx for tx in block["transactions"] if tx["kind"] == "Reward")
print("before:", reward["actor"], reward["amount"])
reward["amount"] += 100
lines[8] = json.dumps(block)
out.write_text("\n".join(lines) + "\n")
print(verify_chain(load_ledger(out)))

# %% [markdown]
# Recomputing the content hash and patching the header just moves the problem:
# the next block's `prev_hash` no longer links.

# %%
from sapiens_sim.ledger import Block, content_hash

chain = load_ledger(out)
b = chain.blocks[7]
chain.blocks[7] = Block(b.index, b.prev_hash, content_hash(b.transactions), b.sealed_at, b.transactions)
print(verify_chain(chain))
