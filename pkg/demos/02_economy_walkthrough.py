# %% [markdown]
# # One afternoon in the marketplace
#
# The `economy` scenario mixes automatic and manual audits, a bogus POC that
# the auditors vote down, two flaky CROs, and three claim-mode offers. We
# follow the money and a manual task's review loop.

# %%
from sapiens_sim import bundled_scenario, load_scenario, replay_balances, run
from sapiens_sim.ledger import TxKind, query

result = run(load_scenario(bundled_scenario("economy")))
net, m = result.network, result.metrics
print("POCs:", m.pocs)
print("claims:", m.claims)
print("tasks reported/failed:", m.tasks_reported, m.tasks_failed, " abandoned nodes:", m.abandonments)

# %% [markdown]
# ## A manual task's review loop
#
# Hunters submit findings, a reviewer drops false positives, and the draft
# goes round again until it is approved or the round cap is hit.

# %%
for event in result.traces["job-2"]:
    print(event)

# %% [markdown]
# ## Flaky CROs
#
# Every failed segment costs a CRO `capacity_step` of capacity. At zero the
# node is dropped from the network for good.

# %%
for tx in query(net.ledger, kind=TxKind.PENALTY):
    if tx.note("outcome") == "Failed":
        print(tx.logical_time, tx.actor, tx.note("reason"))
for tx in query(net.ledger, kind=TxKind.NODE_ABANDONED):
    print("abandoned:", tx.actor, "at tick", tx.logical_time)

# %% [markdown]
# ## Money in, money out
#
# Replaying the chain from genesis rebuilds every balance exactly.

# %%
balances, minted, supply = replay_balances(net.ledger)
assert balances == net.bank.snapshot()
print(f"supply {supply} + minted {minted} = {sum(balances.values())}")
by_situation = {}
for tx in query(net.ledger, kind=TxKind.REWARD):
    by_situation[tx.note("situation")] = by_situation.get(tx.note("situation"), 0) + tx.amount
print("paid per reward situation:", dict(sorted(by_situation.items())))

# %% [markdown]
# The claimed offer's finding reached the buyer, but only its digest is on chain.

# %%
offer = net.offers["offer-1"]
print(offer.status.value, offer.delivered)
print(query(net.ledger, kind=TxKind.CLAIM_OFFERED, subject="offer-1")[0].payload_digest)
