# %% [markdown]
# # Near or hard-working?
#
# Worker selection blends two normalized signals: accepted work proofs and
# closeness to the requester. `w_pow` slides between them.

# %%
import random

from sapiens_sim.registry import NodeProfile, Registry, Role, WorkProof, puzzle_seed_for, solve_work
from sapiens_sim.scheduler import SelectionRequest, composite_scores, select_by_proximity_pow

rng = random.Random(5)
reg = Registry()
reg.register_node(NodeProfile("client", roles={Role.USER}, position=(0.5, 0.5)))
for i in range(8):
    node_id = f"cro-{i}"
    reg.register_node(NodeProfile(node_id, roles={Role.CRO}, position=(rng.random(), rng.random())))
    for k in range(rng.randint(0, 4)):
        seed = puzzle_seed_for(node_id, str(k))
        reg.submit_work_proof(WorkProof(node_id, seed, solve_work(seed, 6), 6))

for n in sorted(reg, key=lambda n: n.node_id):
    if n.has(Role.CRO):
        print(f"{n.node_id}  pow={n.pow_score}  dist={reg.distance(n.node_id, 'client'):.2f}")

# %%
req = SelectionRequest("demo", "client", Role.CRO, 3)
for w in (0.0, 0.25, 0.5, 0.75, 1.0):
    print(f"w_pow={w:<4}", select_by_proximity_pow(reg, req, w_pow=w))

# %% [markdown]
# The scores behind the default pick:

# %%
for s in sorted(composite_scores(reg, req), key=lambda s: -s.total):
    print(f"{s.node_id}  pow {s.pow_rank_component:.2f}  prox {s.proximity_component:.2f}  total {s.total:.3f}")
