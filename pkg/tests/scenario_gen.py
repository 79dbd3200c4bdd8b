"""Random but valid full-economy scenarios."""

import random

from sapiens_sim.scenario import parse_scenario

PATTERNS = ["sqli", "xss", "csrf", "ssrf", "rce"]


def random_scenario_dict(rng: random.Random, manual_only=False) -> dict:
    nodes = [{"id": f"fog-{i}", "kind": "Fog", "position": [rng.uniform(0, 100), rng.uniform(0, 100)]}
             for i in range(rng.randint(1, 2))]
    users = [f"user-{i}" for i in range(rng.randint(1, 3))]
    for u in users:
        nodes.append({"id": u, "roles": ["User"], "position": [rng.uniform(0, 100), rng.uniform(0, 100)]})
    for i in range(rng.randint(2, 6)):
        nodes.append({"id": f"cro-{i}", "roles": ["CRO"], "position": [rng.uniform(0, 100), rng.uniform(0, 100)],
                      "capacity": rng.choice([0.5, 1.0, 2.0, 3.0]), "failure_prob": rng.choice([0.0, 0.0, 0.2, 0.5]),
                      "work_proofs": rng.randint(0, 2)})
    for i in range(rng.randint(3, 7)):
        roles = ["POCD"] + (["POCA"] if i > 0 and rng.random() < 0.85 else [])
        nodes.append({"id": f"pocd-{i}", "roles": roles, "ranking": rng.randint(0, 3)})
    for i in range(rng.randint(2, 8)):
        roles = ["WHH"] + (["WHA"] if i % 2 else [])
        nodes.append({"id": f"whh-{i}", "roles": roles, "skill": rng.choice([0.5, 0.8, 1.0]),
                      "failure_prob": rng.choice([0.0, 0.1]), "ranking": rng.randint(0, 2),
                      "position": [rng.uniform(0, 100), rng.uniform(0, 100)]})
    quorum = rng.choice([1, 3])
    pocs = []
    for i in range(rng.randint(0, 5)):
        p = {"id": f"poc-{i}", "at": rng.randint(0, 1) if i < 3 else rng.randint(0, 6), "author": f"pocd-{rng.randint(0, 1)}",
             "pattern": rng.choice(PATTERNS), "valid": rng.random() < 0.8}
        if rng.random() < 0.3:
            p["verdicts"] = [rng.choice(["Accept", "Reject"]) for _ in range(quorum)]
        pocs.append(p)
    tasks, vid = [], 0
    for i in range(rng.randint(1, 6)):
        kind = rng.choice(["Website", "Application", "SmartContract"])
        targets = []
        for t in range(rng.randint(1, 5)):
            planted = []
            for _ in range(rng.randint(0, 3)):
                planted.append({"id": f"v{vid}", "pattern": rng.choice(PATTERNS),
                                "severity": rng.choice(["Low", "Medium", "High"]),
                                "detectability": rng.choice([0.3, 0.7, 1.0])})
                vid += 1
            targets.append({"id": f"t{i}-{t}", "type": kind, "planted": planted})
        service = "Manual" if manual_only or rng.random() < 0.4 else "Automatic"
        tasks.append({"id": f"task-{i}", "at": rng.randint(2, 8), "user": rng.choice(users), "type": kind,
                      "service": service, "escrow": rng.randint(0, 40), "targets": targets})
    claims = []
    for i in range(rng.randint(0, 4)):
        c = {"id": f"offer-{i}", "at": rng.randint(0, 8), "author": f"whh-{rng.randint(0, 1)}",
             "user": rng.choice(users), "price": rng.randint(0, 30),
             "finding": {"target": "x.example", "vuln": f"c{i}", "severity": rng.choice(["Low", "High"])}}
        choice = rng.random()
        if choice < 0.4:
            c["decision"] = "Claim"
        elif choice < 0.7:
            c["decision"] = "Decline"
        if "decision" in c and rng.random() < 0.5:
            c["decide_at"] = c["at"] + rng.randint(1, 4)
        claims.append(c)
    params = {
        "segments": rng.randint(1, 4),
        "redundancy": rng.randint(1, 3),
        "quorum": quorum,
        "max_rounds": rng.randint(1, 5),
        "capacity_step": rng.choice([0.5, 1.0]),
        "mint_enabled": rng.random() < 0.3,
        "fp_rate": rng.choice([0.0, 0.3]),
        "wha_reject_prob": rng.choice([0.0, 0.3, 0.7]),
        "poca_error_rate": rng.choice([0.0, 0.2]),
        "wha_count": rng.choice([1, 1, 2]),
        "pow_difficulty": rng.choice([0, 4, 8]),
        "rewards": {str(s): rng.randint(0, 6) for s in range(1, 6)},
    }
    w = rng.choice([0.0, 0.25, 0.5, 1.0])
    params["w_pow"], params["w_dist"] = w, 1.0 - w
    balances = {u: rng.randint(10, 150) for u in users}
    balances["whh-0"] = rng.randint(0, 5)
    return {"schema": 1, "run_seed": rng.randrange(2**63), "params": params, "nodes": nodes,
            "initial_balances": balances, "tasks": tasks, "pocs": pocs, "claims": claims}


def random_scenario(seed: int, **kw):
    return parse_scenario(random_scenario_dict(random.Random(seed), **kw), name=f"random-{seed}")
