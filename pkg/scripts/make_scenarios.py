"""Regenerate the scenarios bundled under src/sapiens_sim/scenarios/.

    python3 scripts/make_scenarios.py
"""

import json
import random
from pathlib import Path

OUT = Path(__file__).resolve().parents[1] / "src" / "sapiens_sim" / "scenarios"

PATTERNS = ["sqli", "xss", "csrf", "ssrf", "path-traversal", "open-redirect", "weak-tls", "reentrancy"]


def base_nodes(n_cro=10, n_pocd=5, n_users=2, n_whh=0, n_wha=0, work_proofs=1):
    nodes = [{"id": "fog-0", "kind": "Fog", "position": [50.0, 50.0]}]
    for i in range(n_users):
        nodes.append({"id": f"user-{i}", "roles": ["User"], "position": [10.0 * i, 5.0]})
    for i in range(n_cro):
        nodes.append({"id": f"cro-{i:02d}", "roles": ["CRO"], "position": [float(7 * i % 100), float(13 * i % 100)],
                      "capacity": 3.0, "work_proofs": work_proofs + i % 3})
    for i in range(n_pocd):
        roles = ["POCA", "POCD"] if i > 0 else ["POCD"]
        nodes.append({"id": f"pocd-{i}", "roles": roles, "position": [float(20 + i), 80.0], "ranking": 5 - i})
    for i in range(n_whh):
        roles = ["WHA", "WHH"] if i >= n_whh - n_wha else ["WHH"]
        nodes.append({"id": f"whh-{i}", "roles": roles, "position": [float(30 + 3 * i), 30.0], "skill": 0.9,
                      "ranking": 3})
    return nodes


def pocs_for(patterns, author="pocd-0"):
    return [{"id": f"poc-{p}", "at": 0, "author": author, "pattern": p, "valid": True} for p in patterns]


def risk_distribution():
    # ten websites, one target each; two carry a High vulnerability
    tasks = []
    for i in range(10):
        if i in (3, 7):
            planted = [{"id": f"v{i}-0", "pattern": "sqli", "severity": "High", "detectability": 1.0},
                       {"id": f"v{i}-1", "pattern": "xss", "severity": "Low", "detectability": 1.0}]
        elif i % 2:
            planted = [{"id": f"v{i}-0", "pattern": "weak-tls", "severity": "Low", "detectability": 1.0}]
        else:
            planted = []
        tasks.append({"id": f"site-{i:02d}", "at": 2, "user": f"user-{i % 2}", "type": "Website",
                      "service": "Automatic", "escrow": 40,
                      "targets": [{"id": f"www-{i:02d}", "type": "Website", "planted": planted}]})
    return {
        "schema": 1,
        "run_seed": 2024,
        "params": {"segments": 4, "redundancy": 2, "quorum": 3},
        "nodes": base_nodes(),
        "initial_balances": {"user-0": 1000, "user-1": 1000},
        "pocs": pocs_for(["sqli", "xss", "weak-tls"]),
        "tasks": tasks,
    }


def vuln_counts():
    rng = random.Random(368)
    severities = ["High"] * 179 + ["Medium"] * 112 + ["Low"] * 77
    rng.shuffle(severities)
    n_targets = 46  # 8 vulns per target
    targets = [[] for _ in range(n_targets)]
    for k, sev in enumerate(severities):
        t = k % n_targets
        targets[t].append({"id": f"v{k:03d}", "pattern": PATTERNS[k % len(PATTERNS)], "severity": sev,
                           "detectability": 1.0})
    tasks = []
    for j in range(0, n_targets, 5):
        chunk = range(j, min(j + 5, n_targets))
        tasks.append({"id": f"audit-{j // 5:02d}", "at": 2, "user": f"user-{(j // 5) % 2}", "type": "Website",
                      "service": "Automatic", "escrow": 200,
                      "targets": [{"id": f"site-{t:02d}", "type": "Website", "planted": targets[t]} for t in chunk]})
    return {
        "schema": 1,
        "run_seed": 368179,
        "params": {"segments": 4, "redundancy": 2, "quorum": 3},
        "nodes": base_nodes(),
        "initial_balances": {"user-0": 5000, "user-1": 5000},
        "pocs": pocs_for(PATTERNS),
        "tasks": tasks,
    }


def minimal():
    return {
        "schema": 1,
        "run_seed": 1,
        "params": {"segments": 1, "redundancy": 1, "quorum": 1},
        "nodes": [
            {"id": "fog-0", "kind": "Fog"},
            {"id": "alice", "roles": ["User"]},
            {"id": "cro-a", "roles": ["CRO"], "position": [1.0, 0.0]},
            {"id": "pocd-a", "roles": ["POCD"]},
            {"id": "pocd-b", "roles": ["POCA", "POCD"]},
        ],
        "initial_balances": {"alice": 10},
        "pocs": [{"id": "poc-sqli", "at": 0, "author": "pocd-a", "pattern": "sqli"}],
        "tasks": [{"id": "t1", "at": 2, "user": "alice", "type": "Website", "escrow": 5,
                   "targets": [{"id": "shop", "type": "Website",
                                "planted": [{"id": "v1", "pattern": "sqli", "severity": "Medium"}]}]}],
    }


def economy():
    """Mixed workload: automatic and manual audits, a bad POC, flaky CROs, claims."""
    nodes = base_nodes(n_cro=6, n_pocd=5, n_users=3, n_whh=10, n_wha=3)
    for n in nodes:
        if n["id"] in ("cro-04", "cro-05"):
            n["failure_prob"] = 0.6
            n["capacity"] = 2.0
        if n["id"] == "whh-5":
            n["skill"] = 0.5
    tasks = []
    for i in range(6):
        service = "Manual" if i % 3 == 2 else "Automatic"
        kind = ["Website", "Application", "SmartContract"][i % 3]
        targets = []
        for t in range(3):
            planted = [{"id": f"e{i}-{t}-{k}", "pattern": PATTERNS[(i + t + k) % 6],
                        "severity": ["Low", "Medium", "High"][(i * t + k) % 3], "detectability": 0.8}
                       for k in range(2)]
            targets.append({"id": f"e{i}-t{t}", "type": kind, "planted": planted})
        tasks.append({"id": f"job-{i}", "at": 2 + i, "user": f"user-{i % 3}", "type": kind, "service": service,
                      "escrow": 30, "targets": targets})
    return {
        "schema": 1,
        "run_seed": 77,
        "params": {"segments": 3, "redundancy": 2, "quorum": 3, "max_rounds": 4, "wha_count": 1,
                   "wha_reject_prob": 0.3, "fp_rate": 0.2, "capacity_step": 0.5,
                   "rewards": {"1": 2, "2": 1, "3": 3, "4": 1, "5": 2}},
        "nodes": nodes,
        "initial_balances": {"user-0": 400, "user-1": 400, "user-2": 60},
        "pocs": pocs_for(PATTERNS[:6]) + [
            {"id": "poc-bogus", "at": 1, "author": "pocd-1", "pattern": "bogus", "valid": False}],
        "tasks": tasks,
        "claims": [
            {"id": "offer-1", "at": 3, "author": "whh-1", "user": "user-0", "price": 25, "decision": "Claim",
             "finding": {"target": "app.example", "vuln": "idor-7", "severity": "High"}},
            {"id": "offer-2", "at": 4, "author": "whh-1", "user": "user-1", "price": 10, "decision": "Decline",
             "finding": {"target": "app.example", "vuln": "xss-2", "severity": "Low"}},
            {"id": "offer-3", "at": 5, "author": "whh-2", "user": "user-2", "price": 15,
             "finding": {"target": "legacy.example", "vuln": "rce-1", "severity": "High"}},
        ],
    }


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    for name, build in [("risk_distribution", risk_distribution), ("vuln_counts", vuln_counts),
                        ("minimal", minimal), ("economy", economy)]:
        path = OUT / f"{name}.json"
        path.write_text(json.dumps(build(), indent=1) + "\n")
        print(path)


if __name__ == "__main__":
    main()
