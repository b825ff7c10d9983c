#!/usr/bin/env python3
"""Generate the bundled synthetic listening fixture (users.tsv, events.tsv)."""
import argparse
import os
import random

COUNTRIES = [("US", 150), ("DE", 100), ("FI", 80), ("BR", 70), ("JP", 50), ("SE", 30), ("IS", 5)]
N_NO_COUNTRY = 15
N_ARTISTS = 600


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=os.path.join(os.path.dirname(__file__), "..", "tests", "data"))
    ap.add_argument("--seed", type=int, default=20160901)
    args = ap.parse_args()
    rng = random.Random(args.seed)

    artists = [1000 + 7 * i for i in range(N_ARTISTS)]
    base = [1.0 / (r + 1) ** 1.1 for r in range(N_ARTISTS)]

    users = []
    uid = 1
    for code, n in COUNTRIES:
        for _ in range(n):
            users.append((uid, code))
            uid += 1
    for _ in range(N_NO_COUNTRY):
        users.append((uid, ""))
        uid += 1
    rng.shuffle(users)

    # Each country boosts a few local artists and damps a few global hits.
    local = {}
    for code, _ in COUNTRIES:
        w = list(base)
        for a in rng.sample(range(20, N_ARTISTS), 15):
            w[a] *= rng.uniform(3.0, 12.0)
        for a in rng.sample(range(0, 40), 4):
            w[a] *= rng.uniform(0.1, 0.4)
        local[code] = w
    local[""] = list(base)

    with open(os.path.join(args.out, "users.tsv"), "w") as f:
        f.write("user_id\tcountry\tage\tgender\n")
        for u, code in sorted(users):
            f.write(f"{u}\t{code}\t{rng.randint(16, 60)}\t{rng.choice('mfn')}\n")

    rows = []
    for u, code in users:
        w = local[code]
        taste = rng.uniform(0.3, 1.0)
        weights = [x ** taste for x in w]
        k = rng.randint(8, 60)
        chosen = set()
        while len(chosen) < k:
            chosen.add(rng.choices(range(N_ARTISTS), weights=weights)[0])
        for a in chosen:
            plays = max(1, int(rng.paretovariate(1.3) * 3 * weights[a] / weights[0] * 10))
            rows.append((u, artists[a], plays))
    rows.sort()
    with open(os.path.join(args.out, "events.tsv"), "w") as f:
        f.write("user_id\tartist_id\tplaycount\n")
        for u, a, p in rows:
            f.write(f"{u}\t{a}\t{p}\n")


if __name__ == "__main__":
    main()
