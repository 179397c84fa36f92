"""Regenerate the bundled job-history demo file (deterministic)."""
import csv
import sys
from pathlib import Path

import numpy as np

COMPANIES = ["acme", "globex", "initech", "umbrella", "hooli", "vandelay"]
TITLES = ["engineer", "analyst", "manager", "director"]


def main(path):
    rng = np.random.default_rng(20180101)
    rows = []
    for user in range(40):
        n = int(rng.integers(3, 10))
        t = 21.0 + rng.uniform(0.0, 3.0)
        company = int(rng.integers(len(COMPANIES)))
        level = 0
        for _ in range(n):
            rows.append((f"u{user:03d}", f"{t:.2f}", COMPANIES[company], TITLES[min(level, 3)]))
            t += 0.25 + rng.exponential(2.0)
            # neighbouring companies hire from each other more often
            company = int((company + rng.choice([0, 1, 1, 2, -1])) % len(COMPANIES))
            level += int(rng.random() < 0.4)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "time", "event", "option1"])
        w.writerows(rows)


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else Path(__file__).parents[1] / "src/pointkit/data/linkedin_demo.csv")
