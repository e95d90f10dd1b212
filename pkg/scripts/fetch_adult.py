#!/usr/bin/env python3
"""Download and prepare the Adult census extract (48,842 records).

Fetches the two canonical UCI files (adult.data, adult.test), normalizes them
into one delimited file at data/adult/adult.csv next to the committed
declaration, and verifies the expected row count and target fraction.
Run from the repository root on a machine with network access:

    python scripts/fetch_adult.py

'?' cells are kept as category values (they are part of the published
attribute cardinalities); trailing periods on the test-file income labels are
stripped so both halves share the same label set.
"""

import csv
import io
import sys
import urllib.request
from pathlib import Path

BASE = "https://archive.ics.uci.edu/ml/machine-learning-databases/adult"
COLUMNS = [
    "age", "workclass", "fnlwgt", "education", "education_num", "marital_status",
    "occupation", "relationship", "race", "sex", "capital_gain", "capital_loss",
    "hours_per_week", "native_country", "income",
]
EXPECTED_ROWS = 48_842
EXPECTED_TARGET_FRACTION = 0.2393


def fetch(name: str) -> str:
    url = f"{BASE}/{name}"
    print(f"fetching {url}")
    with urllib.request.urlopen(url, timeout=60) as resp:
        return resp.read().decode("latin-1")


def parse_rows(text: str) -> list[list[str]]:
    rows = []
    for line in io.StringIO(text):
        line = line.strip()
        if not line or line.startswith("|"):
            continue
        cells = [c.strip() for c in line.split(",")]
        if len(cells) != len(COLUMNS):
            continue
        cells[-1] = cells[-1].rstrip(".")  # test-file labels carry a period
        rows.append(cells)
    return rows


def main() -> int:
    out_dir = Path(__file__).resolve().parent.parent / "data" / "adult"
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = parse_rows(fetch("adult.data")) + parse_rows(fetch("adult.test"))
    if len(rows) != EXPECTED_ROWS:
        print(f"warning: expected {EXPECTED_ROWS} rows, parsed {len(rows)}", file=sys.stderr)
    out_path = out_dir / "adult.csv"
    with open(out_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(COLUMNS)
        writer.writerows(rows)
    targets = sum(1 for r in rows if r[-1] == ">50K")
    fraction = targets / len(rows)
    print(f"wrote {out_path}: {len(rows)} rows, {targets} targets ({100 * fraction:.2f}%)")
    if abs(fraction - EXPECTED_TARGET_FRACTION) > 0.005:
        print("warning: target fraction differs from the published 23.93%", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
