#!/usr/bin/env python3
"""Convert the question-classification release files (`LABEL:fine text`
per line, latin-1) into `label,text` CSV with coarse labels.

    python3 scripts/trec_to_csv.py train_5500.label train.csv
    python3 scripts/trec_to_csv.py TREC_10.label test.csv
"""

import csv
import sys


def convert(src, dst):
    rows = 0
    with open(src, encoding="latin-1") as f, open(dst, "w", newline="", encoding="utf-8") as out:
        w = csv.writer(out)
        for line in f:
            line = line.strip()
            if not line:
                continue
            label, text = line.split(" ", 1)
            w.writerow([label.split(":", 1)[0], text])
            rows += 1
    return rows


if __name__ == "__main__":
    if len(sys.argv) != 3:
        sys.exit(__doc__)
    print(f"{convert(sys.argv[1], sys.argv[2])} rows written to {sys.argv[2]}")
