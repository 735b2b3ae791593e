"""Minimal external scoring process for protocol tests (stdlib only).

Fits per-class feature centroids and scores queries with a logistic
function of the squared-distance difference, so scores are a
deterministic, order-sensitive function of each query row.
"""

import json
import math
import sys


def centroid(rows):
    dim = len(rows[0])
    return [sum(r[j] for r in rows) / len(rows) for j in range(dim)]


def sqdist(a, b):
    return sum((x - y) ** 2 for x, y in zip(a, b))


def main():
    model = None
    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        try:
            msg = json.loads(line)
        except json.JSONDecodeError:
            print(json.dumps({"ok": False, "error": "malformed JSON"}), flush=True)
            continue
        op = msg.get("op")
        if op == "fit":
            feats = msg["features"]
            labels = msg["labels"]
            by_class = {0: [], 1: []}
            for row, label in zip(feats, labels):
                by_class[int(label)].append(row)
            model = {c: centroid(rows) for c, rows in by_class.items() if rows}
            print(json.dumps({"ok": True}), flush=True)
        elif op == "predict":
            if model is None:
                print(json.dumps({"ok": False, "error": "predict before fit"}), flush=True)
                continue
            scores = []
            for row in msg["features"]:
                if 0 in model and 1 in model:
                    z = sqdist(row, model[0]) - sqdist(row, model[1])
                    scores.append(1.0 / (1.0 + math.exp(-max(-500.0, min(500.0, z)))))
                else:
                    scores.append(1.0 if 1 in model else 0.0)
            print(json.dumps({"ok": True, "scores": scores}), flush=True)
        elif op == "shutdown":
            print(json.dumps({"ok": True}), flush=True)
            return 0
        else:
            print(json.dumps({"ok": False, "error": f"unknown op {op!r}"}), flush=True)
    return 0


if __name__ == "__main__":
    sys.exit(main())
