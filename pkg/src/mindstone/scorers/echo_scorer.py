"""Reference external scorer speaking wire protocol v1.

Ranks every paragraph with a constant score and reads the whole text as a
single span. Useful for wiring checks and as a template for real scorers:

    python -m mindstone.scorers.echo_scorer --rank-score 0.5
"""

import argparse
import json
import sys


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--rank-score", type=float, default=1.0)
    parser.add_argument("--roles", default="rank,read")
    args = parser.parse_args(argv)

    roles = [r for r in args.roles.split(",") if r]
    print(json.dumps({"type": "hello", "protocol": 1, "roles": roles}),
          flush=True)
    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        req = json.loads(line)
        if req["type"] == "rank":
            resp = {"type": "rank_result", "id": req["id"],
                    "score": args.rank_score}
        elif req["type"] == "read":
            text = req["text"]
            resp = {"type": "read_result", "id": req["id"],
                    "spans": [{"start": 0, "end": len(text), "score": 1.0}]}
        else:
            resp = {"type": "error", "id": req.get("id", ""),
                    "message": f"unknown request type {req['type']!r}"}
        print(json.dumps(resp), flush=True)
    return 0


if __name__ == "__main__":
    sys.exit(main())
