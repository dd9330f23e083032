#!/usr/bin/env python3
"""Protocol-conformant mock scorer for plugin client tests.

Speaks the newline-delimited JSON protocol on stdio. The init config picks
the scoring behavior and optional misbehavior:

  mode: "constant" (all 0.5), "by_index" ((i+1)/(n+1)), "marker"
        (0.9 if the doc contains any token of a fitted positive, else 0.1)
  break_score: "bad_json" | "out_of_range" | "wrong_count"
  die_on_fit_call: exit the process hard on the Nth fit call
  sleep_on_score: seconds to stall before answering score
"""

import json
import os
import sys
import time


def emit(obj):
    sys.stdout.write(json.dumps(obj) + "\n")
    sys.stdout.flush()


def main():
    config = {}
    docs = []
    positive_tokens = set()
    fit_calls = 0
    loaded = False

    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        req = json.loads(line)
        cmd = req.get("cmd")

        if cmd == "init":
            config = req.get("config", {})
            emit({"ok": True, "name": "mock-scorer"})
        elif cmd == "load_corpus":
            docs = []
            with open(req["path"], "r", encoding="utf-8") as handle:
                for raw in handle:
                    if raw.strip():
                        docs.append(json.loads(raw))
            loaded = True
            emit({"ok": True, "n_docs": len(docs)})
        elif cmd == "fit":
            if not loaded:
                emit({"ok": False, "error": "fit before load_corpus"})
                continue
            fit_calls += 1
            if config.get("die_on_fit_call") == fit_calls:
                os._exit(1)
            by_id = {d["doc_id"]: d for d in docs}
            for entry in req["labeled"]:
                if entry["label"] == 1 and entry["doc_id"] in by_id:
                    positive_tokens.update(by_id[entry["doc_id"]]["text"].split())
            emit({"ok": True, "train_seconds": 0.0})
        elif cmd == "score":
            if config.get("sleep_on_score"):
                time.sleep(config["sleep_on_score"])
            if config.get("break_score") == "bad_json":
                sys.stdout.write("this is not json\n")
                sys.stdout.flush()
                continue
            mode = config.get("mode", "constant")
            if mode == "constant":
                scores = [0.5] * len(docs)
            elif mode == "by_index":
                scores = [(i + 1) / (len(docs) + 1) for i in range(len(docs))]
            else:
                scores = [
                    0.9 if positive_tokens & set(d["text"].split()) else 0.1 for d in docs
                ]
            if config.get("break_score") == "out_of_range":
                scores[0] = 1.5
            if config.get("break_score") == "wrong_count":
                scores = scores[:-1]
            emit({"ok": True, "scores": scores})
        elif cmd == "shutdown":
            emit({"ok": True})
            return 0
        else:
            emit({"ok": False, "error": f"unknown command {cmd!r}"})
    return 0


if __name__ == "__main__":
    sys.exit(main())
