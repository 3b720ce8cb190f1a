"""Reference child process for the subprocess backend.

    python -m lm_attr.model.child --model '{"type": "toylm", "seed": 0}'

Reads one JSON request per line from stdin and answers on stdout.
"""

from __future__ import annotations

import argparse
import json
import sys


def serve(model, stdin=sys.stdin, stdout=sys.stdout):
    for line in stdin:
        if not line.strip():
            continue
        try:
            req = json.loads(line)
            op = req.get("op")
            if op == "score":
                seq = model.score_target(req["prompt"], req["continuation"])
                reply = {"tokens": list(seq.tokens), "token_logprobs": list(seq.token_logprobs)}
            elif op == "generate":
                seq = model.generate_greedy(req["prompt"], int(req["max_tokens"]), req.get("stop"))
                reply = {"text": seq.text, "tokens": list(seq.tokens), "token_logprobs": list(seq.token_logprobs)}
            elif op == "tokenize":
                reply = {"tokens": model.tokenize(req["text"])}
            else:
                reply = {"error": f"unknown op {op!r}"}
        except Exception as exc:
            reply = {"error": f"{type(exc).__name__}: {exc}"}
        stdout.write(json.dumps(reply) + "\n")
        stdout.flush()


def main(argv=None):
    from ..config import build_model

    parser = argparse.ArgumentParser(description="line-delimited JSON model server")
    group = parser.add_mutually_exclusive_group(required=True)
    group.add_argument("--model", help="inline JSON model section")
    group.add_argument("--model-file", help="path to a JSON model section")
    args = parser.parse_args(argv)
    if args.model_file:
        with open(args.model_file, encoding="utf-8") as fh:
            section = json.load(fh)
    else:
        section = json.loads(args.model)
    serve(build_model(section))


if __name__ == "__main__":
    main()
