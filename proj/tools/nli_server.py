#!/usr/bin/env python3
"""Serve NLI entailment scores for the zero-shot backend.

    nli_server.py --port 8008

POST /<hf model id> with {"premise": str, "hypotheses": [str]} returns
{"scores": [{"entailment", "neutral", "contradiction"}]}, softmax over the
model's three NLI labels. Models load on first use and stay resident.
"""

import argparse
import json
import sys
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

_models = {}
_lock = threading.Lock()


def _load(model_id):
    with _lock:
        if model_id not in _models:
            import torch
            from transformers import AutoModelForSequenceClassification, AutoTokenizer

            tok = AutoTokenizer.from_pretrained(model_id)
            model = AutoModelForSequenceClassification.from_pretrained(model_id).eval()
            label_index = {name.lower(): i for i, name in model.config.id2label.items()}
            missing = {"entailment", "neutral", "contradiction"} - set(label_index)
            if missing:
                raise ValueError(f"{model_id} has no NLI labels {sorted(missing)}")
            _models[model_id] = (tok, model, label_index, torch)
        return _models[model_id]


def score(model_id, premise, hypotheses):
    tok, model, label_index, torch = _load(model_id)
    if not hypotheses:
        return []
    batch = tok([premise] * len(hypotheses), hypotheses, return_tensors="pt", padding=True, truncation=True)
    with torch.no_grad():
        probs = model(**batch).logits.softmax(dim=-1).tolist()
    return [{k: row[label_index[k]] for k in ("entailment", "neutral", "contradiction")} for row in probs]


class Handler(BaseHTTPRequestHandler):
    def do_POST(self):
        try:
            body = json.loads(self.rfile.read(int(self.headers.get("Content-Length", 0))))
            scores = score(self.path.lstrip("/"), body["premise"], body["hypotheses"])
            self._reply(200, {"scores": scores})
        except (KeyError, ValueError, OSError) as e:
            self._reply(400, {"error": str(e)})

    def _reply(self, status, payload):
        data = json.dumps(payload).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, fmt, *args):
        sys.stderr.write("nli_server: " + fmt % args + "\n")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--host", default="127.0.0.1")
    ap.add_argument("--port", type=int, default=8008)
    ap.add_argument("--preload", nargs="*", default=[], help="model ids to load before serving")
    args = ap.parse_args()
    for model_id in args.preload:
        _load(model_id)
    server = ThreadingHTTPServer((args.host, args.port), Handler)
    print(f"nli_server listening on http://{args.host}:{args.port}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass


if __name__ == "__main__":
    main()
