"""Stand-in sidecar for protocol tests: stdio, hash-based embeddings."""
import base64
import hashlib
import json
import math
import sys

DIM = 16


def embed(data: bytes):
    digest = hashlib.sha256(data).digest()
    v = [(digest[2 * i] * 256 + digest[2 * i + 1]) / 65535.0 - 0.5 for i in range(DIM)]
    n = math.sqrt(sum(x * x for x in v))
    return [x / n for x in v]


def handle(req):
    op = req.get("op")
    if op == "describe":
        return {"name": "fake-hash", "dim": DIM, "supports_text": True}
    rid = req.get("id")
    if op == "embed_image":
        return {"id": rid, "embedding": embed(base64.b64decode(req["png_b64"]))}
    if op == "embed_text":
        if not req.get("text"):
            return {"id": rid, "error": "empty prompt"}
        return {"id": rid, "embedding": embed(req["text"].encode())}
    return {"id": rid, "error": f"unknown op {op}"}


for line in sys.stdin:
    if line.strip():
        sys.stdout.write(json.dumps(handle(json.loads(line))) + "\n")
        sys.stdout.flush()
