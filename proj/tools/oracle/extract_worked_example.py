#!/usr/bin/env python3
"""Freeze the worked little-girl exchange (input poem and weighted response).

The exchange is the pair of bold <...> headed blocks in the source; the
first holds the poem, the second the weighted response. Also writes a replay
fixture for template 1 keyed by the SHA-256 of the request payload
(instruction text, newline, poem).

Usage: extract_worked_example.py SOURCE_TEX OUT_DIR TEMPLATE_DIR
"""
import hashlib
import json
import re
import sys

src = open(sys.argv[1], encoding="utf-8").read()
out = sys.argv[2]
templates = sys.argv[3]

headers = list(re.finditer(r"\\textbf\{<[^>]*>\}", src))
assert len(headers) >= 2, "expected two headed blocks"


def block(begin, end):
    body = src[begin:end]
    body = body.replace(r"\newline", "\n").replace(r"\textit{", "")
    body = body.rstrip().rstrip("}")
    lines = [l.strip() for l in body.split("\n")]
    return "\n".join(l for l in lines if l)


poem = block(headers[0].end(), headers[1].start())
response = block(headers[1].end(), src.index(r"\begin{figure}", headers[1].end()))

with open(f"{out}/little_girl_poem.txt", "w", encoding="utf-8") as f:
    f.write(poem)
with open(f"{out}/little_girl_response.txt", "w", encoding="utf-8") as f:
    f.write(response)

instruction = open(f"{templates}/prompt1.txt", encoding="utf-8").read()
payload = instruction + "\n" + poem
digest = hashlib.sha256(payload.encode("utf-8")).hexdigest()
with open(f"{out}/fixtures/little_girl_template1.json", "w", encoding="utf-8") as f:
    json.dump({"request_hash": digest, "response": response}, f, ensure_ascii=False, indent=1)
print(digest)
