#!/usr/bin/env python3
"""Freeze the weighted-prompt conformance corpus from the source LaTeX table.

Each cell becomes one prompt: LaTeX line breaks become newlines, lines are
stripped. Expected annotations come from a plain regex over the cell, not from
the parser under test.

Usage: extract_weighted_corpus.py SOURCE_TEX OUT_JSON
"""
import json
import re
import sys

src = open(sys.argv[1], encoding="utf-8").read()
rows = [line for line in src.splitlines() if line.startswith(r"\begin{tabular}[c]{@{}l@{}}")]
cell_re = re.compile(r"\\begin\{tabular\}\[c\]\{@\{\}l@\{\}\}(.*?)\\end\{tabular\}")
ann_re = re.compile(r"\(([^():\\]+):([0-9]+(?:\.[0-9]+)?)\)")

poems = []
for row in rows:
    cells = cell_re.findall(row)
    assert len(cells) == 5, len(cells)
    def clean(cell):
        return "\n".join(part.strip() for part in cell.split(r"\\"))
    original = clean(cells[0])
    variants = []
    for i, cell in enumerate(cells[1:], start=1):
        text = clean(cell)
        variants.append({
            "variant": i,
            "text": text,
            "expected": [{"text": m.group(1), "weight": m.group(2)} for m in ann_re.finditer(text)],
        })
    poems.append({"original": original, "variants": variants})

json.dump({"poems": poems}, open(sys.argv[2], "w", encoding="utf-8"), ensure_ascii=False, indent=1)
print(sum(len(p["variants"]) for p in poems), "prompts")
