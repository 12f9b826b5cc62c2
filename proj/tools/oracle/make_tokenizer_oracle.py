#!/usr/bin/env python3
"""Run the reference CLIP SimpleTokenizer over a JSON list of strings and
freeze the id sequences.

The reference cleaner (ftfy.fix_text + html.unescape) is replaced by the
whitespace-collapse + lowercase cleaner the C++ encoder implements; the BPE
core, word pattern and byte alphabet are the reference code unchanged.

Usage: make_tokenizer_oracle.py OPEN_CLIP_DIR BPE_GZ CORPUS_JSON OUT_JSON
"""
import json
import sys


def main():
    open_clip_dir, bpe_gz, corpus_path, out_path = sys.argv[1:5]
    sys.path.insert(0, open_clip_dir)
    import tokenizer as ref  # open_clip/tokenizer.py, loaded standalone

    tok = ref.SimpleTokenizer(bpe_path=bpe_gz)
    tok.clean_fn = lambda text: ref.whitespace_clean(text).lower()
    with open(corpus_path, encoding="utf-8") as f:
        corpus = json.load(f)
    cases = [{"text": text, "ids": tok.encode(text)} for text in corpus]
    with open(out_path, "w", encoding="utf-8") as f:
        json.dump({"bos_id": tok.sot_token_id, "eos_id": tok.eot_token_id,
                   "vocab_size": tok.vocab_size, "cases": cases},
                  f, ensure_ascii=False, indent=1)


if __name__ == "__main__":
    main()
