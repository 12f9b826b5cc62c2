#!/usr/bin/env python3
"""Generate src/unicode_tables.inc: letter/number ranges, whitespace code
points and the lowercase mapping used by the CLIP text normalizer.

Usage: gen_unicode_tables.py > src/unicode_tables.inc
"""
import sys
import unicodedata


def ranges(pred):
    out, start = [], None
    for cp in range(0x110000):
        hit = pred(cp)
        if hit and start is None:
            start = cp
        elif not hit and start is not None:
            out.append((start, cp - 1))
            start = None
    if start is not None:
        out.append((start, 0x10FFFF))
    return out


def cat(cp):
    return unicodedata.category(chr(cp))


def emit_ranges(name, rs):
    print(f"inline constexpr CodepointRange {name}[] = {{")
    for i in range(0, len(rs), 4):
        row = ", ".join(f"{{0x{a:X}, 0x{b:X}}}" for a, b in rs[i:i + 4])
        print(f"    {row},")
    print("};")


def main():
    print(f"// Generated by tools/gen_unicode_tables.py (Unicode {unicodedata.unidata_version}). Do not edit.")
    print()
    emit_ranges("kLetterRanges", ranges(lambda cp: cat(cp).startswith("L")))
    print()
    emit_ranges("kNumberRanges", ranges(lambda cp: cat(cp).startswith("N")))
    print()
    spaces = [cp for cp in range(0x110000) if chr(cp).isspace()]
    print("inline constexpr char32_t kWhitespace[] = {")
    print("    " + ", ".join(f"0x{cp:X}" for cp in spaces) + ",")
    print("};")
    print()
    print("inline constexpr LowercaseMapping kLowercase[] = {")
    for cp in range(0x110000):
        if 0xD800 <= cp <= 0xDFFF:
            continue
        low = chr(cp).lower()
        if low != chr(cp):
            assert len(low) <= 2
            second = ord(low[1]) if len(low) == 2 else 0
            print(f"    {{0x{cp:X}, 0x{ord(low[0]):X}, 0x{second:X}}},")
    print("};")


if __name__ == "__main__":
    sys.exit(main())
