#!/usr/bin/env python3
"""Reference CC / Halstead counter for the golden corpus.

Written independently of the C++ lexer: a single regular-expression scanner
over the source with directive lines blanked out first. Cyclomatic complexity
is cross-checked against lizard. Lizard skips `default` labels and does count
`&&`/`||`/`?` inside `#if` lines, so both differences are accounted for.

Regenerates tests/fixtures/golden/corpus.jsonl and expected_metrics.csv.
"""

import csv
import json
import pathlib
import re
import sys

ROOT = pathlib.Path(__file__).resolve().parents[1] / "fixtures" / "golden"

KEYWORDS = set("""
auto break case char const continue default do double else enum extern float for goto if inline int
long register restrict return short signed sizeof static struct switch typedef union unsigned void
volatile while _Alignas _Alignof _Atomic _Bool _Complex _Generic _Imaginary _Noreturn _Static_assert
_Thread_local alignas alignof asm bool catch char8_t char16_t char32_t class concept consteval constexpr
constinit const_cast co_await co_return co_yield decltype delete dynamic_cast explicit export false friend
mutable namespace new noexcept nullptr operator private protected public reinterpret_cast requires
static_assert static_cast template this thread_local throw true try typeid typename using virtual wchar_t
""".split())

PUNCT = sorted("""
<=> <<= >>= ... ->* -> ++ -- << >> <= >= == != && || += -= *= /= %= &= ^= |= :: .* ## <: :> <% %> %:
+ - * / % & | ^ ! ~ = < > ? ( ) [ ] { } ; , : . #
""".split(), key=len, reverse=True)

SCANNER = re.compile(
    r"(?P<ws>\s+)"
    r"|(?P<comment>//[^\n]*|/\*.*?\*/)"
    r"|(?P<string>(?:u8|u|U|L)?\"(?:\\.|[^\"\\\n])*\")"
    r"|(?P<char>(?:u8|u|U|L)?'(?:\\.|[^'\\\n])*')"
    r"|(?P<number>\.?[0-9](?:[eEpP][+-]|[A-Za-z0-9_.])*)"
    r"|(?P<ident>[A-Za-z_$][A-Za-z0-9_$]*)"
    r"|(?P<punct>" + "|".join(re.escape(p) for p in PUNCT) + r")",
    re.S,
)

DECISION_WORDS = {"if", "for", "while", "case", "catch"}
DECISION_PUNCT = {"&&", "||", "?"}
CLOSERS = {")", "]", "}"}


def blank_directives(src):
    lines = src.split("\n")
    out = []
    in_directive = False
    for line in lines:
        starts = line.lstrip().startswith("#")
        if in_directive or starts:
            out.append("")
            in_directive = line.endswith("\\")
        else:
            out.append(line)
    return "\n".join(out)


def scan(src):
    code = blank_directives(src)
    tokens = []
    pos = 0
    while pos < len(code):
        m = SCANNER.match(code, pos)
        if not m:
            raise ValueError(f"cannot scan at offset {pos}: {code[pos:pos + 20]!r}")
        kind = m.lastgroup
        text = m.group(kind)
        pos = m.end()
        if kind in ("ws", "comment"):
            continue
        if kind == "ident" and text in KEYWORDS:
            kind = "keyword"
        tokens.append((kind, text))
    return tokens


def metrics(src):
    toks = scan(src)
    cc = 1
    for i, (kind, text) in enumerate(toks):
        if kind == "keyword" and text in DECISION_WORDS:
            cc += 1
        elif kind == "keyword" and text == "default" and i + 1 < len(toks) and toks[i + 1][1] == ":":
            cc += 1
        elif kind == "punct" and text in DECISION_PUNCT:
            cc += 1
    operators = [t for k, t in toks if k == "keyword" or (k == "punct" and t not in CLOSERS)]
    operands = [t for k, t in toks if k in ("ident", "number", "string", "char")]
    n1, n2, N1, N2 = len(set(operators)), len(set(operands)), len(operators), len(operands)
    hd = (n1 / 2) * (N2 / n2) if n2 else 0.0
    return {"cc": cc, "hd": hd, "n1": n1, "n2": n2, "N1": N1, "N2": N2}


def default_labels(src):
    toks = scan(src)
    return sum(1 for i, (k, t) in enumerate(toks) if t == "default" and i + 1 < len(toks) and toks[i + 1][1] == ":")


def directive_decisions(src):
    count = 0
    in_directive = False
    for line in src.split("\n"):
        if in_directive or line.lstrip().startswith("#"):
            count += len(re.findall(r"&&|\|\||\?", line))
            in_directive = line.endswith("\\")
    return count


def lizard_cc(name, src):
    import lizard

    info = lizard.analyze_file.analyze_source_code(name, src)
    funcs = info.function_list
    if len(funcs) != 1:
        raise ValueError(f"{name}: lizard found {len(funcs)} functions")
    return funcs[0].cyclomatic_complexity


def main():
    files = sorted((ROOT / "functions").glob("f*.c*"))
    if len(files) != 20:
        sys.exit(f"expected 20 golden functions, found {len(files)}")
    rows = []
    mismatches = []
    with open(ROOT / "corpus.jsonl", "w", newline="\n") as corpus:
        for path in files:
            src = path.read_text()
            sid = path.stem
            m = metrics(src)
            liz = lizard_cc(path.name, src) + default_labels(src) - directive_decisions(src)
            if liz != m["cc"]:
                mismatches.append(f"{sid}: oracle {m['cc']} vs adjusted lizard {liz}")
            corpus.write(json.dumps({"id": sid, "source": src, "cwe": "NoCWE", "dataset": "golden"}) + "\n")
            rows.append((sid, m))
    with open(ROOT / "expected_metrics.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["id", "cc", "hd", "n1", "n2", "N1", "N2"])
        for sid, m in rows:
            w.writerow([sid, m["cc"], repr(m["hd"]), m["n1"], m["n2"], m["N1"], m["N2"]])
    for line in mismatches:
        print("cc cross-check:", line)
    return 1 if mismatches else 0


if __name__ == "__main__":
    sys.exit(main())
