"""Random token sequences and noisy renderings of them, per language.

Every generated token is a lexeme the lexer must return verbatim, so the
token list itself is the expected output. Renderings always keep at least
one whitespace character on both sides of every token and comment, which
rules out accidental fusion (``/`` next to ``*``, ``+`` next to ``+``).
"""

import random

from metamaint.lexer import SYNTAXES

IDENTS = ["x", "y1", "_tmp", "count", "if", "return", "while", "u", "R", "f", "L", "self", "new", "begin"]
NUMBERS = ["0", "42", "3.5", "0x1F", "1e10", "7"]
STRINGS = {
    "C": ['"a b"', '"x // y"', "'c'", '"/* no */"', r'"q\"q"'],
    "C++": ['"a b"', '"x // y"', "'c'", 'R"(raw // s)"', 'u8"u"'],
    "Java": ['"a b"', '"x /* y */"', "'c'", '"""\ntext block\n"""'],
    "JavaScript": ['"a b"', "'x // y'", "`t ${a + 1} u`", "`multi\nline`"],
    "Python": ['"a b"', "'# not'", '"""tri\nple"""', "r'\\d+'", "f'{x}'"],
    "PHP": ['"a b"', "'# not'", '"x // y"', "'multi\nline'"],
    "Ruby": ['"a b"', "'# not'", '"i #{x + 1} j"', "'multi\nline'"],
}
SINGLE = list("(){}[];,.+-*/<>=!?:~%^&|")
COMMENT_WORDS = ["note", "TODO", "x", "42", "if", "return", "a b c"]


def _punct(lang):
    singles = [c for c in SINGLE if not (c == "?" and lang == "Ruby")]
    if lang == "C" or lang == "C++":
        singles.append("#")
    return singles + sorted(SYNTAXES[lang].operators)


def random_tokens(rng: random.Random, lang: str, n: int) -> list[str]:
    pools = [IDENTS, NUMBERS, STRINGS[lang], _punct(lang)]
    if lang == "PHP":
        pools.append(["$x", "$count"])
    if lang == "Ruby":
        pools.append(["@ivar", "$glob"])
    return [rng.choice(rng.choice(pools)) for _ in range(n)]


def _comment(rng: random.Random, lang: str) -> str:
    syn = SYNTAXES[lang]
    text = " ".join(rng.choice(COMMENT_WORDS) for _ in range(rng.randint(0, 4)))
    kinds = [("line", c) for c in syn.line_comments] + [("block", b) for b in syn.block_comments]
    if syn.ruby_block_comments:
        kinds.append(("ruby", None))
    kind, marker = rng.choice(kinds)
    if kind == "line":
        return f"{marker} {text}\n"
    if kind == "block":
        body = text.replace(" ", rng.choice([" ", "\n", " * "]))
        return f"{marker[0]}{body}{marker[1]}"
    return f"\n=begin\n{text}\n=end\n"


def _space(rng: random.Random) -> str:
    return "".join(rng.choice([" ", "\t", "\n", "  ", "\r\n"]) for _ in range(rng.randint(1, 3)))


def noisy_separator(rng: random.Random, lang: str) -> str:
    out = _space(rng)
    for _ in range(rng.choice([0, 0, 1, 2])):
        out += _comment(rng, lang) + _space(rng)
    return out


def render(tokens: list[str], rng: random.Random | None = None, lang: str = "C") -> str:
    if rng is None:
        return " ".join(tokens) + "\n"
    parts = [noisy_separator(rng, lang)]
    for tok in tokens:
        parts += [tok, noisy_separator(rng, lang)]
    return "".join(parts) + "\n"
