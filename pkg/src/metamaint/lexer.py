"""Lightweight lexers for the seven target languages and token trigram sets.

The lexers only need to know where comments, string literals and token
boundaries are: comments and whitespace produce nothing, every string or
character literal is one token (quotes included), identifiers and numbers
are single tokens, and operators are split by longest match against a
per-language table. Lexing never fails; an unterminated string degrades to
its opening quote as a punctuation token.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

Token = str
Trigram = tuple[str, str, str]

_C_OPS = {
    "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||", "+=", "-=", "*=",
    "/=", "%=", "&=", "|=", "^=", "<<=", ">>=", "...", "##",
}
_CPP_OPS = _C_OPS | {"::", "->*", ".*", "<=>"}
_JAVA_OPS = {
    "->", "::", "++", "--", "&&", "||", "==", "!=", "<=", ">=", "+=", "-=", "*=", "/=",
    "%=", "&=", "|=", "^=", "<<", "<<=", ">>", ">>=", ">>>", ">>>=", "...",
}
_JS_OPS = _JAVA_OPS - {"::"} | {
    "===", "!==", "=>", "**", "**=", "??", "??=", "?.", "&&=", "||=",
}
_PY_OPS = {
    "**", "//", "==", "!=", "<=", ">=", "<<", ">>", "+=", "-=", "*=", "/=", "//=", "%=",
    "**=", "&=", "|=", "^=", ">>=", "<<=", "->", ":=", "@=", "...",
}
_PHP_OPS = {
    "===", "!==", "==", "!=", "<>", "<=", ">=", "<=>", "&&", "||", "++", "--", "+=", "-=",
    "*=", "/=", ".=", "%=", "**", "**=", "??", "??=", "->", "?->", "=>", "::", "<<", ">>",
    "<<=", ">>=", "...", "<?php", "<?=", "?>",
}
_RUBY_OPS = {
    "**", "==", "===", "!=", "=~", "!~", "<=>", "<=", ">=", "<<", ">>", "&&", "||", "+=",
    "-=", "*=", "/=", "%=", "**=", "||=", "&&=", "<<=", ">>=", "::", "..", "...", "=>",
    "->", "&.",
}

_PY_PREFIXES = {"r", "u", "b", "f", "br", "rb", "fr", "rf"}
_C_PREFIXES = {"L", "u", "U", "u8"}
_C_RAW_PREFIXES = {"R", "LR", "uR", "UR", "u8R"}

# Keywords after which a slash starts a regex literal rather than division.
_REGEX_KEYWORDS = {
    "return", "typeof", "instanceof", "in", "of", "new", "delete", "void", "throw",
    "case", "do", "else", "yield", "await", "if", "unless", "when", "and", "or", "not",
}


@dataclass(frozen=True)
class Syntax:
    line_comments: tuple[str, ...] = ()
    block_comments: tuple[tuple[str, str], ...] = ()
    quotes: str = "\"'"
    multiline_quotes: str = ""
    triple_quotes: bool = False
    prefixes: frozenset = frozenset()
    prefixes_case_insensitive: bool = False
    raw_prefixes: frozenset = frozenset()
    ident_chars: str = "_"
    ident_start: str = "_"
    operators: frozenset = frozenset()
    regex_literals: bool = False
    interpolation: dict = field(default_factory=dict)
    heredoc: bool = False
    ruby_block_comments: bool = False
    digit_separator: str = ""


_C_FAMILY_COMMENTS = dict(line_comments=("//",), block_comments=(("/*", "*/"),))

SYNTAXES: dict[str, Syntax] = {
    "C": Syntax(**_C_FAMILY_COMMENTS, prefixes=frozenset(_C_PREFIXES),
                operators=frozenset(_C_OPS)),
    "C++": Syntax(**_C_FAMILY_COMMENTS, prefixes=frozenset(_C_PREFIXES),
                  raw_prefixes=frozenset(_C_RAW_PREFIXES), operators=frozenset(_CPP_OPS),
                  digit_separator="'"),
    "Java": Syntax(**_C_FAMILY_COMMENTS, triple_quotes=True, ident_chars="_$",
                   ident_start="_$", operators=frozenset(_JAVA_OPS)),
    "JavaScript": Syntax(**_C_FAMILY_COMMENTS, quotes="\"'`", multiline_quotes="`",
                         ident_chars="_$", ident_start="_$", operators=frozenset(_JS_OPS),
                         regex_literals=True, interpolation={"`": "${"}),
    "Python": Syntax(line_comments=("#",), triple_quotes=True,
                     prefixes=frozenset(_PY_PREFIXES), prefixes_case_insensitive=True,
                     operators=frozenset(_PY_OPS)),
    "PHP": Syntax(line_comments=("//", "#"), block_comments=(("/*", "*/"),),
                  quotes="\"'`", multiline_quotes="\"'`", ident_chars="_", ident_start="_$",
                  operators=frozenset(_PHP_OPS), heredoc=True),
    "Ruby": Syntax(line_comments=("#",), quotes="\"'`", multiline_quotes="\"'`",
                   ident_chars="_", ident_start="_@$", operators=frozenset(_RUBY_OPS),
                   regex_literals=True, interpolation={'"': "#{", "`": "#{"},
                   ruby_block_comments=True),
}

_SPACE = re.compile("[\\s\ufeff]+")
_NUMBER = re.compile(r"(?:\d|\.\d)(?:[eEpP][+-]\d|[\w.])*")
_CPP_NUMBER = re.compile(r"(?:\d|\.\d)(?:[eEpP][+-]\d|'(?=\w)|[\w.])*")
_HEREDOC = re.compile(r"<<<[ \t]*([\"']?)([A-Za-z_]\w*)\1[ \t]*\r?\n")
_REGEX_FLAGS = re.compile(r"[A-Za-z]*")


def _is_ident_start(c: str, syn: Syntax) -> bool:
    return c.isalpha() or c in syn.ident_start


def _is_ident_char(c: str, syn: Syntax) -> bool:
    return c.isalnum() or c in syn.ident_chars


def _is_opaque(c: str) -> bool:
    # lone surrogates stand for bytes that were not valid UTF-8
    return "\udc80" <= c <= "\udcff"


class _Lexer:
    def __init__(self, text: str, syn: Syntax):
        self.s = text
        self.n = len(text)
        self.syn = syn
        self.tokens: list[str] = []

    # string scanning --------------------------------------------------

    def _skip_interpolation(self, i: int) -> int | None:
        """``i`` points just past an opening ``{``; return index after the matching ``}``."""
        s, n, depth = self.s, self.n, 1
        while i < n:
            c = s[i]
            if c == "{":
                depth += 1
            elif c == "}":
                depth -= 1
                if depth == 0:
                    return i + 1
            elif c in self.syn.quotes:
                end = self._scan_quoted(i, c)
                if end is None:
                    return None
                i = end
                continue
            i += 1
        return None

    def _scan_quoted(self, i: int, q: str) -> int | None:
        """Return the index just past the literal opening at ``i``, or None if unterminated."""
        s, n, syn = self.s, self.n, self.syn
        if syn.triple_quotes and s.startswith(q * 3, i):
            j = i + 3
            while j < n:
                if s[j] == "\\":
                    j += 2
                elif s.startswith(q * 3, j):
                    return j + 3
                else:
                    j += 1
            return None
        multiline = q in syn.multiline_quotes
        interp = syn.interpolation.get(q)
        j = i + 1
        while j < n:
            c = s[j]
            if c == "\\":
                j += 2
                continue
            if c == q:
                return j + 1
            if c == "\n" and not multiline:
                return None
            if interp and s.startswith(interp, j):
                end = self._skip_interpolation(j + len(interp))
                if end is None:
                    return None
                j = end
                continue
            j += 1
        return None

    def _scan_raw_cpp(self, i: int) -> int | None:
        """``i`` points at the opening quote of R"delim( ... )delim"."""
        s = self.s
        paren = s.find("(", i + 1, i + 18)
        if paren < 0:
            return None
        delim = s[i + 1:paren]
        if any(c in delim for c in ' ()\\\t\n"'):
            return None
        end = s.find(")" + delim + '"', paren + 1)
        return None if end < 0 else end + len(delim) + 2

    def _scan_regex(self, i: int) -> int | None:
        s, n = self.s, self.n
        j, in_class = i + 1, False
        while j < n:
            c = s[j]
            if c == "\\":
                j += 2
                continue
            if c == "\n":
                return None
            if c == "[":
                in_class = True
            elif c == "]":
                in_class = False
            elif c == "/" and not in_class:
                return _REGEX_FLAGS.match(s, j + 1).end()
            j += 1
        return None

    def _regex_allowed(self) -> bool:
        if not self.tokens:
            return True
        prev = self.tokens[-1]
        if prev in _REGEX_KEYWORDS:
            return True
        last = prev[-1]
        if last.isalnum() or last in "_$)]}\"'`" or _is_opaque(last):
            return False
        return True

    def _line_start(self, i: int) -> bool:
        return i == 0 or self.s[i - 1] == "\n"

    # main loop --------------------------------------------------------

    def run(self) -> list[str]:
        s, n, syn, out = self.s, self.n, self.syn, self.tokens
        i = 0
        while i < n:
            c = s[i]
            m = _SPACE.match(s, i)
            if m:
                i = m.end()
                continue

            if syn.ruby_block_comments and c == "=" and self._line_start(i) \
                    and re.match(r"=begin(?:\s|$)", s[i:i + 7]):
                m = re.compile(r"^=end(?:\s|$)", re.M).search(s, i + 6)
                if m is None:
                    i = n
                else:
                    eol = s.find("\n", m.start())
                    i = n if eol < 0 else eol + 1
                continue

            skipped = False
            for marker in syn.line_comments:
                if s.startswith(marker, i):
                    eol = s.find("\n", i)
                    i = n if eol < 0 else eol
                    skipped = True
                    break
            if skipped:
                continue
            for opener, closer in syn.block_comments:
                if s.startswith(opener, i):
                    end = s.find(closer, i + len(opener))
                    i = n if end < 0 else end + len(closer)
                    skipped = True
                    break
            if skipped:
                continue

            if _is_opaque(c):
                out.append(c)
                i += 1
                continue

            if c in syn.quotes:
                end = self._scan_quoted(i, c)
                if end is None:
                    out.append(c)
                    i += 1
                else:
                    out.append(s[i:end])
                    i = end
                continue

            if syn.heredoc and s.startswith("<<<", i):
                m = _HEREDOC.match(s, i)
                if m:
                    close = re.compile(r"^[ \t]*" + re.escape(m.group(2)) + r"\b", re.M)
                    cm = close.search(s, m.end())
                    if cm:
                        out.append(s[i:cm.end()])
                        i = cm.end()
                        continue

            if _is_ident_start(c, syn):
                j = i + 1
                while j < n and _is_ident_char(s[j], syn):
                    j += 1
                word = s[i:j]
                if j < n and s[j] in syn.quotes:
                    end = None
                    key = word.lower() if syn.prefixes_case_insensitive else word
                    if word in syn.raw_prefixes and s[j] == '"':
                        end = self._scan_raw_cpp(j)
                    elif key in syn.prefixes:
                        end = self._scan_quoted(j, s[j])
                    if end is not None:
                        out.append(s[i:end])
                        i = end
                        continue
                out.append(word)
                i = j
                continue

            if c.isdigit() or (c == "." and i + 1 < n and s[i + 1].isdigit()):
                m = (_CPP_NUMBER if syn.digit_separator else _NUMBER).match(s, i)
                out.append(m.group())
                i = m.end()
                continue

            if syn.regex_literals and c == "/" and i + 1 < n \
                    and s[i + 1] not in " \t\r\n/*=" and self._regex_allowed():
                end = self._scan_regex(i)
                if end is not None:
                    out.append(s[i:end])
                    i = end
                    continue

            for width in (5, 4, 3, 2):
                if s[i:i + width] in syn.operators:
                    out.append(s[i:i + width])
                    i += width
                    break
            else:
                out.append(c)
                i += 1
        return out


def _syntax(language: str) -> Syntax:
    try:
        return SYNTAXES[language]
    except KeyError:
        raise ValueError(f"unsupported language {language!r}") from None


def decode(content: bytes | str) -> str:
    if isinstance(content, str):
        return content
    return content.decode("utf-8", "surrogateescape")


def tokenize(content: bytes | str, language: str) -> list[Token]:
    return _Lexer(decode(content), _syntax(language)).run()


def trigrams(tokens: list[Token]) -> frozenset[Trigram]:
    return frozenset(zip(tokens, tokens[1:], tokens[2:]))


def trigram_set(content: bytes | str, language: str) -> frozenset[Trigram]:
    return trigrams(tokenize(content, language))


def is_empty_source(content: bytes | str, language: str) -> bool:
    return not tokenize(content, language)
