"""``.gac`` text format: S-expressions for programs, assertions and triples.

Canonical output is a single line with single-space separators.  Names that
are not plain symbols are written as JSON-style double-quoted strings.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass

from . import ast as A


class ParseError(Exception):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col


@dataclass
class Atom:
    text: str
    quoted: bool
    line: int
    col: int


@dataclass
class SList:
    items: list
    line: int
    col: int


# -- reader ------------------------------------------------------------------

_DELIMS = set('();"')


class _Reader:
    def __init__(self, text: str):
        self.s = text
        self.i = 0
        self.line = 1
        self.col = 1

    def _advance(self):
        if self.s[self.i] == "\n":
            self.line += 1
            self.col = 1
        else:
            self.col += 1
        self.i += 1

    def skip_ws(self):
        s = self.s
        while self.i < len(s):
            ch = s[self.i]
            if ch == ";":
                while self.i < len(s) and s[self.i] != "\n":
                    self._advance()
            elif ch.isspace():
                self._advance()
            else:
                break

    def at_end(self) -> bool:
        self.skip_ws()
        return self.i >= len(self.s)

    def read(self):
        self.skip_ws()
        if self.i >= len(self.s):
            raise ParseError("unexpected end of input", self.line, self.col)
        ch = self.s[self.i]
        line, col = self.line, self.col
        if ch == "(":
            self._advance()
            items = []
            while True:
                self.skip_ws()
                if self.i >= len(self.s):
                    raise ParseError(f"unclosed list opened at {line}:{col}",
                                     self.line, self.col)
                if self.s[self.i] == ")":
                    self._advance()
                    return SList(items, line, col)
                items.append(self.read())
        if ch == ")":
            raise ParseError("unbalanced ')'", line, col)
        if ch == '"':
            return self._read_string(line, col)
        start = self.i
        while self.i < len(self.s) and not self.s[self.i].isspace() \
                and self.s[self.i] not in _DELIMS:
            self._advance()
        return Atom(self.s[start:self.i], False, line, col)

    def _read_string(self, line, col):
        start = self.i
        self._advance()
        while self.i < len(self.s):
            ch = self.s[self.i]
            if ch == "\\":
                self._advance()
                if self.i >= len(self.s):
                    break
                self._advance()
            elif ch == '"':
                self._advance()
                try:
                    return Atom(json.loads(self.s[start:self.i]), True, line, col)
                except json.JSONDecodeError as exc:
                    raise ParseError(f"bad string literal: {exc.msg}", line, col) from None
            elif ch == "\n":
                break
            else:
                self._advance()
        raise ParseError("unterminated string", line, col)


def read_all(text: str) -> list:
    r = _Reader(text)
    forms = []
    while not r.at_end():
        forms.append(r.read())
    return forms


def read_one(text: str):
    r = _Reader(text)
    form = r.read()
    if not r.at_end():
        raise ParseError("trailing input after form", r.line, r.col)
    return form


# -- writer ------------------------------------------------------------------

_PLAIN = re.compile(r'^[^\s();"]+$')


def name(s: str) -> str:
    if _PLAIN.match(s):
        return s
    return json.dumps(s, ensure_ascii=False)


def _sx(*parts) -> str:
    return "(" + " ".join(parts) + ")"


def ser_expr(e) -> str:
    if isinstance(e, A.EFVar):
        return _sx("fvar", name(e.name))
    if isinstance(e, A.EUnit):
        return "unit"
    if isinstance(e, A.ENull):
        return "null"
    if isinstance(e, A.EBool):
        return _sx("bool", "true" if e.b else "false")
    if isinstance(e, A.ENat):
        return _sx("nat", str(e.n))
    if isinstance(e, A.ENot):
        return _sx("not", ser_expr(e.e))
    if isinstance(e, A.EBin):
        return _sx(e.op, ser_expr(e.left), ser_expr(e.right))
    if isinstance(e, A.EPtrShiftFw):
        return _sx("ptr-shift", ser_expr(e.ptr), ser_expr(e.by))
    raise TypeError(f"not an expression: {e!r}")


def ser_cmd(c) -> str:
    if isinstance(c, A.CRet):
        return _sx("ret", ser_expr(c.e))
    if isinstance(c, A.CBind):
        return _sx("bind", name(c.name), ser_cmd(c.first), ser_cmd(c.rest))
    if isinstance(c, A.CSeq):
        return _sx("seq", ser_cmd(c.first), ser_cmd(c.rest))
    if isinstance(c, A.CCall):
        return _sx("call", name(c.fn), *map(ser_expr, c.args))
    if isinstance(c, A.CIf):
        return _sx("if", ser_expr(c.cond), ser_cmd(c.then), ser_cmd(c.orelse))
    if isinstance(c, A.CWhile):
        return _sx("while", ser_cmd(c.cond), ser_cmd(c.body))
    if isinstance(c, A.CVar):
        return _sx("var", name(c.name), ser_cmd(c.init), ser_cmd(c.body))
    if isinstance(c, A.CReadVar):
        return _sx("read-var", name(c.name))
    if isinstance(c, A.CWriteVar):
        return _sx("write-var", name(c.name), ser_expr(c.e))
    if isinstance(c, A.CAlloc):
        return _sx("alloc", str(c.n), ser_expr(c.init))
    if isinstance(c, A.CReadPtr):
        return _sx("read-ptr", ser_expr(c.ptr))
    if isinstance(c, A.CWritePtr):
        return _sx("write-ptr", ser_expr(c.ptr), ser_expr(c.e))
    if isinstance(c, A.CFree):
        return _sx("free", ser_expr(c.ptr))
    if isinstance(c, A.CFail):
        return "(fail)"
    if isinstance(c, A.CLoop):
        return "(loop)"
    raise TypeError(f"not a command: {c!r}")


def ser_def(fname: str, f: A.FunDef) -> str:
    return _sx("def", name(fname), _sx(*map(name, f.params)), ser_cmd(f.body))


def serialize(p: A.Program) -> str:
    parts = [ser_def(n, f) for n, f in p.functions.items()]
    parts.append(_sx("main", ser_cmd(p.main)))
    return _sx("program", *parts)


def ser_assertion(a) -> str:
    from . import seplog as S

    if isinstance(a, S.Emp):
        return "emp"
    if isinstance(a, S.PointsTo):
        return _sx("pointsto", ser_expr(a.addr), ser_expr(a.val))
    if isinstance(a, S.Star):
        return _sx("star", ser_assertion(a.left), ser_assertion(a.right))
    if isinstance(a, S.Wand):
        return _sx("wand", ser_assertion(a.left), ser_assertion(a.right))
    if isinstance(a, S.Pure):
        return _sx("pure", ser_expr(a.e))
    if isinstance(a, S.ListSeg):
        return _sx("listseg", ser_expr(a.start), ser_expr(a.end),
                   _sx(*map(ser_expr, a.values)))
    raise TypeError(f"not an assertion: {a!r}")


def ser_triple(t) -> str:
    return _sx("triple", _sx("pre", ser_assertion(t.pre)), _sx("cmd", ser_cmd(t.cmd)),
               _sx("post", name(t.result), ser_assertion(t.post)))


# -- parser ------------------------------------------------------------------


def _err(node, msg):
    return ParseError(msg, node.line, node.col)


def _head(node) -> str | None:
    if isinstance(node, SList) and node.items and isinstance(node.items[0], Atom) \
            and not node.items[0].quoted:
        return node.items[0].text
    return None


def _arity(node: SList, n: int, what: str):
    if len(node.items) - 1 != n:
        raise _err(node, f"{what} expects {n} argument(s), got {len(node.items) - 1}")


def _name(node) -> str:
    if not isinstance(node, Atom):
        raise _err(node, "expected a name")
    return node.text


def _natural(node) -> int:
    if not isinstance(node, Atom) or node.quoted or not node.text.isdigit():
        raise _err(node, "expected a natural number")
    return int(node.text)


_EXPR_ATOMS = {"unit": A.EUnit(), "null": A.ENull()}


def parse_expr(node):
    if isinstance(node, Atom):
        if not node.quoted and node.text in _EXPR_ATOMS:
            return _EXPR_ATOMS[node.text]
        raise _err(node, f"unexpected atom {node.text!r} where an expression was expected")
    head = _head(node)
    if head is None:
        raise _err(node, "expected an expression")
    if head in _EXPR_ATOMS:
        _arity(node, 0, head)
        return _EXPR_ATOMS[head]
    args = node.items[1:]
    if head == "fvar":
        _arity(node, 1, head)
        return A.EFVar(_name(args[0]))
    if head == "bool":
        _arity(node, 1, head)
        if not isinstance(args[0], Atom) or args[0].text not in ("true", "false"):
            raise _err(args[0], "expected true or false")
        return A.EBool(args[0].text == "true")
    if head == "nat":
        _arity(node, 1, head)
        n = _natural(args[0])
        try:
            return A.ENat(n)
        except ValueError as exc:
            raise _err(args[0], str(exc)) from None
    if head == "not":
        _arity(node, 1, head)
        return A.ENot(parse_expr(args[0]))
    if head in A.BINOPS:
        _arity(node, 2, head)
        return A.EBin(head, parse_expr(args[0]), parse_expr(args[1]))
    if head == "ptr-shift":
        _arity(node, 2, head)
        return A.EPtrShiftFw(parse_expr(args[0]), parse_expr(args[1]))
    raise _err(node, f"unknown expression head {head!r}")


_NULLARY_CMDS = {"fail": A.CFail(), "loop": A.CLoop()}


def parse_cmd(node):
    if isinstance(node, Atom):
        if not node.quoted and node.text in _NULLARY_CMDS:
            return _NULLARY_CMDS[node.text]
        raise _err(node, f"unexpected atom {node.text!r} where a command was expected")
    head = _head(node)
    if head is None:
        raise _err(node, "expected a command")
    a = node.items[1:]
    if head in _NULLARY_CMDS:
        _arity(node, 0, head)
        return _NULLARY_CMDS[head]
    if head == "ret":
        _arity(node, 1, head)
        return A.CRet(parse_expr(a[0]))
    if head == "bind":
        _arity(node, 3, head)
        return A.CBind(_name(a[0]), parse_cmd(a[1]), parse_cmd(a[2]))
    if head == "seq":
        _arity(node, 2, head)
        return A.CSeq(parse_cmd(a[0]), parse_cmd(a[1]))
    if head == "call":
        if not a:
            raise _err(node, "call expects a function name")
        return A.CCall(_name(a[0]), tuple(parse_expr(x) for x in a[1:]))
    if head == "if":
        _arity(node, 3, head)
        return A.CIf(parse_expr(a[0]), parse_cmd(a[1]), parse_cmd(a[2]))
    if head == "while":
        _arity(node, 2, head)
        return A.CWhile(parse_cmd(a[0]), parse_cmd(a[1]))
    if head == "var":
        _arity(node, 3, head)
        return A.CVar(_name(a[0]), parse_cmd(a[1]), parse_cmd(a[2]))
    if head == "read-var":
        _arity(node, 1, head)
        return A.CReadVar(_name(a[0]))
    if head == "write-var":
        _arity(node, 2, head)
        return A.CWriteVar(_name(a[0]), parse_expr(a[1]))
    if head == "alloc":
        _arity(node, 2, head)
        return A.CAlloc(_natural(a[0]), parse_expr(a[1]))
    if head == "read-ptr":
        _arity(node, 1, head)
        return A.CReadPtr(parse_expr(a[0]))
    if head == "write-ptr":
        _arity(node, 2, head)
        return A.CWritePtr(parse_expr(a[0]), parse_expr(a[1]))
    if head == "free":
        _arity(node, 1, head)
        return A.CFree(parse_expr(a[0]))
    raise _err(node, f"unknown command head {head!r}")


def parse_def(node) -> tuple[str, A.FunDef]:
    if _head(node) != "def":
        raise _err(node, "expected (def ...)")
    _arity(node, 3, "def")
    fname, params, body = node.items[1:]
    if not isinstance(params, SList):
        raise _err(params, "expected a parameter list")
    return _name(fname), A.FunDef(tuple(_name(x) for x in params.items), parse_cmd(body))


def _program_from(node) -> A.Program:
    if _head(node) != "program":
        raise _err(node, "expected (program ...)")
    functions: dict[str, A.FunDef] = {}
    main = None
    for item in node.items[1:]:
        h = _head(item)
        if h == "def":
            fname, f = parse_def(item)
            if fname in functions:
                raise _err(item, f"duplicate definition of {fname!r}")
            functions[fname] = f
        elif h == "main":
            if main is not None:
                raise _err(item, "duplicate main")
            _arity(item, 1, "main")
            main = parse_cmd(item.items[1])
        else:
            raise _err(item, "expected (def ...) or (main ...)")
    if main is None:
        raise _err(node, "program has no main")
    return A.Program(functions, main)


def parse(text: str) -> A.Program:
    return _program_from(read_one(text))


def parse_assertion(node):
    from . import seplog as S

    if isinstance(node, Atom):
        if node.text == "emp" and not node.quoted:
            return S.Emp()
        raise _err(node, f"unexpected atom {node.text!r} where an assertion was expected")
    head = _head(node)
    a = node.items[1:]
    if head == "emp":
        _arity(node, 0, head)
        return S.Emp()
    if head == "pointsto":
        _arity(node, 2, head)
        return S.PointsTo(parse_expr(a[0]), parse_expr(a[1]))
    if head == "star":
        _arity(node, 2, head)
        return S.Star(parse_assertion(a[0]), parse_assertion(a[1]))
    if head == "wand":
        _arity(node, 2, head)
        return S.Wand(parse_assertion(a[0]), parse_assertion(a[1]))
    if head == "pure":
        _arity(node, 1, head)
        return S.Pure(parse_expr(a[0]))
    if head == "listseg":
        _arity(node, 3, head)
        if not isinstance(a[2], SList):
            raise _err(a[2], "expected a list of value expressions")
        return S.ListSeg(parse_expr(a[0]), parse_expr(a[1]),
                         tuple(parse_expr(x) for x in a[2].items))
    raise _err(node, f"unknown assertion head {head!r}")


def parse_triple(node):
    from . import seplog as S

    if _head(node) != "triple":
        raise _err(node, "expected (triple ...)")
    parts = {}
    for item in node.items[1:]:
        h = _head(item)
        if h not in ("pre", "cmd", "post") or h in parts:
            raise _err(item, "expected one each of (pre ...), (cmd ...), (post ...)")
        parts[h] = item
    for key in ("pre", "cmd", "post"):
        if key not in parts:
            raise _err(node, f"triple is missing ({key} ...)")
    _arity(parts["pre"], 1, "pre")
    _arity(parts["cmd"], 1, "cmd")
    _arity(parts["post"], 2, "post")
    return S.Triple(parse_assertion(parts["pre"].items[1]),
                    parse_cmd(parts["cmd"].items[1]),
                    _name(parts["post"].items[1]),
                    parse_assertion(parts["post"].items[2]))


def parse_spec(text: str):
    """A spec file: any number of ``(def ...)`` forms then ``(triple ...)`` forms.

    Returns ``(functions, triples)``.
    """
    functions: dict[str, A.FunDef] = {}
    triples = []
    for form in read_all(text):
        h = _head(form)
        if h == "def":
            fname, f = parse_def(form)
            functions[fname] = f
        elif h == "triple":
            triples.append(parse_triple(form))
        else:
            raise _err(form, "expected (def ...) or (triple ...)")
    if not triples:
        raise ParseError("spec file contains no triple", 1, 1)
    return functions, triples
