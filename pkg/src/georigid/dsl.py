"""A small text format for metrics given by closed-form components.

Example::

    dim 2; coords x y; box [-1,1]^2
    let s = 1 + x^2 + y^2
    g11 = 4/s^2; g12 = 0; g22 = 4/s^2

Statements are separated by newlines or ``;``.  ``#`` starts a comment.

=============  ==============================================================
``dim n``      chart dimension (2..8)
``coords ..``  coordinate names, one per dimension
``box ..``     sampling box: ``[a,b]^n`` or one ``[a,b]`` per coordinate
``param``      ``param name = expr`` (constant; may use earlier params)
``let``        ``let name = expr`` named subexpression, evaluated once per point
``gIJ = e``    component (1-based indices); ``gJI`` is accepted as an alias
``signature``  ``signature p q`` (optional hint)
``label``      free text up to the end of the statement
``singular``   ``singular expr``: zero set is a singular locus
``exclude``    ``exclude r``: reject samples closer than ``r`` to a singular locus
=============  ==============================================================

Expressions use ``+ - * / ^`` (``^`` binds tightest and is right-associative,
unary minus binds looser than ``^``), real literals, ``pi`` and the functions
``sin cos exp log sqrt atan``.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from . import jets as J
from .jets import Jet, JetError

FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt", "atan")
KEYWORDS = ("dim", "coords", "box", "param", "let", "signature", "label", "singular", "exclude")
BUILTIN_CONSTANTS = {"pi": math.pi}
DET_FLOOR = 1e-10


class DSLError(ValueError):
    def __init__(self, msg: str, line: int | None = None, col: int | None = None):
        self.line, self.col = line, col
        where = f" (line {line}, column {col})" if line is not None else ""
        super().__init__(msg + where)


class DSLSyntaxError(DSLError):
    pass


class UnknownIdentifierError(DSLError):
    pass


class MissingComponentError(DSLError):
    pass


class SamplingError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Name:
    id: str


@dataclass(frozen=True)
class Neg:
    arg: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    fn: str
    arg: "Expr"


Expr = Num | Name | Neg | BinOp | Call


def free_names(e: Expr) -> set[str]:
    if isinstance(e, Name):
        return {e.id}
    if isinstance(e, Num):
        return set()
    if isinstance(e, (Neg, Call)):
        return free_names(e.arg)
    return free_names(e.left) | free_names(e.right)


def to_source(e: Expr) -> str:
    """Print an expression so that parsing it back yields the same evaluation order."""
    if isinstance(e, Num):
        return repr(float(e.value)) if e.value >= 0 else f"(-{repr(float(-e.value))})"
    if isinstance(e, Name):
        return e.id
    if isinstance(e, Neg):
        return f"(-{to_source(e.arg)})"
    if isinstance(e, Call):
        return f"{e.fn}({to_source(e.arg)})"
    return f"({to_source(e.left)} {e.op} {to_source(e.right)})"


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

_NUMPY_FUNCS = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "log": np.log, "sqrt": np.sqrt, "atan": np.arctan}


def _is_const(v) -> bool:
    return isinstance(v, float)


def evaluate(e: Expr, env: Mapping[str, object]):
    """Evaluate over jets; floats stay floats (constant folding)."""
    if isinstance(e, Num):
        return float(e.value)
    if isinstance(e, Name):
        return env[e.id] if e.id in env else BUILTIN_CONSTANTS[e.id]
    if isinstance(e, Neg):
        return -evaluate(e.arg, env)
    if isinstance(e, Call):
        a = evaluate(e.arg, env)
        if _is_const(a):
            return _const_call(e.fn, a)
        return J.ELEMENTARY[e.fn](a)
    a = evaluate(e.left, env)
    b = evaluate(e.right, env)
    op = e.op
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        if _is_const(b):
            if b == 0.0:
                raise J.JetDomainError("div", 0.0)
            return a / b
        return a / b
    if op == "^":
        if _is_const(b):
            if _is_const(a):
                return _const_pow(a, b)
            return J.pow_const(a, b)
        if _is_const(a):
            if a <= 0:
                raise J.JetDomainError("pow", a)
            return J.exp(b * math.log(a))
        return a ** b
    raise DSLError(f"unknown operator {op!r}")


def _const_call(fn: str, a: float) -> float:
    if fn in ("log", "sqrt") and a <= 0:
        raise J.JetDomainError(fn, a)
    return float(getattr(math, fn)(a))


def _const_pow(a: float, b: float) -> float:
    if not float(b).is_integer() and a <= 0:
        raise J.JetDomainError("pow", a)
    if a == 0 and b < 0:
        raise J.JetDomainError("pow", a)
    return float(a ** b)


def evaluate_numeric(e: Expr, env: Mapping[str, object]):
    """Plain numpy evaluation (no derivatives); works elementwise on arrays."""
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Name):
        return env[e.id] if e.id in env else BUILTIN_CONSTANTS[e.id]
    if isinstance(e, Neg):
        return -evaluate_numeric(e.arg, env)
    if isinstance(e, Call):
        return _NUMPY_FUNCS[e.fn](evaluate_numeric(e.arg, env))
    a = evaluate_numeric(e.left, env)
    b = evaluate_numeric(e.right, env)
    if e.op == "+":
        return a + b
    if e.op == "-":
        return a - b
    if e.op == "*":
        return a * b
    if e.op == "/":
        return a / b
    return np.power(a, b)


# ---------------------------------------------------------------------------
# tokenizer / parser
# ---------------------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()\[\],=]))"
)


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str, line: int, col0: int) -> list[_Tok]:
    toks = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            bad = len(text[pos:]) - len(text[pos:].lstrip())
            raise DSLSyntaxError(f"unexpected character {text[pos + bad]!r}", line, col0 + pos + bad + 1)
        kind = m.lastgroup
        start = m.start(kind)
        toks.append(_Tok(kind, m.group(kind), line, col0 + start + 1))
        pos = m.end()
    return toks


class _ExprParser:
    def __init__(self, toks: list[_Tok], line: int, end_col: int):
        self.toks, self.i, self.line, self.end_col = toks, 0, line, end_col

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else None

    def take(self, text=None, kind=None):
        t = self.peek()
        if t is None:
            want = text or kind or "token"
            raise DSLSyntaxError(f"unexpected end of statement, expected {want}", self.line, self.end_col)
        if (text is not None and t.text != text) or (kind is not None and t.kind != kind):
            raise DSLSyntaxError(f"expected {text or kind}, found {t.text!r}", t.line, t.col)
        self.i += 1
        return t

    def done(self):
        t = self.peek()
        if t is not None:
            raise DSLSyntaxError(f"unexpected {t.text!r}", t.line, t.col)

    def expr(self) -> Expr:
        left = self.term()
        while (t := self.peek()) is not None and t.text in "+-" and t.kind == "op":
            self.i += 1
            left = BinOp(t.text, left, self.term())
        return left

    def term(self) -> Expr:
        left = self.unary()
        while (t := self.peek()) is not None and t.text in "*/" and t.kind == "op":
            self.i += 1
            left = BinOp(t.text, left, self.unary())
        return left

    def unary(self) -> Expr:
        t = self.peek()
        if t is not None and t.kind == "op" and t.text in "+-":
            self.i += 1
            arg = self.unary()
            return Neg(arg) if t.text == "-" else arg
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        t = self.peek()
        if t is not None and t.text == "^":
            self.i += 1
            return BinOp("^", base, self.unary())
        return base

    def atom(self) -> Expr:
        t = self.peek()
        if t is None:
            raise DSLSyntaxError("unexpected end of expression", self.line, self.end_col)
        if t.kind == "num":
            self.i += 1
            return Num(float(t.text))
        if t.kind == "name":
            self.i += 1
            nxt = self.peek()
            if nxt is not None and nxt.text == "(":
                if t.text not in FUNCTIONS:
                    raise UnknownIdentifierError(f"unknown function {t.text!r}", t.line, t.col)
                self.take("(")
                arg = self.expr()
                self.take(")")
                return Call(t.text, arg)
            return Name(t.text)
        if t.text == "(":
            self.i += 1
            e = self.expr()
            self.take(")")
            return e
        raise DSLSyntaxError(f"unexpected {t.text!r}", t.line, t.col)


def parse_expr(text: str, line: int = 1, col0: int = 0) -> Expr:
    toks = _tokenize(text, line, col0)
    p = _ExprParser(toks, line, col0 + len(text) + 1)
    e = p.expr()
    p.done()
    return e


def _split_statements(source: str):
    """Yield (text, line, column offset) for every non-empty statement."""
    for lineno, raw in enumerate(source.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        offset = 0
        for piece in line.split(";"):
            if piece.strip():
                lead = len(piece) - len(piece.lstrip())
                yield piece.strip(), lineno, offset + lead
            offset += len(piece) + 1


# ---------------------------------------------------------------------------
# chart / metric field
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Chart:
    dim: int
    coord_names: tuple[str, ...]
    sample_box: tuple[tuple[float, float], ...]
    excluded_radius: float = 0.0
    singular_loci: tuple[Callable, ...] = ()

    def __post_init__(self):
        if not 2 <= self.dim <= 8:
            raise DSLError(f"dimension {self.dim} outside 2..8")
        if len(self.coord_names) != self.dim or len(set(self.coord_names)) != self.dim:
            raise DSLError("coordinate names must be distinct and one per dimension")
        if len(self.sample_box) != self.dim:
            raise DSLError("sample box needs one interval per coordinate")
        for lo, hi in self.sample_box:
            if not hi > lo:
                raise DSLError(f"sample box interval [{lo}, {hi}] has non-positive length")
        if self.excluded_radius < 0:
            raise DSLError("excluded radius must be non-negative")

    def contains(self, x) -> bool:
        return all(lo <= xi <= hi for xi, (lo, hi) in zip(x, self.sample_box))

    def near_singular(self, x) -> bool:
        if not self.singular_loci or self.excluded_radius <= 0:
            return False
        for locus in self.singular_loci:
            f = locus(np.asarray(x, dtype=float))
            v = f.coeffs[0] if isinstance(f, Jet) else f
            gnorm = np.linalg.norm(f.coeffs[1]) if isinstance(f, Jet) and f.order >= 1 else 1.0
            if abs(float(v)) < self.excluded_radius * max(gnorm, 1e-300):
                return True
        return False


@dataclass(frozen=True, eq=False)
class MetricField:
    """A metric on one chart: ``jet(x, order)`` returns the matrix-valued jet of ``g_ij``."""

    chart: Chart
    jet_fn: Callable[[np.ndarray, int], Jet]
    label: str = ""
    signature_hint: tuple[int, int] | None = None
    source: "MetricSource | None" = None

    @property
    def dim(self) -> int:
        return self.chart.dim

    def jet(self, x, order: int = 3) -> Jet:
        return self.jet_fn(np.asarray(x, dtype=float), order)

    def matrix(self, x) -> np.ndarray:
        return np.asarray(self.jet(x, 0).coeffs[0])

    def component(self, i: int, j: int) -> Callable[[np.ndarray], Jet]:
        return lambda x, order=3: self.jet(x, order)[i, j]

    def scaled(self, c: float, label: str | None = None) -> "MetricField":
        c = float(c)
        src = self.source.scaled(c) if self.source is not None else None
        return MetricField(self.chart, lambda x, order: self.jet_fn(x, order) * c,
                           label or f"{c:g}*{self.label}", self.signature_hint, src)

    def admissible(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        if not self.chart.contains(x):
            return False
        try:
            if self.chart.near_singular(x):
                return False
            g = self.matrix(x)
        except (JetError, ZeroDivisionError, FloatingPointError, ValueError):
            return False
        if not np.all(np.isfinite(g)):
            return False
        return abs(np.linalg.det(g)) > DET_FLOOR

    def sample(self, n: int, rng: np.random.Generator, others: Sequence["MetricField"] = (),
               max_tries: int | None = None) -> np.ndarray:
        """Rejection-sample ``n`` admissible points from the chart box."""
        lo = np.array([a for a, _ in self.chart.sample_box])
        hi = np.array([b for _, b in self.chart.sample_box])
        out = []
        tries = 0
        max_tries = max_tries or 1000 * max(n, 1)
        while len(out) < n:
            if tries >= max_tries:
                raise SamplingError(f"only {len(out)} of {n} admissible samples after {tries} draws")
            tries += 1
            x = lo + (hi - lo) * rng.random(self.dim)
            if self.admissible(x) and all(o.admissible(x) for o in others):
                out.append(x)
        return np.array(out).reshape(n, self.dim)


@dataclass(frozen=True)
class MetricSource:
    """Parsed DSL program; kept so that fields can be printed back."""

    dim: int
    coord_names: tuple[str, ...]
    box: tuple[tuple[float, float], ...]
    params: tuple[tuple[str, Expr], ...]
    lets: tuple[tuple[str, Expr], ...]
    components: dict  # (i, j) with i <= j -> Expr
    signature: tuple[int, int] | None = None
    label: str = ""
    singular: tuple[Expr, ...] = ()
    excluded_radius: float = 0.0

    def scaled(self, c: float) -> "MetricSource":
        comps = {k: BinOp("*", Num(c), e) for k, e in self.components.items()}
        return MetricSource(self.dim, self.coord_names, self.box, self.params, self.lets, comps,
                            self.signature, self.label, self.singular, self.excluded_radius)


def _param_values(params) -> dict[str, float]:
    vals = dict(BUILTIN_CONSTANTS)
    for name, e in params:
        v = evaluate_numeric(e, vals)
        vals[name] = float(v)
    return vals


def field_from_source(src: MetricSource) -> MetricField:
    consts = _param_values(src.params)
    names = src.coord_names
    n = src.dim
    lets = src.lets
    comps = src.components

    def env_at(x, order):
        env: dict[str, object] = dict(consts)
        X = J.coordinates(x, order)
        for k, name in enumerate(names):
            env[name] = X[k]
        for name, e in lets:
            env[name] = evaluate(e, env)
        return env

    def jet_fn(x, order):
        env = env_at(x, order)
        vals = {}
        for (i, j), e in comps.items():
            v = evaluate(e, env)
            vals[(i, j)] = v if isinstance(v, Jet) else J.constant(v, n, order)
        rows = [[vals[(min(i, j), max(i, j))] for j in range(n)] for i in range(n)]
        return J.matrix(rows)

    def make_locus(e):
        return lambda x: evaluate(e, env_at(x, 1))

    chart = Chart(n, names, src.box, src.excluded_radius, tuple(make_locus(e) for e in src.singular))
    return MetricField(chart, jet_fn, src.label, src.signature, src)


def parse_source(source: str) -> MetricSource:
    dim = None
    coords: tuple[str, ...] | None = None
    box = None
    params: list[tuple[str, Expr]] = []
    lets: list[tuple[str, Expr]] = []
    comps: dict[tuple[int, int], Expr] = {}
    comp_where: dict[tuple[int, int], tuple[int, int]] = {}
    signature = None
    label = ""
    singular: list[Expr] = []
    excluded = 0.0
    known: set[str] = set(BUILTIN_CONSTANTS)
    param_names: set[str] = set(BUILTIN_CONSTANTS)

    def check_names(e: Expr, line, col, allowed):
        unknown = sorted(free_names(e) - allowed)
        if unknown:
            raise UnknownIdentifierError(f"unknown identifier {unknown[0]!r}", line, col)

    def const_value(text, line, col):
        e = parse_expr(text, line, col)
        check_names(e, line, col + 1, param_names)
        return float(evaluate_numeric(e, _param_values(params)))

    for text, line, col in _split_statements(source):
        head, _, rest = text.partition(" ")
        rest_col = col + len(head) + 1
        rest = rest.strip() if head in KEYWORDS else rest
        if head == "label":
            label = rest
            continue
        if head == "dim":
            try:
                dim = int(rest)
            except ValueError:
                raise DSLSyntaxError(f"bad dimension {rest!r}", line, rest_col + 1) from None
            if not 2 <= dim <= 8:
                raise DSLError(f"dimension {dim} outside 2..8", line, rest_col + 1)
            continue
        if head == "coords":
            names = tuple(rest.replace(",", " ").split())
            for nm in names:
                if not re.fullmatch(r"[A-Za-z_][A-Za-z_0-9]*", nm) or nm in FUNCTIONS or nm in KEYWORDS:
                    raise DSLSyntaxError(f"bad coordinate name {nm!r}", line, rest_col + 1)
            if len(set(names)) != len(names):
                raise DSLError("coordinate names must be distinct", line, rest_col + 1)
            coords = names
            known |= set(names)
            continue
        if head == "box":
            box = _parse_box(rest, line, rest_col, dim, const_value)
            continue
        if head in ("param", "let"):
            name, eq, body = rest.partition("=")
            name = name.strip()
            if not eq or not re.fullmatch(r"[A-Za-z_][A-Za-z_0-9]*", name):
                raise DSLSyntaxError(f"expected '{head} name = expression'", line, rest_col + 1)
            if name in known or name in FUNCTIONS:
                raise DSLError(f"identifier {name!r} already defined", line, rest_col + 1)
            body_col = col + text.index("=") + 1
            e = parse_expr(body, line, body_col)
            if head == "param":
                check_names(e, line, body_col + 1, param_names)
                params.append((name, e))
                param_names.add(name)
            else:
                check_names(e, line, body_col + 1, known)
                lets.append((name, e))
            known.add(name)
            continue
        if head == "signature":
            try:
                p, q = (int(v) for v in rest.split())
            except ValueError:
                raise DSLSyntaxError("expected 'signature p q'", line, rest_col + 1) from None
            signature = (p, q)
            continue
        if head == "singular":
            e = parse_expr(rest, line, rest_col)
            check_names(e, line, rest_col + 1, known)
            singular.append(e)
            continue
        if head == "exclude":
            excluded = const_value(rest, line, rest_col)
            continue
        m = re.fullmatch(r"g(\d)(\d)\s*=(.*)", text)
        if m:
            if dim is None:
                raise DSLError("component given before 'dim'", line, col + 1)
            i, j = int(m.group(1)) - 1, int(m.group(2)) - 1
            if not (0 <= i < dim and 0 <= j < dim):
                raise DSLError(f"component g{i + 1}{j + 1} does not fit a {dim}x{dim} (non-square) metric",
                               line, col + 1)
            key = (min(i, j), max(i, j))
            if key in comps:
                raise DSLError(f"component g{key[0] + 1}{key[1] + 1} given twice (first on line "
                               f"{comp_where[key][0]})", line, col + 1)
            body_col = col + text.index("=") + 1
            e = parse_expr(m.group(3), line, body_col)
            check_names(e, line, body_col + 1, known)
            comps[key] = e
            comp_where[key] = (line, col)
            continue
        raise DSLSyntaxError(f"unknown statement {head!r}", line, col + 1)

    if dim is None:
        raise DSLError("missing 'dim' statement")
    if coords is None:
        raise DSLError("missing 'coords' statement")
    if len(coords) != dim:
        raise DSLError(f"{len(coords)} coordinate names for dimension {dim}")
    if box is None:
        raise DSLError("missing 'box' statement")
    if len(box) != dim:
        raise DSLError(f"box has {len(box)} intervals for dimension {dim}")
    for i in range(dim):
        for j in range(i, dim):
            if (i, j) not in comps:
                raise MissingComponentError(f"missing component g{i + 1}{j + 1}")
    # names used by lets/components must not be params shadowed later; checked above
    return MetricSource(dim, coords, tuple(box), tuple(params), tuple(lets), comps, signature, label,
                        tuple(singular), excluded)


def _parse_box(rest: str, line: int, col: int, dim, const_value):
    m = re.fullmatch(r"\[([^\]]*)\]\s*\^\s*(\d+)", rest)
    if m:
        lo, hi = _interval(m.group(1), line, col, const_value)
        k = int(m.group(2))
        if dim is not None and k != dim:
            raise DSLError(f"box power {k} does not match dimension {dim}", line, col + 1)
        return [(lo, hi)] * k
    parts = re.findall(r"\[([^\]]*)\]", rest)
    if not parts or re.sub(r"\[[^\]]*\]", "", rest).strip():
        raise DSLSyntaxError("expected box '[a,b]^n' or '[a,b] [c,d] ...'", line, col + 1)
    return [_interval(p, line, col, const_value) for p in parts]


def _interval(text: str, line, col, const_value):
    pieces = text.split(",")
    if len(pieces) != 2:
        raise DSLSyntaxError(f"bad interval [{text}]", line, col + 1)
    return const_value(pieces[0], line, col), const_value(pieces[1], line, col)


def parse_metric(source: str) -> MetricField:
    """Parse DSL text into a metric field (symmetric completion applied)."""
    return field_from_source(parse_source(source))


def pretty_print(fld: MetricField | MetricSource) -> str:
    """DSL text for a parsed (or catalog, DSL-backed) metric."""
    src = fld if isinstance(fld, MetricSource) else fld.source
    if src is None:
        raise ValueError(f"metric {getattr(fld, 'label', '')!r} is not DSL-backed and cannot be printed")
    out = [f"dim {src.dim}", "coords " + " ".join(src.coord_names),
           "box " + " ".join(f"[{repr(float(a))},{repr(float(b))}]" for a, b in src.box)]
    if src.label:
        out.append(f"label {src.label}")
    if src.signature is not None:
        out.append(f"signature {src.signature[0]} {src.signature[1]}")
    for name, e in src.params:
        out.append(f"param {name} = {to_source(e)}")
    for name, e in src.lets:
        out.append(f"let {name} = {to_source(e)}")
    for e in src.singular:
        out.append(f"singular {to_source(e)}")
    if src.excluded_radius:
        out.append(f"exclude {repr(float(src.excluded_radius))}")
    for (i, j), e in sorted(src.components.items()):
        out.append(f"g{i + 1}{j + 1} = {to_source(e)}")
    return "\n".join(out) + "\n"


def load_metric(path) -> MetricField:
    with open(path, encoding="utf-8") as fh:
        return parse_metric(fh.read())


__all__ = [
    "Num", "Name", "Neg", "BinOp", "Call", "Expr", "Chart", "MetricField", "MetricSource",
    "DSLError", "DSLSyntaxError", "UnknownIdentifierError", "MissingComponentError", "SamplingError",
    "parse_expr", "parse_source", "parse_metric", "pretty_print", "load_metric", "evaluate",
    "evaluate_numeric", "to_source", "field_from_source", "free_names",
]
