"""Birth-rate expressions: parsing, evaluation and static analysis.

A rate ``f_i`` is written in a small arithmetic language over the other
components ``x1 .. xN``::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := NUMBER | VAR | call | '(' expr ')'
    call   := IDENT '(' expr (',' expr)* ')'

Builtins are ``hill_act(x, K, h) = x^h / (K^h + x^h)``,
``hill_rep(x, K, h) = K^h / (K^h + x^h)``, ``min`` and ``max``.  ``K`` and
``h`` must be numeric literals with ``K > 0`` and ``h >= 1``.

The analysis functions are sound but not complete: a '+' or '-' sign and a
rigorous :class:`AffineBound` are only reported when they follow from the
composition rules, otherwise the result degrades to ``'?'`` or to a sampled
estimate flagged ``rigorous=False``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from noisebound.errors import (
    BadIndexError,
    NegativeRateError,
    NonFiniteRateError,
    RateSyntaxError,
    SelfDependenceError,
    UnboundedRateError,
)

INC, DEC, NONE, UNKNOWN = "+", "-", "0", "?"

# Rate values with magnitude below this are treated as exactly zero.
ZERO_FLOOR = 1e-300

BUILTINS = {"hill_act": 3, "hill_rep": 3, "min": None, "max": None}


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    index: int  # 1-based component index


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple


Node = Union[Const, Var, BinOp, Call]


@dataclass(frozen=True)
class RateExpr:
    root: Node
    own_index: int
    n_components: int
    source: str = field(default="", compare=False)

    def __str__(self):
        return format_expr(self.root)

    def variables(self):
        return sorted(_variables(self.root))


@dataclass(frozen=True)
class MonotonicitySignature:
    signs: tuple  # one entry per component, each in {'+', '-', '0', '?'}

    def __getitem__(self, j):
        """Sign with respect to the 1-based component ``j``."""
        return self.signs[j - 1]


@dataclass(frozen=True)
class AffineBound:
    lower: float
    upper_const: float
    upper_slope: float
    rigorous: bool

    def to_dict(self):
        return {
            "lower": self.lower,
            "upper_const": self.upper_const,
            "upper_slope": self.upper_slope,
            "rigorous": self.rigorous,
        }


# ---------------------------------------------------------------------------
# parsing

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/(),]))"
)
_VAR_RE = re.compile(r"x(\d+)")


def _tokenize(src):
    tokens = []
    pos = 0
    while pos < len(src):
        if src[pos:].strip() == "":
            break
        m = _TOKEN_RE.match(src, pos)
        if m is None:
            start = pos + len(src[pos:]) - len(src[pos:].lstrip())
            raise RateSyntaxError(f"unexpected character {src[start]!r}", start)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(src)))
    return tokens


class _Parser:
    def __init__(self, src, own_index, n_components):
        self.tokens = _tokenize(src)
        self.pos = 0
        self.own_index = own_index
        self.n_components = n_components

    def peek(self):
        return self.tokens[self.pos]

    def take(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, value):
        kind, text, where = self.take()
        if text != value or kind != "op":
            found = "end of input" if kind == "end" else repr(text)
            raise RateSyntaxError(f"expected {value!r}, found {found}", where)

    def parse(self):
        node = self.expr()
        kind, text, where = self.peek()
        if kind != "end":
            raise RateSyntaxError(f"unexpected token {text!r}", where)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.factor())
        return node

    def factor(self):
        kind, text, where = self.take()
        if kind == "num":
            return Const(float(text))
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect(")")
            return node
        if kind == "ident":
            if self.peek()[1] == "(" and self.peek()[0] == "op":
                return self.call(text, where)
            return self.variable(text, where)
        found = "end of input" if kind == "end" else repr(text)
        raise RateSyntaxError(f"expected a number, variable or call, found {found}", where)

    def variable(self, text, where):
        m = _VAR_RE.fullmatch(text)
        if m is None:
            raise RateSyntaxError(f"unknown identifier {text!r}", where)
        digits = m.group(1)
        index = int(digits)
        if index < 1 or index > self.n_components:
            raise BadIndexError(
                f"variable {text} at position {where} is outside x1..x{self.n_components}"
            )
        if digits.startswith("0"):
            raise RateSyntaxError(f"malformed variable {text!r}", where)
        if index == self.own_index:
            raise SelfDependenceError(
                f"rate of component {self.own_index} references its own count {text}"
            )
        return Var(index)

    def call(self, name, where):
        if name not in BUILTINS:
            raise RateSyntaxError(f"unknown function {name!r}", where)
        self.expect("(")
        args = [self.expr()]
        while self.peek()[1] == "," and self.peek()[0] == "op":
            self.take()
            args.append(self.expr())
        self.expect(")")
        arity = BUILTINS[name]
        if arity is not None and len(args) != arity:
            raise RateSyntaxError(f"{name} takes {arity} arguments, got {len(args)}", where)
        if name.startswith("hill_"):
            K, h = args[1], args[2]
            if not isinstance(K, Const) or not isinstance(h, Const):
                raise RateSyntaxError(f"{name}: K and h must be numeric literals", where)
            if not K.value > 0:
                raise RateSyntaxError(f"{name}: K must be positive", where)
            if not h.value >= 1:
                raise RateSyntaxError(f"{name}: h must be at least 1", where)
        return Call(name, tuple(args))


def parse_rate_expr(src: str, own_index: int, n_components: int) -> RateExpr:
    """Parse ``src`` as the birth rate of component ``own_index`` (1-based)."""
    if not 1 <= own_index <= n_components:
        raise BadIndexError(f"own index {own_index} outside 1..{n_components}")
    if not isinstance(src, str) or not src.strip():
        raise RateSyntaxError("empty rate expression", 0)
    root = _Parser(src, own_index, n_components).parse()
    return RateExpr(root, own_index, n_components, src)


# ---------------------------------------------------------------------------
# printing

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def _fmt_num(v):
    if float(v).is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def format_expr(node: Node) -> str:
    """Render a tree in the concrete syntax; re-parsing gives the same tree."""
    if isinstance(node, Const):
        return _fmt_num(node.value)
    if isinstance(node, Var):
        return f"x{node.index}"
    if isinstance(node, Call):
        return f"{node.name}(" + ", ".join(format_expr(a) for a in node.args) + ")"
    prec = _PREC[node.op]
    left = format_expr(node.left)
    right = format_expr(node.right)
    if isinstance(node.left, BinOp) and _PREC[node.left.op] < prec:
        left = f"({left})"
    if isinstance(node.right, BinOp) and _PREC[node.right.op] <= prec:
        right = f"({right})"
    return f"{left} {node.op} {right}"


def _variables(node):
    if isinstance(node, Var):
        return {node.index}
    if isinstance(node, Const):
        return set()
    if isinstance(node, BinOp):
        return _variables(node.left) | _variables(node.right)
    out = set()
    for a in node.args:
        out |= _variables(a)
    return out


# ---------------------------------------------------------------------------
# evaluation


def _hill_act(x, K, h):
    xh = np.power(x, h)
    return xh / (K**h + xh)


def _hill_rep(x, K, h):
    Kh = K**h
    return Kh / (Kh + np.power(x, h))


def _eval_node(node, states):
    if isinstance(node, Const):
        return np.full(states.shape[0], node.value)
    if isinstance(node, Var):
        return states[:, node.index - 1].astype(float)
    if isinstance(node, BinOp):
        a = _eval_node(node.left, states)
        b = _eval_node(node.right, states)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        zero = b == 0
        if zero.any():
            k = int(np.argmax(zero))
            raise NonFiniteRateError(
                f"division by zero at state {tuple(int(v) for v in states[k])}"
            )
        return a / b
    args = [_eval_node(a, states) for a in node.args]
    if node.name == "hill_act":
        return _hill_act(args[0], node.args[1].value, node.args[2].value)
    if node.name == "hill_rep":
        return _hill_rep(args[0], node.args[1].value, node.args[2].value)
    if node.name == "min":
        return np.minimum.reduce(args)
    return np.maximum.reduce(args)


def eval_rate_array(expr: RateExpr, states) -> np.ndarray:
    """Evaluate ``expr`` at every row of an ``(n, N)`` integer array of states."""
    states = np.asarray(states)
    if states.ndim != 2 or states.shape[1] != expr.n_components:
        raise ValueError(f"states must have shape (n, {expr.n_components})")
    with np.errstate(all="ignore"):
        vals = _eval_node(expr.root, states)
    bad = ~np.isfinite(vals)
    if bad.any():
        k = int(np.argmax(bad))
        raise NonFiniteRateError(
            f"rate of x{expr.own_index} is not finite at state "
            f"{tuple(int(v) for v in states[k])}"
        )
    vals[np.abs(vals) < ZERO_FLOOR] = 0.0
    neg = vals < 0
    if neg.any():
        k = int(np.argmax(neg))
        raise NegativeRateError(
            f"rate of x{expr.own_index} is {vals[k]:g} < 0 at state "
            f"{tuple(int(v) for v in states[k])}"
        )
    return vals


def eval_rate(expr: RateExpr, state) -> float:
    """Evaluate ``expr`` at a single lattice point."""
    state = np.asarray(state, dtype=np.int64)
    if state.shape != (expr.n_components,):
        raise ValueError(f"state must have {expr.n_components} coordinates")
    if (state < 0).any():
        raise ValueError("state coordinates must be nonnegative")
    return float(eval_rate_array(expr, state[None, :])[0])


def raw_eval_array(expr: RateExpr, states) -> np.ndarray:
    """Like :func:`eval_rate_array` but returns nan/negatives instead of raising."""
    with np.errstate(all="ignore"):
        try:
            return _eval_node(expr.root, np.asarray(states))
        except NonFiniteRateError:
            out = np.empty(len(states))
            for k, row in enumerate(np.asarray(states)):
                try:
                    out[k] = _eval_node(expr.root, row[None, :])[0]
                except NonFiniteRateError:
                    out[k] = np.nan
            return out


# ---------------------------------------------------------------------------
# static analysis


def _flip(sign):
    return {INC: DEC, DEC: INC}.get(sign, sign)


def _join(a, b):
    if a == NONE:
        return b
    if b == NONE:
        return a
    if a == b:
        return a
    return UNKNOWN


def _merge_signs(*maps, flips=None):
    flips = flips or [1] * len(maps)
    out = {}
    for m, f in zip(maps, flips):
        for j, s in m.items():
            s = _flip(s) if f < 0 else s
            out[j] = _join(out.get(j, NONE), s)
    return out


def _mul0(a, b):
    if a == 0 or b == 0:
        return 0.0
    return a * b


def _better(ub, cand):
    if cand is None:
        return ub
    if ub is None:
        return cand
    return min(ub, cand, key=lambda t: (t[1], t[0]))


@dataclass
class _Info:
    lo: float
    hi: float
    signs: dict
    ub: tuple | None  # (A, B): value <= A + B * s(x)
    growth: int  # value >= c * t**growth - C along the diagonal ray, c > 0
    const: float | None = None

    def definite(self):
        if self.lo >= 0:
            return 1
        if self.hi <= 0:
            return -1
        return 0


def _analyze(node) -> _Info:
    if isinstance(node, Const):
        v = node.value
        return _Info(v, v, {}, (v, 0.0), 0, v)
    if isinstance(node, Var):
        return _Info(0.0, math.inf, {node.index: INC}, (0.0, 1.0), 1)
    if isinstance(node, BinOp):
        a, b = _analyze(node.left), _analyze(node.right)
        if a.const is not None and b.const is not None:
            try:
                with np.errstate(all="ignore"):
                    v = float(_eval_node(node, np.zeros((1, 1)))[0])
            except NonFiniteRateError:
                v = math.nan
            if math.isfinite(v):
                return _Info(v, v, {}, (v, 0.0), 0, v)
            return _Info(-math.inf, math.inf, {}, None, 0)
        return {"+": _add, "-": _sub, "*": _mul, "/": _div}[node.op](a, b)
    args = [_analyze(a) for a in node.args]
    if node.name in ("hill_act", "hill_rep"):
        return _hill(node.name, args[0], node.args[1].value, node.args[2].value)
    return _minmax(node.name, args)


def _add(a, b):
    lo, hi = a.lo + b.lo, a.hi + b.hi
    ub = None
    if a.ub is not None and b.ub is not None:
        ub = (a.ub[0] + b.ub[0], a.ub[1] + b.ub[1])
    if hi < math.inf:
        ub = _better(ub, (hi, 0.0))
    growth = 0
    if b.lo > -math.inf:
        growth = max(growth, a.growth)
    if a.lo > -math.inf:
        growth = max(growth, b.growth)
    return _Info(lo, hi, _merge_signs(a.signs, b.signs), ub, growth)


def _sub(a, b):
    lo, hi = a.lo - b.hi, a.hi - b.lo
    ub = None
    if a.ub is not None and b.lo > -math.inf:
        ub = (a.ub[0] - b.lo, a.ub[1])
    if hi < math.inf:
        ub = _better(ub, (hi, 0.0))
    growth = a.growth if b.hi < math.inf else 0
    return _Info(lo, hi, _merge_signs(a.signs, b.signs, flips=[1, -1]), ub, growth)


def _interval_mul(a_lo, a_hi, b_lo, b_hi):
    prods = [_mul0(x, y) for x in (a_lo, a_hi) for y in (b_lo, b_hi)]
    return min(prods), max(prods)


def _product_signs(a, b):
    if a.const is not None:
        if a.const == 0:
            return {}
        return _merge_signs(b.signs, flips=[1 if a.const > 0 else -1])
    if b.const is not None:
        return _product_signs(b, a)
    sa, sb = a.definite(), b.definite()
    if sa == 0 or sb == 0:
        return {j: UNKNOWN for j in set(a.signs) | set(b.signs)}
    joined = _merge_signs(a.signs, b.signs, flips=[sa, sb])
    return _merge_signs(joined, flips=[sa * sb])


def _scaled_ub(bounded, other):
    # bounded * other <= max(hi, 0) * other when other >= 0
    if bounded.hi < math.inf and other.lo >= 0 and other.ub is not None:
        c = max(bounded.hi, 0.0)
        return (c * max(other.ub[0], 0.0), c * other.ub[1])
    return None


def _mul(a, b):
    lo, hi = _interval_mul(a.lo, a.hi, b.lo, b.hi)
    ub = _better(_scaled_ub(a, b), _scaled_ub(b, a))
    if hi < math.inf:
        ub = _better(ub, (hi, 0.0))
    growth = 0
    if a.lo >= 0 and b.lo >= 0:
        if a.growth >= 1 and b.growth >= 1:
            growth = min(2, a.growth + b.growth)
        if a.lo > 0:
            growth = max(growth, b.growth)
        if b.lo > 0:
            growth = max(growth, a.growth)
    return _Info(lo, hi, _product_signs(a, b), ub, growth)


def _div(a, b):
    if not (b.lo > 0 or b.hi < 0):
        signs = {j: UNKNOWN for j in set(a.signs) | set(b.signs)}
        return _Info(-math.inf, math.inf, signs, None, 0)
    r_lo = 0.0 if b.hi == math.inf else 1.0 / b.hi
    r_hi = 0.0 if b.lo == -math.inf else 1.0 / b.lo
    recip = _Info(
        min(r_lo, r_hi),
        max(r_lo, r_hi),
        _merge_signs(b.signs, flips=[-1]),
        None,
        0,
        None if b.const is None else 1.0 / b.const,
    )
    lo, hi = _interval_mul(a.lo, a.hi, recip.lo, recip.hi)
    ub = None
    if b.lo > 0 and a.ub is not None:
        ub = (max(a.ub[0], 0.0) / b.lo, a.ub[1] / b.lo)
    if hi < math.inf:
        ub = _better(ub, (hi, 0.0))
    growth = a.growth if (a.lo >= 0 and b.lo > 0 and b.hi < math.inf) else 0
    return _Info(lo, hi, _product_signs(a, recip), ub, growth)


def _hill(name, x, K, h):
    if x.lo < 0:
        signs = {j: UNKNOWN for j in x.signs}
        return _Info(-math.inf, math.inf, signs, None, 0)

    def act(v):
        return 1.0 if v == math.inf else float(_hill_act(np.float64(v), K, h))

    def rep(v):
        return 0.0 if v == math.inf else float(_hill_rep(np.float64(v), K, h))

    if name == "hill_act":
        lo, hi, signs = act(x.lo), act(x.hi), dict(x.signs)
    else:
        lo, hi, signs = rep(x.hi), rep(x.lo), _merge_signs(x.signs, flips=[-1])
    return _Info(lo, hi, signs, (hi, 0.0), 0)


def _minmax(name, args):
    signs = _merge_signs(*[a.signs for a in args])
    if name == "min":
        lo, hi = min(a.lo for a in args), min(a.hi for a in args)
        ub = None
        for a in args:
            ub = _better(ub, a.ub)
        growth = min(a.growth for a in args)
    else:
        lo, hi = max(a.lo for a in args), max(a.hi for a in args)
        ub = None
        if all(a.ub is not None for a in args):
            ub = (max(a.ub[0] for a in args), max(a.ub[1] for a in args))
        growth = max(a.growth for a in args)
    if hi < math.inf:
        ub = _better(ub, (hi, 0.0))
    return _Info(lo, hi, signs, ub, growth)


def analyze_monotonicity(expr: RateExpr) -> MonotonicitySignature:
    """Sign of the dependence of ``expr`` on each component."""
    info = _analyze(expr.root)
    signs = [info.signs.get(j, NONE) for j in range(1, expr.n_components + 1)]
    signs[expr.own_index - 1] = NONE
    return MonotonicitySignature(tuple(signs))


SAMPLE_BOX = 200
SAMPLE_POINTS = 10_000
INFLATE = 0.10


def analyze_bounds(expr: RateExpr, seed: int = 0) -> AffineBound:
    """Certified ``lower <= f(x) <= upper_const + upper_slope * s(x)``.

    Falls back to a sampled estimate with ``rigorous=False`` when the
    composition rules do not certify both sides.  Raises
    :class:`UnboundedRateError` when the expression provably grows
    superlinearly along the diagonal.
    """
    info = _analyze(expr.root)
    if info.growth >= 2:
        raise UnboundedRateError(
            f"rate of x{expr.own_index} grows superlinearly; no affine bound A + B*s(x) exists"
        )
    if info.lo > -math.inf and info.ub is not None:
        return AffineBound(
            lower=max(info.lo, 0.0),
            upper_const=max(info.ub[0], 0.0),
            upper_slope=max(info.ub[1], 0.0),
            rigorous=True,
        )
    return _estimate_bounds(expr, seed)


def _estimate_bounds(expr, seed):
    N, i = expr.n_components, expr.own_index
    others = [j for j in range(N) if j != i - 1]
    k = max(2, int(SAMPLE_POINTS ** (1.0 / len(others))))
    axes = np.unique(np.linspace(0, SAMPLE_BOX, k).round().astype(np.int64))
    grid = np.stack(np.meshgrid(*([axes] * len(others)), indexing="ij"), -1).reshape(-1, len(others))
    rng = np.random.default_rng(seed)
    rand = rng.integers(0, SAMPLE_BOX + 1, size=(SAMPLE_POINTS, len(others)))
    pts = np.zeros((len(grid) + SAMPLE_POINTS, N), dtype=np.int64)
    pts[:, others] = np.vstack([grid, rand])
    vals = raw_eval_array(expr, pts)
    ok = np.isfinite(vals)
    vals, pts = vals[ok], pts[ok]
    if vals.size == 0:
        return AffineBound(0.0, math.inf, math.inf, False)
    s = pts.sum(axis=1).astype(float)
    lower = max(float(vals.min()), 0.0) * (1 - INFLATE)
    # upper line minimizing its mean height over the sampled box
    slopes = np.concatenate([[0.0], np.linspace(0.0, max(1e-12, float(np.max(vals / np.maximum(s, 1)))), 64)])
    best = None
    for B in slopes:
        A = float(np.max(vals - B * s))
        score = A + B * SAMPLE_BOX
        if best is None or score < best[0]:
            best = (score, max(A, 0.0), B)
    _, A, B = best
    return AffineBound(float(lower), A * (1 + INFLATE), float(B) * (1 + INFLATE), False)


# ---------------------------------------------------------------------------
# bytecode for the simulation kernels

OP_CONST, OP_VAR, OP_ADD, OP_SUB, OP_MUL, OP_DIV, OP_HACT, OP_HREP, OP_MIN, OP_MAX = range(10)
MAX_STACK = 64


def compile_program(expr: RateExpr, consts: list):
    """Postfix instruction list ``[(op, arg), ...]``; literals are appended to ``consts``."""
    code = []

    def emit(node):
        if isinstance(node, Const):
            code.append((OP_CONST, len(consts)))
            consts.append(node.value)
        elif isinstance(node, Var):
            code.append((OP_VAR, node.index - 1))
        elif isinstance(node, BinOp):
            emit(node.left)
            emit(node.right)
            code.append(({"+": OP_ADD, "-": OP_SUB, "*": OP_MUL, "/": OP_DIV}[node.op], 0))
        elif node.name in ("hill_act", "hill_rep"):
            emit(node.args[0])
            code.append((OP_HACT if node.name == "hill_act" else OP_HREP, len(consts)))
            consts.extend([node.args[1].value, node.args[2].value])
        else:
            emit(node.args[0])
            for a in node.args[1:]:
                emit(a)
                code.append((OP_MIN if node.name == "min" else OP_MAX, 0))

    emit(expr.root)
    depth = peak = 0
    for op, _ in code:
        depth += 1 if op in (OP_CONST, OP_VAR) else (0 if op in (OP_HACT, OP_HREP) else -1)
        peak = max(peak, depth)
    if peak > MAX_STACK:
        raise ValueError(f"expression too deeply nested for the kernel (stack {peak} > {MAX_STACK})")
    return code
