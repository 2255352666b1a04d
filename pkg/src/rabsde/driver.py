"""Driver expression language: parsing, evaluation, and Lipschitz estimation.

Grammar (EBNF):

    expr    = term { ("+" | "-") term } ;
    term    = unary { ("*" | "/") unary } ;
    unary   = "-" unary | atom ;
    atom    = NUMBER | IDENT | IDENT "(" expr { "," expr } ")" | "(" expr ")" ;
    NUMBER  = decimal literal, optionally with exponent (1, 0.5, .25, 1e-9) ;
    IDENT   = one of the fixed variable names or a function name ;

Variables: t, w, h, y, z, ey, ez, u, tau.  Functions: exp(x), abs(x),
min(a, b), max(a, b).  Unary minus binds tighter than * and /, which bind
tighter than + and -; binary operators associate to the left.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable, Iterable, Mapping

import numpy as np

from .errors import DriverEvalError, DriverParseError

VARIABLES = frozenset({"t", "w", "h", "y", "z", "ey", "ez", "u", "tau"})
FUNCTIONS: dict[str, int] = {"exp": 1, "abs": 1, "min": 2, "max": 2}

# Driver slots that carry Lipschitz constants, in reporting order.
LIPSCHITZ_SLOTS = ("y", "z", "ey", "ez", "u")


class Expr:
    __slots__ = ()


@dataclass(frozen=True)
class Num(Expr):
    value: float


@dataclass(frozen=True)
class Var(Expr):
    name: str


@dataclass(frozen=True)
class Neg(Expr):
    operand: Expr


@dataclass(frozen=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Call(Expr):
    func: str
    args: tuple[Expr, ...]


_NP_FUNCS: dict[str, Callable[..., Any]] = {
    "exp": np.exp,
    "abs": np.abs,
    "min": np.minimum,
    "max": np.maximum,
}


def _free_vars(node: Expr) -> frozenset[str]:
    if isinstance(node, Var):
        return frozenset({node.name})
    if isinstance(node, Neg):
        return _free_vars(node.operand)
    if isinstance(node, BinOp):
        return _free_vars(node.left) | _free_vars(node.right)
    if isinstance(node, Call):
        out: frozenset[str] = frozenset()
        for a in node.args:
            out |= _free_vars(a)
        return out
    return frozenset()


def _evaluate(node: Expr, env: Mapping[str, float]) -> float:
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        try:
            return env[node.name]
        except KeyError:
            raise DriverEvalError(f"unbound variable '{node.name}'") from None
    if isinstance(node, Neg):
        return -_evaluate(node.operand, env)
    if isinstance(node, BinOp):
        a = _evaluate(node.left, env)
        b = _evaluate(node.right, env)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if b == 0:
            raise DriverEvalError("division by zero")
        return a / b
    if isinstance(node, Call):
        vals = [_evaluate(a, env) for a in node.args]
        if node.func == "exp":
            return math.exp(vals[0])
        if node.func == "abs":
            return abs(vals[0])
        if node.func == "min":
            return min(vals)
        return max(vals)
    raise DriverEvalError(f"cannot evaluate node {node!r}")


def _to_source(node: Expr) -> str:
    # Fully parenthesized so the printout re-parses to the same structure.
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return f"(-{_to_source(node.operand)})"
    if isinstance(node, BinOp):
        return f"({_to_source(node.left)} {node.op} {_to_source(node.right)})"
    if isinstance(node, Call):
        args = ", ".join(_to_source(a) for a in node.args)
        return f"{node.func}({args})"
    raise ValueError(f"cannot print node {node!r}")


def _compile(node: Expr) -> Callable[[Mapping[str, Any]], Any]:
    """Closure-tree compiler; works elementwise on numpy arrays."""
    if isinstance(node, Num):
        v = node.value
        return lambda env: v
    if isinstance(node, Var):
        name = node.name
        return lambda env: env[name]
    if isinstance(node, Neg):
        inner = _compile(node.operand)
        return lambda env: -inner(env)
    if isinstance(node, BinOp):
        left = _compile(node.left)
        right = _compile(node.right)
        op = node.op
        if op == "+":
            return lambda env: left(env) + right(env)
        if op == "-":
            return lambda env: left(env) - right(env)
        if op == "*":
            return lambda env: left(env) * right(env)

        def div(env):
            with np.errstate(divide="ignore", invalid="ignore"):
                return left(env) / right(env)

        return div
    if isinstance(node, Call):
        fn = _NP_FUNCS[node.func]
        args = [_compile(a) for a in node.args]
        if len(args) == 1:
            a0 = args[0]
            return lambda env: fn(a0(env))
        a0, a1 = args
        return lambda env: fn(a0(env), a1(env))
    raise ValueError(f"cannot compile node {node!r}")


@dataclass(frozen=True)
class DriverExpr:
    """Parsed driver expression with its source text and free variables."""

    root: Expr
    source: str
    free_vars: frozenset[str]

    def evaluate(self, env: Mapping[str, float]) -> float:
        return float(_evaluate(self.root, env))

    def to_source(self) -> str:
        return _to_source(self.root)

    def compiled(self) -> Callable[[Mapping[str, Any]], Any]:
        fn = _compile(self.root)

        def call(env: Mapping[str, Any]):
            return fn(env)

        return call

    def uses(self, name: str) -> bool:
        return name in self.free_vars


_TOKEN_RE = re.compile(
    r"(?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[()+\-*/,])"
)


@dataclass(frozen=True)
class _Token:
    kind: str  # num | name | op | end
    text: str
    pos: int


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    i = 0
    n = len(text)
    while i < n:
        if text[i].isspace():
            i += 1
            continue
        m = _TOKEN_RE.match(text, i)
        if m is None:
            raise DriverParseError(f"unexpected character {text[i]!r}", i)
        kind = m.lastgroup or "op"
        tokens.append(_Token(kind=kind, text=m.group(), pos=i))
        i = m.end()
    tokens.append(_Token(kind="end", text="", pos=n))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self) -> _Token:
        return self.tokens[self.i]

    def advance(self) -> _Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op: str) -> None:
        tok = self.peek()
        if tok.kind != "op" or tok.text != op:
            raise DriverParseError(f"expected '{op}'", tok.pos)
        self.advance()

    def parse(self) -> Expr:
        node = self.expr()
        tok = self.peek()
        if tok.kind != "end":
            raise DriverParseError(f"unexpected token {tok.text!r}", tok.pos)
        return node

    def expr(self) -> Expr:
        node = self.term()
        while self.peek().kind == "op" and self.peek().text in "+-":
            op = self.advance().text
            node = BinOp(op=op, left=node, right=self.term())
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.peek().kind == "op" and self.peek().text in "*/":
            op = self.advance().text
            node = BinOp(op=op, left=node, right=self.unary())
        return node

    def unary(self) -> Expr:
        tok = self.peek()
        if tok.kind == "op" and tok.text == "-":
            self.advance()
            return Neg(operand=self.unary())
        return self.atom()

    def atom(self) -> Expr:
        tok = self.advance()
        if tok.kind == "num":
            return Num(value=float(tok.text))
        if tok.kind == "name":
            if self.peek().kind == "op" and self.peek().text == "(":
                if tok.text not in FUNCTIONS:
                    raise DriverParseError(f"unknown function '{tok.text}'", tok.pos)
                self.advance()
                args = [self.expr()]
                while self.peek().kind == "op" and self.peek().text == ",":
                    self.advance()
                    args.append(self.expr())
                self.expect_op(")")
                arity = FUNCTIONS[tok.text]
                if len(args) != arity:
                    raise DriverParseError(
                        f"function '{tok.text}' takes {arity} argument(s), got {len(args)}",
                        tok.pos,
                    )
                return Call(func=tok.text, args=tuple(args))
            if tok.text not in VARIABLES:
                raise DriverParseError(f"unknown variable '{tok.text}'", tok.pos)
            return Var(name=tok.text)
        if tok.kind == "op" and tok.text == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        if tok.kind == "end":
            raise DriverParseError("unexpected end of input", tok.pos)
        raise DriverParseError(f"unexpected token {tok.text!r}", tok.pos)


def parse_driver(text: str) -> DriverExpr:
    """Parse an expression over the fixed variable set; rejects unknown names."""
    root = _Parser(text).parse()
    return DriverExpr(root=root, source=text, free_vars=_free_vars(root))


def eval_driver(expr: DriverExpr, env: Mapping[str, float]) -> float:
    """Strict scalar evaluation; raises on unbound variables and zero division."""
    return expr.evaluate(env)


class DriverForm(str, Enum):
    """Which martingale the scenario's jump integral is written against."""

    H = "H"  # integral against dH; the solver subtracts lambda*(1-h)*u itself
    M = "M"  # integral against dM; the text already is the transformed driver


def to_M_form(f: DriverExpr, lam_k: float, h: float) -> Callable[[Mapping[str, float]], float]:
    """Evaluation rule for the dH -> dM rewrite: F(args) = f(args) - lam*(1-h)*u."""

    def rule(env: Mapping[str, float]) -> float:
        return f.evaluate(env) - lam_k * (1.0 - h) * env.get("u", 0.0)

    return rule


@dataclass(frozen=True)
class TransformedDriver:
    """A driver expression tagged with the form its jump term is written in."""

    base: DriverExpr
    form: DriverForm = DriverForm.H

    def m_form_value(self, env: Mapping[str, float], lam_t: float, h: float) -> float:
        """Value of the dM-form driver at a point."""
        v = self.base.evaluate(env)
        if self.form is DriverForm.H:
            v -= lam_t * (1.0 - h) * env.get("u", 0.0)
        return v


@dataclass(frozen=True)
class GridSpec:
    """Sampling box for finite-difference checks of driver properties.

    Each listed variable is swept over ``points`` equispaced values while the
    remaining variables take ``n_base`` randomly drawn base values (h is drawn
    from {0, 1}).  Deterministic for a fixed seed.
    """

    bounds: tuple[tuple[str, float, float], ...] = (
        ("t", 0.0, 1.0),
        ("w", -2.0, 2.0),
        ("y", -2.0, 2.0),
        ("z", -2.0, 2.0),
        ("ey", -2.0, 2.0),
        ("ez", -2.0, 2.0),
        ("u", -2.0, 2.0),
        ("tau", 0.0, 1.0),
    )
    points: int = 7
    n_base: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.points < 2 or self.n_base < 1:
            raise ValueError("grid must have at least 2 points and 1 base sample")
        for name, lo, hi in self.bounds:
            if not hi > lo:
                raise ValueError(f"degenerate grid axis for '{name}': [{lo}, {hi}]")

    def bound_for(self, name: str) -> tuple[float, float]:
        for n, lo, hi in self.bounds:
            if n == name:
                return lo, hi
        return -2.0, 2.0

    def base_envs(self, variables: Iterable[str]) -> list[dict[str, float]]:
        rng = np.random.default_rng(self.seed)
        envs = []
        for _ in range(self.n_base):
            env: dict[str, float] = {}
            for name in variables:
                if name == "h":
                    env[name] = float(rng.integers(0, 2))
                else:
                    lo, hi = self.bound_for(name)
                    env[name] = float(rng.uniform(lo, hi))
            envs.append(env)
        return envs

    def axis(self, name: str) -> np.ndarray:
        lo, hi = self.bound_for(name)
        return np.linspace(lo, hi, self.points)


def _as_lambda_of_t(lam_profile) -> Callable[[float], float]:
    if callable(lam_profile):
        return lam_profile
    value = float(lam_profile)
    return lambda t: value


@dataclass(frozen=True)
class LipschitzEstimate:
    """Grid-sampled per-slot Lipschitz constants (lower bounds of the truth).

    The u slot is reported in the intensity-weighted form, i.e. the raw
    difference ratio divided by lambda(t).
    """

    c_y: float
    c_z: float
    c_ey: float
    c_ez: float
    c_u: float
    grid: GridSpec

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (self.c_y, self.c_z, self.c_ey, self.c_ez, self.c_u)

    @property
    def overall(self) -> float:
        return max(self.as_tuple())


def estimate_lipschitz(
    expr: DriverExpr, grid: GridSpec, lam_profile: float | Callable[[float], float] = 0.0
) -> LipschitzEstimate:
    """Max finite-difference ratio per solution slot over the sampling grid."""
    lam_of_t = _as_lambda_of_t(lam_profile)
    fn = expr.compiled()
    out: dict[str, float] = {}
    others = sorted(VARIABLES)
    envs = grid.base_envs(others)
    for slot in LIPSCHITZ_SLOTS:
        if slot not in expr.free_vars:
            out[slot] = 0.0
            continue
        best = 0.0
        sweep = grid.axis(slot)
        for env in envs:
            arrs = {k: np.full(sweep.shape, v) for k, v in env.items()}
            arrs[slot] = sweep
            vals = np.asarray(fn(arrs), dtype=float)
            if not np.all(np.isfinite(vals)):
                raise DriverEvalError(
                    f"non-finite driver value while sweeping '{slot}' on the grid"
                )
            ratios = np.abs(np.diff(vals)) / np.diff(sweep)
            r = float(np.max(ratios)) if ratios.size else 0.0
            if slot == "u":
                lam = lam_of_t(env["t"])
                r = 0.0 if r == 0.0 else (math.inf if lam == 0.0 else r / lam)
            best = max(best, r)
        out[slot] = best
    return LipschitzEstimate(
        c_y=out["y"], c_z=out["z"], c_ey=out["ey"], c_ez=out["ez"], c_u=out["u"], grid=grid
    )


@dataclass(frozen=True)
class MFormLipschitz:
    """Lipschitz bound for the dM-form driver derived from the dH-form one.

    The jump-term rewrite adds at most one unit to the intensity-weighted u
    slot; the other slots carry over unchanged.
    """

    c_y: float
    c_z: float
    c_ey: float
    c_ez: float
    c_u: float

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (self.c_y, self.c_z, self.c_ey, self.c_ez, self.c_u)

    @property
    def overall(self) -> float:
        return max(self.as_tuple())


def check_M_form_lipschitz(estimate: LipschitzEstimate, lambda_max: float) -> MFormLipschitz:
    bump = 1.0 if lambda_max > 0.0 else 0.0
    return MFormLipschitz(
        c_y=estimate.c_y,
        c_z=estimate.c_z,
        c_ey=estimate.c_ey,
        c_ez=estimate.c_ez,
        c_u=estimate.c_u + bump,
    )
