"""Lattice expression trees over evaluation generators.

An expression denotes a positively homogeneous function on the dual space
E*, built from the generators ``delta_x : x* -> x*(x)`` with the lattice
and linear operations and with l_r-sum calculus nodes

    powsum(r; t_1, ..., t_m) = (sum_i |t_i|^r)^(1/r)     (max for r = inf).

Evaluation is pointwise on functionals.  The lattice-linear fragment (no
``PowSum`` nodes) admits a canonical form

    (max_j sum_i a_ji delta_{x_i}) - (max_j sum_i b_ji delta_{x_i}),

represented by two coefficient matrices over the generator list.

A small text grammar is provided for embedding expressions in job files:
identifiers are generator names, ``\\/`` and ``/\\`` (or the unicode
symbols) are sup and inf, ``abs(e)``, ``powsum(r; e1, ..., em)``, scalar
multiplication by decimal literals, ``+``, ``-`` and parentheses.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np


class ExprError(ValueError):
    pass


class ExprParseError(ExprError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class UnboundIdentifierError(ExprParseError):
    def __init__(self, name: str, position: int):
        super().__init__(f"unbound identifier {name!r}", position)
        self.name = name


class PowSumNotLatticeLinearError(ExprError):
    pass


class CalculusDomainError(ExprError):
    pass


# ---------------------------------------------------------------------------
# nodes


class LatticeExpr:
    __slots__ = ()

    def __eq__(self, other):
        if type(self) is not type(other):
            return NotImplemented
        return all(_field_eq(getattr(self, s), getattr(other, s))
                   for s in self.__slots__)

    def __hash__(self):
        return hash(repr(self))


def _field_eq(a, b) -> bool:
    if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
        return np.array_equal(a, b)
    return a == b


class Gen(LatticeExpr):
    """The evaluation generator x* -> <x, x*>."""

    __slots__ = ("x",)

    def __init__(self, x):
        arr = np.asarray(x, dtype=float).copy()
        arr.setflags(write=False)
        self.x = arr

    def __repr__(self):
        return f"Gen({self.x.tolist()})"


class Scale(LatticeExpr):
    __slots__ = ("alpha", "child")

    def __init__(self, alpha: float, child: LatticeExpr):
        self.alpha = float(alpha)
        self.child = child

    def __repr__(self):
        return f"Scale({self.alpha}, {self.child!r})"


class Add(LatticeExpr):
    __slots__ = ("left", "right")

    def __init__(self, left, right):
        self.left, self.right = left, right

    def __repr__(self):
        return f"Add({self.left!r}, {self.right!r})"


class Sup(LatticeExpr):
    __slots__ = ("left", "right")

    def __init__(self, left, right):
        self.left, self.right = left, right

    def __repr__(self):
        return f"Sup({self.left!r}, {self.right!r})"


class Inf(LatticeExpr):
    __slots__ = ("left", "right")

    def __init__(self, left, right):
        self.left, self.right = left, right

    def __repr__(self):
        return f"Inf({self.left!r}, {self.right!r})"


class Abs(LatticeExpr):
    __slots__ = ("child",)

    def __init__(self, child):
        self.child = child

    def __repr__(self):
        return f"Abs({self.child!r})"


class PowSum(LatticeExpr):
    __slots__ = ("r", "children")

    def __init__(self, r: float, children):
        children = tuple(children)
        if not children:
            raise CalculusDomainError("powsum needs at least one child")
        if not (float(r) >= 1.0):
            raise CalculusDomainError(
                "powsum exponents below 1 are outside the monotone family")
        self.r = float(r)
        self.children = children

    def __repr__(self):
        return f"PowSum({self.r}, {list(self.children)!r})"


def apply_calculus(r: float, exprs) -> PowSum:
    """The l_r-sum calculus node over ``exprs`` (pointwise semantics)."""
    return PowSum(r, exprs)


def zero_expression(dim: int) -> Gen:
    return Gen(np.zeros(dim))


# ---------------------------------------------------------------------------
# evaluation


def powsum_reduce(r: float, stacked: np.ndarray) -> np.ndarray:
    """Reduce (sum_i |t_i|^r)^(1/r) along axis 0; max of |t_i| for r = inf.

    This is the single combiner used both by pointwise evaluation and by
    componentwise application after a lattice homomorphism, so the two
    routes agree bit for bit.
    """
    mags = np.abs(stacked)
    if math.isinf(r):
        return np.max(mags, axis=0)
    if r == 1:
        return np.sum(mags, axis=0)
    return np.sum(mags**r, axis=0) ** (1.0 / r)


def _eval(e: LatticeExpr, xs: np.ndarray):
    if isinstance(e, Gen):
        return xs @ e.x
    if isinstance(e, Scale):
        return e.alpha * _eval(e.child, xs)
    if isinstance(e, Add):
        return _eval(e.left, xs) + _eval(e.right, xs)
    if isinstance(e, Sup):
        return np.maximum(_eval(e.left, xs), _eval(e.right, xs))
    if isinstance(e, Inf):
        return np.minimum(_eval(e.left, xs), _eval(e.right, xs))
    if isinstance(e, Abs):
        return np.abs(_eval(e.child, xs))
    if isinstance(e, PowSum):
        return powsum_reduce(e.r, np.stack([_eval(c, xs) for c in e.children]))
    raise ExprError(f"unknown node {type(e).__name__}")


def evaluate(e: LatticeExpr, xstar) -> float | np.ndarray:
    """Pointwise value of the expression at a functional, or at each row
    of a batch of functionals."""
    xs = np.asarray(xstar, dtype=float)
    out = _eval(e, xs)
    return float(out) if xs.ndim == 1 else out


def eval_with_grad(e: LatticeExpr, xstar: np.ndarray):
    """Value and a subgradient with respect to the functional coordinates."""
    xs = np.asarray(xstar, dtype=float)
    if isinstance(e, Gen):
        return float(xs @ e.x), e.x.copy()
    if isinstance(e, Scale):
        v, g = eval_with_grad(e.child, xs)
        return e.alpha * v, e.alpha * g
    if isinstance(e, Add):
        v1, g1 = eval_with_grad(e.left, xs)
        v2, g2 = eval_with_grad(e.right, xs)
        return v1 + v2, g1 + g2
    if isinstance(e, (Sup, Inf)):
        v1, g1 = eval_with_grad(e.left, xs)
        v2, g2 = eval_with_grad(e.right, xs)
        if isinstance(e, Sup):
            return (v1, g1) if v1 >= v2 else (v2, g2)
        return (v1, g1) if v1 <= v2 else (v2, g2)
    if isinstance(e, Abs):
        v, g = eval_with_grad(e.child, xs)
        return abs(v), np.sign(v) * g
    if isinstance(e, PowSum):
        pairs = [eval_with_grad(c, xs) for c in e.children]
        vals = np.array([p[0] for p in pairs])
        if math.isinf(e.r):
            k = int(np.argmax(np.abs(vals)))
            return abs(vals[k]), np.sign(vals[k]) * pairs[k][1]
        mags = np.abs(vals)
        total = float(np.sum(mags**e.r))
        value = total ** (1.0 / e.r)
        if total <= 0.0:
            return 0.0, np.zeros_like(xs)
        grad = np.zeros_like(xs)
        for (v, g), m in zip(pairs, mags):
            if m > 0.0:
                grad += (m ** (e.r - 1.0)) * np.sign(v) * g
        return value, grad * value ** (1.0 - e.r)
    raise ExprError(f"unknown node {type(e).__name__}")


def collect_generators(e: LatticeExpr) -> list[np.ndarray]:
    """Unique Gen vectors in first-visit order."""
    out: list[np.ndarray] = []

    def visit(node):
        if isinstance(node, Gen):
            if not any(np.array_equal(node.x, seen) for seen in out):
                out.append(node.x)
        elif isinstance(node, Scale):
            visit(node.child)
        elif isinstance(node, (Add, Sup, Inf)):
            visit(node.left)
            visit(node.right)
        elif isinstance(node, Abs):
            visit(node.child)
        elif isinstance(node, PowSum):
            for c in node.children:
                visit(c)

    visit(e)
    return out


def expression_dim(e: LatticeExpr) -> int:
    gens = collect_generators(e)
    if not gens:
        raise ExprError("expression has no generators")
    return len(gens[0])


def is_lattice_linear(e: LatticeExpr) -> bool:
    if isinstance(e, PowSum):
        return False
    if isinstance(e, Scale):
        return is_lattice_linear(e.child)
    if isinstance(e, Abs):
        return is_lattice_linear(e.child)
    if isinstance(e, (Add, Sup, Inf)):
        return is_lattice_linear(e.left) and is_lattice_linear(e.right)
    return True


# ---------------------------------------------------------------------------
# canonical form for the lattice-linear fragment


@dataclass(frozen=True)
class CanonicalForm:
    """(max over rows of plus) - (max over rows of minus), rows being
    coefficient vectors over ``generators``."""

    generators: np.ndarray  # (m, d)
    plus: np.ndarray        # (J, m)
    minus: np.ndarray       # (K, m)

    def evaluate(self, xstar) -> float | np.ndarray:
        xs = np.asarray(xstar, dtype=float)
        t = xs @ self.generators.T
        pos = np.max(t @ self.plus.T, axis=-1)
        neg = np.max(t @ self.minus.T, axis=-1)
        out = pos - neg
        return float(out) if xs.ndim == 1 else out


def canonical_form(e: LatticeExpr) -> CanonicalForm:
    """Distribute linear operations over sups and infs.

    Uses a /\\ b = (a + b) - (a \\/ b) and, at the top of a plain
    generator row, |a| = a \\/ (-a); a general |e| is rewritten through
    e \\/ (-e).  Only exact duplicate rows are pruned.
    """
    gens = collect_generators(e)
    if not gens:
        raise ExprError("expression has no generators")

    def gen_index(x: np.ndarray) -> int:
        for i, g in enumerate(gens):
            if np.array_equal(g, x):
                return i
        raise AssertionError("generator not collected")

    m = len(gens)

    def walk(node) -> tuple[np.ndarray, np.ndarray]:
        if isinstance(node, Gen):
            row = np.zeros((1, m))
            row[0, gen_index(node.x)] = 1.0
            return row, np.zeros((1, m))
        if isinstance(node, Scale):
            p, q = walk(node.child)
            if node.alpha >= 0:
                return node.alpha * p, node.alpha * q
            return (-node.alpha) * q, (-node.alpha) * p
        if isinstance(node, Add):
            p1, q1 = walk(node.left)
            p2, q2 = walk(node.right)
            return _cross_sum(p1, p2), _cross_sum(q1, q2)
        if isinstance(node, Sup):
            p1, q1 = walk(node.left)
            p2, q2 = walk(node.right)
            plus = np.vstack([_cross_sum(p1, q2), _cross_sum(p2, q1)])
            return plus, _cross_sum(q1, q2)
        if isinstance(node, Inf):
            p1, q1 = walk(node.left)
            p2, q2 = walk(node.right)
            minus = np.vstack([_cross_sum(p1, q2), _cross_sum(p2, q1)])
            return _cross_sum(p1, p2), minus
        if isinstance(node, Abs):
            p, q = walk(node.child)
            if p.shape[0] == 1 and q.shape[0] == 1 and not np.any(q):
                return np.vstack([p, -p]), np.zeros((1, m))
            return walk(Sup(node.child, Scale(-1.0, node.child)))
        if isinstance(node, PowSum):
            raise PowSumNotLatticeLinearError(
                "canonical forms exist only for the lattice-linear fragment")
        raise ExprError(f"unknown node {type(node).__name__}")

    plus, minus = walk(e)
    return CanonicalForm(generators=np.array(gens),
                         plus=_dedupe(plus), minus=_dedupe(minus))


def _cross_sum(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return (a[:, None, :] + b[None, :, :]).reshape(-1, a.shape[1])


def _dedupe(rows: np.ndarray) -> np.ndarray:
    kept: list[np.ndarray] = []
    for row in rows:
        if not any(np.array_equal(row, k) for k in kept):
            kept.append(row)
    return np.array(kept)


# ---------------------------------------------------------------------------
# parser


_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<number>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_]\w*)
  | (?P<sup>\\/|∨)
  | (?P<inf>/\\|∧)
  | (?P<op>[+\-*();,])
""", re.VERBOSE)

_RESERVED = {"abs", "powsum", "inf"}


def _tokenize(text: str):
    tokens = []
    pos = 0
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        if match is None:
            raise ExprParseError(f"unexpected character {text[pos]!r}", pos)
        kind = match.lastgroup
        if kind != "ws":
            tokens.append((kind, match.group(), pos))
        pos = match.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, generators):
        self.tokens = _tokenize(text)
        self.idx = 0
        self.generators = {name: np.asarray(v, dtype=float)
                           for name, v in dict(generators).items()}

    def peek(self):
        return self.tokens[self.idx]

    def advance(self):
        tok = self.tokens[self.idx]
        self.idx += 1
        return tok

    def expect(self, value: str):
        kind, text, pos = self.peek()
        if text != value:
            raise ExprParseError(f"expected {value!r}, found {text or 'end of input'!r}", pos)
        return self.advance()

    def parse(self) -> LatticeExpr:
        expr = self.sup_expr()
        kind, text, pos = self.peek()
        if kind != "end":
            raise ExprParseError(f"unexpected trailing {text!r}", pos)
        return expr

    def sup_expr(self):
        node = self.inf_expr()
        while self.peek()[0] == "sup":
            self.advance()
            node = Sup(node, self.inf_expr())
        return node

    def inf_expr(self):
        node = self.add_expr()
        while self.peek()[0] == "inf":
            self.advance()
            node = Inf(node, self.add_expr())
        return node

    def add_expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.advance()[1]
            rhs = self.term()
            node = Add(node, rhs if op == "+" else _negate(rhs))
        return node

    def term(self):
        kind, text, pos = self.peek()
        if kind == "number":
            self.advance()
            if self.peek()[1] != "*":
                raise ExprParseError(
                    "a bare scalar is not an expression; write c*e", pos)
            self.advance()
            return Scale(float(text), self.term())
        if text == "-":
            self.advance()
            return _negate(self.term())
        return self.atom()

    def atom(self):
        kind, text, pos = self.peek()
        if text == "(":
            self.advance()
            node = self.sup_expr()
            self.expect(")")
            return node
        if kind == "name":
            self.advance()
            if text == "abs":
                self.expect("(")
                node = Abs(self.sup_expr())
                self.expect(")")
                return node
            if text == "powsum":
                return self.powsum(pos)
            if text in _RESERVED:
                raise ExprParseError(f"{text!r} cannot be used here", pos)
            if text not in self.generators:
                raise UnboundIdentifierError(text, pos)
            return Gen(self.generators[text])
        if text == "*":
            raise ExprParseError("scalar multiplier must be a decimal literal", pos)
        raise ExprParseError(f"unexpected {text or 'end of input'!r}", pos)

    def powsum(self, start: int):
        self.expect("(")
        kind, text, pos = self.peek()
        if kind == "number":
            r = float(text)
        elif text == "inf":
            r = math.inf
        else:
            raise ExprParseError("powsum exponent must be a decimal literal or inf", pos)
        self.advance()
        self.expect(";")
        children = [self.sup_expr()]
        while self.peek()[1] == ",":
            self.advance()
            children.append(self.sup_expr())
        self.expect(")")
        try:
            return PowSum(r, children)
        except CalculusDomainError as err:
            raise ExprParseError(str(err), start) from err


def _negate(node: LatticeExpr) -> LatticeExpr:
    if isinstance(node, Scale):
        return Scale(-node.alpha, node.child)
    return Scale(-1.0, node)


def parse_expr(text: str, generators) -> LatticeExpr:
    """Parse the expression grammar against a named generator table."""
    return _Parser(text, generators).parse()


# ---------------------------------------------------------------------------
# random expressions for experiments and fuzzing


def random_lattice_linear(dim: int, rng: np.random.Generator, *,
                          n_generators: int = 3, depth: int = 2,
                          scale: float = 1.0) -> LatticeExpr:
    """A random expression in the lattice-linear fragment."""
    gens = [Gen(rng.normal(scale=scale, size=dim)) for _ in range(n_generators)]

    def build(level: int) -> LatticeExpr:
        if level <= 0 or rng.random() < 0.25:
            return gens[int(rng.integers(len(gens)))]
        op = rng.integers(5)
        if op == 0:
            return Add(build(level - 1), build(level - 1))
        if op == 1:
            return Sup(build(level - 1), build(level - 1))
        if op == 2:
            return Inf(build(level - 1), build(level - 1))
        if op == 3:
            return Abs(build(level - 1))
        return Scale(float(rng.uniform(-2.0, 2.0)), build(level - 1))

    return build(depth)


def random_expression(dim: int, rng: np.random.Generator, *,
                      n_generators: int = 3, depth: int = 2,
                      powsum_prob: float = 0.3) -> LatticeExpr:
    """A random expression that may include l_r-sum calculus nodes."""
    base = random_lattice_linear(dim, rng, n_generators=n_generators, depth=depth)
    if rng.random() < powsum_prob:
        other = random_lattice_linear(dim, rng, n_generators=n_generators,
                                      depth=max(1, depth - 1))
        r = float(rng.choice([1.0, 1.5, 2.0, 3.0, math.inf]))
        return PowSum(r, [base, other])
    return base


def nonzero_on_probes(e: LatticeExpr, probes: np.ndarray, tol: float = 1e-12) -> bool:
    return bool(np.any(np.abs(evaluate(e, probes)) > tol))
