"""
모델 수식 파서 모듈

R 스타일 수식(y ~ a * b + I(x^2) + (time | ID))을 AST로 파싱하고,
설계 행렬 생성에 쓰이는 정규화된 항(Term) 목록으로 전개합니다.
"""

from dataclasses import dataclass
from typing import Callable, Dict, List, Mapping, Optional, Set, Tuple, Union

import numpy as np

from src.errors import ConfigError, FormulaSyntaxError


# ===== 지원 함수 =====

FUNCTIONS: Dict[str, Callable] = {
    "log": np.log,
    "exp": np.exp,
    "sqrt": np.sqrt,
    "abs": np.abs,
    "sin": np.sin,
    "cos": np.cos,
}

SPECIAL_FUNCTIONS = ("I", "Surv")


def register_function(name: str, fn: Callable):
    """
    사용자 함수 등록

    Args:
        name: 수식에서 사용할 함수 이름
        fn: numpy 배열을 받아 같은 길이의 배열을 돌려주는 함수
            (병렬 체인에서 쓰려면 모듈 최상위 함수여야 함)
    """
    if not name.isidentifier() or name in SPECIAL_FUNCTIONS:
        raise ConfigError(f"등록할 수 없는 함수 이름: '{name}'")
    FUNCTIONS[name] = fn


def is_known_function(name: str) -> bool:
    return name in FUNCTIONS or name in SPECIAL_FUNCTIONS


# ===== AST 노드 =====

@dataclass(frozen=True)
class Variable:
    name: str


@dataclass(frozen=True)
class Literal:
    value: float


@dataclass(frozen=True)
class StringLit:
    value: str


@dataclass(frozen=True)
class Func:
    """함수 호출 항 (log(x), sqrt(x + 1) 등)"""
    name: str
    args: tuple


@dataclass(frozen=True)
class ArithOp:
    """I() 내부 / 함수 인자 내부의 산술 연산 (+ - * / ^ 비교)"""
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Negate:
    operand: object


@dataclass(frozen=True)
class Arith:
    """I(...)로 보호된 산술식"""
    expr: object


@dataclass(frozen=True)
class Interaction:
    """a:b:c"""
    factors: tuple


@dataclass(frozen=True)
class Product:
    """a * b"""
    left: object
    right: object


@dataclass(frozen=True)
class Power:
    """(a + b)^k"""
    base: object
    exponent: float


@dataclass(frozen=True)
class SumExpr:
    """부호가 붙은 항들의 합: ((sign, expr), ...)"""
    parts: tuple


TermExpr = Union[Variable, Literal, Func, Arith, Interaction, Product, Power, SumExpr]


@dataclass(frozen=True)
class ResponseSpec:
    """반응변수: 일반 변수 또는 생존 쌍 (시간 변수, 사건 식)"""
    kind: str                      # "variable" | "survival"
    name: Optional[str] = None
    time: Optional[str] = None
    event: object = None

    def variables(self) -> Set[str]:
        if self.kind == "variable":
            return {self.name}
        return {self.time} | _arith_dependencies(self.event)


@dataclass(frozen=True)
class RandomPart:
    """(terms | group) 랜덤효과 부분"""
    terms: object
    group: str
    intercept: bool = True


@dataclass(frozen=True)
class FormulaAst:
    response: Optional[ResponseSpec]
    fixed: object
    random_parts: tuple = ()
    intercept: bool = True


# ===== 토크나이저 =====

@dataclass(frozen=True)
class Token:
    kind: str       # IDENT NUMBER STRING OP EOF
    value: str
    offset: int


_OPERATORS = ("==", "!=", "<=", ">=", "~", "+", "-", "*", "/", "^", ":", "(", ")",
              "|", ",", "<", ">", "=")


def _tokenize(text: str) -> List[Token]:
    tokens = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch.isdigit() or (ch == "." and i + 1 < n and text[i + 1].isdigit()):
            j = i
            while j < n and (text[j].isdigit() or text[j] == "."):
                j += 1
            if j < n and text[j] in "eE":
                k = j + 1
                if k < n and text[k] in "+-":
                    k += 1
                if k < n and text[k].isdigit():
                    j = k
                    while j < n and text[j].isdigit():
                        j += 1
            literal = text[i:j]
            try:
                float(literal)
            except ValueError:
                raise FormulaSyntaxError(f"잘못된 숫자 '{literal}'", text, _byte_offset(text, i))
            tokens.append(Token("NUMBER", literal, i))
            i = j
            continue
        if ch.isalpha() or ch in "._":
            j = i
            while j < n and (text[j].isalnum() or text[j] in "._"):
                j += 1
            tokens.append(Token("IDENT", text[i:j], i))
            i = j
            continue
        if ch == "`":
            j = text.find("`", i + 1)
            if j < 0:
                raise FormulaSyntaxError("닫히지 않은 역따옴표", text, _byte_offset(text, i))
            tokens.append(Token("IDENT", text[i + 1:j], i))
            i = j + 1
            continue
        if ch in "\"'":
            j = i + 1
            buf = []
            while j < n and text[j] != ch:
                if text[j] == "\\" and j + 1 < n:
                    j += 1
                buf.append(text[j])
                j += 1
            if j >= n:
                raise FormulaSyntaxError("닫히지 않은 문자열", text, _byte_offset(text, i))
            tokens.append(Token("STRING", "".join(buf), i))
            i = j + 1
            continue
        if text.startswith("%in%", i):
            raise FormulaSyntaxError("'%in%' 연산자는 지원하지 않습니다", text, _byte_offset(text, i))
        for op in _OPERATORS:
            if text.startswith(op, i):
                tokens.append(Token("OP", op, i))
                i += len(op)
                break
        else:
            raise FormulaSyntaxError(f"알 수 없는 문자 '{ch}'", text, _byte_offset(text, i))
    tokens.append(Token("EOF", "", n))
    return tokens


def _byte_offset(text: str, char_index: int) -> int:
    return len(text[:char_index].encode("utf-8"))


# ===== 파서 =====

class _Parser:
    """재귀 하강 파서"""

    def __init__(self, text: str, strict: bool = True):
        self.text = text
        self.strict = strict
        self.tokens = _tokenize(text)
        self.pos = 0

    # --- 토큰 유틸 ---
    def peek(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def at_op(self, *ops) -> bool:
        tok = self.peek()
        return tok.kind == "OP" and tok.value in ops

    def expect_op(self, op: str) -> Token:
        tok = self.peek()
        if not (tok.kind == "OP" and tok.value == op):
            self.error(f"'{op}'이(가) 필요합니다", tok)
        return self.advance()

    def error(self, message: str, tok: Optional[Token] = None):
        tok = tok or self.peek()
        found = tok.value if tok.kind != "EOF" else "수식 끝"
        raise FormulaSyntaxError(f"{message} (발견: '{found}')", self.text,
                                 _byte_offset(self.text, tok.offset))

    # --- 수식 ---
    def parse_formula(self, one_sided: bool) -> FormulaAst:
        response = None
        if self.at_op("~"):
            if not one_sided:
                self.error("양변 수식이 필요합니다 (y ~ x)")
            self.advance()
        else:
            response = self.parse_response()
            self.expect_op("~")

        rhs = self.parse_sum(top_level=True)
        if self.at_op("|"):
            self.error("'|'는 괄호 안에서만 사용할 수 있습니다 ((terms | group))")
        if self.peek().kind != "EOF":
            self.error("예상하지 못한 토큰")

        fixed, random_parts = _split_random(rhs)
        return FormulaAst(response=response, fixed=fixed,
                          random_parts=tuple(random_parts),
                          intercept=_has_intercept(fixed))

    def parse_response(self) -> ResponseSpec:
        tok = self.peek()
        if tok.kind != "IDENT":
            self.error("반응변수 이름이 필요합니다")
        self.advance()
        if tok.value == "Surv" and self.at_op("("):
            self.advance()
            time_node = self.parse_arith()
            if not isinstance(time_node, Variable):
                self.error("Surv()의 첫 번째 인자는 변수여야 합니다")
            self.expect_op(",")
            event = self.parse_arith()
            self.expect_op(")")
            return ResponseSpec(kind="survival", time=time_node.name, event=event)
        if self.at_op("("):
            self.error("반응변수에는 Surv() 외의 함수를 쓸 수 없습니다")
        return ResponseSpec(kind="variable", name=tok.value)

    def parse_sum(self, top_level: bool = False):
        parts = []
        sign = "+"
        if self.at_op("+", "-"):
            sign = self.advance().value
        parts.append((sign, self.parse_product(top_level)))
        while self.at_op("+", "-"):
            sign = self.advance().value
            parts.append((sign, self.parse_product(top_level)))
        if len(parts) == 1 and parts[0][0] == "+":
            return parts[0][1]
        return SumExpr(tuple(parts))

    def parse_product(self, top_level: bool):
        left = self.parse_interaction(top_level)
        while self.at_op("*", "/"):
            tok = self.advance()
            if tok.value == "/":
                self.error("중첩 연산자 '/'는 지원하지 않습니다", tok)
            right = self.parse_interaction(False)
            _reject_random(left, self, tok)
            _reject_random(right, self, tok)
            left = Product(left, right)
        return left

    def parse_interaction(self, top_level: bool):
        factors = [self.parse_power(top_level)]
        while self.at_op(":"):
            tok = self.advance()
            factors.append(self.parse_power(False))
            for f in factors:
                _reject_random(f, self, tok)
        if len(factors) == 1:
            return factors[0]
        return Interaction(tuple(factors))

    def parse_power(self, top_level: bool):
        base = self.parse_atom(top_level)
        if self.at_op("^"):
            tok = self.advance()
            _reject_random(base, self, tok)
            negative = False
            if self.at_op("-"):
                self.advance()
                negative = True
            num = self.peek()
            if num.kind != "NUMBER":
                self.error("'^' 뒤에는 숫자가 필요합니다")
            self.advance()
            value = float(num.value)
            return Power(base, -value if negative else value)
        return base

    def parse_atom(self, top_level: bool):
        tok = self.peek()
        if tok.kind == "NUMBER":
            self.advance()
            return Literal(float(tok.value))
        if tok.kind == "IDENT":
            self.advance()
            if self.at_op("("):
                return self.parse_call(tok)
            return Variable(tok.value)
        if tok.kind == "OP" and tok.value == "(":
            self.advance()
            inner = self.parse_sum()
            if self.at_op("|"):
                bar = self.advance()
                if not top_level:
                    self.error("랜덤효과 (terms | group)는 최상위 항이어야 합니다", bar)
                group = self.peek()
                if group.kind != "IDENT":
                    self.error("그룹 변수 이름이 필요합니다")
                self.advance()
                if self.at_op("/", ":"):
                    self.error("중첩 랜덤효과는 지원하지 않습니다 ((1|a) + (1|b) 형식을 사용하세요)")
                self.expect_op(")")
                return RandomPart(terms=inner, group=group.value, intercept=_has_intercept(inner))
            self.expect_op(")")
            return inner
        self.error("항이 필요합니다")

    def parse_call(self, name_tok: Token):
        name = name_tok.value
        if self.strict and not is_known_function(name):
            self.error(f"지원하지 않는 함수 '{name}'", name_tok)
        if name == "Surv":
            self.error("Surv()는 반응변수에서만 사용할 수 있습니다", name_tok)
        self.expect_op("(")
        args = []
        if not self.at_op(")"):
            args.append(self.parse_arith())
            while self.at_op(","):
                self.advance()
                args.append(self.parse_arith())
        self.expect_op(")")
        if name == "I":
            if len(args) != 1:
                self.error("I()는 인자를 하나만 받습니다", name_tok)
            return Arith(args[0])
        return Func(name, tuple(args))

    # --- 산술식 (I() 내부, 함수 인자) ---
    def parse_arith(self):
        left = self.parse_arith_add()
        if self.at_op("==", "!=", "<", ">", "<=", ">="):
            op = self.advance().value
            right = self.parse_arith_add()
            return ArithOp(op, left, right)
        if self.at_op("="):
            self.error("이름 있는 인자는 지원하지 않습니다")
        return left

    def parse_arith_add(self):
        left = self.parse_arith_mul()
        while self.at_op("+", "-"):
            op = self.advance().value
            left = ArithOp(op, left, self.parse_arith_mul())
        return left

    def parse_arith_mul(self):
        left = self.parse_arith_unary()
        while self.at_op("*", "/"):
            op = self.advance().value
            left = ArithOp(op, left, self.parse_arith_unary())
        return left

    def parse_arith_unary(self):
        if self.at_op("-"):
            self.advance()
            return Negate(self.parse_arith_unary())
        if self.at_op("+"):
            self.advance()
            return self.parse_arith_unary()
        return self.parse_arith_pow()

    def parse_arith_pow(self):
        base = self.parse_arith_atom()
        if self.at_op("^"):
            self.advance()
            return ArithOp("^", base, self.parse_arith_unary())
        return base

    def parse_arith_atom(self):
        tok = self.peek()
        if tok.kind == "NUMBER":
            self.advance()
            return Literal(float(tok.value))
        if tok.kind == "STRING":
            self.advance()
            return StringLit(tok.value)
        if tok.kind == "IDENT":
            self.advance()
            if self.at_op("("):
                node = self.parse_call(tok)
                return node
            return Variable(tok.value)
        if self.at_op("("):
            self.advance()
            inner = self.parse_arith()
            self.expect_op(")")
            return inner
        self.error("산술식이 필요합니다")


def _reject_random(node, parser: _Parser, tok: Token):
    if isinstance(node, RandomPart):
        parser.error("랜덤효과 (terms | group)는 최상위 항이어야 합니다", tok)


def _split_random(rhs) -> Tuple[object, List[RandomPart]]:
    parts = rhs.parts if isinstance(rhs, SumExpr) else (("+", rhs),)
    fixed_parts = []
    random_parts = []
    for sign, node in parts:
        if isinstance(node, RandomPart):
            if sign == "-":
                raise ConfigError("랜덤효과 항은 뺄 수 없습니다")
            random_parts.append(node)
        else:
            fixed_parts.append((sign, node))
    if not fixed_parts:
        fixed = Literal(1.0)
    elif len(fixed_parts) == 1 and fixed_parts[0][0] == "+":
        fixed = fixed_parts[0][1]
    else:
        fixed = SumExpr(tuple(fixed_parts))
    return fixed, random_parts


def _has_intercept(node) -> bool:
    """최상위 0 / -1 표기 확인"""
    parts = node.parts if isinstance(node, SumExpr) else (("+", node),)
    intercept = True
    for sign, part in parts:
        if isinstance(part, Literal):
            if part.value == 0 and sign == "+":
                intercept = False
            elif part.value == 1:
                intercept = sign == "+"
    return intercept


def parse_formula(text: str, one_sided: bool = False, strict: bool = True) -> FormulaAst:
    """
    수식 문자열을 AST로 파싱

    Args:
        text: "y ~ a + b" 형식의 수식 (one_sided면 "~ a + b" 허용)
        one_sided: 한쪽 수식 허용 여부 (auxvars 등)
        strict: True면 등록되지 않은 함수 이름을 오류로 처리

    Returns:
        FormulaAst

    Raises:
        FormulaSyntaxError: 구문 오류 (바이트 오프셋 포함)
    """
    if not text or not text.strip():
        raise FormulaSyntaxError("빈 수식", text, 0)
    return _Parser(text, strict=strict).parse_formula(one_sided)


def parse_random(text: str) -> List[RandomPart]:
    """
    lme 스타일 랜덤효과 수식 파싱 ("~ time | ID")

    Returns:
        RandomPart 리스트
    """
    body = text.strip().lstrip("~").strip()
    if not body.startswith("("):
        body = f"({body})"
    ast = parse_formula("~ " + body, one_sided=True)
    if not ast.random_parts:
        raise FormulaSyntaxError("랜덤효과 수식에는 '|'가 필요합니다", text, 0)
    return list(ast.random_parts)


# ===== 렌더링 =====

_ARITH_PREC = {"==": 1, "!=": 1, "<": 1, ">": 1, "<=": 1, ">=": 1,
               "+": 2, "-": 2, "*": 3, "/": 3, "neg": 4, "^": 5}


def _fmt_number(value: float) -> str:
    if float(value).is_integer() and abs(value) < 1e15:
        return str(int(value))
    return repr(float(value))


def render_arith(node, parent_prec: int = 0) -> str:
    """산술 노드를 문자열로"""
    if isinstance(node, Variable):
        return node.name if node.name.isidentifier() or _plain_name(node.name) else f"`{node.name}`"
    if isinstance(node, Literal):
        text = _fmt_number(node.value)
        return text
    if isinstance(node, StringLit):
        escaped = node.value.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'
    if isinstance(node, Func):
        return f"{node.name}({', '.join(render_arith(a) for a in node.args)})"
    if isinstance(node, Arith):
        return f"I({render_arith(node.expr)})"
    if isinstance(node, Negate):
        prec = _ARITH_PREC["neg"]
        text = "-" + render_arith(node.operand, prec)
        return f"({text})" if prec < parent_prec else text
    if isinstance(node, ArithOp):
        prec = _ARITH_PREC[node.op]
        if node.op == "^":
            # 우결합: 왼쪽은 더 강하게 묶어야 함
            left = render_arith(node.left, prec + 1)
            right = render_arith(node.right, _ARITH_PREC["neg"])
            text = f"{left}^{right}"
        elif prec == 1:
            text = f"{render_arith(node.left, prec + 1)} {node.op} {render_arith(node.right, prec + 1)}"
        else:
            text = f"{render_arith(node.left, prec)} {node.op} {render_arith(node.right, prec + 1)}"
        return f"({text})" if prec < parent_prec else text
    raise TypeError(f"알 수 없는 노드: {node!r}")


def _plain_name(name: str) -> bool:
    return bool(name) and (name[0].isalpha() or name[0] in "._") and \
        all(c.isalnum() or c in "._" for c in name)


# 수식 연산자 우선순위: + - (1) < * (2) < : (3) < ^ (4)
def render_term(node, parent_prec: int = 0) -> str:
    """수식 항 노드를 문자열로"""
    if isinstance(node, SumExpr):
        pieces = []
        for idx, (sign, part) in enumerate(node.parts):
            text = render_term(part, 2)
            if idx == 0:
                pieces.append(text if sign == "+" else f"-{text}")
            else:
                pieces.append(f" {sign} {text}")
        text = "".join(pieces)
        return f"({text})" if parent_prec > 1 else text
    if isinstance(node, Product):
        text = f"{render_term(node.left, 2)} * {render_term(node.right, 3)}"
        return f"({text})" if parent_prec > 2 else text
    if isinstance(node, Interaction):
        text = ":".join(render_term(f, 4) for f in node.factors)
        return f"({text})" if parent_prec > 3 else text
    if isinstance(node, Power):
        return f"{render_term(node.base, 5)}^{_fmt_number(node.exponent)}"
    if isinstance(node, RandomPart):
        return f"({render_term(node.terms)} | {node.group})"
    return render_arith(node)


def render_formula(ast: FormulaAst) -> str:
    """
    AST를 다시 수식 문자열로 변환 (다시 파싱하면 같은 AST)
    """
    lhs = ""
    if ast.response is not None:
        if ast.response.kind == "survival":
            lhs = f"Surv({ast.response.time}, {render_arith(ast.response.event)})"
        else:
            lhs = render_arith(Variable(ast.response.name))
    rhs = render_term(ast.fixed)
    for part in ast.random_parts:
        rhs += f" + {render_term(part)}"
    return f"{lhs} ~ {rhs}" if lhs else f"~ {rhs}"


# ===== 항 전개 =====

@dataclass(frozen=True)
class Term:
    """정규화된 항: 인자(factor)들의 정렬된 튜플. 빈 튜플은 절편"""
    factors: tuple

    @property
    def is_intercept(self) -> bool:
        return len(self.factors) == 0

    @property
    def degree(self) -> int:
        return len(self.factors)

    @property
    def name(self) -> str:
        if self.is_intercept:
            return "(Intercept)"
        return ":".join(factor_label(f) for f in self.factors)

    def __str__(self):
        return self.name


INTERCEPT = Term(())


def factor_label(node) -> str:
    return render_arith(node)


def make_term(factors) -> Term:
    """인자 목록으로 정규 항 생성 (중복 제거 + 사전순 정렬)"""
    unique = {}
    for f in factors:
        unique.setdefault(factor_label(f), f)
    return Term(tuple(unique[k] for k in sorted(unique)))


def _merge(*lists) -> List[Term]:
    seen = {}
    for terms in lists:
        for t in terms:
            seen.setdefault(t, None)
    return list(seen)


def _cross(a: List[Term], b: List[Term]) -> List[Term]:
    return _merge([make_term(x.factors + y.factors) for x in a for y in b])


def _expand_node(node) -> List[Term]:
    if isinstance(node, (Variable, Func, Arith)):
        return [make_term((node,))]
    if isinstance(node, Literal):
        # 절편 표기는 _expand_sum에서 처리
        return []
    if isinstance(node, SumExpr):
        return _expand_sum(node)
    if isinstance(node, Product):
        left = _expand_node(node.left)
        right = _expand_node(node.right)
        return _merge(left, right, _cross(left, right))
    if isinstance(node, Interaction):
        result = [INTERCEPT]
        for f in node.factors:
            result = _cross(result, _expand_node(f))
        return [t for t in result if not t.is_intercept]
    if isinstance(node, Power):
        k = node.exponent
        if not float(k).is_integer() or k < 1:
            raise ConfigError(f"'^{_fmt_number(k)}': 지수는 1 이상의 정수여야 합니다")
        base = _expand_node(node.base)
        result = list(base)
        for _ in range(int(k) - 1):
            result = _merge(result, base, _cross(result, base))
        return result
    if isinstance(node, RandomPart):
        raise ConfigError("랜덤효과 항은 고정효과로 전개할 수 없습니다")
    raise ConfigError(f"전개할 수 없는 항: {render_term(node)}")


def _expand_sum(node: SumExpr) -> List[Term]:
    result: List[Term] = []
    for sign, part in node.parts:
        terms = _expand_node(part)
        if sign == "+":
            result = _merge(result, terms)
        else:
            removed = set(terms)
            result = [t for t in result if t not in removed]
    return result


def expand_terms(ast: Union[FormulaAst, RandomPart, object], include_intercept: bool = True) -> List[Term]:
    """
    AST를 정규 항 목록으로 전개

    a*b → {a, b, a:b}, (a+b+c)^3 → 3차까지 모든 교호작용.
    순서: 절편, 주효과(수식 순서), 교호작용(차수 오름차순).

    Args:
        ast: FormulaAst, RandomPart 또는 항 노드
        include_intercept: 절편 항 포함 여부 (수식이 절편을 제거했으면 무시)

    Returns:
        Term 리스트

    Raises:
        ConfigError: ^k의 k가 1 이상의 정수가 아닐 때
    """
    if isinstance(ast, FormulaAst):
        node, intercept = ast.fixed, ast.intercept
    elif isinstance(ast, RandomPart):
        node, intercept = ast.terms, ast.intercept
    else:
        node, intercept = ast, _has_intercept(ast)
    terms = [t for t in _expand_node(node) if not t.is_intercept]
    terms.sort(key=lambda t: t.degree)
    if intercept and include_intercept:
        terms.insert(0, INTERCEPT)
    return terms


# ===== 의존성 =====

def _arith_dependencies(node) -> Set[str]:
    if node is None:
        return set()
    if isinstance(node, Variable):
        return {node.name}
    if isinstance(node, (Literal, StringLit)):
        return set()
    if isinstance(node, Func):
        deps = set()
        for a in node.args:
            deps |= _arith_dependencies(a)
        return deps
    if isinstance(node, Arith):
        return _arith_dependencies(node.expr)
    if isinstance(node, Negate):
        return _arith_dependencies(node.operand)
    if isinstance(node, ArithOp):
        return _arith_dependencies(node.left) | _arith_dependencies(node.right)
    if isinstance(node, (Interaction,)):
        deps = set()
        for f in node.factors:
            deps |= _arith_dependencies(f)
        return deps
    if isinstance(node, Product):
        return _arith_dependencies(node.left) | _arith_dependencies(node.right)
    if isinstance(node, Power):
        return _arith_dependencies(node.base)
    if isinstance(node, SumExpr):
        deps = set()
        for _, part in node.parts:
            deps |= _arith_dependencies(part)
        return deps
    if isinstance(node, RandomPart):
        return _arith_dependencies(node.terms) | {node.group}
    return set()


def term_dependencies(term: Union[Term, object]) -> Set[str]:
    """
    항에 등장하는 모든 변수 이름 (함수/I() 내부 포함)

    Args:
        term: Term 또는 항 노드

    Returns:
        변수 이름 집합 (절편은 빈 집합)
    """
    if isinstance(term, Term):
        deps = set()
        for f in term.factors:
            deps |= _arith_dependencies(f)
        return deps
    return _arith_dependencies(term)


def formula_variables(ast: FormulaAst) -> List[str]:
    """수식 우변에 등장하는 변수 (등장 순서, 랜덤효과 포함, 그룹 제외)"""
    ordered: Dict[str, None] = {}
    for term in expand_terms(ast):
        for f in term.factors:
            for name in _ordered_dependencies(f):
                ordered.setdefault(name, None)
    for part in ast.random_parts:
        for term in expand_terms(part):
            for f in term.factors:
                for name in _ordered_dependencies(f):
                    ordered.setdefault(name, None)
    return list(ordered)


def _ordered_dependencies(node) -> List[str]:
    """출현 순서를 보존한 의존 변수"""
    if isinstance(node, Variable):
        return [node.name]
    out: List[str] = []
    children = []
    if isinstance(node, Func):
        children = list(node.args)
    elif isinstance(node, Arith):
        children = [node.expr]
    elif isinstance(node, Negate):
        children = [node.operand]
    elif isinstance(node, ArithOp):
        children = [node.left, node.right]
    for c in children:
        for name in _ordered_dependencies(c):
            if name not in out:
                out.append(name)
    return out


def is_plain_factor(node) -> bool:
    """변수 자체인 인자인지 (함수/산술식이 아닌지)"""
    return isinstance(node, Variable)


# ===== 수치 평가 =====

def evaluate_arith(node, env: Mapping[str, np.ndarray],
                   labels: Optional[Mapping[str, np.ndarray]] = None) -> np.ndarray:
    """
    산술 노드를 배정밀도로 평가

    Args:
        node: 산술/함수 노드
        env: 변수 이름 → 수치 배열
        labels: 범주형 변수 이름 → 라벨 배열 (문자열 비교에 사용)

    Returns:
        float 배열 (정의역 밖 값은 nan/inf)
    """
    with np.errstate(all="ignore"):
        return np.asarray(_eval(node, env, labels), dtype=float)


def _eval(node, env, labels):
    if isinstance(node, Variable):
        if node.name not in env:
            raise ConfigError(f"수식의 변수 '{node.name}'을(를) 데이터에서 찾을 수 없습니다")
        return np.asarray(env[node.name], dtype=float)
    if isinstance(node, Literal):
        return np.float64(node.value)
    if isinstance(node, Arith):
        return _eval(node.expr, env, labels)
    if isinstance(node, Negate):
        return -_eval(node.operand, env, labels)
    if isinstance(node, Func):
        fn = FUNCTIONS.get(node.name)
        if fn is None:
            raise ConfigError(f"지원하지 않는 함수 '{node.name}'")
        args = [_eval(a, env, labels) for a in node.args]
        return fn(*args)
    if isinstance(node, ArithOp):
        if node.op in ("==", "!=") and (isinstance(node.left, StringLit) or isinstance(node.right, StringLit)):
            return _compare_labels(node, labels)
        left = _eval(node.left, env, labels)
        right = _eval(node.right, env, labels)
        op = node.op
        if op == "+":
            return left + right
        if op == "-":
            return left - right
        if op == "*":
            return left * right
        if op == "/":
            return left / right
        if op == "^":
            return np.power(left, right)
        result = {
            "==": np.equal, "!=": np.not_equal, "<": np.less,
            ">": np.greater, "<=": np.less_equal, ">=": np.greater_equal,
        }[op](left, right).astype(float)
        missing = np.isnan(np.asarray(left + right, dtype=float))
        return np.where(missing, np.nan, result)
    if isinstance(node, StringLit):
        raise ConfigError(f"문자열 \"{node.value}\"은(는) 비교식에서만 사용할 수 있습니다")
    raise ConfigError(f"평가할 수 없는 항: {render_arith(node)}")


def _compare_labels(node: ArithOp, labels) -> np.ndarray:
    var_node, lit = (node.left, node.right) if isinstance(node.right, StringLit) else (node.right, node.left)
    if not isinstance(var_node, Variable):
        raise ConfigError("문자열 비교의 한쪽은 변수여야 합니다")
    if labels is None or var_node.name not in labels:
        raise ConfigError(f"변수 '{var_node.name}'은(는) 범주형이 아니므로 문자열과 비교할 수 없습니다")
    values = labels[var_node.name]
    missing = np.array([v is None for v in values])
    equal = np.array([v == lit.value for v in values], dtype=float)
    result = equal if node.op == "==" else 1.0 - equal
    return np.where(missing, np.nan, result)
