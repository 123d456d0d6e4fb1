"""Lexer, error-recovering parser, subtree fingerprints, and def-use dataflow
for the C++ subset found in SPoC-style programs.

The parser is total: every input yields a tree. Unparseable token runs become
ErrorNode leaves and parsing resynchronizes at the next ``;`` or ``}``, which
matters because model-generated code is frequently malformed.
"""

from __future__ import annotations

import hashlib
from collections import Counter
from dataclasses import dataclass, field

from .tokenizer import OPERATOR_TOKENS

CPP_KEYWORDS = frozenset(
    {
        "auto", "bool", "break", "case", "char", "const", "continue", "default",
        "delete", "do", "double", "else", "false", "float", "for", "if", "include",
        "int", "long", "namespace", "new", "return", "short", "signed", "sizeof",
        "string", "struct", "switch", "true", "unsigned", "using", "void", "while",
    }
)

_TYPE_KEYWORDS = frozenset(
    {"int", "float", "double", "char", "bool", "void", "long", "short", "signed", "unsigned", "auto", "string"}
)

_OPERATOR_CHARS = set("+-*/%<>=!&|^~")

KIND_KEYWORD = "keyword"
KIND_IDENT = "identifier"
KIND_NUMBER = "number"
KIND_STRING = "string"
KIND_OPERATOR = "operator"
KIND_PUNCT = "punctuation"


@dataclass(frozen=True)
class CppToken:
    text: str
    kind: str
    line: int
    column: int

    @property
    def position(self) -> tuple[int, int]:
        return (self.line, self.column)


def lex_cpp(code: str) -> list[CppToken]:
    """Tokenize C++ source with longest-match operators; comments are dropped,
    unknown characters become punctuation tokens."""
    tokens: list[CppToken] = []
    i = 0
    line = 1
    col = 1
    n = len(code)

    def advance(count: int) -> None:
        nonlocal i, line, col
        for _ in range(count):
            if code[i] == "\n":
                line += 1
                col = 1
            else:
                col += 1
            i += 1

    while i < n:
        ch = code[i]
        if ch in " \t\r\n":
            advance(1)
            continue
        if code.startswith("//", i):
            while i < n and code[i] != "\n":
                advance(1)
            continue
        if code.startswith("/*", i):
            advance(2)
            while i < n and not code.startswith("*/", i):
                advance(1)
            advance(min(2, n - i))
            continue
        start_line, start_col = line, col
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (code[j].isalnum() or code[j] == "_"):
                j += 1
            text = code[i:j]
            kind = KIND_KEYWORD if text in CPP_KEYWORDS else KIND_IDENT
            tokens.append(CppToken(text, kind, start_line, start_col))
            advance(j - i)
            continue
        if ch.isdigit():
            j = i
            while j < n and (code[j].isalnum() or code[j] == "." and j + 1 < n and code[j + 1].isdigit()):
                j += 1
            tokens.append(CppToken(code[i:j], KIND_NUMBER, start_line, start_col))
            advance(j - i)
            continue
        if ch in "\"'":
            quote = ch
            j = i + 1
            while j < n and code[j] != quote:
                j += 2 if code[j] == "\\" and j + 1 < n else 1
            j = min(j + 1, n)
            tokens.append(CppToken(code[i:j], KIND_STRING, start_line, start_col))
            advance(j - i)
            continue
        matched = None
        for op in OPERATOR_TOKENS:
            if code.startswith(op, i):
                matched = op
                break
        if matched is None:
            matched = ch
        kind = KIND_OPERATOR if matched[0] in _OPERATOR_CHARS else KIND_PUNCT
        tokens.append(CppToken(matched, kind, start_line, start_col))
        advance(len(matched))
    return tokens


# --- Syntax tree ---------------------------------------------------------


@dataclass
class AstNode:
    """Tree node. ``label`` carries structural detail (operator symbol, type
    name, literal category) and participates in fingerprints; ``name`` holds
    identifier spellings and never does."""

    kind: str
    children: list["AstNode"] = field(default_factory=list)
    span: tuple[int, int] = (0, 0)  # [start, end) token indices
    label: str = ""
    name: str = ""

    def walk(self):
        yield self
        for child in self.children:
            yield from child.walk()

    def count(self, kind: str) -> int:
        return sum(1 for node in self.walk() if node.kind == kind)

    def to_dict(self) -> dict:
        out: dict = {"kind": self.kind, "span": list(self.span)}
        if self.label:
            out["label"] = self.label
        if self.name:
            out["name"] = self.name
        if self.children:
            out["children"] = [c.to_dict() for c in self.children]
        return out


class _ParseFailure(Exception):
    def __init__(self, message: str, at: int):
        super().__init__(message)
        self.at = at


_ASSIGN_OPS = {"=", "+=", "-=", "*=", "/=", "%="}
_BINARY_LEVELS = (
    {"||"},
    {"&&"},
    {"==", "!="},
    {"<", ">", "<=", ">="},
    {"+", "-"},
    {"*", "/", "%"},
)


class _Parser:
    def __init__(self, tokens: list[CppToken]):
        self.toks = tokens
        self.i = 0
        self.diagnostics: list[str] = []

    # -- token helpers --
    def eof(self) -> bool:
        return self.i >= len(self.toks)

    def peek(self, offset: int = 0) -> CppToken | None:
        j = self.i + offset
        return self.toks[j] if j < len(self.toks) else None

    def at(self, text: str, offset: int = 0) -> bool:
        tok = self.peek(offset)
        return tok is not None and tok.text == text

    def take(self) -> CppToken:
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def expect(self, text: str, context: str) -> None:
        if not self.accept(text):
            tok = self.peek()
            found = tok.text if tok else "end of input"
            raise _ParseFailure(f"expected '{text}' in {context}, found '{found}'", self.i)

    def _diag(self, message: str, at: int) -> None:
        if at < len(self.toks):
            tok = self.toks[at]
            self.diagnostics.append(f"line {tok.line}: {message}")
        else:
            self.diagnostics.append(f"end of input: {message}")

    def _error_node(self, start: int, message: str) -> AstNode:
        # Skip to just past the next ';' or up to (not past) the next '}' so
        # the enclosing block can resume.
        self._diag(message, self.i)
        depth = 0
        while not self.eof():
            text = self.toks[self.i].text
            if text == "{":
                depth += 1
            elif text == "}" and depth == 0:
                break
            elif text == "}":
                depth -= 1
            self.i += 1
            if text == ";" and depth == 0:
                break
        end = max(self.i, start + 1)
        return AstNode("ErrorNode", span=(start, end))

    # -- grammar --
    def parse_translation_unit(self) -> AstNode:
        items: list[AstNode] = []
        while not self.eof():
            start = self.i
            try:
                items.append(self.top_item())
            except _ParseFailure as err:
                self.i = max(self.i, start)
                if self.i == start and self.at("}"):
                    self.i += 1  # stray closing brace: consume it alone
                    self._diag("stray '}' at top level", start)
                    items.append(AstNode("ErrorNode", span=(start, self.i)))
                else:
                    items.append(self._error_node(start, str(err)))
            if self.i == start:  # guarantee progress
                self.i += 1
        return AstNode("TranslationUnit", items, span=(0, len(self.toks)))

    def top_item(self) -> AstNode:
        if self.at("#"):
            return self.include_line()
        if self.at("using"):
            return self.using_directive()
        if self._starts_type() and self._looks_like_function():
            return self.function_def()
        return self.statement()

    def include_line(self) -> AstNode:
        start = self.i
        hash_line = self.toks[self.i].line
        self.take()  # '#'
        pieces = []
        while not self.eof() and self.toks[self.i].line == hash_line:
            pieces.append(self.take().text)
        return AstNode("Include", span=(start, self.i), label="".join(pieces))

    def using_directive(self) -> AstNode:
        start = self.i
        self.expect("using", "using-directive")
        self.expect("namespace", "using-directive")
        tok = self.peek()
        if tok is None or tok.kind not in (KIND_IDENT, KIND_KEYWORD):
            raise _ParseFailure("expected namespace name", self.i)
        name = self.take().text
        self.expect(";", "using-directive")
        return AstNode("Using", span=(start, self.i), label=name)

    def _starts_type(self) -> bool:
        tok = self.peek()
        return tok is not None and (tok.text in _TYPE_KEYWORDS or tok.text == "const")

    def _looks_like_function(self) -> bool:
        j = self.i
        while j < len(self.toks) and self.toks[j].text in _TYPE_KEYWORDS | {"const"}:
            j += 1
        if j < len(self.toks) and self.toks[j].kind == KIND_IDENT:
            return j + 1 < len(self.toks) and self.toks[j + 1].text == "("
        return False

    def _type_name(self) -> str:
        words = [self.take().text]
        while not self.eof() and self.toks[self.i].text in _TYPE_KEYWORDS:
            words.append(self.take().text)
        return " ".join(words)

    def function_def(self) -> AstNode:
        start = self.i
        type_name = self._type_name()
        name_tok = self.take()
        self.expect("(", "function definition")
        params: list[AstNode] = []
        while not self.eof() and not self.at(")"):
            p_start = self.i
            p_type = self._type_name() if self._starts_type() else ""
            p_name = self.take().text if not self.eof() and self.peek().kind == KIND_IDENT else ""
            while not self.eof() and not self.at(",") and not self.at(")"):
                self.take()
            params.append(AstNode("Param", span=(p_start, self.i), label=p_type, name=p_name))
            if not self.accept(","):
                break
        self.expect(")", "function definition")
        body = self.block() if self.at("{") else self._error_node(self.i, "expected function body")
        return AstNode(
            "FunctionDef", params + [body], span=(start, self.i), label=type_name, name=name_tok.text
        )

    def block(self) -> AstNode:
        start = self.i
        self.expect("{", "block")
        stmts: list[AstNode] = []
        while not self.eof() and not self.at("}"):
            stmt_start = self.i
            try:
                stmts.append(self.statement())
            except _ParseFailure as err:
                self.i = max(self.i, stmt_start)
                stmts.append(self._error_node(stmt_start, str(err)))
            if self.i == stmt_start:
                self.i += 1
        if not self.accept("}"):
            self._diag("unterminated block", self.i)
        return AstNode("Block", stmts, span=(start, self.i))

    def statement(self) -> AstNode:
        if self.at("{"):
            return self.block()
        if self.at("if"):
            return self.if_statement()
        if self.at("for"):
            return self.for_statement()
        if self.at("while"):
            return self.while_statement()
        if self.at("return"):
            return self.return_statement()
        if self.at("break") or self.at("continue"):
            start = self.i
            kind = "Break" if self.take().text == "break" else "Continue"
            self.expect(";", "jump statement")
            return AstNode(kind, span=(start, self.i))
        if self.at(";"):
            start = self.i
            self.take()
            return AstNode("Empty", span=(start, self.i))
        if self._starts_type():
            start = self.i
            decl = self.declaration()
            self.expect(";", "declaration")
            decl.span = (start, self.i)
            return decl
        return self.expression_statement()

    def if_statement(self) -> AstNode:
        start = self.i
        self.expect("if", "if statement")
        self.expect("(", "if statement")
        cond = self.expression()
        self.expect(")", "if statement")
        then_branch = self.statement()
        children = [cond, then_branch]
        if self.accept("else"):
            children.append(self.statement())
        return AstNode("If", children, span=(start, self.i))

    def while_statement(self) -> AstNode:
        start = self.i
        self.expect("while", "while statement")
        self.expect("(", "while statement")
        cond = self.expression()
        self.expect(")", "while statement")
        body = self.statement()
        return AstNode("While", [cond, body], span=(start, self.i))

    def _for_header_part(self, terminator: str, context: str) -> AstNode:
        """Parse one for-header field, recovering inside the parentheses so a
        malformed field never takes the whole loop down."""
        start = self.i
        if self.at(terminator):
            return AstNode("Empty", span=(start, start))
        try:
            if terminator == ";" and self._starts_type():
                node = self.declaration()
            else:
                node = self.expression()
            if not (self.at(";") or self.at(")")):
                raise _ParseFailure(f"expected '{terminator}' in {context}", self.i)
            return node
        except _ParseFailure as err:
            self._diag(str(err), self.i)
            depth = 0
            while not self.eof():
                text = self.toks[self.i].text
                if text == "(":
                    depth += 1
                elif text in (";", ")") and depth == 0 or text == "{":
                    break
                elif text == ")":
                    depth -= 1
                self.i += 1
            # span covers only consumed tokens (may be empty) so sibling
            # spans stay disjoint
            return AstNode("ErrorNode", span=(start, self.i))

    def for_statement(self) -> AstNode:
        start = self.i
        self.expect("for", "for statement")
        self.expect("(", "for statement")
        init = self._for_header_part(";", "for initializer")
        self.accept(";")
        cond = self._for_header_part(";", "for condition")
        self.accept(";")
        step = self._for_header_part(")", "for step")
        if not self.accept(")"):
            self._diag("unclosed for header", self.i)
        body = self.statement()
        return AstNode("For", [init, cond, step, body], span=(start, self.i))

    def return_statement(self) -> AstNode:
        start = self.i
        self.expect("return", "return statement")
        children = [] if self.at(";") else [self.expression()]
        self.expect(";", "return statement")
        return AstNode("Return", children, span=(start, self.i))

    def declaration(self) -> AstNode:
        """Type plus one or more declarators, e.g. ``int a, b = 1, arr[] = {...}``.
        The trailing ';' belongs to the caller."""
        start = self.i
        type_name = self._type_name()
        declarators: list[AstNode] = []
        while True:
            d_start = self.i
            tok = self.peek()
            if tok is None or tok.kind != KIND_IDENT:
                raise _ParseFailure("expected identifier in declaration", self.i)
            name = self.take().text
            d_children: list[AstNode] = []
            if self.accept("["):
                if not self.at("]"):
                    d_children.append(AstNode("ArraySize", [self.expression()], span=(d_start, self.i)))
                self.expect("]", "array declarator")
            if self.accept("="):
                d_children.append(self.init_list() if self.at("{") else self.expression())
            declarators.append(AstNode("Declarator", d_children, span=(d_start, self.i), name=name))
            if not self.accept(","):
                break
        return AstNode("Decl", declarators, span=(start, self.i), label=type_name)

    def init_list(self) -> AstNode:
        start = self.i
        self.expect("{", "initializer list")
        items: list[AstNode] = []
        while not self.eof() and not self.at("}"):
            items.append(self.expression())
            if not self.accept(","):
                break
        self.expect("}", "initializer list")
        return AstNode("InitList", items, span=(start, self.i))

    def expression_statement(self) -> AstNode:
        start = self.i
        tok = self.peek()
        if tok is not None and tok.text == "cin" and self.at(">>", 1):
            node = self.stream_in()
        elif tok is not None and tok.text == "cout" and self.at("<<", 1):
            node = self.stream_out()
        else:
            expr = self.expression()
            node = AstNode("ExprStmt", [expr], span=(start, self.i))
        self.expect(";", "statement")
        node.span = (start, self.i)
        return node

    def stream_in(self) -> AstNode:
        start = self.i
        self.take()  # cin
        targets: list[AstNode] = []
        while self.accept(">>"):
            targets.append(self.unary())
        if not targets:
            raise _ParseFailure("expected '>>' after cin", self.i)
        return AstNode("StreamIn", targets, span=(start, self.i))

    def stream_out(self) -> AstNode:
        start = self.i
        self.take()  # cout
        sources: list[AstNode] = []
        while self.accept("<<"):
            sources.append(self.binary(0))
        if not sources:
            raise _ParseFailure("expected '<<' after cout", self.i)
        return AstNode("StreamOut", sources, span=(start, self.i))

    def expression(self) -> AstNode:
        start = self.i
        left = self.binary(0)
        tok = self.peek()
        if tok is not None and tok.text in _ASSIGN_OPS:
            op = self.take().text
            right = self.expression()  # right-associative
            return AstNode("Assign", [left, right], span=(start, self.i), label=op)
        return left

    def binary(self, level: int) -> AstNode:
        if level >= len(_BINARY_LEVELS):
            return self.unary()
        start = self.i
        node = self.binary(level + 1)
        while not self.eof() and self.toks[self.i].text in _BINARY_LEVELS[level]:
            op = self.take().text
            right = self.binary(level + 1)
            node = AstNode("BinaryOp", [node, right], span=(start, self.i), label=op)
        return node

    def unary(self) -> AstNode:
        start = self.i
        tok = self.peek()
        if tok is not None and tok.text in ("!", "-", "+", "++", "--"):
            op = self.take().text
            operand = self.unary()
            return AstNode("Unary", [operand], span=(start, self.i), label=op)
        return self.postfix()

    def postfix(self) -> AstNode:
        start = self.i
        node = self.primary()
        while not self.eof():
            if self.at("("):
                self.take()
                args: list[AstNode] = []
                while not self.eof() and not self.at(")"):
                    args.append(self.expression())
                    if not self.accept(","):
                        break
                self.expect(")", "call arguments")
                node = AstNode("Call", [node] + args, span=(start, self.i))
            elif self.at("["):
                self.take()
                index = self.expression() if not self.at("]") else AstNode("Empty", span=(self.i, self.i))
                self.expect("]", "index expression")
                node = AstNode("Index", [node, index], span=(start, self.i))
            elif self.at("++") or self.at("--"):
                op = self.take().text
                node = AstNode("Unary", [node], span=(start, self.i), label="post" + op)
            else:
                break
        return node

    def primary(self) -> AstNode:
        tok = self.peek()
        if tok is None:
            raise _ParseFailure("unexpected end of input in expression", self.i)
        start = self.i
        if self.accept("("):
            inner = self.expression()
            self.expect(")", "parenthesized expression")
            return inner
        if tok.kind == KIND_NUMBER:
            self.take()
            return AstNode("Literal", span=(start, self.i), label="number")
        if tok.kind == KIND_STRING:
            self.take()
            label = "char" if tok.text.startswith("'") else "string"
            return AstNode("Literal", span=(start, self.i), label=label)
        if tok.text in ("true", "false"):
            self.take()
            return AstNode("Literal", span=(start, self.i), label="bool")
        if tok.kind == KIND_IDENT:
            self.take()
            return AstNode("Ident", span=(start, self.i), name=tok.text)
        raise _ParseFailure(f"unexpected token '{tok.text}' in expression", self.i)


def parse_cpp_subset(tokens: list[CppToken]) -> tuple[AstNode, list[str]]:
    """Parse lexed tokens into a total syntax tree plus recovery diagnostics."""
    parser = _Parser(tokens)
    tree = parser.parse_translation_unit()
    return tree, parser.diagnostics


def parse_code(code: str) -> tuple[AstNode, list[str]]:
    return parse_cpp_subset(lex_cpp(code))


# --- Subtree fingerprints -------------------------------------------------


def _fingerprint(node: AstNode, sink: list[tuple[str, int]]) -> tuple[str, int]:
    child_fps = [_fingerprint(c, sink) for c in node.children]
    size = 1 + sum(s for _, s in child_fps)
    head = node.kind if not node.label else f"{node.kind}|{node.label}"
    canonical = head + "(" + ",".join(fp for fp, _ in child_fps) + ")"
    digest = hashlib.blake2b(canonical.encode("utf-8"), digest_size=8).hexdigest()
    sink.append((digest, size))
    return digest, size


def enumerate_subtrees(ast: AstNode, min_nodes: int = 2) -> Counter:
    """Multiset of structural fingerprints for every rooted subtree with at
    least ``min_nodes`` nodes. Identifier spellings never enter the hash;
    literals contribute their category only."""
    sink: list[tuple[str, int]] = []
    _fingerprint(ast, sink)
    return Counter(fp for fp, size in sink if size >= min_nodes)


# --- Def-use dataflow -----------------------------------------------------


@dataclass(frozen=True)
class DataflowEdge:
    variable: str  # normalized var_k
    def_span: tuple[int, int]
    use_span: tuple[int, int]
    loop_carried: bool = False


@dataclass
class DataflowGraph:
    edges: frozenset[DataflowEdge]
    normalization: dict[str, str]  # source name -> var_k
    match_keys: frozenset[tuple]

    def __len__(self) -> int:
        return len(self.edges)

    def to_dict(self) -> dict:
        return {
            "normalization": dict(sorted(self.normalization.items())),
            "edges": [
                {
                    "variable": e.variable,
                    "def_span": list(e.def_span),
                    "use_span": list(e.use_span),
                    "loop_carried": e.loop_carried,
                }
                for e in sorted(self.edges, key=lambda e: (e.variable, e.def_span, e.use_span))
            ],
        }


@dataclass(frozen=True)
class _Event:
    kind: str  # "def" | "use"
    name: str
    span: tuple[int, int]


class _DataflowExtractor:
    """Walks the tree in lexical order emitting def/use events.

    Definitions: initialized declarations, assignment targets, stream-in
    targets, increment/decrement operands. Branches are treated as sequential
    alternatives; loops additionally connect body definitions back to header
    uses with a loop-carried flag.
    """

    def __init__(self) -> None:
        self.events: list[_Event] = []
        self.loop_regions: list[tuple[tuple[int, int], tuple[int, int]]] = []

    def run(self, node: AstNode) -> None:
        handler = getattr(self, "visit_" + node.kind, None)
        if handler is not None:
            handler(node)
        else:
            for child in node.children:
                self.run(child)

    # -- helpers --
    def _use(self, node: AstNode) -> None:
        if node.kind == "Ident":
            self.events.append(_Event("use", node.name, node.span))
            return
        if node.kind == "Call":
            for arg in node.children[1:]:  # callee name is not a variable read
                self.run(arg)
            return
        self.run(node)

    def _define_target(self, node: AstNode) -> None:
        """Assignment-style target: index/read parts are uses, the base
        variable becomes a definition."""
        base = node
        while base.kind in ("Index", "Unary"):
            if base.kind == "Index":
                self.run(base.children[1])
                base = base.children[0]
            else:
                base = base.children[0]
        if base.kind == "Ident":
            self.events.append(_Event("def", base.name, node.span))
        else:
            self.run(base)

    # -- node handlers --
    def visit_Ident(self, node: AstNode) -> None:
        self.events.append(_Event("use", node.name, node.span))

    def visit_Call(self, node: AstNode) -> None:
        self._use(node)

    def visit_Decl(self, node: AstNode) -> None:
        for declarator in node.children:
            sized = [c for c in declarator.children if c.kind == "ArraySize"]
            inits = [c for c in declarator.children if c.kind != "ArraySize"]
            for child in sized:
                self.run(child)
            for child in inits:
                self.run(child)
            if inits:
                self.events.append(_Event("def", declarator.name, declarator.span))

    def visit_Assign(self, node: AstNode) -> None:
        target, value = node.children
        if node.label != "=":
            self.run(target)  # compound assignment reads its target first
        self.run(value)
        self._define_target(target)

    def visit_Unary(self, node: AstNode) -> None:
        operand = node.children[0]
        if node.label in ("++", "--", "post++", "post--"):
            self.run(operand)
            self._define_target(operand)
        else:
            self.run(operand)

    def visit_StreamIn(self, node: AstNode) -> None:
        for target in node.children:
            self._define_target(target)

    def visit_For(self, node: AstNode) -> None:
        init, cond, step, body = node.children
        self.run(init)
        header_start = len(self.events)
        self.run(cond)
        self.run(step)
        header_end = len(self.events)
        self.run(body)
        # step/body definitions can feed header uses on the next iteration
        self.loop_regions.append(((header_start, header_end), (header_start, len(self.events))))

    def visit_While(self, node: AstNode) -> None:
        cond, body = node.children
        header_start = len(self.events)
        self.run(cond)
        header_end = len(self.events)
        self.run(body)
        self.loop_regions.append(((header_start, header_end), (header_start, len(self.events))))

    def visit_ErrorNode(self, node: AstNode) -> None:
        pass  # malformed runs contribute no events


def extract_dataflow(ast: AstNode) -> DataflowGraph:
    """Def-use edges with variables normalized to var_0, var_1, ... by first
    definition. Each use links to its nearest preceding definition; loop
    bodies add flagged back edges to header uses."""
    extractor = _DataflowExtractor()
    extractor.run(ast)
    events = extractor.events

    normalization: dict[str, str] = {}
    for ev in events:
        if ev.kind == "def" and ev.name not in normalization:
            normalization[ev.name] = f"var_{len(normalization)}"

    raw_edges: set[tuple[str, tuple[int, int], tuple[int, int], bool]] = set()
    last_def: dict[str, tuple[int, int]] = {}
    def_ordinal: dict[tuple[str, tuple[int, int]], int] = {}
    use_ordinal: dict[tuple[str, tuple[int, int]], int] = {}
    def_counts: Counter[str] = Counter()
    use_counts: Counter[str] = Counter()
    for ev in events:
        if ev.kind == "def":
            last_def[ev.name] = ev.span
            if (ev.name, ev.span) not in def_ordinal:
                def_ordinal[(ev.name, ev.span)] = def_counts[ev.name]
                def_counts[ev.name] += 1
        else:
            if (ev.name, ev.span) not in use_ordinal:
                use_ordinal[(ev.name, ev.span)] = use_counts[ev.name]
                use_counts[ev.name] += 1
            if ev.name in last_def:
                raw_edges.add((ev.name, last_def[ev.name], ev.span, False))

    for (h_lo, h_hi), (b_lo, b_hi) in extractor.loop_regions:
        header_uses = [e for e in events[h_lo:h_hi] if e.kind == "use"]
        loop_defs = [e for e in events[b_lo:b_hi] if e.kind == "def"]
        for d in loop_defs:
            for u in header_uses:
                if u.name == d.name and u.span < d.span:
                    raw_edges.add((d.name, d.span, u.span, True))

    edges = set()
    keys = set()
    for name, def_span, use_span, carried in raw_edges:
        var = normalization[name]
        edges.add(DataflowEdge(var, def_span, use_span, carried))
        keys.add((var, def_ordinal[(name, def_span)], use_ordinal[(name, use_span)], carried))
    return DataflowGraph(
        edges=frozenset(edges), normalization=normalization, match_keys=frozenset(keys)
    )
