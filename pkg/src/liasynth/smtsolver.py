"""SMT-LIB v2 command loop over the LIA decision procedure.

Run as ``python -m liasynth.smtsolver``: reads commands from stdin, answers on
stdout, one response per command, flushed immediately — the wire protocol an
oracle client expects from any conforming solver.  Supports the incremental
subset the toolkit needs: declarations, assertions, push/pop, check-sat,
get-model/get-value, reset, echo, set-option/:timeout, set-logic, exit.
"""
from __future__ import annotations

import sys
from typing import Optional

from . import lia
from .parsing import Atom, ParseError, SExpr, parse_sort, read_all, term_from_sexpr
from .terms import BOOL, INT, Sort, Term, evaluate, print_term


def _fmt_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v) if v >= 0 else f"(- {-v})"


class Session:
    def __init__(self, out=None):
        self.out = out or sys.stdout
        self.print_success = False
        self.timeout: Optional[float] = None
        self.reset()

    def reset(self):
        # one frame per push level; frame = (declarations in order, assertions)
        self.frames: list[tuple[list, list]] = [([], [])]
        self.status: Optional[str] = None
        self.model: Optional[dict] = None

    # -- helpers

    def _env(self) -> dict[str, Sort]:
        env = {}
        for decls, _ in self.frames:
            env.update(decls)
        return env

    def _assertions(self) -> list[Term]:
        out = []
        for _, asserts in self.frames:
            out.extend(asserts)
        return out

    def _reply(self, text: str):
        self.out.write(text + "\n")
        self.out.flush()

    def _ok(self):
        if self.print_success:
            self._reply("success")

    def _error(self, msg: str):
        msg = msg.replace("\\", "\\\\").replace('"', '""')
        self._reply(f'(error "{msg}")')

    # -- command dispatch; returns False when the session should end

    def handle(self, sx: SExpr) -> bool:
        if not isinstance(sx, list) or not sx or not isinstance(sx[0], Atom):
            self._error("expected a command")
            return True
        cmd = sx[0].text
        try:
            return self._dispatch(cmd, sx)
        except ParseError as e:
            self._error(str(e))
        except Exception as e:  # never let one command kill the loop
            self._error(f"internal: {type(e).__name__}: {e}")
        return True

    def _dispatch(self, cmd: str, sx: list) -> bool:
        if cmd == "exit":
            return False
        if cmd in ("set-logic", "set-info"):
            self._ok()
        elif cmd == "set-option":
            self._set_option(sx)
        elif cmd in ("declare-const", "declare-fun"):
            self._declare(cmd, sx)
        elif cmd == "assert":
            if len(sx) != 2:
                self._error("malformed assert")
                return True
            term = term_from_sexpr(sx[1], self._env())
            if term.sort is not BOOL:
                self._error("assert needs a Bool term")
                return True
            self.frames[-1][1].append(term)
            self.status = None
            self._ok()
        elif cmd == "push":
            for _ in range(self._levels(sx)):
                self.frames.append(([], []))
            self.status = None
            self._ok()
        elif cmd == "pop":
            n = self._levels(sx)
            if n >= len(self.frames):
                self._error("pop exceeds stack depth")
                return True
            for _ in range(n):
                self.frames.pop()
            self.status = None
            self._ok()
        elif cmd == "check-sat":
            status, model = lia.decide(
                self._assertions(), self._env(), timeout=self.timeout
            )
            self.status, self.model = status, model
            self._reply(status)
        elif cmd == "get-model":
            if self.status != "sat" or self.model is None:
                self._error("model is not available")
                return True
            parts = []
            for name, sort in self._env().items():
                parts.append(
                    f"  (define-fun {name} () {sort} {_fmt_value(self.model[name])})"
                )
            self._reply("(\n" + "\n".join(parts) + "\n)")
        elif cmd == "get-value":
            self._get_value(sx)
        elif cmd == "reset":
            self.reset()
            self._ok()
        elif cmd == "reset-assertions":
            self.frames = [(self.frames[0][0], [])] + [
                (d, []) for d, _ in self.frames[1:]
            ]
            self.status = None
            self._ok()
        elif cmd == "echo":
            arg = sx[1].text if len(sx) > 1 and isinstance(sx[1], Atom) else '""'
            self._reply(arg.strip('"'))
        else:
            self._error(f"unsupported command '{cmd}'")
        return True

    def _levels(self, sx: list) -> int:
        if len(sx) == 1:
            return 1
        if isinstance(sx[1], Atom) and sx[1].text.isdigit():
            return int(sx[1].text)
        raise ParseError("push/pop takes a numeral")

    def _set_option(self, sx: list):
        if len(sx) == 3 and isinstance(sx[1], Atom) and isinstance(sx[2], Atom):
            key, val = sx[1].text, sx[2].text
            if key == ":print-success":
                self.print_success = val == "true"
                self._ok()
                return
            if key == ":timeout":
                if val.isdigit():
                    ms = int(val)
                    self.timeout = ms / 1000.0 if ms else None
                self._ok()
                return
        self._ok()  # unknown options are accepted and ignored

    def _declare(self, cmd: str, sx: list):
        if cmd == "declare-const":
            if len(sx) != 3 or not isinstance(sx[1], Atom):
                self._error("malformed declare-const")
                return
            name, sort_sx = sx[1].text, sx[2]
        else:
            if len(sx) != 4 or not isinstance(sx[1], Atom):
                self._error("malformed declare-fun")
                return
            if not (isinstance(sx[2], list) and len(sx[2]) == 0):
                self._error("only zero-ary declare-fun is supported")
                return
            name, sort_sx = sx[1].text, sx[3]
        if name in self._env():
            self._error(f"'{name}' already declared")
            return
        self.frames[-1][0].append((name, parse_sort(sort_sx)))
        self.status = None
        self._ok()

    def _get_value(self, sx: list):
        if self.status != "sat" or self.model is None:
            self._error("model is not available")
            return
        if len(sx) != 2 or not isinstance(sx[1], list):
            self._error("malformed get-value")
            return
        pairs = []
        for item in sx[1]:
            term = term_from_sexpr(item, self._env())
            val = evaluate(term, self.model)
            pairs.append(f"({print_term(term)} {_fmt_value(val)})")
        self._reply("(" + " ".join(pairs) + ")")


def _complete_commands(buf: str) -> tuple[list[str], str]:
    """Split buf into balanced top-level command strings plus the remainder."""
    cmds = []
    depth = 0
    start = 0
    i, n = 0, len(buf)
    in_string = in_pipe = in_comment = False
    while i < n:
        ch = buf[i]
        if in_comment:
            if ch == "\n":
                in_comment = False
        elif in_string:
            if ch == '"':
                if i + 1 < n and buf[i + 1] == '"':
                    i += 1
                else:
                    in_string = False
        elif in_pipe:
            if ch == "|":
                in_pipe = False
        elif ch == ";":
            in_comment = True
        elif ch == '"':
            in_string = True
        elif ch == "|":
            in_pipe = True
        elif ch == "(":
            if depth == 0:
                start = i
            depth += 1
        elif ch == ")":
            depth -= 1
            if depth == 0:
                cmds.append(buf[start : i + 1])
                start = i + 1
        i += 1
    return cmds, buf[start:] if depth > 0 else ""


def main(argv=None) -> int:
    argv = argv if argv is not None else sys.argv[1:]
    session = Session()
    if argv:
        with open(argv[0]) as f:
            text = f.read()
        for sx in read_all(text):
            if not session.handle(sx):
                return 0
        return 0
    buf = ""
    for line in sys.stdin:
        buf += line
        cmds, buf = _complete_commands(buf)
        for chunk in cmds:
            try:
                parsed = read_all(chunk)
            except ParseError as e:
                session._error(str(e))
                continue
            for sx in parsed:
                if not session.handle(sx):
                    return 0
    return 0


if __name__ == "__main__":
    sys.exit(main())
