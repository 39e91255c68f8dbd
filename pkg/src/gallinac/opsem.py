"""Small-step operational semantics: a continuation-stack machine.

The focus is either a command still to run or a value just produced; the
continuation is a stack of frames saying what to do with that value.  Leaf
commands reuse the primitive actions of the denotational semantics, so the
two interpreters differ only in how control is organised.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from . import ast as A
from .denote import ATOMIC, NON_BOOL_COND, _atomic, cond_value, enter_call
from .state import BOTTOM, UNIT, Approx, Bool, Done, Failed, Fault, State, Store

# -- continuation frames -----------------------------------------------------


@dataclass(frozen=True)
class BindK:
    name: str
    rest: A.Cmd


@dataclass(frozen=True)
class EnvRestoreK:
    env: dict


@dataclass(frozen=True)
class SeqK:
    rest: A.Cmd


@dataclass(frozen=True)
class WhileCondK:
    loop: A.CWhile


@dataclass(frozen=True)
class WhileBodyK:
    loop: A.CWhile


@dataclass(frozen=True)
class VarInitK:
    name: str
    body: A.Cmd


@dataclass(frozen=True)
class VarPopK:
    pass


@dataclass(frozen=True)
class CallRetK:
    env: dict
    store: Store


@dataclass(frozen=True)
class MachineConfig:
    focus: object            # a command, or a Value once one is produced
    kont: tuple = ()
    state: State = State()


@dataclass(frozen=True)
class Terminal:
    outcome: Approx          # Done or Failed, never BOTTOM


def _is_cmd(x) -> bool:
    return isinstance(x, (A.CRet, A.CBind, A.CSeq, A.CCall, A.CIf, A.CWhile, A.CVar,
                          A.CReadVar, A.CWriteVar, A.CAlloc, A.CReadPtr, A.CWritePtr,
                          A.CFree, A.CFail, A.CLoop))


def initial(c, s: State) -> MachineConfig:
    return MachineConfig(c, (), s)


def step(cfg: MachineConfig, prog: A.Program) -> MachineConfig | Terminal:
    try:
        return _step(cfg, prog)
    except Fault as exc:
        return Terminal(Failed(str(exc)))


def _step(cfg: MachineConfig, prog: A.Program):
    c, k, s = cfg.focus, cfg.kont, cfg.state
    if _is_cmd(c):
        if isinstance(c, ATOMIC):
            v, s2 = _atomic(c, s)
            return MachineConfig(v, k, s2)
        if isinstance(c, A.CBind):
            return MachineConfig(c.first, k + (BindK(c.name, c.rest),), s)
        if isinstance(c, A.CSeq):
            return MachineConfig(c.first, k + (SeqK(c.rest),), s)
        if isinstance(c, A.CIf):
            return MachineConfig(c.then if cond_value(c.cond, s) else c.orelse, k, s)
        if isinstance(c, A.CWhile):
            return MachineConfig(c.cond, k + (WhileCondK(c),), s)
        if isinstance(c, A.CVar):
            return MachineConfig(c.init, k + (VarInitK(c.name, c.body),), s)
        if isinstance(c, A.CCall):
            f, callee = enter_call(prog, c, s)
            return MachineConfig(f.body, k + (CallRetK(s.env, s.store),), callee)
        if isinstance(c, A.CFail):
            return Terminal(Failed("fail"))
        if isinstance(c, A.CLoop):
            return cfg
        raise TypeError(c)

    v = c
    if not k:
        return Terminal(Done(v, s))
    top, rest = k[-1], k[:-1]
    if isinstance(top, BindK):
        return MachineConfig(top.rest, rest + (EnvRestoreK(s.env),), s.bind(top.name, v))
    if isinstance(top, EnvRestoreK):
        return MachineConfig(v, rest, s.with_env(top.env))
    if isinstance(top, SeqK):
        return MachineConfig(top.rest, rest, s)
    if isinstance(top, WhileCondK):
        if not isinstance(v, Bool):
            return Terminal(Failed(NON_BOOL_COND))
        if v.b:
            return MachineConfig(top.loop.body, rest + (WhileBodyK(top.loop),), s)
        return MachineConfig(UNIT, rest, s)
    if isinstance(top, WhileBodyK):
        return MachineConfig(top.loop, rest, s)
    if isinstance(top, VarInitK):
        return MachineConfig(top.body, rest + (VarPopK(),), s.with_store(s.store.push(top.name, v)))
    if isinstance(top, VarPopK):
        return MachineConfig(v, rest, s.with_store(s.store.pop()))
    if isinstance(top, CallRetK):
        return MachineConfig(v, rest, State(top.store, s.heap, top.env))
    raise TypeError(top)


def trace_line(cfg: MachineConfig) -> str:
    """Head constructor of the focus and continuation depth."""
    head = type(cfg.focus).__name__ if _is_cmd(cfg.focus) else f"value {cfg.focus}"
    return f"{head} {len(cfg.kont)}"


def run_steps(c, prog: A.Program | None, s: State, max_steps: int,
              trace: Callable[[str], None] | None = None) -> Approx:
    return run_steps_counted(c, prog, s, max_steps, trace)[0]


def run_steps_counted(c, prog, s, max_steps, trace=None) -> tuple[Approx, int]:
    """Like :func:`run_steps` but also returns the number of steps taken."""
    prog = prog or A.Program()
    cfg = initial(c, s)
    for n in range(max_steps):
        if trace is not None:
            trace(trace_line(cfg))
        nxt = step(cfg, prog)
        if isinstance(nxt, Terminal):
            return nxt.outcome, n + 1
        cfg = nxt
    return BOTTOM, max_steps
