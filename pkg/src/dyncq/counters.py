"""Instrumented step counting shared by every engine.

Counters measure elementary operations under the package's cost model: hash
lookups and array accesses count as single steps (the real-world stand-in for
constant-time arrays).  Wall-clock time is never the primary quantity.
"""

from __future__ import annotations

from dataclasses import dataclass, field


class StepMeter:
    """A monotonically increasing elementary-step counter.

    Engines that cooperate inside one composite share a meter, so a caller can
    measure the full cost of a window (for example, the delay between two
    enumeration outputs) as a difference of snapshots.
    """

    __slots__ = ("steps",)

    def __init__(self) -> None:
        self.steps = 0

    def bump(self, n: int = 1) -> None:
        self.steps += n


@dataclass
class OpStats:
    calls: int = 0
    steps: int = 0
    max_steps: int = 0

    @property
    def mean_steps(self) -> float:
        return self.steps / self.calls if self.calls else 0.0


@dataclass
class EngineReport:
    """Named per-operation step counters retrievable from every engine."""

    ops: dict[str, OpStats] = field(default_factory=dict)

    def record(self, name: str, steps: int) -> None:
        st = self.ops.get(name)
        if st is None:
            st = self.ops[name] = OpStats()
        st.calls += 1
        st.steps += steps
        if steps > st.max_steps:
            st.max_steps = steps

    def stats(self, name: str) -> OpStats:
        return self.ops.get(name, OpStats())

    def merge(self, other: "EngineReport") -> None:
        for name, st in other.ops.items():
            mine = self.ops.get(name)
            if mine is None:
                self.ops[name] = OpStats(st.calls, st.steps, st.max_steps)
            else:
                mine.calls += st.calls
                mine.steps += st.steps
                mine.max_steps = max(mine.max_steps, st.max_steps)

    def lines(self) -> list[str]:
        out = []
        for name in sorted(self.ops):
            st = self.ops[name]
            out.append(f"{name}: calls={st.calls} mean_steps={st.mean_steps:.1f} "
                       f"max_steps={st.max_steps}")
        return out
