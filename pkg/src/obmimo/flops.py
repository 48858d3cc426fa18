"""Floating-point operation counters for matrix-level kernels.

Only matrix-level kernels are instrumented (multiply, factor/solve,
eigendecomposition, trace-of-ratio); scalar bookkeeping is excluded.  The
eigendecomposition constant is an order-of-magnitude convention; all
tested complexity claims are ratios between runs counted with the same
conventions.
"""

from dataclasses import dataclass, field

__all__ = ["FlopCounter", "PHASE_DESIGN", "PHASE_REDUCE", "PHASE_DETECT"]

PHASE_DESIGN = "pattern_design"
PHASE_REDUCE = "reduction_apply"
PHASE_DETECT = "detection"


@dataclass
class FlopCounter:
    """Multiplication/addition counts keyed by processing phase."""

    counts: dict = field(default_factory=dict)

    def add(self, phase: str, mults: int, adds: int) -> None:
        m, a = self.counts.get(phase, (0, 0))
        self.counts[phase] = (m + int(mults), a + int(adds))

    def add_matmul(self, phase: str, m: int, k: int, n: int) -> None:
        """(m x k) @ (k x n) dense product."""
        self.add(phase, m * k * n, m * n * max(k - 1, 0))

    def add_solve(self, phase: str, n: int, nrhs: int) -> None:
        """Hermitian factor plus triangular solves for nrhs right-hand sides."""
        factor = n**3 // 3
        subst = n * n * nrhs
        self.add(phase, factor + subst, factor + subst)

    def add_eigh(self, phase: str, n: int) -> None:
        """Full Hermitian eigendecomposition (conventional 4n^3 each)."""
        self.add(phase, 4 * n**3, 4 * n**3)

    def add_trace_ratio(self, phase: str, p: int) -> None:
        """One evaluation of Tr(B_s^-1 A_s) on a p x p selection."""
        self.add_solve(phase, p, p)
        self.add(phase, 0, max(p - 1, 0))

    def mults(self, phase: str | None = None) -> int:
        if phase is not None:
            return self.counts.get(phase, (0, 0))[0]
        return sum(m for m, _ in self.counts.values())

    def adds(self, phase: str | None = None) -> int:
        if phase is not None:
            return self.counts.get(phase, (0, 0))[1]
        return sum(a for _, a in self.counts.values())

    def total(self, phase: str | None = None) -> int:
        return self.mults(phase) + self.adds(phase)

    def merge(self, other: "FlopCounter") -> "FlopCounter":
        for phase, (m, a) in other.counts.items():
            self.add(phase, m, a)
        return self
