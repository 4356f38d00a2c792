"""Central finite-difference verification of backward rules."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autograd import Param


@dataclass
class GradCheckEntry:
    name: str
    max_rel_err: float
    worst_index: int
    analytic: float
    numeric: float


@dataclass
class GradCheckReport:
    tol: float
    h: float
    entries: list[GradCheckEntry] = field(default_factory=list)

    @property
    def max_rel_err(self) -> float:
        return max((e.max_rel_err for e in self.entries), default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_rel_err < self.tol

    def summary(self) -> str:
        lines = [f"{'PASS' if e.max_rel_err < self.tol else 'FAIL'} "
                 f"{e.name}: max_rel_err={e.max_rel_err:.3e} "
                 f"(analytic={e.analytic:.6e}, numeric={e.numeric:.6e} at [{e.worst_index}])"
                 for e in self.entries]
        lines.append(f"overall: max_rel_err={self.max_rel_err:.3e} tol={self.tol:.1e} "
                     f"-> {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines)


def _rel_err(a: float, b: float) -> float:
    return abs(a - b) / max(1e-8, abs(a) + abs(b))


def finite_diff_check(f, params: list[Param], h: float = 1e-6, tol: float = 1e-5) -> GradCheckReport:
    """Compare analytic gradients of scalar ``f()`` against central differences.

    ``f`` is re-evaluated with each coordinate of each parameter perturbed
    by ±h; failures are recorded in the report, never raised.
    """
    for p in params:
        p.zero_grad()
    out = f()
    out.backward()
    analytic = [p.grad.copy() for p in params]

    report = GradCheckReport(tol=tol, h=h)
    for p, ana in zip(params, analytic):
        flat = p.data.reshape(-1)
        ana_flat = ana.reshape(-1)
        worst = GradCheckEntry(p.name or "param", 0.0, 0, 0.0, 0.0)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = float(f().data)
            flat[i] = orig - h
            dn = float(f().data)
            flat[i] = orig
            num = (up - dn) / (2.0 * h)
            err = _rel_err(float(ana_flat[i]), num)
            if err >= worst.max_rel_err:
                worst = GradCheckEntry(p.name or "param", err, i, float(ana_flat[i]), num)
        report.entries.append(worst)
    return report
