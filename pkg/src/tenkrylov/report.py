"""Run reports shared by every subspace builder."""

import time
from dataclasses import asdict, dataclass, field


@dataclass
class StepRecord:
    step: int
    mode: int
    rank: int
    err_estimate: float
    nrm: float
    ranks: tuple
    tenvecs: int
    ms: float
    true_error: float = None


@dataclass
class Termination:
    """Why a mode stopped growing: ``converged``, ``breakdown`` or ``max_rank``."""

    reason: str
    step: int = None

    def __str__(self):
        if self.reason == "breakdown":
            return f"breakdown(step={self.step})"
        return self.reason


@dataclass
class RunReport:
    algorithm: str
    estimator: str = ""
    steps: list = field(default_factory=list)
    ranks: tuple = ()
    tenvec_count: int = 0
    core_tenvecs: int = 0
    wall_time_ms: float = 0.0
    termination: dict = field(default_factory=dict)
    breakdowns: list = field(default_factory=list)
    retries: int = 0
    _t0: float = field(default_factory=time.perf_counter, repr=False, compare=False)

    def elapsed_ms(self):
        return 1e3 * (time.perf_counter() - self._t0)

    def record(self, mode, rank, err, nrm, ranks, tenvecs):
        self.steps.append(
            StepRecord(
                step=len(self.steps) + 1,
                mode=mode,
                rank=rank,
                err_estimate=float(err),
                nrm=float(nrm),
                ranks=tuple(ranks),
                tenvecs=tenvecs,
                ms=self.elapsed_ms(),
            )
        )

    def breakdown(self, mode, step):
        self.breakdowns.append((mode, step))

    def finish(self, ranks, tenvec_count):
        self.ranks = tuple(ranks)
        self.tenvec_count = tenvec_count
        self.wall_time_ms = self.elapsed_ms()
        return self

    @property
    def outcome(self):
        """Overall termination: breakdown beats max_rank beats converged."""
        reasons = {t.reason for t in self.termination.values()}
        for r in ("breakdown", "max_rank"):
            if r in reasons:
                return r
        return "converged"

    def to_dict(self):
        d = asdict(self)
        d.pop("_t0")
        d["termination"] = {str(m): str(t) for m, t in self.termination.items()}
        d["outcome"] = self.outcome
        return d
