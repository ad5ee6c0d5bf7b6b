"""Injected time source.

All study timing goes through a Clock so the simulation harness can compress
two study weeks into seconds. Timestamps are UTC epoch seconds (float);
``iso()`` renders the wire format.
"""

from __future__ import annotations

import time
from datetime import datetime, timezone

DAY_SECONDS = 86400.0


def to_iso(ts: float) -> str:
    return datetime.fromtimestamp(ts, tz=timezone.utc).isoformat().replace("+00:00", "Z")


def from_iso(text: str) -> float:
    return datetime.fromisoformat(text.replace("Z", "+00:00")).timestamp()


class Clock:
    """Real wall clock."""

    def now(self) -> float:
        return time.time()

    def iso(self) -> str:
        return to_iso(self.now())


class SimClock(Clock):
    """Manually advanced clock for simulated runs.

    ``advance`` only moves forward; backwards jumps would violate the
    monotonicity that phase bookkeeping relies on.
    """

    def __init__(self, start: float = 1_700_000_000.0):
        self._now = float(start)

    def now(self) -> float:
        return self._now

    def advance(self, seconds: float) -> float:
        if seconds < 0:
            raise ValueError("SimClock cannot move backwards")
        self._now += seconds
        return self._now
