"""Descriptive ad metrics: view/click rates, per-participant differences,
percent-change summaries.

Rates are computed within participant first and then averaged across
participants, so heavy collectors do not dominate the cohort mean. Zero
denominators yield None ("no data"), never a silent 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional, Sequence


@dataclass
class ParticipantAdMetrics:
    participant_id: str
    delivered: int
    viewed: int
    clicked: int

    @property
    def view_rate(self) -> Optional[float]:
        return self.viewed / self.delivered if self.delivered else None

    @property
    def click_rate_among_viewed(self) -> Optional[float]:
        return self.clicked / self.viewed if self.viewed else None


@dataclass
class AdMetrics:
    per_participant: dict[str, ParticipantAdMetrics]
    mean_view_rate: Optional[float]
    mean_click_rate_among_viewed: Optional[float]
    undefined_view_rate: int
    undefined_click_rate: int

    @property
    def counts(self) -> dict[str, int]:
        return {
            "participants": len(self.per_participant),
            "delivered": sum(m.delivered for m in self.per_participant.values()),
            "viewed": sum(m.viewed for m in self.per_participant.values()),
            "clicked": sum(m.clicked for m in self.per_participant.values()),
        }


def compute_ad_metrics(rows: Sequence[Mapping]) -> AdMetrics:
    """Aggregate delivery/view/click rows into per-participant rates.

    Each row needs participant_id, view_count, click_count; a row is one
    delivered ad, viewed iff view_count > 0, clicked iff click_count > 0.
    Redacted rows must be excluded by the caller (the export already is).
    """
    acc: dict[str, ParticipantAdMetrics] = {}
    for row in rows:
        pid = str(row["participant_id"])
        m = acc.get(pid)
        if m is None:
            m = acc[pid] = ParticipantAdMetrics(pid, 0, 0, 0)
        m.delivered += 1
        viewed = int(row["view_count"]) > 0
        m.viewed += viewed
        m.clicked += viewed and int(row["click_count"]) > 0

    view_rates = [m.view_rate for m in acc.values() if m.view_rate is not None]
    click_rates = [
        m.click_rate_among_viewed for m in acc.values() if m.click_rate_among_viewed is not None
    ]
    return AdMetrics(
        per_participant=acc,
        mean_view_rate=sum(view_rates) / len(view_rates) if view_rates else None,
        mean_click_rate_among_viewed=sum(click_rates) / len(click_rates) if click_rates else None,
        undefined_view_rate=sum(1 for m in acc.values() if m.view_rate is None),
        undefined_click_rate=sum(1 for m in acc.values() if m.click_rate_among_viewed is None),
    )


@dataclass
class MetricDiff:
    participant_id: str
    metric: str
    obs_value: float
    interv_value: float

    @property
    def diff(self) -> float:
        return self.interv_value - self.obs_value


def metric_diffs(
    metric: str, obs: Mapping[str, float], interv: Mapping[str, float]
) -> list[MetricDiff]:
    """Pair per-participant values across phases; only both-present ids count."""
    out = []
    for pid in sorted(set(obs) & set(interv)):
        out.append(MetricDiff(pid, metric, float(obs[pid]), float(interv[pid])))
    return out


@dataclass
class PercentChangeResult:
    mean_percent: Optional[float]
    per_participant: dict[str, float]
    excluded_zero_obs: int


def percent_change(obs: Mapping[str, float], interv: Mapping[str, float]) -> PercentChangeResult:
    """Average per-participant percent change 100*(interv-obs)/obs.

    Participants with obs == 0 have no defined change; they are excluded
    and counted rather than folded in as 0 or infinity.
    """
    per: dict[str, float] = {}
    excluded = 0
    for pid in sorted(set(obs) & set(interv)):
        base = float(obs[pid])
        if base == 0.0:
            excluded += 1
            continue
        per[pid] = 100.0 * (float(interv[pid]) - base) / base
    mean = sum(per.values()) / len(per) if per else None
    return PercentChangeResult(mean_percent=mean, per_participant=per, excluded_zero_obs=excluded)
