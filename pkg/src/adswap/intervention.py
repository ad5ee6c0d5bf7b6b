"""Swap-ad selection: the ablation that replaces a participant's ads with
their partner's observational pool.

Selection is with replacement (partner pools are routinely smaller than the
recipient's slot demand) and tiered by geometry: exact width x height match
first, then aspect ratio within 10%, then the whole pool. Every tier samples
uniformly, so exclusivity never bends for layout fit.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .model import AdRecord, Participant, Phase, StudyError


class SwapError(StudyError):
    pass


ASPECT_TOLERANCE = 0.10


@dataclass
class SwapPool:
    """Immutable snapshot of one partner's serveable observational ads."""

    owner_id: str
    ads: list[AdRecord]
    by_geometry: dict[tuple[int, int], list[str]] = field(default_factory=dict)
    _by_id: dict[str, AdRecord] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        for ad in self.ads:
            self.by_geometry.setdefault(ad.geometry, []).append(ad.id)
            self._by_id[ad.id] = ad


@dataclass
class SwapDelivery:
    swap_delivery_id: str
    recipient_id: str
    source_ad_id: str
    slot_width: int
    slot_height: int
    served_at: float
    view_count: int = 0
    click_count: int = 0


def build_swap_pool(owner: Participant, owner_ads: list[AdRecord]) -> SwapPool:
    """Partner's observational unredacted ads, id-sorted for determinism."""
    ads = sorted(
        (ad for ad in owner_ads if ad.phase is Phase.OBSERVATIONAL and not ad.redacted),
        key=lambda ad: ad.id,
    )
    return SwapPool(owner_id=owner.id, ads=ads)


def eligible_pool(
    recipient: Participant, partner: Participant, partner_ads: list[AdRecord]
) -> SwapPool:
    """Pool a recipient draws from: always the partner's, never their own."""
    if recipient.partner_id is None:
        raise SwapError(f"{recipient.id} has no swap partner")
    if partner.id != recipient.partner_id or partner.id == recipient.id:
        raise SwapError(f"{partner.id} is not {recipient.id}'s partner")
    return build_swap_pool(partner, partner_ads)


def _aspect_tier(pool: SwapPool, width: int, height: int) -> list[AdRecord]:
    if width <= 0 or height <= 0:
        return []
    slot_ratio = width / height
    out = []
    for ad in pool.ads:
        if ad.slot_width <= 0 or ad.slot_height <= 0:
            continue
        if abs((ad.slot_width / ad.slot_height) / slot_ratio - 1.0) <= ASPECT_TOLERANCE:
            out.append(ad)
    return out


def select_swap_ad(pool: SwapPool, slot_geometry: tuple[int, int], rng: random.Random) -> AdRecord:
    """Uniform draw from the tightest nonempty geometry tier, with replacement."""
    if not pool.ads:
        raise SwapError(f"swap pool of {pool.owner_id} is empty")
    width, height = slot_geometry
    exact_ids = pool.by_geometry.get((width, height))
    if exact_ids:
        return pool._by_id[rng.choice(exact_ids)]
    aspect = _aspect_tier(pool, width, height)
    if aspect:
        return rng.choice(aspect)
    return rng.choice(pool.ads)
