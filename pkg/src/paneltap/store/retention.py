"""Retention policy: purge raw captures once their anchor plus horizon has
passed. The default anchors on the project's last publication date (a rolling
administrative input); capture_date anchoring is offered for stricter
deployments."""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date

from ..errors import ValidationError

ANCHORS = ("last_publication_date", "capture_date")


@dataclass(frozen=True)
class RetentionPolicy:
    horizon_years: int = 5
    anchor: str = "last_publication_date"
    anchor_date: date | None = None
    policy_version: str = "1"

    def validate(self) -> None:
        if self.horizon_years < 1:
            raise ValidationError("retention horizon must be at least one year")
        if self.anchor not in ANCHORS:
            raise ValidationError(f"unknown retention anchor {self.anchor!r}")
        if self.anchor == "last_publication_date" and self.anchor_date is None:
            raise ValidationError("last_publication_date anchoring needs an anchor_date")


def add_years(day: date, years: int) -> date:
    try:
        return day.replace(year=day.year + years)
    except ValueError:  # Feb 29 anchor in a non-leap target year
        return day.replace(year=day.year + years, day=28)


def purge_due(policy: RetentionPolicy, record_date: date, now: date) -> bool:
    """True when the record's anchor date + horizon lies strictly before now."""
    anchor = policy.anchor_date if policy.anchor == "last_publication_date" else record_date
    return now > add_years(anchor, policy.horizon_years)
