"""Date arithmetic used throughout the package.

All times are measured with the ACT/365-fixed convention: the year fraction
between two calendar dates is the actual day count divided by 365.  This
makes year fractions exactly additive along a date chain, which the panel
machinery relies on.
"""

from __future__ import annotations

import calendar
import datetime as dt

from .errors import OrderingError

DAYS_PER_YEAR = 365.0


def year_fraction(start: dt.date, end: dt.date) -> float:
    """ACT/365-fixed year fraction between two dates.

    Raises OrderingError if ``end`` precedes ``start``.
    """
    days = (end - start).days
    if days < 0:
        raise OrderingError(f"end date {end} precedes start date {start}")
    return days / DAYS_PER_YEAR


def add_months(d: dt.date, months: int) -> dt.date:
    """Shift a date by a number of calendar months, clamping the day of
    month to the target month's length (Jan 31 + 1m -> Feb 28/29)."""
    month_index = d.month - 1 + months
    year = d.year + month_index // 12
    month = month_index % 12 + 1
    day = min(d.day, calendar.monthrange(year, month)[1])
    return dt.date(year, month, day)


def parse_date(text: str) -> dt.date:
    """Parse an ISO ``YYYY-MM-DD`` date string."""
    return dt.date.fromisoformat(text.strip())
