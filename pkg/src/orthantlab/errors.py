"""Structured error taxonomy so downstream scripts can branch on error kinds."""


class OrthantLabError(Exception):
    """Base class for all package-specific errors."""

    kind = "error"


class ConfigError(OrthantLabError):
    """Invalid experiment configuration. Carries the full list of problems."""

    kind = "config"

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class EnumerationTooLarge(OrthantLabError):
    """Exact enumeration was requested for a window above the site-count cap."""

    kind = "enumeration-too-large"

    def __init__(self, site_count, cap):
        self.site_count = site_count
        self.cap = cap
        super().__init__(
            f"window has {site_count} sites, exact enumeration capped at {cap}"
        )


class BracketFailure(OrthantLabError):
    """Bisection cannot start: the statistic does not straddle the threshold."""

    kind = "bracket-failure"

    def __init__(self, stat_lo, stat_hi, threshold):
        self.stat_lo = stat_lo
        self.stat_hi = stat_hi
        self.threshold = threshold
        super().__init__(
            f"statistic endpoints {stat_lo}, {stat_hi} do not bracket {threshold}"
        )


class RoundCapExceeded(OrthantLabError):
    """Exploration tree exceeded its round cap without resolving the event."""

    kind = "round-cap-exceeded"

    def __init__(self, rounds, cap):
        self.rounds = rounds
        self.cap = cap
        super().__init__(f"exploration reached round {rounds} with cap {cap}")


class InsufficientData(OrthantLabError):
    """Not enough usable levels to perform a fit."""

    kind = "insufficient-data"


class TruncationDominated(OrthantLabError):
    """Too many window-truncated samples for the estimate to be meaningful."""

    kind = "truncation-dominated"

    def __init__(self, none_fraction, limit):
        self.none_fraction = none_fraction
        self.limit = limit
        super().__init__(
            f"{none_fraction:.1%} of samples were window-truncated (limit {limit:.1%})"
        )
