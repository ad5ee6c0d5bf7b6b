"""Registrable-domain (eTLD+1) extraction against a pinned suffix snapshot.

The suffix rule file uses the public-suffix grammar: one rule per line,
`//` comments, `*` matches exactly one label, `!` marks exceptions. The
embedded snapshot ships with the package; callers may supply their own
rule file for different pins. Results feed both ad source/target
aggregation and the first-party vs third-party test in filter matching.
"""

from __future__ import annotations

import ipaddress
from functools import lru_cache
from importlib import resources


class DomainError(ValueError):
    """Raised when no registrable domain exists (e.g. a bare public suffix)."""


class SuffixRules:
    """Parsed suffix rule set answering longest-match suffix queries."""

    def __init__(self, text: str):
        # rules: label-tuple (reversed, TLD first) -> is_exception
        self.rules: dict[tuple[str, ...], bool] = {}
        self.max_labels = 1
        for raw in text.splitlines():
            line = raw.strip()
            if not line or line.startswith("//"):
                continue
            exception = line.startswith("!")
            if exception:
                line = line[1:]
            labels = tuple(reversed(line.lower().split(".")))
            self.rules[labels] = exception
            self.max_labels = max(self.max_labels, len(labels))

    def suffix_length(self, labels_rev: tuple[str, ...]) -> int:
        """Number of labels in the public suffix of a reversed label tuple.

        Standard algorithm: exceptions win and shorten by one label;
        otherwise the longest matching rule; with no match the top label
        is the suffix (the implicit `*` rule).
        """
        best = 1
        limit = min(len(labels_rev), self.max_labels)
        for n in range(1, limit + 1):
            candidate = labels_rev[:n]
            exact = self.rules.get(candidate)
            if exact is not None:
                if exact:
                    return n - 1
                best = max(best, n)
            if n >= 2:
                wild = candidate[:-1] + ("*",)
                if wild in self.rules and not self.rules[wild]:
                    best = max(best, n)
        return best


@lru_cache(maxsize=1)
def embedded_suffix_rules() -> SuffixRules:
    text = resources.files("adswap.data").joinpath("public_suffix_snapshot.dat").read_text("utf-8")
    return SuffixRules(text)


def load_suffix_rules(path) -> SuffixRules:
    with open(path, encoding="utf-8") as fh:
        return SuffixRules(fh.read())


def hostname_of(url: str) -> str:
    """Pull the hostname out of an absolute URL (no DNS, no IDNA)."""
    idx = url.find("://")
    if idx < 0:
        raise DomainError(f"not an absolute URL: {url!r}")
    rest = url[idx + 3 :]
    for stop in "/?#":
        cut = rest.find(stop)
        if cut >= 0:
            rest = rest[:cut]
    if "@" in rest:
        rest = rest.rsplit("@", 1)[1]
    if rest.startswith("["):  # bracketed IPv6 literal
        end = rest.find("]")
        if end < 0:
            raise DomainError(f"unterminated IPv6 literal in {url!r}")
        return rest[1:end].lower()
    if ":" in rest:
        rest = rest.split(":", 1)[0]
    if not rest:
        raise DomainError(f"URL has no hostname: {url!r}")
    return rest.lower().rstrip(".")


def _is_ip(host: str) -> bool:
    try:
        ipaddress.ip_address(host)
        return True
    except ValueError:
        return False


def registrable_domain(url: str, suffix_rules: SuffixRules | None = None) -> str:
    """Return the eTLD+1 for a URL's host.

    IP literals and single-label hosts come back verbatim; a host that IS
    a public suffix has no registrable domain and raises DomainError.
    """
    rules = suffix_rules or embedded_suffix_rules()
    return registrable_domain_of_host(hostname_of(url), rules)


def registrable_domain_of_host(host: str, rules: SuffixRules) -> str:
    """Same as registrable_domain but for an already-extracted hostname."""
    if _is_ip(host):
        return host
    labels = host.split(".")
    if len(labels) == 1:
        # Unlisted single labels (localhost, intranet names) pass through;
        # a label that is itself a listed suffix has no registrable domain.
        if rules.rules.get((host,)) is False:
            raise DomainError(f"host {host!r} is a bare public suffix")
        return host
    suffix_len = rules.suffix_length(tuple(reversed(labels)))
    if suffix_len >= len(labels):
        raise DomainError(f"host {host!r} is a bare public suffix")
    return ".".join(labels[len(labels) - suffix_len - 1 :])
