"""Filter-list subset: parser, matcher, and client ruleset compiler.

Grammar (normative copy in docs/filter-grammar.md): one rule per line.
`!` and `[` lines are comments/headers. `@@` prefixes an exception.
`##` splits a cosmetic rule into a domain scope and a selector. Network
patterns support `||` (host-label anchor), leading/trailing `|` (address
anchors), `*` (any run), `^` (separator: any char outside [a-z0-9_.%-],
or end of address). Options after `$`: third-party, image, script, each
negatable with `~`. Everything else (regex literals, `#@#`, `#?#`,
unknown options) is skipped with a warning so real-world lists degrade
instead of failing. Matching lowercases both pattern and URL.

Match queries are served from a token index: each network rule is filed
under its longest "safe" token (a literal run guaranteed to appear as a
maximal alphanumeric run in any matching URL), so a match call touches
only rules sharing a token with the URL plus a small always-check list.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from typing import Optional

from .domains import DomainError, SuffixRules, embedded_suffix_rules, hostname_of, registrable_domain_of_host

SEPARATOR_CLASS = r"[^a-z0-9_.%-]"
HOST_ANCHOR_PREFIX = r"^[a-z][a-z0-9+.-]*://(?:[^/?#]*\.)?"
KNOWN_OPTIONS = ("third-party", "image", "script")
RESOURCE_TYPES = ("image", "script", "other")

_TOKEN_RE = re.compile(r"[a-z0-9%]{2,}")
_SCHEME_RE = re.compile(r"^[a-z][a-z0-9+.-]*://")


class MatchError(ValueError):
    """Raised for URLs the matcher cannot interpret."""


@dataclass(frozen=True)
class ParseWarning:
    line_no: int
    line: str
    reason: str


@dataclass
class NetworkRule:
    raw: str                      # original line, kept for round-trip and citation
    pattern: str                  # pattern part, lowercased, options stripped
    is_exception: bool
    third_party: Optional[bool]   # None = indifferent
    type_include: frozenset[str]
    type_exclude: frozenset[str]
    regex: re.Pattern = field(repr=False)
    token: Optional[str] = None


@dataclass
class CosmeticRule:
    raw: str
    selector: str
    include_domains: tuple[str, ...]
    exclude_domains: tuple[str, ...]


@dataclass(frozen=True)
class Decision:
    outcome: str                  # blocked_by | exempted_by | no_match
    rule: Optional[str] = None    # raw text of the winning rule

    NO_MATCH = "no_match"
    BLOCKED = "blocked_by"
    EXEMPTED = "exempted_by"


class _TokenIndex:
    """Buckets rules by safe token; rules without one are always checked."""

    def __init__(self, rules: list[NetworkRule]):
        self.buckets: dict[str, list[NetworkRule]] = {}
        self.always: list[NetworkRule] = []
        for rule in rules:
            if rule.token is None:
                self.always.append(rule)
            else:
                self.buckets.setdefault(rule.token, []).append(rule)

    def candidates(self, url_tokens: list[str]):
        out = self.always
        buckets = self.buckets
        hit: list[NetworkRule] = []
        for tok in url_tokens:
            found = buckets.get(tok)
            if found:
                hit.extend(found)
        if hit:
            return hit + out if out else hit
        return out


@dataclass
class RuleSet:
    """Immutable once constructed; shared freely across threads."""

    version: int
    network_rules: list[NetworkRule]
    exception_rules: list[NetworkRule]
    cosmetic_rules: list[CosmeticRule]
    source_digest: str
    _block_index: _TokenIndex = field(init=False, repr=False)
    _exc_index: _TokenIndex = field(init=False, repr=False)

    def __post_init__(self):
        self._block_index = _TokenIndex(self.network_rules)
        self._exc_index = _TokenIndex(self.exception_rules)


def _translate_pattern(pattern: str) -> tuple[re.Pattern, Optional[str]]:
    """Compile one network pattern to a regex plus its index token."""
    body = pattern
    host_anchor = start_anchor = end_anchor = False
    if body.startswith("||"):
        host_anchor = True
        body = body[2:]
    elif body.startswith("|"):
        start_anchor = True
        body = body[1:]
    if body.endswith("|"):
        end_anchor = True
        body = body[:-1]

    parts: list[str] = []
    if host_anchor:
        parts.append(HOST_ANCHOR_PREFIX)
    elif start_anchor:
        parts.append("^")
    for ch in body:
        if ch == "*":
            parts.append(".*")
        elif ch == "^":
            parts.append(f"(?:{SEPARATOR_CLASS}|$)")
        else:
            parts.append(re.escape(ch))
    if end_anchor:
        parts.append("$")
    regex = re.compile("".join(parts))

    # Safe token: a maximal [a-z0-9%] run whose neighbours in the pattern
    # force it to appear as a maximal run in the URL as well. `*` on either
    # side (or an unanchored pattern edge) leaves the boundary open.
    best = None
    for m in _TOKEN_RE.finditer(body):
        i, j = m.start(), m.end()
        left_ok = (i == 0 and (host_anchor or start_anchor)) or (i > 0 and body[i - 1] != "*")
        right_ok = (j == len(body) and end_anchor) or (j < len(body) and body[j] != "*")
        if left_ok and right_ok and (best is None or j - i > len(best)):
            best = m.group()
    return regex, best


def _parse_options(opts: str) -> tuple[Optional[bool], frozenset[str], frozenset[str], Optional[str]]:
    """Returns (third_party, include, exclude, unknown_option_or_None)."""
    third_party: Optional[bool] = None
    include: set[str] = set()
    exclude: set[str] = set()
    for piece in opts.split(","):
        name = piece.strip()
        negated = name.startswith("~")
        if negated:
            name = name[1:]
        if name not in KNOWN_OPTIONS:
            return None, frozenset(), frozenset(), piece.strip() or "(empty)"
        if name == "third-party":
            third_party = not negated
        elif negated:
            exclude.add(name)
        else:
            include.add(name)
    return third_party, frozenset(include), frozenset(exclude), None


def parse_filter_list(text: str, version: int = 1) -> tuple[RuleSet, list[ParseWarning]]:
    """Parse filter-list text; malformed lines warn instead of failing."""
    network: list[NetworkRule] = []
    exceptions: list[NetworkRule] = []
    cosmetic: list[CosmeticRule] = []
    warnings: list[ParseWarning] = []

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "![":
            continue
        if "#@#" in line:
            warnings.append(ParseWarning(line_no, line, "cosmetic exception rules unsupported"))
            continue
        if "#?#" in line:
            warnings.append(ParseWarning(line_no, line, "procedural cosmetic rules unsupported"))
            continue
        if "##" in line:
            scope, selector = line.split("##", 1)
            if not selector:
                warnings.append(ParseWarning(line_no, line, "cosmetic rule without selector"))
                continue
            include: list[str] = []
            exclude: list[str] = []
            for dom in filter(None, (d.strip().lower() for d in scope.split(","))):
                if dom.startswith("~"):
                    exclude.append(dom[1:])
                else:
                    include.append(dom)
            cosmetic.append(CosmeticRule(line, selector, tuple(include), tuple(exclude)))
            continue

        body = line
        is_exception = body.startswith("@@")
        if is_exception:
            body = body[2:]
        # Recognize regex literals before the option split: regexes
        # routinely contain "$" and would misparse as an unknown option.
        if len(body) > 1 and body.startswith("/") and body.endswith("/"):
            warnings.append(ParseWarning(line_no, line, "regex-literal rules unsupported"))
            continue
        third_party: Optional[bool] = None
        include_t: frozenset[str] = frozenset()
        exclude_t: frozenset[str] = frozenset()
        if "$" in body:
            body, opts = body.rsplit("$", 1)
            third_party, include_t, exclude_t, unknown = _parse_options(opts)
            if unknown is not None:
                warnings.append(ParseWarning(line_no, line, f"unknown option {unknown!r}"))
                continue
        if not body:
            warnings.append(ParseWarning(line_no, line, "empty pattern"))
            continue
        pattern = body.lower()
        regex, token = _translate_pattern(pattern)
        rule = NetworkRule(line, pattern, is_exception, third_party, include_t, exclude_t, regex, token)
        (exceptions if is_exception else network).append(rule)

    digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
    return RuleSet(version, network, exceptions, cosmetic, digest), warnings


def _rule_applies(rule: NetworkRule, url: str, third_party: Optional[bool], resource_type: str) -> bool:
    if rule.type_include and resource_type not in rule.type_include:
        return False
    if resource_type in rule.type_exclude:
        return False
    if rule.third_party is not None and rule.third_party != third_party:
        return False
    return rule.regex.search(url) is not None


def _is_third_party(request_url: str, page_url: str, rules: SuffixRules) -> bool:
    try:
        req = registrable_domain_of_host(hostname_of(request_url), rules)
        page = registrable_domain_of_host(hostname_of(page_url), rules)
    except DomainError:
        return True  # unknown relationship treated as cross-site
    return req != page


def match_network(
    rs: RuleSet,
    request_url: str,
    page_url: str,
    resource_type: str = "other",
    suffix_rules: SuffixRules | None = None,
) -> Decision:
    """Decide whether a request would be ad-blocked under the rule set.

    Exceptions are consulted only once a block rule matched; an exception
    match always wins.
    """
    url = request_url.lower()
    if not _SCHEME_RE.match(url):
        raise MatchError(f"not an absolute URL: {request_url!r}")
    tokens = _TOKEN_RE.findall(url)
    third: Optional[bool] = None

    def third_party() -> bool:
        nonlocal third
        if third is None:
            third = _is_third_party(url, page_url.lower(), suffix_rules or embedded_suffix_rules())
        return third

    blocked: Optional[NetworkRule] = None
    for rule in rs._block_index.candidates(tokens):
        tp = third_party() if rule.third_party is not None else None
        if _rule_applies(rule, url, tp, resource_type):
            blocked = rule
            break
    if blocked is None:
        return Decision(Decision.NO_MATCH)
    for rule in rs._exc_index.candidates(tokens):
        tp = third_party() if rule.third_party is not None else None
        if _rule_applies(rule, url, tp, resource_type):
            return Decision(Decision.EXEMPTED, rule.raw)
    return Decision(Decision.BLOCKED, blocked.raw)


def _host_in_scope(host: str, domain: str) -> bool:
    return host == domain or host.endswith("." + domain)


def cosmetic_selectors_for(rs: RuleSet, page_hostname: str) -> list[str]:
    """Selectors applicable to a page host; subdomains inherit scopes."""
    host = page_hostname.lower()
    out: list[str] = []
    seen: set[str] = set()
    for rule in rs.cosmetic_rules:
        if any(_host_in_scope(host, d) for d in rule.exclude_domains):
            continue
        if rule.include_domains and not any(_host_in_scope(host, d) for d in rule.include_domains):
            continue
        if rule.selector not in seen:
            seen.add(rule.selector)
            out.append(rule.selector)
    return out


@dataclass(frozen=True)
class ClientRulesetDoc:
    """Wire document served at GET /v1/ruleset; field order is frozen."""

    version: int
    digest: str
    network: tuple[str, ...]
    exceptions: tuple[str, ...]
    cosmetic: tuple[str, ...]

    def to_json(self) -> str:
        doc = {
            "version": self.version,
            "digest": self.digest,
            "network": list(self.network),
            "exceptions": list(self.exceptions),
            "cosmetic": list(self.cosmetic),
        }
        return json.dumps(doc, separators=(",", ":"), ensure_ascii=True)

    @classmethod
    def from_json(cls, text: str) -> "ClientRulesetDoc":
        doc = json.loads(text)
        return cls(
            version=int(doc["version"]),
            digest=str(doc["digest"]),
            network=tuple(doc["network"]),
            exceptions=tuple(doc["exceptions"]),
            cosmetic=tuple(doc["cosmetic"]),
        )


def compile_ruleset(rs: RuleSet) -> ClientRulesetDoc:
    """Canonical client document; byte-identical for equal rule sets."""
    return ClientRulesetDoc(
        version=rs.version,
        digest=rs.source_digest,
        network=tuple(r.raw for r in rs.network_rules),
        exceptions=tuple(r.raw for r in rs.exception_rules),
        cosmetic=tuple(r.raw for r in rs.cosmetic_rules),
    )
