"""Tour of the ad-filter engine: parsing, matching, compiling.

The grammar subset is documented in docs/filter-grammar.md; this script
shows the decisions it produces on concrete requests.
"""

from adswap.domains import hostname_of
from adswap.filters import (
    compile_ruleset,
    cosmetic_selectors_for,
    match_network,
    parse_filter_list,
)

LIST_TEXT = """\
! demo list -- comments start with a bang
[Adblock Plus 2.0]
||ads.example^
||tracker.example^$third-party
||media.example^$image
@@||ads.example/sponsored-research^
/banner/*.gif
bannerfarm
##.ad-slot
news.example,~sports.news.example##aside.promo
/^regex-rules-are-skipped$/
||odd.example^$websocket
"""

ruleset, warnings = parse_filter_list(LIST_TEXT)
print(f"parsed: {len(ruleset.network_rules)} block, {len(ruleset.exception_rules)} "
      f"exception, {len(ruleset.cosmetic_rules)} cosmetic")
for w in warnings:
    print(f"  skipped line {w.line_no}: {w.line!r} ({w.reason})")

# ---- network decisions -------------------------------------------------------

PAGE = "https://news.example/story"
requests = [
    # the host anchor stops at label boundaries in both directions
    ("https://ads.example/unit.js", PAGE, "script"),
    ("https://sub.ads.example/unit.js", PAGE, "script"),
    ("https://notads.example/unit.js", PAGE, "script"),
    ("https://ads.example.evil.com/unit.js", PAGE, "script"),
    # the exception fires only where its own pattern matches
    ("https://ads.example/sponsored-research?id=7", PAGE, "script"),
    # third-party compares registrable domains of request and page
    ("https://tracker.example/px", PAGE, "other"),
    ("https://tracker.example/px", "https://www.tracker.example/home", "other"),
    # type options gate by resource type
    ("https://media.example/a.png", PAGE, "image"),
    ("https://media.example/a.js", PAGE, "script"),
    # wildcard and plain-substring patterns
    ("https://site.example/banner/ad.gif", PAGE, "image"),
    ("https://site.example/img/bannerfarm/x.png", PAGE, "image"),
]
print("\n%-52s %-12s %s" % ("request", "decision", "rule"))
for url, page, rtype in requests:
    decision = match_network(ruleset, url, page, rtype)
    print("%-52s %-12s %s" % (url, decision.outcome, decision.rule or "-"))

# ---- cosmetic scoping ----------------------------------------------------------

for page in ("https://news.example/story", "https://sports.news.example/game",
             "https://other.example/"):
    selectors = cosmetic_selectors_for(ruleset, hostname_of(page))
    print(f"cosmetic on {page}: {selectors}")

# ---- the document the extension downloads --------------------------------------

doc = compile_ruleset(ruleset)
print(f"\ncompiled ruleset: version={doc.version} digest={doc.digest[:16]}...")
print("byte-stable:", compile_ruleset(ruleset).to_json() == doc.to_json())
