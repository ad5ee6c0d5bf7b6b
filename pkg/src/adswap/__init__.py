"""Self-hostable platform for paired ad-swap audit studies.

Participants' browser extensions report the ads they are served; after an
observation week, randomly paired participants see each other's ads for an
intervention week, with stratified surveys at the midpoint and the end.
This package provides the coordination server, the filter-list compiler the
extension consumes, the swap engine, survey generation and scoring, capture
post-processing, an analysis battery, and a deterministic simulation
harness for desk-scale end-to-end runs.
"""

from .clock import Clock, SimClock, from_iso, to_iso
from .model import (
    AdRecord,
    Demographics,
    LifecycleState,
    Participant,
    Phase,
    StudyConfig,
    assign_swap_pairs,
    select_balanced_cohort,
)
from .filters import (
    ClientRulesetDoc,
    Decision,
    RuleSet,
    compile_ruleset,
    cosmetic_selectors_for,
    match_network,
    parse_filter_list,
)
from .domains import DomainError, registrable_domain
from .intervention import build_swap_pool, eligible_pool, select_swap_ad
from .surveys import generate_survey, score_recognition, submit_response
from .store import StudyStore
from .api import create_app
from .analysis import load_bundle, run_analysis
from .sim import SimProfile, SimulationReport, default_profiles, run_simulation

__version__ = "0.1.0"

__all__ = [
    "AdRecord",
    "ClientRulesetDoc",
    "Clock",
    "Decision",
    "Demographics",
    "DomainError",
    "LifecycleState",
    "Participant",
    "Phase",
    "RuleSet",
    "SimClock",
    "SimProfile",
    "SimulationReport",
    "StudyConfig",
    "StudyStore",
    "assign_swap_pairs",
    "build_swap_pool",
    "compile_ruleset",
    "cosmetic_selectors_for",
    "create_app",
    "default_profiles",
    "eligible_pool",
    "from_iso",
    "generate_survey",
    "load_bundle",
    "match_network",
    "parse_filter_list",
    "registrable_domain",
    "run_analysis",
    "run_simulation",
    "score_recognition",
    "select_balanced_cohort",
    "select_swap_ad",
    "submit_response",
    "to_iso",
    "__version__",
]
