import warnings

import pytest

warnings.filterwarnings("ignore", category=DeprecationWarning)

from adswap.model import StudyConfig
from adswap.sim import default_profiles, run_simulation


@pytest.fixture(scope="session")
def small_sim_report():
    """One compact end-to-end run shared by analysis/export tests."""
    config = StudyConfig(
        observational_days=2, intervention_days=2, min_ads_gate=6,
        reminder_day=1, rng_seed=4,
    )
    profiles = default_profiles(8, seed=21, ads_per_day=8, swaps_per_day=12)
    return run_simulation(config, profiles, seed=33)


@pytest.fixture(scope="session")
def small_bundle_dir(small_sim_report, tmp_path_factory):
    out = tmp_path_factory.mktemp("bundle")
    small_sim_report.write(out)
    return out
