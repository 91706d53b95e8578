# Copyright 2026 The dpmob Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Differentially private mobility forecasting."""

from ._dpmob import (
    ConfigError,
    InvalidArgument,
    MetricsReport,
    MobilitySeries,
    ParseError,
    RegionStats,
    RunFailed,
    compute_epsilon,
    compute_metrics,
    delta_budget_check,
    descriptive_stats,
    gaussian_sigma,
    iqr_clean,
    load_csv,
    run_cli,
    utility_loss,
    version,
)

__version__ = version()

__all__ = [
    "ConfigError",
    "InvalidArgument",
    "MetricsReport",
    "MobilitySeries",
    "ParseError",
    "RegionStats",
    "RunFailed",
    "compute_epsilon",
    "compute_metrics",
    "delta_budget_check",
    "descriptive_stats",
    "gaussian_sigma",
    "iqr_clean",
    "load_csv",
    "run_cli",
    "utility_loss",
    "version",
]
