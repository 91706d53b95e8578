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

import math

import numpy as np
import pytest

import dpmob


def test_gaussian_sigma_matches_closed_form():
    want = math.sqrt(2 * math.log(1.25 / 1e-7)) / 0.0357
    assert dpmob.gaussian_sigma(1.0, 0.0357, 1e-7) == pytest.approx(want, rel=1e-12)


def test_gaussian_sigma_rejects_large_epsilon():
    with pytest.raises(ValueError):
        dpmob.gaussian_sigma(1.0, 1.5, 1e-7)


def test_compute_epsilon_returns_order():
    eps, order = dpmob.compute_epsilon(5 / 3120, 35.0, 62400, 1e-7)
    assert eps == pytest.approx(0.0650, rel=0.02)
    assert order in list(range(2, 65)) + [128, 256, 512]


def test_delta_budget_check():
    assert dpmob.delta_budget_check(1e-7, 3120)
    assert not dpmob.delta_budget_check(1e-6, 3120)


def test_compute_metrics_single_region():
    m = dpmob.compute_metrics(np.zeros((2, 1)), np.array([[3.0], [4.0]]))
    assert m.rmse[0] == pytest.approx(math.sqrt(12.5))
    assert m.mae[0] == pytest.approx(3.5)


def test_utility_loss():
    assert dpmob.utility_loss(1221.2, 1214.3) == pytest.approx(0.57, abs=0.005)


def test_load_and_describe(tmp_path):
    path = tmp_path / "mob.csv"
    path.write_text(
        "datetime,R1,R2\n"
        "2020-09-07 00:00:00,5,1\n"
        "2020-09-07 00:30:00,5,3\n"
    )
    s = dpmob.load_csv(str(path))
    assert len(s) == 2
    assert s.regions == ["R1", "R2"]
    assert s.counts.shape == (2, 2)
    stats = dpmob.descriptive_stats(s)
    assert stats[0].std == 0.0
    assert stats[1].mean == pytest.approx(2.0)


def test_run_cli_accountant():
    code, out, _ = dpmob.run_cli(
        ["accountant", "--q", "0.01", "--noise-multiplier", "1.1", "--steps", "100",
         "--delta", "1e-5"])
    assert code == 0
    assert out.startswith("eps=")
    code, _, _ = dpmob.run_cli(["accountant", "--q", "0.01", "--noise-multiplier", "1",
                                "--steps", "1", "--delta", "1"])
    assert code == 2
