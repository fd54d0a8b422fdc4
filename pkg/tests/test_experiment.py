import math
from dataclasses import replace

import numpy as np
import pytest

from pspam import cli, equalization
from pspam.config import load_config, loads_config, parse_grid
from pspam.errors import ConfigError
from pspam.experiment import (
    CAP,
    DistributionSpec,
    ExperimentSpec,
    point_seeds,
    read_results_csv,
    run_point,
    run_sweep,
)

SMALL_EQ = (equalization.ffe(training_len=5000), equalization.vnle(5, 3, 3, training_len=5000))


@pytest.fixture
def small_spec():
    return ExperimentSpec(distribution=CAP, equalizers=SMALL_EQ, trial_symbols=15_000, grid=(260.0, 350.0, 440.0))


class TestSpec:
    def test_defaults(self):
        s = ExperimentSpec()
        assert s.grid[0] == 200 and s.grid[-1] == 530 and len(s.grid) == 12
        assert [e.label for e in s.equalizers] == ["FFE", "VNLE"]

    @pytest.mark.parametrize("kw", [dict(grid=()), dict(grid=(3.0, 2.0)), dict(sweep_axis="x"),
                                    dict(trial_symbols=100), dict(equalizers=()), dict(sweep_axis="alpha")])
    def test_rejects(self, kw):
        with pytest.raises(ConfigError):
            ExperimentSpec(**kw)

    def test_at(self):
        s = ExperimentSpec(distribution=CAP, sweep_axis="alpha", grid=(2.0, 3.5))
        link, dist = s.at(3.5)
        assert dist.alpha == 3.5 and link == s.link
        link, _ = replace(s, sweep_axis="symbol_rate", grid=(100.0,)).at(120.0)
        assert link.symbol_rate == 120.0

    def test_distribution_labels(self):
        assert DistributionSpec().label == "uniform"
        assert DistributionSpec("mb", "cup", 3.5).label == "cup-a3.5"
        with pytest.raises(ConfigError):
            DistributionSpec("gauss")

    def test_point_seeds(self):
        assert point_seeds(1, 0) == point_seeds(1, 0)
        assert len({point_seeds(1, i) for i in range(50)} | {point_seeds(2, i) for i in range(50)}) == 100


class TestRunPoint:
    def test_reports(self, small_spec):
        reports = run_point(small_spec, 350.0, 3)
        assert [r.meta["equalizer"] for r in reports] == ["FFE", "VNLE"]
        for r in reports:
            assert 0 < r.ber < 0.1
            assert r.bits_compared == 3 * r.evaluated.size
            # training symbols and block edges are never scored
            assert r.evaluated.size <= 15_000 - 5000
            assert r.entropy_bits == pytest.approx(3 / 1.0817)
            assert r.air_gbps == pytest.approx(110 * (r.entropy_bits - 3 * (
                -(r.ber * math.log2(r.ber) + (1 - r.ber) * math.log2(1 - r.ber)))))
            assert r.level_histograms.per_level.sum() == r.evaluated.size

    def test_deterministic(self, small_spec):
        a = run_point(small_spec, 350.0, 11)
        b = run_point(small_spec, 350.0, 11)
        for x, y in zip(a, b):
            assert x.ber == y.ber
            np.testing.assert_array_equal(x.equalized, y.equalized)
        c = run_point(small_spec, 350.0, 12)
        assert not np.array_equal(a[0].equalized, c[0].equalized)


class TestSweep:
    def test_jobs_do_not_change_results(self, small_spec):
        one = run_sweep(small_spec, jobs=1, master_seed=5)
        two = run_sweep(small_spec, jobs=2, master_seed=5)
        assert one.rows() == two.rows()
        assert len(one.rows()) == 3 * 2

    def test_curve_best_and_write(self, small_spec, tmp_path):
        res = run_sweep(small_spec, master_seed=5)
        ffe = res.curve("FFE")
        assert ffe.shape == (3,) and np.all(np.isfinite(ffe))
        assert res.best("FFE")[1] in small_spec.grid
        path = res.write(tmp_path)
        rows = read_results_csv(path)
        assert list(rows[0]) == ["vpp_mV", "symbol_rate_GBd", "format", "equalizer", "ber", "air_Gbps",
                                 "onbr_Gbps", "er_dB"]
        assert len(rows) == 6
        assert len(list((tmp_path / "histograms").glob("*.csv"))) == 6
        assert (tmp_path / "pmfs" / "cap-a2.csv").exists()

    def test_failed_point_is_recorded(self, small_spec):
        # with no swing and no noise the received block is all zeros and training is singular
        spec = replace(small_spec, link=small_spec.link.with_(snr_db=math.inf), grid=(0.0, 350.0), equalizers=(equalization.ffe(ridge_lambda=0.0, training_len=5000),))
        res = run_sweep(spec, master_seed=1)
        assert len(res.reports) == 1 and res.reports[0][0] == 1
        assert [f[0] for f in res.failures] == [0]
        assert math.isnan(res.curve("FFE")[0])


CONFIG = """
[link]
symbol_rate = 105
vpp_dac = 320
dac_bw_3db = none
snr_db = 25

[eml]
slope = 0.6

[distribution]
kind = mb
polarity = cup
alpha = 3.5

[equalizer short]
linear_taps = 15
training_len = 5000

[sweep]
axis = vpp_dac
values = 200:260:30

[experiment]
trial_symbols = 20000
"""


class TestConfig:
    def test_parse(self):
        spec = loads_config(CONFIG)
        assert spec.link.symbol_rate == 105 and spec.link.dac_bw_3db is None
        assert spec.link.eml.slope == 0.6
        assert spec.distribution == DistributionSpec("mb", "cup", 3.5)
        assert [e.label for e in spec.equalizers] == ["short"] and spec.equalizers[0].linear_taps == 15
        assert spec.grid == (200.0, 230.0, 260.0)
        assert spec.trial_symbols == 20000

    def test_empty_is_default(self):
        assert loads_config("") == ExperimentSpec()

    @pytest.mark.parametrize("text", ["[link]\nbogus = 1", "[nope]", "[link]\nsymbol_rate = fast",
                                      "[sweep]\naxis = symbol_rate", "[eml]\nkind = lookup",
                                      "[link]\noversample = 3", "[distribution]\npolarity = bowl"])
    def test_errors(self, text):
        with pytest.raises(ConfigError):
            loads_config(text)

    def test_lookup_table_relative_to_file(self, tmp_path):
        (tmp_path / "eml.csv").write_text("voltage_V,power_mW\n-6,0.1\n-3,2.8\n0,5.5\n")
        (tmp_path / "exp.ini").write_text("[eml]\nkind = lookup\ntable = eml.csv\n")
        spec = load_config(tmp_path / "exp.ini")
        assert spec.link.eml.kind == "lookup" and spec.link.eml.power(-3.0) == pytest.approx(2.8)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "absent.ini")

    def test_grid(self):
        assert parse_grid("100:130:5") == tuple(float(v) for v in range(100, 131, 5))
        assert parse_grid("1, 2.5,4") == (1.0, 2.5, 4.0)
        with pytest.raises(ConfigError):
            parse_grid("1:2:0")
        with pytest.raises(ConfigError):
            parse_grid("a,b")


class TestCli:
    def test_rates(self, capsys):
        assert cli.main(["rates", "--H", "3", "--m", "3", "--fec-oh", "0.07", "--baud", "100"]) == 0
        assert "280.37 Gb/s" in capsys.readouterr().out

    def test_rates_with_ber(self, capsys):
        assert cli.main(["rates", "--H", "2.7735", "--baud", "120", "--ber", "0.0047"]) == 0
        out = capsys.readouterr().out
        assert "ONBR         n/a" in out and "AIR" in out

    def test_design_dist(self, capsys, tmp_path):
        assert cli.main(["design-dist", "--ps-oh", "0.0817", "--alpha", "2", "--out", str(tmp_path)]) == 0
        out = capsys.readouterr().out
        assert "-7,0.0373" in out and "nu=0.0363" in out
        assert (tmp_path / "pmfs" / "cap-a2.csv").exists()

    def test_bad_values_exit_1(self, capsys):
        assert cli.main(["design-dist", "--ps-oh", "-0.5"]) == 1
        assert cli.main(["rates", "--H", "3", "--baud", "100", "--ber", "2"]) == 1

    def test_usage_exit_1(self, capsys):
        assert cli.main(["rates"]) == 1
        assert cli.main(["nope"]) == 1
        assert cli.main(["--help"]) == 0

    def test_missing_config_exit_1(self, capsys, tmp_path):
        assert cli.main(["simulate", "--config", str(tmp_path / "x.ini")]) == 1
        assert "x.ini" in capsys.readouterr().err

    def test_simulate_and_sweep(self, capsys, tmp_path):
        cfg = tmp_path / "c.ini"
        cfg.write_text("[equalizer FFE]\ntraining_len = 5000\n[experiment]\ntrial_symbols = 15000\n")
        assert cli.main(["simulate", "--config", str(cfg), "--vpp", "300", "--seed", "2",
                         "--out", str(tmp_path / "sim")]) == 0
        assert "FFE vpp=300mV" in capsys.readouterr().out
        assert len(read_results_csv(tmp_path / "sim" / "results.csv")) == 1
        assert cli.main(["sweep-baud", "--config", str(cfg), "--values", "100,120",
                         "--out", str(tmp_path / "sw")]) == 0
        rows = read_results_csv(tmp_path / "sw" / "results.csv")
        assert [float(r["symbol_rate_GBd"]) for r in rows] == [100.0, 120.0]

    def test_histogram(self, capsys, tmp_path):
        cfg = tmp_path / "c.ini"
        cfg.write_text("[equalizer FFE]\ntraining_len = 5000\n[experiment]\ntrial_symbols = 15000\n")
        assert cli.main(["histogram", "--config", str(cfg), "--bins", "36", "--out", str(tmp_path)]) == 0
        text = (tmp_path / "histograms" / "uniform_FFE.csv").read_text().splitlines()
        assert len(text) == 1 + 8 * 36
