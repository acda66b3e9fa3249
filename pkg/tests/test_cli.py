import pytest

from nomacell.cli import (ConfigError, PRESETS, load_config, main,
                          preset_path, run, validate)


def _write(tmp_path, text, name="exp.cfg"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


GOOD = """
mode = conditional
sweep.axis = rate_far
sweep.values = 0.5, 1.0
methods = exact
seed = 7
"""


class TestConfigParsing:
    def test_defaults_mirror_table(self, tmp_path):
        cfg = load_config(_write(tmp_path, GOOD))
        assert cfg.params.M == 3 and cfg.params.N == 2 and cfg.params.K == 2
        assert cfg.params.alpha == 3.5
        assert cfg.params.P == pytest.approx(0.1)
        assert cfg.params.sigma2 == pytest.approx(10 ** -9.9 / 1000)
        assert cfg.pair.d_k == 50.0 and cfg.pair.d_kt == 125.0
        assert cfg.pair.beta_k2 == 0.3
        assert cfg.kappa == 0.9 and cfg.k_factor_db == 20.0
        assert cfg.seed == 7

    def test_unknown_key_reports_line(self, tmp_path):
        with pytest.raises(ConfigError, match="line 3"):
            load_config(_write(tmp_path, "\nmode = conditional\nbogus.key = 1\n"))

    def test_bad_value_reports_field(self, tmp_path):
        with pytest.raises(ConfigError, match="mc.trials"):
            load_config(_write(tmp_path, "mc.trials = many\n"))

    def test_empty_sweep_rejected(self, tmp_path):
        with pytest.raises(ConfigError, match="nonempty"):
            load_config(_write(tmp_path, "sweep.values = \n"))

    def test_unsorted_sweep_rejected(self, tmp_path):
        with pytest.raises(ConfigError, match="sorted"):
            load_config(_write(tmp_path, "sweep.values = 1.0, 0.5\n"))

    def test_unknown_method_rejected(self, tmp_path):
        with pytest.raises(ConfigError, match="unknown method"):
            load_config(_write(tmp_path, "methods = exact, magic\n"))

    def test_db_conversion_boundary(self, tmp_path):
        cfg = load_config(_write(tmp_path, "network.p_dbm = 30\n"))
        assert cfg.params.P == pytest.approx(1.0)

    def test_presets_all_parse(self):
        for name in PRESETS:
            cfg = load_config(preset_path(name), label=name)
            assert cfg.sweep_values
            assert cfg.label == name


class TestRun:
    def test_csv_schema_and_determinism(self, tmp_path):
        text = GOOD + f"out = {tmp_path}/a\nmc.trials = 500\nmethods = exact, mc\n"
        cfg = load_config(_write(tmp_path, text))
        paths1 = run(cfg, deterministic=True)
        text2 = text.replace("/a", "/b")
        cfg2 = load_config(_write(tmp_path, text2, name="exp2.cfg"))
        paths2 = run(cfg2, deterministic=True)
        assert [p.name.split("_", 1)[1] for p in paths1] == \
               [p.name.split("_", 1)[1] for p in paths2]
        for p1, p2 in zip(sorted(paths1), sorted(paths2)):
            assert p1.read_bytes() == p2.read_bytes()
        header = sorted(paths1)[0].read_text().splitlines()[0]
        assert header == ("sweep_value,p_far,p_near,stderr_far,stderr_near,"
                          "goodput,method,seed")

    def test_timestamp_suppression(self, tmp_path):
        cfg = load_config(_write(tmp_path, GOOD + f"out = {tmp_path}/c\n"))
        (path,) = run(cfg, deterministic=False)
        assert path.read_text().startswith("# generated ")
        (path,) = run(cfg, deterministic=True)
        assert path.read_text().startswith("sweep_value,")

    def test_numerical_failure_does_not_abort(self, tmp_path, capsys):
        # an interference-free average sweep cannot draw distances; the
        # sweep must finish and mark the rows
        text = """
mode = average
network.lambda_b = 0
sweep.axis = rate_far
sweep.values = 0.5
methods = exact
"""
        cfg = load_config(_write(tmp_path, text + f"out = {tmp_path}/d\n"))
        paths = run(cfg)
        joined = "".join(p.read_text() for p in paths)
        assert "nan" in joined


class TestMain:
    def test_validate_passes(self, capsys):
        assert main(["validate", "--trials", "4000"]) == 0
        out = capsys.readouterr().out
        assert "[PASS]" in out and "[FAIL]" not in out

    def test_validate_detects_corrupt_discretization(self, capsys):
        assert main(["validate", "--trials", "2000", "--inv-a", "3"]) == 1
        out = capsys.readouterr().out
        assert "[FAIL] 1d discretization bound" in out
        assert "[FAIL] 1d:" in out

    def test_missing_config_is_config_error(self, capsys):
        assert main(["sweep", "no-such-file.cfg"]) == 2
        assert "config error" in capsys.readouterr().err

    def test_preset_sweep_runs(self, tmp_path):
        rc = main(["analyze", "fig6", "--out", str(tmp_path / "r"),
                   "--deterministic"])
        assert rc == 0
        files = sorted((tmp_path / "r").glob("*.csv"))
        assert any("exact" in f.name for f in files)
        assert any("asymptotic" in f.name for f in files)

    def test_fig1_near_user_ordering(self, tmp_path):
        # the Monte Carlo near-user column sits below the approximation at
        # every row (the exact curve is upper-bounded by the approximate one)
        rc = main(["sweep", "fig1", "--trials", "4000",
                   "--out", str(tmp_path / "f1"), "--deterministic"])
        assert rc == 0

        def col(tag, name):
            path = tmp_path / "f1" / f"fig1_{tag}.csv"
            rows = path.read_text().splitlines()
            idx = rows[0].split(",").index(name)
            return [float(r.split(",")[idx]) for r in rows[1:]]

        mc_near = col("mc", "p_near")
        approx_near = col("approx", "p_near")
        exact_near = col("exact", "p_near")
        for m, a, e in zip(mc_near, approx_near, exact_near):
            assert m <= a
            assert e <= a

    def test_fig4_intensity_trend(self, tmp_path):
        rc = main(["analyze", "fig4", "--out", str(tmp_path / "f4"),
                   "--deterministic"])
        assert rc == 0
        path = tmp_path / "f4" / "fig4_exact-random.csv"
        rows = [r.split(",") for r in path.read_text().splitlines()[1:]]
        lam = [float(r[0]) for r in rows]
        p_far = [float(r[1]) for r in rows]
        p_near = [float(r[2]) for r in rows]
        flat = [p for l, p in zip(lam, p_far) if l >= 1e-5]
        assert (max(flat) - min(flat)) / min(flat) <= 0.02
        flat_n = [p for l, p in zip(lam, p_near) if l >= 1e-5]
        assert (max(flat_n) - min(flat_n)) / min(flat_n) <= 0.02
        assert p_far[lam.index(min(lam))] > flat[0]
        assert p_near[lam.index(min(lam))] > flat_n[0]

    def test_seed_override(self, tmp_path):
        rc = main(["simulate", "fig1", "--trials", "400", "--seed", "9",
                   "--out", str(tmp_path / "s"), "--deterministic"])
        assert rc == 0
        (csv,) = sorted((tmp_path / "s").glob("*mc*.csv"))
        rows = csv.read_text().splitlines()[1:]
        assert all(row.endswith(",9") for row in rows)
