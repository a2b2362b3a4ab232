import json

import pytest

from condgraph.cli import main
from condgraph.experiments import (
    ConfigError,
    ExperimentConfig,
    cmd_constants,
    cmd_discontinuity,
    cmd_perturb_study,
    cmd_rates,
    eval_number,
    nearest_cell,
    sweep_axes,
)


def test_config_parsing(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("# comment\nobjective = f_lrp; quadratic:1,10\niters=50\nhb_mus=1,169/19\n")
    cfg = ExperimentConfig.from_file(p)
    assert cfg.objective == ("f_lrp", "quadratic:1,10")
    assert cfg.iters == 50
    assert cfg.hb_mus == pytest.approx((1.0, 169 / 19))
    assert cfg.update("alpha", "0.5").alpha == 0.5
    with pytest.raises(ConfigError):
        cfg.update("nope", "1")
    with pytest.raises(ConfigError):
        ExperimentConfig.from_text("iters\n")
    assert eval_number("169/19") == pytest.approx(8.894736842105264)


def test_config_digest_stable():
    a = ExperimentConfig(objective=("f_lrp",))
    b = ExperimentConfig(objective=("f_lrp",))
    assert a.digest() == b.digest()
    assert a.digest() != ExperimentConfig().digest()


def test_constants_report():
    rep = cmd_constants(ExperimentConfig(objective=("quadratic:1,10",)))
    assert rep.header[:3] == ["label", "kind", "value"]
    assert len(rep.rows) == 12
    assert {round(v, 6) for v in rep.column("value")} == {1.0, 10.0}
    assert not rep.violations
    csv = rep.to_csv()
    assert "# config_hash=" in csv and "# grid=" in csv and "# version=" in csv


def test_constants_f_eps():
    rep = cmd_constants(ExperimentConfig(objective=("f_eps:0.1",)))
    row = [r for r in rep.rows if r[1] == "SC+"][0]
    assert row[2] == pytest.approx(22.0, abs=1e-2)


def test_rates_examples():
    rep = cmd_rates(ExperimentConfig(objective=("quadratic:1,10", "f_lrp")))
    assert not rep.violations
    rules = {(r[0], r[1]): r for r in rep.rows}
    sc = rules[("quadratic:1,10", "SC+/SC-")]
    assert sc[8] <= (9 / 11) ** 2 + 1e-9
    eb = rules[("f_lrp", "EB+/RSI-")]
    assert eb[8] <= 1 - (13 / 25) ** 2 + 1e-9


def test_rates_fixed_step_on_f_eps():
    rep = cmd_rates(ExperimentConfig(objective=("f_eps:0.1",), alpha=0.5, pairs="SC+/SC-"))
    fixed = [r for r in rep.rows if r[1] == "fixed-step"][0]
    assert fixed[8] <= 0.1


def test_perturb_study_small():
    rep = cmd_perturb_study(ExperimentConfig(eps_ladder=(0.4, 0.2, 0.1, 0.05)))
    dev = rep.column("max_deviation")
    assert all(b <= a + 1e-12 for a, b in zip(dev, dev[1:]))
    assert not rep.violations


def test_discontinuity_report():
    rep = cmd_discontinuity(ExperimentConfig())
    f_eps = [r for r in rep.rows if r[0] == "f_eps"]
    naive = [r[6] for r in f_eps]
    assert naive[0] < naive[1] < naive[2]
    assert all(r[7] <= r[1] for r in f_eps)
    assert not rep.violations


def test_sweep_axes_and_cells():
    cfg = ExperimentConfig()
    a, b = sweep_axes(cfg)
    assert a.shape == (200,) and b.shape == (200,)
    assert a[0] > 0 and a[-1] == pytest.approx(0.12) and b[0] == 0 and b[-1] < 1
    assert nearest_cell(a, b, a[17], b[3]) == (17, 3)


def test_cli_exit_codes(tmp_path, capsys):
    out = tmp_path / "c.csv"
    assert main(["constants", "--objective", "quadratic:1,10", "--out", str(out)]) == 0
    assert out.read_text().startswith("label,kind,value")
    assert main(["constants", "--objective", "bogus"]) == 2
    assert main(["constants", "--set", "nokey=1"]) == 2
    assert main(["not-a-command"]) == 2


def test_cli_reports_violation(tmp_path, capsys):
    # the box stops short of x = 3, where the QG- ratio bottoms out, so the estimate misses the analytic value
    rc = main(["constants", "--objective", "f_lrp", "--grid=-5:2.5:2001", "--out", str(tmp_path / "x.csv")])
    assert rc == 1
    assert "QG-" in capsys.readouterr().err


def test_cli_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["verify-graph", "--objective", "quadratic:1,10", "--out", str(a)]) == 0
    assert main(["verify-graph", "--objective", "quadratic:1,10", "--out", str(b), "--set", "workers=3"]) == 0
    assert a.read_bytes() == b.read_bytes()
    edges = json.loads(a.with_name("a.edges.json").read_text())
    assert len(edges["edges"]) == 21


def test_cli_config_file(tmp_path):
    cfg = tmp_path / "p.cfg"
    cfg.write_text("eps_ladder=0.4,0.2\nobjective=quadratic:2\n")
    out = tmp_path / "p.csv"
    assert main(["perturb-study", "--config", str(cfg), "--out", str(out)]) == 0
    rows = [l for l in out.read_text().splitlines() if not l.startswith("#")]
    assert len(rows) == 3
