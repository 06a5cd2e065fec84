import csv
import json

import pytest

from modedse.campaign import CampaignConfig, ConfigError
from modedse.cli import main


def tiny_config(tmp_path, **extra):
    cfg = {
        "output_dir": str(tmp_path / "out"),
        "dse": {"population_size": 8, "iterations": 5, "seed": 3},
        "training": [{"name": "blk", "synthetic": {"kind": "moving_block", "width": 64, "height": 64, "frames": 2}}],
        "validation": [
            {"name": "grad", "synthetic": {"kind": "gradient", "width": 64, "height": 64, "frames": 2, "seed": 4}},
            {"name": "noisy", "synthetic": {"kind": "noise", "width": 64, "height": 64, "frames": 2, "seed": 5}},
        ],
    }
    cfg.update(extra)
    p = tmp_path / "campaign.json"
    p.write_text(json.dumps(cfg))
    return p


@pytest.mark.slow
def test_train_then_validate(tmp_path, capsys):
    p = tiny_config(tmp_path)
    assert main(["train", str(p)]) == 0
    out = tmp_path / "out"
    for qp in (10, 20, 30, 40):
        assert (out / f"archive_qp{qp}.csv").exists()
        assert (out / f"scatter_qp{qp}.csv").exists()
    assert (out / "combined_balanced.json").exists()
    first = {qp: (out / f"archive_qp{qp}.csv").read_bytes() for qp in (10, 20, 30, 40)}
    assert main(["train", str(p)]) == 0
    assert first == {qp: (out / f"archive_qp{qp}.csv").read_bytes() for qp in (10, 20, 30, 40)}

    assert main(["validate", str(p)]) == 0
    rows = [r for r in csv.reader(l for l in open(out / "validation_report.csv") if not l.startswith("#"))]
    assert rows[0][0] == "sequence" and len(rows) == 1 + 2 + 1
    assert rows[-1][0] == "mean"


def test_validate_self_comparison(tmp_path):
    p = tiny_config(tmp_path)
    report = tmp_path / "r.csv"
    assert main(["validate", str(p), "--genotype", "exhaustive", "--report", str(report)]) == 0
    rows = list(csv.DictReader(l for l in open(report) if not l.startswith("#")))
    assert len(rows) == 3
    for r in rows:
        assert float(r["bd_rate_pct"]) == 0.0
        assert float(r["bd_energy_pct"]) == 0.0
        assert float(r["effort_savings_pct"]) == 0.0


def test_validate_published_genotype_file(tmp_path):
    from modedse.genotype import PB_GENOTYPE_TEXT

    g = tmp_path / "pb.txt"
    g.write_text(PB_GENOTYPE_TEXT)
    p = tiny_config(tmp_path)
    assert main(["validate", str(p), "--genotype", str(g), "--report", str(tmp_path / "r.csv")]) == 0


def test_inspect(capsys):
    assert main(["inspect", "pb"]) == 0
    out = capsys.readouterr().out
    assert "unconditionally tested: 10, 2" in out.split("depth 1")[0]
    assert main(["inspect", "exhaustive"]) == 0
    assert capsys.readouterr().out.strip().endswith("no unreachable modes")


def test_encode(tmp_path):
    out = tmp_path / "r.json"
    assert main(["encode", "--synthetic", "gradient", "--genotype", "hm", "--qp", "30", "-o", str(out)]) == 0
    data = json.loads(out.read_text())
    assert data["qp"] == 30 and data["objectives"]["rate_bits"] > 0


def test_disjointness_enforced(tmp_path):
    spec = {"name": "same", "synthetic": {"kind": "noise"}}
    p = tiny_config(tmp_path, training=[spec], validation=[spec])
    with pytest.raises(ConfigError, match="disjoint"):
        CampaignConfig.load(p)
    assert main(["train", str(p)]) == 2


def test_output_env_override(tmp_path, monkeypatch):
    monkeypatch.setenv("MODEDSE_OUTPUT_DIR", str(tmp_path / "elsewhere"))
    cfg = CampaignConfig.load(tiny_config(tmp_path))
    assert cfg.out == tmp_path / "elsewhere"


def test_bad_config_messages(tmp_path, capsys):
    p = tmp_path / "c.json"
    p.write_text("{not json")
    assert main(["train", str(p)]) == 2
    assert "invalid JSON" in capsys.readouterr().err
    assert main(["inspect", str(tmp_path / "missing.txt")]) == 2
