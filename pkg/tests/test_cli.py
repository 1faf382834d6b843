import csv
import filecmp
import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from prospectnet.cli import main
from prospectnet.io_utils import sha256_file

SYNTH_ARGS = ["--universe-size", "3000", "--audience-size", "300", "--seed", "7"]
FAST = ["--preset", "quick", "--ae-epochs", "2", "--epochs", "3"]


def invoke(*args):
    return CliRunner().invoke(main, [str(a) for a in args], catch_exceptions=False)


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth") / "data"
    res = invoke("synth", "--out", out, *SYNTH_ARGS)
    assert res.exit_code == 0, res.output
    return out


@pytest.fixture(scope="module")
def dl_run(tmp_path_factory, data_dir):
    out = tmp_path_factory.mktemp("runs") / "dl"
    res = invoke("train", "--data", data_dir, *FAST, "--seeds", "1,2,3", "--out", out)
    assert res.exit_code == 0, res.output
    return out, res.output


@pytest.fixture(scope="module")
def rf_run(tmp_path_factory, data_dir):
    out = tmp_path_factory.mktemp("runs") / "rf"
    res = invoke("train", "--data", data_dir, "--model", "rf", "--rf-trees", "8", "--seeds", "1,2,3", "--out", out)
    assert res.exit_code == 0, res.output
    return out


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def check_manifest(out: Path):
    manifest = json.loads((out / "manifest.json").read_text())
    for rel, digest in manifest["artifacts"].items():
        assert sha256_file(out / rel) == digest
    return manifest


def test_synth_writes_expected_files(data_dir):
    assert {p.name for p in data_dir.iterdir()} == {"schema.txt", "audience.csv", "universe.csv", "conversions.csv", "manifest.json"}
    assert len(rows(data_dir / "audience.csv")) == 301
    assert len(rows(data_dir / "universe.csv")) == 3001
    assert len(rows(data_dir / "conversions.csv")) == 3001  # every universe household
    assert check_manifest(data_dir)["seeds"] == [7]


def test_synth_is_byte_identical_for_the_same_seed(tmp_path, data_dir):
    res = invoke("synth", "--out", tmp_path / "again", *SYNTH_ARGS)
    assert res.exit_code == 0
    cmp = filecmp.dircmp(data_dir, tmp_path / "again")
    assert not cmp.diff_files and not cmp.left_only and not cmp.right_only
    assert all(filecmp.cmp(data_dir / f, tmp_path / "again" / f, shallow=False) for f in cmp.common_files)


def test_synth_validates_before_writing(tmp_path):
    out = tmp_path / "bad"
    res = invoke("synth", "--out", out, "--universe-size", "100", "--audience-size", "100")
    assert res.exit_code == 1
    assert not out.exists()


def test_non_empty_output_needs_force(tmp_path):
    out = tmp_path / "d"
    out.mkdir()
    (out / "keep.txt").write_text("x")
    res = invoke("synth", "--out", out, *SYNTH_ARGS)
    assert res.exit_code == 1 and "--force" in res.output
    assert invoke("synth", "--out", out, *SYNTH_ARGS, "--force").exit_code == 0


def test_train_emits_artifacts_and_seed_summary(dl_run):
    out, output = dl_run
    for seed in (1, 2, 3):
        assert {p.name for p in (out / f"seed_{seed}").iterdir()} == {"model.pknn", "autoencoder.pknn", "traces.csv", "metrics.txt"}
    assert "±" in output and "f_beta" in output
    summary = rows(out / "summary.csv")
    assert summary[0][:2] == ["split", "n_seeds"] and "precision_std" in summary[0]
    assert [r[0] for r in summary[1:]] == ["train", "test"]
    assert len(rows(out / "metrics.csv")) == 1 + 3 * 2
    manifest = check_manifest(out)
    assert manifest["seeds"] == [1, 2, 3] and manifest["config"]["encoded_size"] == 16


def test_train_is_byte_identical_across_repeats(tmp_path, data_dir, dl_run):
    out, _ = dl_run
    again = tmp_path / "again"
    assert invoke("train", "--data", data_dir, *FAST, "--seeds", "1,2,3", "--out", again).exit_code == 0
    files = sorted(p.relative_to(out) for p in out.rglob("*") if p.is_file())
    assert files == sorted(p.relative_to(again) for p in again.rglob("*") if p.is_file())
    for rel in files:
        assert (out / rel).read_bytes() == (again / rel).read_bytes(), rel


def test_rf_train_uses_same_report_layout(rf_run, dl_run):
    assert rows(rf_run / "summary.csv")[0] == rows(dl_run[0] / "summary.csv")[0]
    assert rows(rf_run / "metrics.csv")[0] == rows(dl_run[0] / "metrics.csv")[0]
    assert not (rf_run / "seed_1" / "autoencoder.pknn").exists()


def test_config_file_and_flag_precedence(tmp_path, data_dir):
    cfg_file = tmp_path / "cfg.json"
    cfg_file.write_text(json.dumps({"preset": "quick", "epochs": 1, "ratio": 2, "seeds": [5]}))
    out = tmp_path / "run"
    assert invoke("train", "--data", data_dir, "--config", cfg_file, "--ratio", "3", "--out", out).exit_code == 0
    config = json.loads((out / "config.json").read_text())
    assert (config["epochs"], config["ratio"], config["seeds"], config["encoded_size"]) == (1, 3, [5], 16)


def test_sweep_ratio(tmp_path, data_dir):
    out = tmp_path / "sweep"
    res = invoke("sweep", "ratio", "--values", "1,2", "--data", data_dir, *FAST, "--seeds", "0", "--out", out)
    assert res.exit_code == 0, res.output
    table = rows(out / "sweep.csv")
    assert len(table) == 1 + 4
    assert [r[1:3] for r in table[1:]] == [["1", "train"], ["1", "test"], ["2", "train"], ["2", "test"]]
    assert len({r[5] for r in table[1:] if r[2] == "test"}) == 1
    check_manifest(out)


def test_sweep_rejects_invalid_values(tmp_path, data_dir):
    out = tmp_path / "sweep"
    res = invoke("sweep", "encoder_size", "--values", "24", "--data", data_dir, "--out", out)
    assert res.exit_code == 1 and "24" in res.output
    assert not out.exists()


def test_rank_covers_the_universe(tmp_path, data_dir, dl_run):
    out = tmp_path / "rank"
    res = invoke("rank", "--model", dl_run[0] / "seed_1" / "model.pknn", "--universe", data_dir / "universe.csv", "--out", out)
    assert res.exit_code == 0, res.output
    ranked = rows(out / "ranked.csv")
    assert ranked[0] == ["rank", "record_id", "probability"]
    assert len(ranked) == 3001
    probs = [float(r[2]) for r in ranked[1:]]
    assert probs == sorted(probs, reverse=True)
    check_manifest(out)


def test_rank_names_missing_column(tmp_path, data_dir, dl_run):
    broken = tmp_path / "u.csv"
    table = rows(data_dir / "universe.csv")
    with open(broken, "w", newline="") as fh:
        csv.writer(fh).writerows([r[:-1] for r in table])  # drop the last column
    res = invoke("rank", "--model", dl_run[0] / "seed_1" / "model.pknn", "--universe", broken, "--out", tmp_path / "o")
    assert res.exit_code == 3 and "cat_3" in res.output


def test_campaign_two_models(tmp_path, data_dir, dl_run, rf_run):
    out = tmp_path / "camp"
    res = invoke(
        "campaign",
        "--model", dl_run[0] / "seed_1" / "model.pknn", "--tag", "DL-AE",
        "--model", rf_run / "seed_1" / "model.pknn", "--tag", "RF",
        "--universe", data_dir / "universe.csv", "--exclude", data_dir / "audience.csv",
        "--conversions", data_dir / "conversions.csv", "--reach", "400", "--window", "30d",
        "--out", out,
    )
    assert res.exit_code == 0, res.output
    report = rows(out / "campaign.csv")
    assert report[0][:5] == ["Method", "Audience", "Reach", "#CNV", "CVR"]
    assert [r[0] for r in report[1:]] == ["DL-AE", "RF"]
    assert all(r[2] == "400" and r[4].endswith("%") and r[6] == "30d" for r in report[1:])
    assert (out / "comparison.csv").exists()
    assert len(rows(out / "ranked_1_DL-AE.csv")) == 3001
    check_manifest(out)


def test_campaign_reach_beyond_universe(tmp_path, data_dir, dl_run):
    res = invoke(
        "campaign", "--model", dl_run[0] / "seed_1" / "model.pknn",
        "--universe", data_dir / "universe.csv", "--conversions", data_dir / "conversions.csv",
        "--reach", "3001", "--out", tmp_path / "c",
    )
    assert res.exit_code == 1 and "exceeds" in res.output
    assert not (tmp_path / "c").exists()


def test_compare_runs(tmp_path, dl_run, rf_run):
    out = tmp_path / "cmp"
    res = invoke("compare", dl_run[0], rf_run, "--tag", "DL-AE", "--tag", "RF", "--out", out)
    assert res.exit_code == 0, res.output
    table = rows(out / "comparison.csv")
    assert table[0][0] == "model" and table[0][-1] == "DL-AE W/T/L"
    wins, ties, losses = map(int, table[2][-1].split("/"))
    assert wins + ties + losses == 3


def test_compare_rejects_mismatched_seeds(tmp_path, data_dir, dl_run):
    other = tmp_path / "other"
    assert invoke("train", "--data", data_dir, *FAST, "--seeds", "9", "--out", other).exit_code == 0
    res = invoke("compare", dl_run[0], other, "--out", tmp_path / "c")
    assert res.exit_code == 1 and "seed" in res.output
