import csv
import json

import pytest
from typer.testing import CliRunner

from advstyle_lab.cli import app
from advstyle_lab.errors import ConfigError
from advstyle_lab.helper.config_utils import apply_overrides, load_run_config, validate_seeds
from advstyle_lab.models import ModelSpec, RunConfigFile, TrainConfig

runner = CliRunner()

TINY_CONFIG = RunConfigFile(
    model=ModelSpec(widths=(4, 8, 8, 8, 8)),
    train=TrainConfig(epochs=1, batch_size=32, lr=0.05),
)


def invoke(*args):
    result = runner.invoke(app, [str(a) for a in args])
    payload = json.loads(result.stdout.strip().splitlines()[-1]) if result.stdout.strip() else {}
    return result, payload


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    config = root / "config.json"
    config.write_text(TINY_CONFIG.canonical_json())
    result, payload = invoke("gen-data", "--seed", 1, "--out", root / "data", "--train-size", 70, "--target-size", 35)
    assert result.exit_code == 0, result.stdout
    assert payload["data"]["sizes"] == {"train": 70, "target_1": 35, "target_2": 35, "target_3": 35}
    return root


@pytest.fixture(scope="module")
def trained(workspace):
    out = workspace / "run"
    result, _ = invoke("train", "--config", workspace / "config.json", "--data", workspace / "data", "--out", out)
    assert result.exit_code == 0, result.stdout
    return out


@pytest.mark.parametrize("command", ["gen-data", "train", "eval", "gradcheck", "sweep", "adistance"])
def test_every_command_has_help(command):
    result = runner.invoke(app, [command, "--help"])
    assert result.exit_code == 0
    assert "--" in result.stdout


def test_train_help_lists_overrides():
    result = runner.invoke(app, ["train", "--help"])
    flags = ("--seed", "--epochs", "--method", "--points", "--lam", "--variant", "--asa-mode", "--dtype", "--protocol")
    for flag in flags + ("--held-out",):
        assert flag in result.stdout


def test_gen_data_is_byte_deterministic(workspace, tmp_path):
    result, _ = invoke("gen-data", "--seed", 1, "--out", tmp_path, "--train-size", 70, "--target-size", 35)
    assert result.exit_code == 0
    for path in sorted((workspace / "data").iterdir()):
        assert (tmp_path / path.name).read_bytes() == path.read_bytes(), path.name


def test_gen_data_rejects_tiny_split(tmp_path):
    result, payload = invoke("gen-data", "--out", tmp_path, "--train-size", 3)
    assert result.exit_code == 1
    assert payload["message"].startswith("data.train_size")


def test_train_writes_artifacts(trained):
    for name in ("checkpoint.advt", "runlog.jsonl", "config.json", "timings.json"):
        assert (trained / name).is_file(), name
    lines = (trained / "runlog.jsonl").read_text().splitlines()
    assert len(lines) == TINY_CONFIG.train.epochs + 1
    assert json.loads(lines[-1])["config_hash"] == TINY_CONFIG.config_hash()


def test_train_is_byte_deterministic(workspace, trained, tmp_path):
    result, _ = invoke("train", "--config", workspace / "config.json", "--data", workspace / "data", "--out", tmp_path)
    assert result.exit_code == 0
    for name in ("checkpoint.advt", "runlog.jsonl", "config.json"):
        assert (tmp_path / name).read_bytes() == (trained / name).read_bytes(), name


def test_train_overrides_and_periodic_checkpoints(workspace, tmp_path):
    result, payload = invoke(
        "train",
        "--config", workspace / "config.json",
        "--data", workspace / "data",
        "--out", tmp_path,
        "--epochs", 2,
        "--checkpoint-every", 1,
        "--method", "mixstyle",
        "--points", "block1,conv1",
    )
    assert result.exit_code == 0, result.stdout
    assert (tmp_path / "checkpoint_epoch1.advt").is_file()
    assert (tmp_path / "checkpoint_epoch2.advt").is_file()
    saved = load_run_config(tmp_path / "config.json")
    assert saved.train.epochs == 2
    assert saved.model.method == "mixstyle"
    assert saved.model.insertion_points == ("conv1", "block1")
    assert payload["data"]["sigma_norms"] == {}


@pytest.mark.parametrize(
    "args, key",
    [
        (["--lam", "-1"], "method.lam"),
        (["--method", "cutout"], "model.method"),
        (["--dtype", "float16"], "train.dtype"),
        (["--points", "conv1,conv1"], "model.insertion_points"),
    ],
)
def test_train_rejects_invalid_values(workspace, tmp_path, args, key):
    result, payload = invoke(
        "train", "--config", workspace / "config.json", "--data", workspace / "data", "--out", tmp_path, *args
    )
    assert result.exit_code == 1
    assert payload["message"].startswith(key)


def test_train_rejects_unknown_config_key(workspace, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"train": {"epochs": 1, "warmup": 3}}))
    result, payload = invoke("train", "--config", bad, "--data", workspace / "data", "--out", tmp_path / "out")
    assert result.exit_code == 1
    assert payload["message"].startswith("train.warmup")


def test_train_missing_paths(workspace, tmp_path):
    result, payload = invoke("train", "--data", tmp_path / "nowhere", "--out", tmp_path)
    assert result.exit_code == 1
    assert payload["message"].startswith("--data")
    missing = tmp_path / "none.json"
    result, payload = invoke("train", "--config", missing, "--data", workspace / "data", "--out", tmp_path)
    assert result.exit_code == 1
    assert payload["message"].startswith("--config")


def test_train_rejects_mismatched_image_size(workspace, tmp_path):
    config = TINY_CONFIG.model_copy(update={"model": ModelSpec(height=16, width=16, widths=(4, 8, 8, 8, 8))})
    path = tmp_path / "small.json"
    path.write_text(config.canonical_json())
    result, payload = invoke("train", "--config", path, "--data", workspace / "data", "--out", tmp_path / "x")
    assert result.exit_code == 1
    assert payload["message"].startswith("model")


def test_eval_report_and_determinism(workspace, trained, tmp_path):
    outputs = []
    for name in ("a", "b"):
        out = tmp_path / name
        result, payload = invoke(
            "eval", "--checkpoint", trained / "checkpoint.advt", "--data", workspace / "data", "--out", out,
            "--run-id", "tiny", "--batch-size", 16 if name == "a" else 256,
        )
        assert result.exit_code == 0, result.stdout
        outputs.append(((out / "metrics.json").read_bytes(), (out / "metrics.csv").read_bytes()))
    assert outputs[0] == outputs[1]
    report = json.loads(outputs[0][0])
    assert set(report["domain_accuracies"]) == {"target_1", "target_2", "target_3"}
    assert report["config_hash"] == TINY_CONFIG.config_hash()
    header = outputs[0][1].decode().splitlines()[0]
    assert header == "run_id,config_hash,source_accuracy,mean,std,acc_target_1,acc_target_2,acc_target_3"


def test_eval_needs_two_known_domains(workspace, trained, tmp_path):
    common = ("eval", "--checkpoint", trained / "checkpoint.advt", "--data", workspace / "data", "--out", tmp_path)
    result, payload = invoke(*common, "--domains", "target_1")
    assert result.exit_code == 1
    result, payload = invoke(*common, "--domains", "target_1,target_9")
    assert result.exit_code == 1
    assert "target_9" in payload["message"]
    result, _ = invoke(*common, "--domains", "target_1,target_3")
    assert result.exit_code == 0


def test_gen_data_reads_the_data_section(workspace, tmp_path):
    config = tmp_path / "data.json"
    data = {"seed": 9, "train_size": 70, "target_size": 35, "gain_jitter": 0.1, "contrast_range": [0.8, 1.2]}
    config.write_text(json.dumps({"data": {**data, "jitter": {"translation": 0}}}))
    result, payload = invoke("gen-data", "--config", config, "--seed", 1, "--out", tmp_path / "data")
    assert result.exit_code == 0, result.stdout
    assert payload["data"]["seed"] == 1
    manifest = json.loads((tmp_path / "data" / "manifest.json").read_text())
    reference = json.loads((workspace / "data" / "manifest.json").read_text())
    assert manifest["jitter"]["translation"] == 0
    for split, spec in manifest["domains"].items():
        assert spec["gain_jitter"] == 0.1
        assert spec["contrast_range"] == [0.8, 1.2]
        assert spec["palettes"] == reference["domains"][split]["palettes"]


def test_gen_data_rejects_unknown_domain(tmp_path):
    config = tmp_path / "data.json"
    spec = {"domain_id": 7, "palettes": [{"gain": [1, 1, 1], "bias": [0, 0, 0]}], "correlation": "decorrelated"}
    config.write_text(json.dumps({"data": {"domains": {"validation": spec}}}))
    result, payload = invoke("gen-data", "--config", config, "--out", tmp_path / "data")
    assert result.exit_code == 1
    assert payload["message"].startswith("data.domains")


@pytest.fixture(scope="module")
def held_out_run(workspace):
    out = workspace / "loo"
    result, _ = invoke(
        "train", "--config", workspace / "config.json", "--data", workspace / "data", "--out", out,
        "--protocol", "leave_one_out", "--held-out", "target_2",
    )
    assert result.exit_code == 0, result.stdout
    return out


def test_leave_one_out_run_is_tested_on_its_held_out_split(workspace, held_out_run, tmp_path):
    saved = load_run_config(held_out_run / "config.json")
    assert (saved.data.protocol, saved.data.held_out) == ("leave_one_out", "target_2")
    common = ("eval", "--checkpoint", held_out_run / "checkpoint.advt", "--data", workspace / "data")
    result, payload = invoke(*common, "--out", tmp_path / "a")
    assert result.exit_code == 0, result.stdout
    report = payload["data"]["report"]
    assert list(report["domain_accuracies"]) == ["target_2"]
    assert report["mean"] == report["domain_accuracies"]["target_2"]
    assert report["std"] == 0.0
    result, payload = invoke(*common, "--out", tmp_path / "b", "--domains", "target_1")
    assert result.exit_code == 1
    assert payload["message"].startswith("--domains")


def test_adistance_outputs(workspace, trained, tmp_path):
    result, payload = invoke(
        "adistance", "--checkpoint", trained / "checkpoint.advt", "--data", workspace / "data", "--out", tmp_path,
        "--epochs", 20,
    )
    assert result.exit_code == 0, result.stdout
    distances = json.loads((tmp_path / "adistance.json").read_text())
    assert set(distances) == {"train:target_1", "train:target_2", "train:target_3"}
    assert all(0.0 <= d <= 2.0 for d in distances.values())
    lines = (tmp_path / "pca.csv").read_text().splitlines()
    assert lines[0] == "split,index,pc1,pc2"
    assert len(lines) == 1 + 70 + 3 * 35
    assert len(payload["data"]["explained_variance_ratio"]) == 2


def test_adistance_rejects_bad_pairs(workspace, trained, tmp_path):
    result, _ = invoke(
        "adistance", "--checkpoint", trained / "checkpoint.advt", "--data", workspace / "data", "--out", tmp_path,
        "--pairs", "train:train",
    )
    assert result.exit_code == 1


def test_gradcheck_ops_passes(tmp_path):
    result, payload = invoke("gradcheck", "--scope", "ops", "--out", tmp_path / "ops.json")
    assert result.exit_code == 0, payload.get("message")
    assert payload["data"]["failed"] == []
    assert len(json.loads((tmp_path / "ops.json").read_text())) == payload["data"]["checks"]


def test_gradcheck_unknown_scope():
    result, _ = invoke("gradcheck", "--scope", "everything")
    assert result.exit_code == 1


def test_sweep_rows_follow_grid_and_seeds(workspace, tmp_path):
    grid = tmp_path / "grid.json"
    cells = {"method": ["none", "advstyle"], "insertion_points": [["conv1"], ["conv1", "block4"]], "lam": [1.0, 5.0]}
    grid.write_text(json.dumps(cells))
    result, payload = invoke(
        "sweep", "--grid", grid, "--data", workspace / "data", "--out", tmp_path / "sweep",
        "--config", workspace / "config.json", "--seeds", "0-1",
    )
    assert result.exit_code == 0, result.stdout
    assert payload["data"]["rows"] == 6 * 2
    lines = (tmp_path / "sweep" / "sweep.csv").read_text().splitlines()
    assert lines[0].startswith("method,insertion_points,lam,variant,asa_mode,protocol,seed,run_id")
    assert len(lines) == 1 + 12
    assert [line.split(",")[6] for line in lines[1:3]] == ["0", "1"]


def test_sweep_protocol_axis_rotates_the_held_out_split(workspace, tmp_path):
    grid = tmp_path / "grid.json"
    grid.write_text(json.dumps({"method": ["none"], "protocol": ["single_source", "leave_one_out"]}))
    result, payload = invoke(
        "sweep", "--grid", grid, "--data", workspace / "data", "--out", tmp_path / "sweep",
        "--config", workspace / "config.json",
    )
    assert result.exit_code == 0, result.stdout
    assert payload["data"]["rows"] == 2
    single, held_out = csv.DictReader((tmp_path / "sweep" / "sweep.csv").read_text().splitlines())
    assert single["protocol"] == "single_source" and single["acc_train"] == ""
    assert held_out["protocol"] == "leave_one_out"
    assert all(held_out[f"acc_{split}"] for split in ("train", "target_1", "target_2", "target_3"))


def test_sweep_rejects_unknown_axis(workspace, tmp_path):
    grid = tmp_path / "grid.json"
    grid.write_text(json.dumps({"dropout": [0.1]}))
    result, payload = invoke("sweep", "--grid", grid, "--data", workspace / "data", "--out", tmp_path)
    assert result.exit_code == 1
    assert payload["message"].startswith("grid.dropout")


def test_sweep_rejects_bad_seeds(workspace, tmp_path):
    grid = tmp_path / "grid.json"
    grid.write_text(json.dumps({"method": ["none"]}))
    result, _ = invoke("sweep", "--grid", grid, "--data", workspace / "data", "--out", tmp_path, "--seeds", "1,1")
    assert result.exit_code == 1


def test_bad_log_level_is_usage_error():
    result = runner.invoke(app, ["--log-level", "LOUD", "gradcheck", "--help"])
    assert result.exit_code != 0


def test_config_round_trip(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(TINY_CONFIG.canonical_json())
    loaded = load_run_config(path)
    assert loaded == TINY_CONFIG
    assert loaded.canonical_json() == TINY_CONFIG.canonical_json()


def test_config_precedence(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"train": {"epochs": 3, "lr": 0.2}}))
    config = load_run_config(path, {"train.epochs": 5, "train.seed": None})
    assert config.train.epochs == 5
    assert config.train.lr == 0.2
    assert config.train.seed == TrainConfig().seed
    assert config.method.lam == 5.0


def test_override_key_shape():
    with pytest.raises(ConfigError):
        apply_overrides({}, {"epochs": 3})
    with pytest.raises(ConfigError):
        apply_overrides({}, {"optimizer.lr": 0.1})


@pytest.mark.parametrize(
    "text, seeds", [(None, [7]), ("0,1,2", [0, 1, 2]), ("0-4", [0, 1, 2, 3, 4]), ("3, 5-6", [3, 5, 6])]
)
def test_seed_lists(text, seeds):
    assert validate_seeds(text, default=(7,)) == {"valid": True, "seeds": seeds}


@pytest.mark.parametrize("text", ["a", "1,1", "-1"])
def test_bad_seed_lists(text):
    assert not validate_seeds(text)["valid"]
