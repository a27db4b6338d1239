import csv
import json

import numpy as np
import pytest

from stdgi.checkpoint import read_embeddings_header
from stdgi.cli import main
from stdgi.dataset import load_features_csv

T, N = 400, 6
SMALL = {
    "graph": {"num_nodes": N},
    "data": {"T": T},
    "pretrain": {"epochs": 3, "warm_epochs": 1, "period": 1},
    "regressor": {"epochs": 2, "warm_epochs": 1, "period": 1, "max_train_samples": 512},
    "metrics": {"dump_predictions": True},
    "seeds": [0, 1],
}


def write_config(tmp_path, out, **over):
    raw = json.loads(json.dumps(SMALL))
    for section, vals in over.items():
        if isinstance(vals, dict):
            raw.setdefault(section, {}).update(vals)
        else:
            raw[section] = vals
    raw["output_dir"] = str(out)
    path = tmp_path / f"cfg_{out.name}.json"
    path.write_text(json.dumps(raw))
    return str(path)


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("cli")
    out = tmp / "out"
    cfg = write_config(tmp, out)
    for cmd in ("synth", "pretrain", "embed", "train", "eval", "compare"):
        assert main([cmd, "--config", cfg]) == 0, cmd
    return out, cfg


def test_synth_files_and_row_count(run_dir):
    out, _ = run_dir
    with open(out / "features.csv") as fh:
        assert sum(1 for _ in fh) == T * N + 1
    assert (out / "edges.csv").exists()


def test_synth_byte_identical(tmp_path, run_dir):
    out, _ = run_dir
    other = tmp_path / "again"
    assert main(["synth", "--config", write_config(tmp_path, other)]) == 0
    for name in ("features.csv", "edges.csv"):
        assert (other / name).read_bytes() == (out / name).read_bytes()


def test_synth_rejects_alpha_before_writing(tmp_path, capsys):
    out = tmp_path / "bad"
    assert main(["synth", "--config", write_config(tmp_path, out, data={"alpha": 1.5})]) == 2
    assert not out.exists()
    assert "alpha" in capsys.readouterr().err


def test_unknown_config_key_exit_code(tmp_path):
    assert main(["synth", "--config", write_config(tmp_path, tmp_path / "o", data={"speed": 1})]) == 2


def test_unwritable_output_dir(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["synth", "--config", write_config(tmp_path, blocker / "sub")]) == 3


def test_missing_data_files(tmp_path, capsys):
    out = tmp_path / "nothing"
    assert main(["pretrain", "--config", write_config(tmp_path, out)]) == 3
    assert "features.csv" in capsys.readouterr().err


def test_pretrain_history_lines(run_dir):
    out, _ = run_dir
    lines = (out / "seed_0" / "pretrain_history.jsonl").read_text().splitlines()
    assert len(lines) == 3
    assert [json.loads(l)["epoch"] for l in lines] == [0, 1, 2]


def test_pretrain_rerun_identical(tmp_path, run_dir):
    out, cfg = run_dir
    before = (out / "seed_1" / "pretrain_history.jsonl").read_bytes()
    assert main(["pretrain", "--config", cfg, "--seed", "1"]) == 0
    assert (out / "seed_1" / "pretrain_history.jsonl").read_bytes() == before


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_pretrain_divergence_exit_code(tmp_path):
    out = tmp_path / "div"
    cfg = write_config(tmp_path, out, pretrain={"base_lr": 1e300})
    assert main(["synth", "--config", cfg]) == 0
    assert main(["pretrain", "--config", cfg, "--seed", "0"]) == 4


def test_embed_outputs(run_dir):
    out, _ = run_dir
    assert read_embeddings_header(out / "seed_0" / "embeddings.bin") == (T, N, 128)
    speed = load_features_csv(out / "features.csv").speed
    with open(out / "seed_0" / "pca.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == T * N
    for i in (0, 7, 1234, T * N - 3 * N - 1):
        r = rows[i]
        t, v = int(r["t"]), int(r["node"])
        assert float(r["speed_t_plus_3"]) == speed[t + 3, v]
    assert rows[-1]["speed_t_plus_3"] == "nan"


def test_embed_dim_mismatch(tmp_path, run_dir):
    out, _ = run_dir
    cfg = write_config(tmp_path, out, pretrain={"embed_dim": 64})
    assert main(["embed", "--config", cfg, "--seed", "0"]) == 2


def test_baseline_trains_without_embeddings(tmp_path, capsys):
    out = tmp_path / "base"
    cfg = write_config(tmp_path, out)
    assert main(["synth", "--config", cfg]) == 0
    assert main(["train", "--config", cfg, "--seed", "0", "--mode", "baseline"]) == 0
    assert "input dim 2" in capsys.readouterr().out
    assert main(["train", "--config", cfg, "--seed", "0", "--mode", "stdgi"]) == 2


def test_train_history_and_stdgi_dim(tmp_path, run_dir, capsys):
    out, cfg = run_dir
    hist = [json.loads(l) for l in (out / "seed_0" / "train_history_baseline.jsonl").read_text().splitlines()]
    assert hist[0]["epoch"] == -1 and len(hist) == 3
    assert min(h["val_mae"] for h in hist[1:]) < hist[0]["val_mae"]
    assert main(["train", "--config", cfg, "--seed", "0", "--mode", "stdgi"]) == 0
    assert "input dim 130" in capsys.readouterr().out


def test_eval_report_horizons(run_dir):
    out, _ = run_dir
    for mode in ("baseline", "stdgi"):
        rep = json.loads((out / "seed_0" / f"report_{mode}.json").read_text())
        assert {h["horizon"] for h in rep["horizons"]} == {3, 6, 12}
        assert rep["mode"] == mode


def test_predictions_dump(run_dir):
    out, _ = run_dir
    with open(out / "seed_0" / "predictions_baseline.csv") as fh:
        header = fh.readline().strip()
        n = sum(1 for _ in fh)
    assert header == "sample,node,step,pred,true"
    assert n % (N * 12) == 0 and n > 0


def test_compare_outputs(run_dir, capsys):
    out, cfg = run_dir
    cmp = json.loads((out / "comparison.json").read_text())
    assert set(cmp["relative_improvement"]["mae"]) == {"3", "6", "12"}
    assert "15 min" in (out / "comparison.txt").read_text()
    assert main(["compare", "--config", cfg]) == 0
    assert "60 min" in capsys.readouterr().out


def test_compare_missing_seed_is_io_error(tmp_path, run_dir):
    out, _ = run_dir
    assert main(["compare", "--config", write_config(tmp_path, out, seeds=[0, 5])]) == 3


def test_print_config_round_trip(tmp_path, capsys):
    cfg = write_config(tmp_path, tmp_path / "p")
    assert main(["--print-config", "--config", cfg]) == 0
    printed = capsys.readouterr().out
    (tmp_path / "eff.json").write_text(printed)
    assert main(["--print-config", "--config", str(tmp_path / "eff.json")]) == 0
    assert capsys.readouterr().out == printed
    assert json.loads(printed)["pretrain"]["epochs"] == 3


def test_missing_command():
    with pytest.raises(SystemExit):
        main([])
