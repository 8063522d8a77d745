import csv
import json
import struct

import numpy as np
import pytest

from mbd.cli import main
from mbd.demos import Demonstration
from mbd.experiment import (ExperimentError, RunConfig, downsample_trace, list_tasks,
                            resolve_task, run_experiment)
from mbd.idx import IdxError, load_idx, write_idx


def _config(tmp_path, **kw):
    d = dict(task="pendulum_swingup", seeds=list(range(8)), n_steps=10, n_samples=16,
             out_dir=str(tmp_path / "out"))
    d.update(kw)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(d))
    return path


class TestIdx:
    def _pair(self, tmp_path):
        img, lab = tmp_path / "img.idx", tmp_path / "lab.idx"
        img.write_bytes(struct.pack(">IIII", 0x803, 2, 2, 2) + bytes([0, 255, 51, 102,
                                                                       1, 2, 3, 4]))
        lab.write_bytes(struct.pack(">II", 0x801, 2) + bytes([7, 3]))
        return img, lab

    def test_hand_crafted_pair(self, tmp_path):
        x, y = load_idx(*self._pair(tmp_path))
        assert x.shape == (2, 4)
        np.testing.assert_allclose(x[0], [0.0, 1.0, 0.2, 0.4])
        assert y.tolist() == [7, 3]

    def test_writer_round_trip(self, tmp_path):
        imgs = np.arange(3 * 4 * 5, dtype=np.uint8).reshape(3, 4, 5)
        write_idx(imgs, [1, 2, 9], tmp_path / "a", tmp_path / "b")
        x, y = load_idx(tmp_path / "a", tmp_path / "b")
        np.testing.assert_allclose(x * 255, imgs.reshape(3, 20))
        assert y.tolist() == [1, 2, 9]

    def test_bad_magic(self, tmp_path):
        img, lab = self._pair(tmp_path)
        lab.write_bytes(struct.pack(">II", 0x803, 2) + bytes([7, 3]))
        with pytest.raises(IdxError) as exc:
            load_idx(img, lab)
        assert exc.value.code == "BAD_MAGIC"

    def test_truncated(self, tmp_path):
        img, lab = self._pair(tmp_path)
        img.write_bytes(img.read_bytes()[:-1])
        with pytest.raises(IdxError) as exc:
            load_idx(img, lab)
        assert exc.value.code == "TRUNCATED_FILE"

    def test_count_mismatch(self, tmp_path):
        img, lab = self._pair(tmp_path)
        lab.write_bytes(struct.pack(">II", 0x801, 3) + bytes([7, 3, 1]))
        with pytest.raises(IdxError) as exc:
            load_idx(img, lab)
        assert exc.value.code == "DIM_MISMATCH"


class TestConfig:
    def test_unknown_task_exit_code(self, tmp_path, capsys):
        assert main(["run", "--config", str(_config(tmp_path, task="moon_lander"))]) == 2
        err = capsys.readouterr().err
        assert "TASK_UNKNOWN" in err and "moon_lander" in err and len(err.splitlines()) == 1

    @pytest.mark.parametrize("bad", [dict(seeds=[]), dict(method="ga"), dict(n_samples=0),
                                     dict(temperature=-1.0), dict(colour="red")])
    def test_invalid(self, tmp_path, bad):
        d = dict(task="pendulum_swingup", seeds=[0])
        d.update(bad)
        with pytest.raises(ExperimentError) as exc:
            RunConfig.from_dict(d)
        assert exc.value.code == "CONFIG_INVALID"

    def test_missing_file(self, tmp_path, capsys):
        assert main(["run", "--config", str(tmp_path / "nope.json")]) == 3
        assert "IO_ERROR" in capsys.readouterr().err

    def test_resolve(self):
        assert resolve_task("ackley7").dim == 7
        assert resolve_task("car2d_umaze").horizon == 50
        assert "double_integrator_2d" in list_tasks()
        with pytest.raises(ExperimentError):
            resolve_task("ackley0")


class TestRun:
    def test_pendulum_eight_seeds(self, tmp_path):
        assert main(["run", "--config", str(_config(tmp_path))]) == 0
        out = tmp_path / "out"
        agg = json.loads((out / "aggregate.json").read_text())
        assert agg["n_seeds"] == 8 and len(agg["per_seed"]) == 8
        assert np.isfinite(agg["std_cost"]) and np.isfinite(agg["mean_wall_time_ms"])
        assert 0.0 <= agg["success_rate"] <= 1.0
        # statistics recomputed from the trace files
        best = []
        for s in range(8):
            with open(out / f"trace_seed{s}.csv") as fh:
                rows = list(csv.DictReader(fh))
            assert len(rows) == 10
            best.append(float(rows[-1]["j_min"]))
        assert abs(np.mean(best) - agg["mean_cost"]) <= 1e-9
        assert abs(np.std(best) - agg["std_cost"]) <= 1e-9
        summary = json.loads((out / "summary_seed3.json").read_text())
        assert summary["seed"] == 3 and summary["config"]["seed"] == 3

    def test_traces_byte_identical(self, tmp_path):
        cfg = _config(tmp_path, task="car2d_umaze", seeds=[0, 1])
        main(["run", "--config", str(cfg), "--out", str(tmp_path / "a")])
        main(["run", "--config", str(cfg), "--out", str(tmp_path / "b")])
        for s in (0, 1):
            name = f"trace_seed{s}.csv"
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_seed_override(self, tmp_path):
        main(["run", "--config", str(_config(tmp_path)), "--seed-override", "5"])
        files = sorted(p.name for p in (tmp_path / "out").glob("trace_*"))
        assert files == ["trace_seed5.csv"]

    @pytest.mark.parametrize("method,extra", [("cem", {}), ("mppi", {"noise_std": 0.2})])
    def test_baselines(self, tmp_path, method, extra):
        cfg = RunConfig.from_dict(dict(task="double_integrator_2d", seeds=[0], method=method,
                                       n_steps=5, n_samples=8, out_dir=str(tmp_path),
                                       mppi=extra if method == "mppi" else {}))
        assert run_experiment(cfg) == 0
        assert json.loads((tmp_path / "aggregate.json").read_text())["method"] == method

    def test_objective_task(self, tmp_path):
        cfg = RunConfig.from_dict(dict(task="rastrigin3", seeds=[0, 1], n_steps=5,
                                       out_dir=str(tmp_path)))
        assert run_experiment(cfg) == 0
        agg = json.loads((tmp_path / "aggregate.json").read_text())
        assert agg["success_rate"] is None

    def test_demo_from_csv(self, tmp_path):
        assert main(["demo-gen", "--out", str(tmp_path / "demo.csv")]) == 0
        demo = Demonstration.from_csv(tmp_path / "demo.csv")
        assert demo.values.shape == (50, 5) and demo.sigma == 0.1
        cfg = RunConfig.from_dict(dict(task="car2d_umaze", seeds=[0], n_steps=5,
                                       out_dir=str(tmp_path / "run"),
                                       demo={"csv": str(tmp_path / "demo.csv")}))
        assert run_experiment(cfg) == 0


class TestPlotData:
    def test_downsample(self, tmp_path, capsys):
        main(["run", "--config", str(_config(tmp_path, seeds=[0], n_steps=50))])
        capsys.readouterr()
        trace = tmp_path / "out" / "trace_seed0.csv"
        rows = downsample_trace(trace, 7)
        full = trace.read_text().splitlines()
        assert len(rows) == 8
        assert ",".join(rows[1]) == full[1] and ",".join(rows[-1]) == full[-1]
        assert main(["plot-data", "--trace", str(trace), "--max-rows", "5"]) == 0
        assert len(capsys.readouterr().out.splitlines()) == 6

    def test_list_tasks(self, capsys):
        assert main(["list-tasks"]) == 0
        assert "car2d_umaze" in capsys.readouterr().out.split()
