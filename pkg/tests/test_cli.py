import json
import subprocess
import sys
from pathlib import Path

import pytest

from lm_attr.cli import main

from .conftest import interests_result

DEMO_PATH = Path(__file__).parents[1] / "demos" / "bio_ablation.json"
DEMO = json.loads(DEMO_PATH.read_text())
GOLDEN = Path(__file__).parent / "golden"


def write_config(tmp_path, name="cfg.json", **sections):
    doc = json.loads(json.dumps(DEMO))
    for key, value in sections.items():
        doc[key] = value
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


class TestRun:
    def test_bio_result_file(self, tmp_path, capsys):
        out = tmp_path / "r.json"
        code, stdout, stderr = run(capsys, "run", "--config", str(DEMO_PATH), "--out", str(out))
        assert code == 0
        doc = json.loads(out.read_text())
        assert doc["version"] == 1
        assert doc["features"] == ["Dave", "Palm Coast", "FL", "lawyer", "His"]
        assert len(doc["matrix"]) == 8 and all(len(r) == 5 for r in doc["matrix"])
        assert doc["meta"]["method"] == "ablation" and doc["meta"]["wall_ms"] is None
        assert stdout.splitlines()[-1].startswith("total")
        assert "wall time" in stderr

    def test_unknown_method(self, tmp_path, capsys):
        cfg = write_config(tmp_path, method={"name": "banzhaf"})
        code, _, err = run(capsys, "run", "--config", cfg)
        assert code == 2
        for name in ("ablation", "shapley-exact", "shapley-sampling", "lime", "kernel-shap"):
            assert name in err
        assert "$.method.name" in err

    def test_schema_path_reported(self, tmp_path, capsys):
        doc = json.loads(DEMO_PATH.read_text())
        doc["input"]["values"] = 3
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(doc))
        code, _, err = run(capsys, "run", "--config", str(path))
        assert code == 2 and "$.input.values" in err

    def test_unreadable_config(self, tmp_path, capsys):
        assert run(capsys, "run", "--config", str(tmp_path / "missing.json"))[0] == 2

    def test_same_seed_byte_identical(self, tmp_path, capsys):
        cfg = write_config(tmp_path, method={"name": "shapley-sampling", "n_permutations": 5})
        outs = []
        for i, workers in enumerate(["1", "1", "4"]):
            out = tmp_path / f"r{i}.json"
            assert run(capsys, "run", "--config", cfg, "--seed", "11", "--workers", workers, "--out", str(out))[0] == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1] == outs[2]

    def test_seed_override(self, tmp_path, capsys):
        cfg = write_config(tmp_path, method={"name": "shapley-sampling", "n_permutations": 3, "seed": 1})
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        run(capsys, "run", "--config", cfg, "--out", str(a))
        run(capsys, "run", "--config", cfg, "--seed", "2", "--out", str(b))
        assert json.loads(a.read_text())["meta"]["seed"] == 1
        assert json.loads(b.read_text())["meta"]["seed"] == 2

    def test_timing_flag(self, tmp_path, capsys):
        out = tmp_path / "r.json"
        run(capsys, "run", "--config", str(DEMO_PATH), "--out", str(out), "--timing")
        assert json.loads(out.read_text())["meta"]["wall_ms"] >= 0

    def test_figure(self, tmp_path, capsys):
        fig = tmp_path / "fig.png"
        assert run(capsys, "run", "--config", str(DEMO_PATH), "--figure", str(fig))[0] == 0
        assert fig.read_bytes()[:4] == b"\x89PNG"

    def test_transport_error_exit_3(self, tmp_path, capsys):
        cfg = write_config(
            tmp_path,
            model={"type": "http", "base_url": "http://127.0.0.1:9/v1", "model": "x", "max_retries": 0},
        )
        code, _, err = run(capsys, "run", "--config", cfg, "--timeout-s", "2")
        assert code == 3 and "backend error" in err

    def test_capability_error_exit_2(self, tmp_path, capsys):
        cfg = write_config(tmp_path, method={"name": "saliency"})
        assert run(capsys, "run", "--config", cfg)[0] == 2

    def test_toylm_gradient_config(self, tmp_path, capsys):
        cfg = write_config(
            tmp_path,
            model={"type": "toylm", "seed": 0},
            method={"name": "integrated-gradients", "steps": 8},
            target={"type": "string", "text": "golf, hiking,"},
        )
        out = tmp_path / "r.json"
        assert run(capsys, "run", "--config", cfg, "--out", str(out))[0] == 0
        assert json.loads(out.read_text())["target_tokens"] == ["golf,", "hiking,"]

    def test_subprocess_backend(self, tmp_path, capsys):
        cfg = write_config(
            tmp_path,
            model={"type": "subprocess",
                   "command": [sys.executable, "-m", "lm_attr.model.child", "--model", json.dumps(DEMO["model"])]},
        )
        direct = tmp_path / "direct.json"
        remote = tmp_path / "remote.json"
        run(capsys, "run", "--config", str(DEMO_PATH), "--out", str(direct))
        assert run(capsys, "run", "--config", cfg, "--out", str(remote))[0] == 0
        a, b = json.loads(direct.read_text()), json.loads(remote.read_text())
        assert a["matrix"] == b["matrix"]


class TestRender:
    def saved(self, tmp_path, result=None):
        path = tmp_path / "result.json"
        path.write_text((result or interests_result()).to_json())
        return str(path)

    def test_terminal_golden(self, tmp_path, capsys):
        code, out, _ = run(capsys, "render", self.saved(tmp_path))
        assert code == 0 and out == (GOLDEN / "interests_terminal.txt").read_text()

    @pytest.mark.parametrize("fmt,marker", [("svg", "<svg"), ("html", "<!DOCTYPE html>"), ("csv", "target_token")])
    def test_text_formats(self, tmp_path, capsys, fmt, marker):
        out = tmp_path / f"out.{fmt}"
        assert run(capsys, "render", self.saved(tmp_path), "--format", fmt, "-o", str(out))[0] == 0
        assert marker in out.read_text()

    def test_trivial_file(self, tmp_path, capsys):
        from lm_attr.orchestrate import AttributionResult

        meta = {"method": "ablation", "seed": 0, "model": "m", "evaluations": 2, "wall_ms": None}
        path = self.saved(tmp_path, AttributionResult(["x"], ["t"], [[0.0]], meta))
        code, out, _ = run(capsys, "render", path, "--format", "svg")
        assert code == 0 and 'data-value="0.0000"' in out and 'fill="#ffffff" stroke' in out

    @pytest.mark.parametrize("fmt", ["png", "pdf"])
    def test_figures(self, tmp_path, capsys, fmt):
        out = tmp_path / f"fig.{fmt}"
        assert run(capsys, "render", self.saved(tmp_path), "--format", fmt, "-o", str(out))[0] == 0
        assert out.stat().st_size > 1000

    def test_figure_needs_out(self, tmp_path, capsys):
        assert run(capsys, "render", self.saved(tmp_path), "--format", "png")[0] == 2

    def test_malformed_result(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text('{"version": 1, "features": []}')
        assert run(capsys, "render", str(path))[0] == 2
        path.write_text("not json")
        assert run(capsys, "render", str(path))[0] == 2

    def test_round_trip_of_run_output(self, tmp_path, capsys):
        out = tmp_path / "r.json"
        run(capsys, "run", "--config", str(DEMO_PATH), "--out", str(out))
        for fmt in ("svg", "term", "csv"):
            assert run(capsys, "render", str(out), "--format", fmt)[0] == 0


class TestBudget:
    def test_ablation(self, capsys):
        code, out, _ = run(capsys, "budget", "--config", str(DEMO_PATH))
        assert code == 0 and out.strip() == "6 evaluations"

    def test_exact(self, tmp_path, capsys):
        cfg = write_config(tmp_path, method={"name": "shapley-exact"})
        assert run(capsys, "budget", "--config", cfg)[1].strip() == "32 evaluations"

    def test_refuses_twenty_groups(self, tmp_path, capsys):
        cfg = write_config(
            tmp_path,
            method={"name": "shapley-exact"},
            input={"template": " ".join("{}" for _ in range(20)), "values": ["a"] * 20},
        )
        code, out, _ = run(capsys, "budget", "--config", cfg)
        assert code == 2 and out.startswith("refused") and "cap" in out


def test_backends(capsys):
    code, out, _ = run(capsys, "backends")
    assert code == 0
    assert [line.split()[0] for line in out.splitlines()] == ["mock", "toylm", "http", "subprocess"]


def test_console_script_entry():
    proc = subprocess.run([sys.executable, "-m", "lm_attr.cli", "budget", "--config", str(DEMO_PATH)],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.strip() == "6 evaluations"


@pytest.mark.parametrize("name", sorted(p.name for p in DEMO_PATH.parent.glob("*.json")))
def test_demo_configs_run(name, tmp_path, capsys):
    out = tmp_path / "r.json"
    assert main(["run", "--config", str(DEMO_PATH.parent / name), "--out", str(out)]) == 0
    capsys.readouterr()
    assert main(["render", str(out), "--format", "svg", "-o", str(tmp_path / "r.svg")]) == 0


def test_few_shot_script():
    proc = subprocess.run([sys.executable, str(DEMO_PATH.parent / "few_shot.py")], capture_output=True, text=True)
    assert proc.returncode == 0
    assert len(proc.stdout.splitlines()) == 6
