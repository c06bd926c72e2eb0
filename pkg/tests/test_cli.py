"""CLI grammar, exit codes, JSON output, and the mock no-network guarantee."""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import numpy as np
import pytest

from avcurate.cli import EXIT_OK, EXIT_USAGE, dispatch
from avcurate.core import (
    ManifestEntry,
    ManifestStore,
    MediaRef,
    ModalityLabel,
    ScoreSet,
    Status,
)
from avcurate.evalstats import write_matrix


def seed_manifest(path, n=5, ib=0.5):
    store = ManifestStore(path)
    for i in range(n):
        store.append(ManifestEntry(
            id=f"c{i}",
            dataset="cli",
            media=MediaRef(audio_path=f"a/c{i}.wav", video_path=f"v/c{i}.mp4"),
            labels=[ModalityLabel(name="dog_bark")],
            scores=ScoreSet(ib_score=ib),
        ))
    return store


class _Canary(BaseHTTPRequestHandler):
    hits = []

    def do_POST(self):
        _Canary.hits.append(self.path)
        body = json.dumps({"score": 0.42}).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, *args):
        pass


@pytest.fixture()
def canary_server():
    _Canary.hits = []
    server = HTTPServer(("127.0.0.1", 0), _Canary)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_port}", _Canary.hits
    server.shutdown()


class TestGrammar:
    def test_unknown_subcommand_exits_64(self):
        assert dispatch(["frobnicate"]) == EXIT_USAGE

    def test_no_subcommand_exits_64(self):
        assert dispatch([]) == EXIT_USAGE

    def test_missing_manifest_is_usage_error(self):
        assert dispatch(["route", "--mock"]) == EXIT_USAGE


class TestRoute:
    def test_route_exit_zero(self, tmp_path, capsys):
        manifest = tmp_path / "m.jsonl"
        seed_manifest(manifest)
        code = dispatch(["--manifest", str(manifest), "--mock", "--json", "route"])
        assert code == EXIT_OK
        payload = json.loads(capsys.readouterr().out)
        assert payload["routed"] == 5
        assert payload["counts"]["Enhanced"] == 5
        assert "config" in payload


class TestRunAndReports:
    def test_run_then_rerun_is_noop(self, tmp_path, capsys):
        manifest = tmp_path / "m.jsonl"
        seed_manifest(manifest, n=8)
        assert dispatch(["--manifest", str(manifest), "--mock", "--json", "run"]) == EXIT_OK
        first = json.loads(capsys.readouterr().out)
        assert first["pending"] == []
        size = manifest.stat().st_size
        assert dispatch(["--manifest", str(manifest), "--mock", "--json", "run"]) == EXIT_OK
        second = json.loads(capsys.readouterr().out)
        assert manifest.stat().st_size == size
        for key in ("accepted", "discarded", "flagged", "captioned", "escalated"):
            assert first[key] == second[key]

    def test_cost_report(self, tmp_path, capsys):
        manifest = tmp_path / "m.jsonl"
        seed_manifest(manifest, n=3)
        dispatch(["--manifest", str(manifest), "--mock", "run"])
        capsys.readouterr()
        assert dispatch(["--manifest", str(manifest), "--json", "cost-report"]) == EXIT_OK
        payload = json.loads(capsys.readouterr().out)
        rows = [r["usd_per_1m_samples"] for r in payload["reference_table"]]
        assert rows == [10275.00, 7175.00, 3275.00, 1026.00]
        assert payload["ledger"]["records"] >= 3

    def test_compact(self, tmp_path, capsys):
        manifest = tmp_path / "m.jsonl"
        seed_manifest(manifest, n=4)
        dispatch(["--manifest", str(manifest), "--mock", "run"])
        capsys.readouterr()
        lines_before = len(manifest.read_text().splitlines())
        assert dispatch(["--manifest", str(manifest), "--json", "compact"]) == EXIT_OK
        assert len(manifest.read_text().splitlines()) == 4
        assert lines_before > 4


class TestEval:
    def test_fd_same_file_prints_zero(self, tmp_path, capsys):
        mat = np.random.default_rng(1).normal(size=(32, 6))
        path = tmp_path / "emb.bin"
        write_matrix(path, mat)
        assert dispatch(["eval", "fd", "--x", str(path), "--y", str(path)]) == EXIT_OK
        assert json.loads(capsys.readouterr().out) == {"fd": 0.0}

    def test_mwr_counts(self, capsys):
        assert dispatch(["eval", "mwr", "--win", "3", "--tie", "1", "--total", "5"]) == EXIT_OK
        assert json.loads(capsys.readouterr().out) == {"mwr": 0.7}

    def test_is_uniform(self, tmp_path, capsys):
        path = tmp_path / "p.csv"
        write_matrix(path, np.full((6, 4), 0.25))
        assert dispatch(["eval", "is", "--p", str(path)]) == EXIT_OK
        assert json.loads(capsys.readouterr().out)["is"] == pytest.approx(1.0)


class TestPlan:
    def _stages_file(self, tmp_path):
        raw = {
            "stages": [
                {"stage": "S1", "n_steps": 20, "policy": {"pi_t2a": 1}},
                {"stage": "S2", "n_steps": 50,
                 "policy": {"pi_t2a": 0.1, "pi_v2a": 0.35, "pi_vt2a": 0.55}},
            ],
            "datasets": [
                {"id": "t", "task": "T2A",
                 "items": [{"id": f"t{i}", "prompt": "a dog barks"} for i in range(10)]},
                {"id": "v", "task": "V2A",
                 "items": [{"id": f"v{i}"} for i in range(10)]},
                {"id": "w", "task": "VT2A",
                 "items": [{"id": f"w{i}"} for i in range(10)]},
            ],
        }
        path = tmp_path / "stages.json"
        path.write_text(json.dumps(raw))
        return path

    def test_plan_byte_identical_across_runs(self, tmp_path, capsys):
        stages = self._stages_file(tmp_path)
        out_a, out_b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        assert dispatch(["--seed", "9", "plan", "--stages", str(stages),
                         "--out", str(out_a)]) == EXIT_OK
        assert dispatch(["--seed", "9", "plan", "--stages", str(stages),
                         "--out", str(out_b)]) == EXIT_OK
        assert out_a.read_bytes() == out_b.read_bytes()
        assert len(out_a.read_text().splitlines()) == 70


class TestMockCanary:
    def test_mock_mode_makes_zero_network_calls(self, tmp_path, canary_server, capsys):
        endpoint, hits = canary_server
        config = tmp_path / "cfg.toml"
        config.write_text(f'[clients]\nendpoint = "{endpoint}"\n')
        manifest = tmp_path / "m.jsonl"
        seed_manifest(manifest, n=4)
        code = dispatch(["--config", str(config), "--manifest", str(manifest),
                         "--mock", "--json", "run"])
        assert code == EXIT_OK
        assert hits == []

    def test_canary_actually_counts_without_mock(self, tmp_path, canary_server, capsys):
        endpoint, hits = canary_server
        config = tmp_path / "cfg.toml"
        config.write_text(f'[clients]\nendpoint = "{endpoint}"\n')
        manifest = tmp_path / "m.jsonl"
        seed_manifest(manifest, n=1, ib=None)
        code = dispatch(["--config", str(config), "--manifest", str(manifest),
                         "--json", "route"])
        assert code == EXIT_OK
        assert len(hits) == 1
