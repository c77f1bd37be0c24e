import json
import os

import numpy as np
import pytest

from bfisense import cli
from bfisense.bfi import bfi_from_json, givens_reconstruct
from bfisense.channel import matrix_from_pairs, parse_csi_record


def run_cli(args):
    return cli.main(args)


def read_json(path):
    with open(path) as f:
        return json.load(f)


SMALL = ["--workers", "1"]


class TestConfigHandling:
    def test_unknown_top_level_key(self, tmp_path):
        rc = run_cli(["ks-test", "--output-dir", str(tmp_path), "--set", "nope.x=1"] + SMALL)
        assert rc == 2
        err = read_json(tmp_path / "error.json")
        assert err["error"]["type"] == "ConfigError"

    def test_unknown_nested_key(self, tmp_path):
        rc = run_cli(["ks-test", "--output-dir", str(tmp_path),
                      "--set", "scenario.bogus=3"] + SMALL)
        assert rc == 2

    def test_config_file_with_flag_override(self, tmp_path):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps({"seed": 5, "simulate": {"n_samples": 2},
                                        "scenario": {"n_rx": 2, "n_tx": 2}}))
        out = tmp_path / "out"
        rc = run_cli(["simulate-csi", "--config", str(cfg_path), "--output-dir", str(out),
                      "--set", "simulate.n_samples=3"] + SMALL)
        assert rc == 0
        payload = read_json(out / "csi.json")
        assert len(payload["records"]) == 3  # flag wins over the file
        manifest = read_json(out / "manifest.json")
        assert manifest["config"]["seed"] == 5

    def test_manifest_contents(self, tmp_path):
        rc = run_cli(["simulate-csi", "--output-dir", str(tmp_path)] + SMALL)
        assert rc == 0
        manifest = read_json(tmp_path / "manifest.json")
        assert manifest["command"] == "simulate-csi"
        assert len(manifest["digest"]) == 64
        assert "numpy" in manifest["versions"]
        assert "timestamp" in manifest

    def test_output_dir_env_var(self, tmp_path, monkeypatch):
        monkeypatch.setenv(cli.OUTPUT_DIR_ENV, str(tmp_path / "envout"))
        rc = run_cli(["simulate-csi"] + SMALL)
        assert rc == 0
        assert (tmp_path / "envout" / "csi.json").exists()


class TestPipelineCommands:
    def test_csi_chain_round_trip(self, tmp_path):
        # simulate noiseless CSI for the diagonal-free default and push it
        # through csi2bfi and bfi2v
        out = str(tmp_path)
        rc = run_cli(["simulate-csi", "--output-dir", out, "--set", "scenario.n_rx=2",
                      "--set", "scenario.n_tx=2", "--set", "simulate.noiseless=true"] + SMALL)
        assert rc == 0
        rc = run_cli(["csi2bfi", "--output-dir", out, "--input",
                      os.path.join(out, "csi.json")] + SMALL)
        assert rc == 0
        rc = run_cli(["bfi2v", "--output-dir", out, "--input",
                      os.path.join(out, "bfi.json")] + SMALL)
        assert rc == 0
        csi = read_json(tmp_path / "csi.json")["records"][0]
        h, _, _, _ = parse_csi_record(csi)
        theta = bfi_from_json(read_json(tmp_path / "bfi.json")["records"][0])
        v_rec = read_json(tmp_path / "v.json")["records"][0]
        vt = matrix_from_pairs(v_rec["matrix"], v_rec["m_tx"], v_rec["n_rx"])
        assert np.allclose(vt, givens_reconstruct(theta), atol=1e-9)

    def test_csi2bfi_diag_vector(self, tmp_path):
        # the canonical diagonal test vector produces all-zero angles
        from bfisense.channel import ArrayGeometry, SubcarrierGrid, csi_record
        record = csi_record(np.diag([2.0, 1.0]),
                            ArrayGeometry(2, 2, 0.025, 0.025), SubcarrierGrid(), 1)
        path = tmp_path / "in.json"
        path.write_text(json.dumps({"records": [record]}))
        rc = run_cli(["csi2bfi", "--output-dir", str(tmp_path), "--input", str(path)] + SMALL)
        assert rc == 0
        theta = read_json(tmp_path / "bfi.json")["records"][0]
        assert all(el["value"] == pytest.approx(0.0) for el in theta["elements"])

    def test_quantize_outputs(self, tmp_path):
        out = str(tmp_path)
        run_cli(["simulate-csi", "--output-dir", out, "--set", "scenario.n_rx=2",
                 "--set", "scenario.n_tx=2"] + SMALL)
        run_cli(["csi2bfi", "--output-dir", out, "--input", os.path.join(out, "csi.json")]
                + SMALL)
        rc = run_cli(["quantize", "--output-dir", out, "--input",
                      os.path.join(out, "bfi.json"), "--set", "quantize.b_psi=5"] + SMALL)
        assert rc == 0
        codes = read_json(tmp_path / "codes.json")["records"][0]
        assert codes["b_psi"] == 5 and codes["b_phi"] == 7
        packed = (tmp_path / "packed.bin").read_bytes()
        assert packed.hex() == codes["packed_hex"]
        assert packed[0] == 5

    def test_missing_input_is_config_error(self, tmp_path):
        rc = run_cli(["csi2bfi", "--output-dir", str(tmp_path)] + SMALL)
        assert rc == 2


class TestAnalysisCommands:
    def test_crb_map_row_count_and_columns(self, tmp_path):
        rc = run_cli(["crb-map", "--output-dir", str(tmp_path), "--set", "roi.r=5",
                      "--set", "scenario.n_rx=2", "--set", "crb.n_mc=100"] + SMALL)
        assert rc == 0
        lines = (tmp_path / "crb_map.csv").read_text().strip().splitlines()
        assert len(lines) == 6
        header = lines[0].split(",")
        assert header[:2] == ["x", "y"]
        assert "crb_x" in header and "nl_crb_y" in header and "chi_10" in header

    def test_select_identity(self, tmp_path):
        rc = run_cli(["select", "--output-dir", str(tmp_path), "--set", "roi.r=4",
                      "--set", "scenario.n_rx=2", "--set", "select.n_sel=10",
                      "--set", "crb.n_mc=100"] + SMALL)
        assert rc == 0
        payload = read_json(tmp_path / "selection.json")
        assert payload["per_subcarrier"] == [list(range(1, 11))]

    def test_degenerate_position_exit_code(self, tmp_path):
        # a bare line-of-sight scenario has a rank-one mean everywhere
        rc = run_cli(["crb-map", "--output-dir", str(tmp_path), "--set", "roi.r=3",
                      "--set", "scenario.cluster=null", "--set", "crb.n_mc=50"] + SMALL)
        assert rc == 3
        err = read_json(tmp_path / "error.json")
        assert err["error"]["type"] == "DegeneratePositionError"
        assert "position" in err["error"]["message"]

    def test_ks_command(self, tmp_path):
        rc = run_cli(["ks-test", "--output-dir", str(tmp_path),
                      "--set", "ks.n_samples=400",
                      "--set", "scenario.cluster=null",
                      "--set", 'scenario.static_cluster={"seed":11,"n_paths":4}'] + SMALL)
        assert rc == 0
        payload = read_json(tmp_path / "ks.json")
        assert len(payload["results"]) == 12
        lines = (tmp_path / "ks.csv").read_text().strip().splitlines()
        assert lines[0] == "element,statistic,p"
        assert len(lines) == 13

    def test_music_mc_command(self, tmp_path):
        rc = run_cli(["music-mc", "--output-dir", str(tmp_path),
                      "--set", "music.trials=100", "--set", "music.snr_db=[15,25]",
                      "--set", "music.grid_range_deg=[-30,30]",
                      "--set", "scenario.aoa_mode=0.0",
                      "--set", "scenario.cluster=null",
                      "--set", 'scenario.static_cluster={"seed":11,"n_paths":4}',
                      "--set", "crb.n_mc=200"] + SMALL)
        assert rc == 0
        lines = (tmp_path / "music_mc.csv").read_text().strip().splitlines()
        assert lines[0] == "snr_db,music_variance,crb"
        assert len(lines) == 3

    def test_evaluate_command(self, tmp_path):
        rc = run_cli(["evaluate", "--output-dir", str(tmp_path), "--set", "roi.r=25",
                      "--set", "scenario.n_rx=2", "--set", "evaluate.epochs=5",
                      "--set", "evaluate.method=random", "--set", "evaluate.n_sel=4"]
                     + SMALL)
        assert rc == 0
        payload = read_json(tmp_path / "results.json")
        assert payload["method"] == "random"
        assert payload["n_features"] == 4
        assert "p50" in payload["quantiles"]
        errors = (tmp_path / "errors.csv").read_text().strip().splitlines()
        assert errors[0] == "error_m"
        assert len(errors) > 1


class TestDeterminism:
    @pytest.mark.parametrize("args", [
        ["simulate-csi", "--set", "scenario.n_rx=2", "--set", "simulate.n_samples=2"],
        ["crb-map", "--set", "roi.r=4", "--set", "scenario.n_rx=2", "--set", "crb.n_mc=80"],
        ["ks-test", "--set", "ks.n_samples=200", "--set", "scenario.cluster=null",
         "--set", 'scenario.static_cluster={"seed":11,"n_paths":4}'],
    ])
    def test_rerun_byte_identical(self, tmp_path, args):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert run_cli(args + ["--output-dir", str(out1)] + SMALL) == 0
        assert run_cli(args + ["--output-dir", str(out2)] + SMALL) == 0
        for name in os.listdir(out1):
            if name == "manifest.json":
                continue
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes(), name

    def test_worker_count_does_not_change_results(self, tmp_path):
        base = ["crb-map", "--set", "roi.r=12", "--set", "scenario.n_rx=2",
                "--set", "crb.n_mc=60"]
        out1, out2 = tmp_path / "w1", tmp_path / "w2"
        assert run_cli(base + ["--output-dir", str(out1), "--workers", "1"]) == 0
        assert run_cli(base + ["--output-dir", str(out2), "--workers", "3"]) == 0
        assert (out1 / "crb_map.csv").read_bytes() == (out2 / "crb_map.csv").read_bytes()
