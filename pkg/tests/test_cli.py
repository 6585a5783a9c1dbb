import hashlib
import json
import subprocess
import sys

import numpy as np
import pytest
from numpy.testing import assert_allclose

from modegraph.cli import PipelineConfig, load_config, main
from modegraph.emd import EmdConfig
from modegraph.ts2graph import Graph


def write_series_csv(path, values, header="close"):
    with open(path, "w") as fh:
        fh.write(header + "\n")
        fh.writelines(repr(float(v)) + "\n" for v in values)
    return str(path)


def two_tone(n=600):
    k = np.arange(n)
    return 10.0 + np.sin(2 * np.pi * k / 10) + np.sin(2 * np.pi * k / 100)


def garch_walk(seed=7, n=1200):
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(n)
    sig2 = np.empty(n)
    eps = np.empty(n)
    sig2[0] = 1.0
    eps[0] = z[0]
    for t in range(1, n):
        sig2[t] = 0.1 + 0.2 * eps[t - 1] ** 2 + 0.75 * sig2[t - 1]
        eps[t] = np.sqrt(sig2[t]) * z[t]
    return 500.0 + np.cumsum(eps)


class TestPipelineConfig:
    def test_defaults_reproduce_reference_setup(self):
        cfg = PipelineConfig()
        assert cfg.method == "eemd"
        assert cfg.emd == EmdConfig()
        assert cfg.emd.trials == 100
        assert cfg.emd.noise_width == 0.05
        assert cfg.transforms == ("nvg", "hvg", "recurrence")
        assert cfg.percentile == 10.0

    def test_transforms_normalized_to_canonical_order(self):
        cfg = PipelineConfig(transforms=("recurrence", "nvg", "nvg"))
        assert cfg.transforms == ("nvg", "recurrence")

    def test_empty_transforms_allowed(self):
        assert PipelineConfig(transforms=()).transforms == ()

    def test_validation(self):
        with pytest.raises(ValueError, match="method"):
            PipelineConfig(method="wavelet")
        with pytest.raises(ValueError, match="transforms"):
            PipelineConfig(transforms=("nvg", "mst"))
        with pytest.raises(ValueError, match="percentile"):
            PipelineConfig(percentile=0.0)
        with pytest.raises(ValueError, match="percentile"):
            PipelineConfig(percentile=101.0)
        with pytest.raises(ValueError, match="betweenness_sample"):
            PipelineConfig(betweenness_sample=0)

    def test_to_dict_snapshot(self):
        doc = PipelineConfig().to_dict()
        assert doc["method"] == "eemd"
        assert doc["emd"]["max_imfs"] == 14
        assert doc["transforms"] == ["nvg", "hvg", "recurrence"]


class TestLoadConfig:
    def test_full_file(self, tmp_path):
        ini = tmp_path / "cfg.ini"
        ini.write_text(
            "[input]\n"
            "path = prices.csv\n"
            "column = 2\n"
            "date_column = date\n"
            "[emd]\n"
            "method = ceemdan\n"
            "trials = 25\n"
            "noise_width = 0.1\n"
            "seed = 9\n"
            "[transforms]\n"
            "methods = hvg, recurrence\n"
            "percentile = 5\n"
            "[metrics]\n"
            "enabled = true\n"
            "betweenness_sample = 100\n"
            "[output]\n"
            "dir = results\n"
        )
        updates = load_config(str(ini))
        assert updates["input_path"] == "prices.csv"
        assert updates["column"] == 2
        assert updates["date_column"] == "date"
        assert updates["method"] == "ceemdan"
        assert updates["emd_updates"] == {"trials": 25, "noise_width": 0.1, "seed": 9}
        assert updates["transforms"] == ("hvg", "recurrence")
        assert updates["percentile"] == 5.0
        assert updates["metrics_enabled"] is True
        assert updates["betweenness_sample"] == 100
        assert updates["out_dir"] == "results"

    def test_partial_file_leaves_other_fields_alone(self, tmp_path):
        ini = tmp_path / "cfg.ini"
        ini.write_text("[emd]\nseed = 4\n")
        assert load_config(str(ini)) == {"emd_updates": {"seed": 4}}

    def test_unknown_section(self, tmp_path):
        ini = tmp_path / "cfg.ini"
        ini.write_text("[plotting]\nstyle = dark\n")
        with pytest.raises(ValueError, match=r"unknown config section \[plotting\]"):
            load_config(str(ini))

    def test_unknown_key(self, tmp_path):
        ini = tmp_path / "cfg.ini"
        ini.write_text("[emd]\nmax_modes = 5\n")
        with pytest.raises(ValueError, match="unknown key 'max_modes'"):
            load_config(str(ini))

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_config(str(tmp_path / "nope.ini"))

    def test_empty_sample_means_exact(self, tmp_path):
        ini = tmp_path / "cfg.ini"
        ini.write_text("[metrics]\nbetweenness_sample =\n")
        assert load_config(str(ini))["betweenness_sample"] is None

    def test_bad_boolean(self, tmp_path):
        ini = tmp_path / "cfg.ini"
        ini.write_text("[metrics]\nenabled = maybe\n")
        with pytest.raises(ValueError, match="boolean"):
            load_config(str(ini))


class TestSuitabilityCommand:
    def test_white_noise_exits_3(self, tmp_path, capsys):
        src = write_series_csv(
            tmp_path / "wn.csv",
            np.random.default_rng(42).standard_normal(1000) + 50.0,
        )
        code = main(["suitability", "--input", src, "--out-dir", str(tmp_path / "o")])
        assert code == 3
        payload = json.loads((tmp_path / "o" / "suitability.json").read_text())
        assert payload["verdict"] == "unsuitable"
        assert "unsuitable" in capsys.readouterr().out

    def test_ramp_exits_2(self, tmp_path):
        src = write_series_csv(tmp_path / "ramp.csv", np.arange(1.0, 1001.0))
        code = main(["suitability", "--input", src, "--out-dir", str(tmp_path / "o")])
        assert code == 2

    def test_garch_walk_exits_0(self, tmp_path):
        src = write_series_csv(tmp_path / "gw.csv", garch_walk())
        code = main(["suitability", "--input", src, "--out-dir", str(tmp_path / "o")])
        assert code == 0

    def test_missing_file_exits_1(self, tmp_path, capsys):
        code = main(
            ["suitability", "--input", str(tmp_path / "nope.csv"), "--out-dir", "o"]
        )
        assert code == 1
        assert "error:" in capsys.readouterr().err


class TestDecomposeCommand:
    def test_two_tone_outputs(self, tmp_path):
        src = write_series_csv(tmp_path / "tt.csv", two_tone())
        out = tmp_path / "o"
        code = main(
            ["decompose", "--input", src, "--out-dir", str(out), "--method", "emd"]
        )
        assert code == 0
        header = (out / "imfs.csv").read_text().splitlines()[0].split(",")
        assert header[0] == "imf_1" and header[-1] == "residue"

        lines = (out / "metrics.csv").read_text().splitlines()
        assert lines[0] == "component,energy,variance,frequency_cycles,mean_amplitude,std"
        freqs = [int(line.split(",")[3]) for line in lines[1:]]
        assert freqs == sorted(freqs, reverse=True)  # ordered by decreasing frequency

        recon = json.loads((out / "reconstruction.json").read_text())
        assert recon["full_rmse"] < 1e-10
        assert set(recon) >= {"rmse", "mae", "residue_mean", "monotonic"}

    def test_constant_series(self, tmp_path):
        src = write_series_csv(tmp_path / "c.csv", np.full(50, 7.0))
        out = tmp_path / "o"
        code = main(
            ["decompose", "--input", src, "--out-dir", str(out), "--method", "emd"]
        )
        assert code == 0
        lines = (out / "imfs.csv").read_text().splitlines()
        assert lines[0] == "residue"
        assert_allclose([float(x) for x in lines[1:]], np.full(50, 7.0))
        assert (out / "metrics.csv").read_text().splitlines() == [
            "component,energy,variance,frequency_cycles,mean_amplitude,std"
        ]

    def test_seed_flag_overrides(self, tmp_path):
        src = write_series_csv(tmp_path / "tt.csv", two_tone(400))
        outs = []
        for seed in (1, 1, 2):
            out = tmp_path / ("o%d" % len(outs))
            main(
                [
                    "decompose",
                    "--input",
                    src,
                    "--out-dir",
                    str(out),
                    "--method",
                    "eemd",
                    "--trials",
                    "4",
                    "--seed",
                    str(seed),
                ]
            )
            outs.append((out / "imfs.csv").read_text())
        assert outs[0] == outs[1]
        assert outs[0] != outs[2]


class TestTransformCommand:
    def test_three_point_hvg_edges(self, tmp_path):
        out = tmp_path / "o"
        out.mkdir()
        (out / "imfs.csv").write_text("imf_1\n1.0\n2.0\n3.0\n")
        code = main(
            ["transform", "--out-dir", str(out), "--transforms", "hvg"]
        )
        assert code == 0
        edges = (out / "graphs" / "imf_1.hvg.edges.csv").read_text()
        assert edges == "src,dst\n0,1\n1,2\n"
        assert not (out / "graphs" / "imf_1.nvg.edges.csv").exists()

    def test_missing_imfs_file_exits_1(self, tmp_path, capsys):
        code = main(["transform", "--out-dir", str(tmp_path / "o")])
        assert code == 1
        assert "run decompose first" in capsys.readouterr().err

    def test_empty_transforms(self, tmp_path):
        out = tmp_path / "o"
        out.mkdir()
        (out / "imfs.csv").write_text("imf_1\n1.0\n2.0\n3.0\n")
        code = main(["transform", "--out-dir", str(out), "--transforms", ""])
        assert code == 0
        assert not (out / "graphs").exists()

    def test_per_component_fault_isolation(self, tmp_path, capsys):
        out = tmp_path / "o"
        out.mkdir()
        values = two_tone(200)
        rows = ["imf_1,flat"] + ["%s,1.0" % repr(float(v)) for v in values]
        (out / "imfs.csv").write_text("\n".join(rows) + "\n")
        code = main(["transform", "--out-dir", str(out)])
        assert code == 0  # the flat column fails, the run continues
        err = capsys.readouterr().err
        assert "flat/recurrence failed" in err
        assert (out / "graphs" / "flat.hvg.edges.csv").exists()
        assert not (out / "graphs" / "flat.recurrence.json").exists()
        assert (out / "graphs" / "imf_1.recurrence.json").exists()
        params = (out / "params.csv").read_text().splitlines()
        assert params[0] == "component,tau,dim,epsilon"
        assert len(params) == 2 and params[1].startswith("imf_1,")


class TestMetricsCommand:
    def write_graph(self, out, name, n, edges):
        g = Graph(
            n=n,
            edges=np.asarray(edges, dtype=np.int64).reshape(-1, 2),
            node_features=np.zeros(n),
            kind="nvg",
        )
        (out / "graphs").mkdir(parents=True, exist_ok=True)
        (out / "graphs" / name).write_text(g.to_json())

    def test_fixture_graphs(self, tmp_path):
        out = tmp_path / "o"
        self.write_graph(
            out, "imf_1.nvg.json", 4, [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]
        )
        self.write_graph(out, "imf_2.nvg.json", 5, [(0, 1), (1, 2), (2, 3), (3, 4)])
        code = main(["metrics", "--out-dir", str(out)])
        assert code == 0
        lines = (out / "topology_summary.csv").read_text().splitlines()
        header = lines[0].split(",")
        assert header[:3] == ["component", "method", "n"]
        k4 = dict(zip(header, lines[1].split(",")))
        p5 = dict(zip(header, lines[2].split(",")))
        assert k4["component"] == "imf_1" and float(k4["density"]) == 1.0
        assert p5["component"] == "imf_2" and int(p5["diameter"]) == 4
        assert (out / "topology" / "imf_1.nvg.topology.json").exists()

    def test_no_graphs_exits_1(self, tmp_path, capsys):
        code = main(["metrics", "--out-dir", str(tmp_path / "o")])
        assert code == 1
        assert "run transform first" in capsys.readouterr().err

    def test_disabled_metrics_skips(self, tmp_path, capsys):
        ini = tmp_path / "cfg.ini"
        ini.write_text("[metrics]\nenabled = false\n")
        out = tmp_path / "o"
        self.write_graph(out, "imf_1.nvg.json", 3, [(0, 1), (1, 2)])
        code = main(["metrics", "--out-dir", str(out), "--config", str(ini)])
        assert code == 0
        assert "disabled" in capsys.readouterr().err
        assert not (out / "topology_summary.csv").exists()


class TestRunCommand:
    def run_args(self, src, out):
        return [
            "--input",
            src,
            "--out-dir",
            str(out),
            "--method",
            "eemd",
            "--trials",
            "4",
            "--seed",
            "123",
        ]

    def test_manifest_and_inventory(self, tmp_path):
        src = write_series_csv(tmp_path / "tt.csv", two_tone())
        out = tmp_path / "o"
        assert main(["run"] + self.run_args(src, out)) == 0
        manifest = json.loads((out / "run_manifest.json").read_text())
        assert manifest["tool_version"]
        assert manifest["verdict"] in ("suitable", "marginal", "unsuitable")
        assert [s["name"] for s in manifest["stages"]] == [
            "suitability",
            "decompose",
            "transform",
            "metrics",
        ]
        assert manifest["config"]["emd"]["seed"] == 123
        # every referenced file exists and matches its recorded hash
        assert len(manifest["files"]) > 10
        for rel, digest in manifest["files"].items():
            blob = (out / rel).read_bytes()
            assert hashlib.sha256(blob).hexdigest() == digest
        # at least 2 IMFs x 3 methods of graph JSON exports
        graph_jsons = [f for f in manifest["files"] if f.startswith("graphs/") and f.endswith(".json")]
        assert len(graph_jsons) >= 6

    def test_rerun_is_byte_identical(self, tmp_path):
        src = write_series_csv(tmp_path / "tt.csv", two_tone(400))
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert main(["run"] + self.run_args(src, out1)) == 0
        assert main(["run"] + self.run_args(src, out2)) == 0
        m1 = json.loads((out1 / "run_manifest.json").read_text())
        m2 = json.loads((out2 / "run_manifest.json").read_text())
        assert m1["files"] == m2["files"]

    def test_stage_composability(self, tmp_path):
        src = write_series_csv(tmp_path / "tt.csv", two_tone(400))
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert main(["run"] + self.run_args(src, out1)) == 0
        for command in ("suitability", "decompose", "transform", "metrics"):
            code = main([command] + self.run_args(src, out2))
            assert code == (3 if command == "suitability" else 0)
        manifest = json.loads((out1 / "run_manifest.json").read_text())
        for rel, digest in manifest["files"].items():
            blob = (out2 / rel).read_bytes()
            assert hashlib.sha256(blob).hexdigest() == digest

    def test_unknown_config_key_aborts_before_stages(self, tmp_path, capsys):
        src = write_series_csv(tmp_path / "tt.csv", two_tone(400))
        ini = tmp_path / "cfg.ini"
        ini.write_text("[emd]\nsift_limit = 3\n")
        out = tmp_path / "o"
        code = main(
            ["run", "--input", src, "--config", str(ini), "--out-dir", str(out)]
        )
        assert code == 1
        assert "unknown key" in capsys.readouterr().err
        assert not out.exists()

    def test_stage_failure_names_stage(self, tmp_path, capsys):
        src = write_series_csv(tmp_path / "short.csv", two_tone(120))
        out = tmp_path / "o"
        code = main(["run", "--input", src, "--out-dir", str(out)])
        assert code == 1  # battery needs more observations
        assert "stage suitability failed" in capsys.readouterr().err

    def test_config_file_drives_run(self, tmp_path):
        src = write_series_csv(tmp_path / "tt.csv", two_tone(400), header="price")
        ini = tmp_path / "cfg.ini"
        ini.write_text(
            "[input]\npath = %s\ncolumn = price\n"
            "[emd]\nmethod = emd\n"
            "[transforms]\nmethods = hvg\n"
            "[output]\ndir = %s\n" % (src, tmp_path / "o")
        )
        assert main(["run", "--config", str(ini)]) == 0
        manifest = json.loads((tmp_path / "o" / "run_manifest.json").read_text())
        assert manifest["config"]["method"] == "emd"
        graph_files = [f for f in manifest["files"] if f.startswith("graphs/")]
        assert graph_files and all(".hvg." in f for f in graph_files)


class TestEntryPoints:
    def test_module_invocation(self, tmp_path):
        src = write_series_csv(tmp_path / "ramp.csv", np.arange(1.0, 1001.0))
        proc = subprocess.run(
            [
                sys.executable,
                "-m",
                "modegraph",
                "suitability",
                "--input",
                src,
                "--out-dir",
                str(tmp_path / "o"),
            ],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 2
        assert "marginal" in proc.stdout

    def test_argparse_rejects_unknown_method(self):
        with pytest.raises(SystemExit):
            main(["decompose", "--method", "wavelet"])
