import csv
import json

import numpy as np
import pytest

from flowbench.capture import assemble_flows, flow_duration_percentile, flow_length_percentile, parse_pcap, truncate_flows
from flowbench.cli import main
from flowbench.exceptions import ManifestError
from flowbench.pipeline import Manifest, cmd_synth, extract_dataset, read_flow_store, write_flow_store
from flowbench.synth import scenario_hosts


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("syn")
    cmd_synth("ddos-syn", 3, out, n_train=60, n_test=25)
    return out


def small_manifest(synth_dir, tmp_path, **over):
    doc = json.loads((synth_dir / "manifest.json").read_text())
    for ds in doc["datasets"]:
        for key in ("train_files", "test_files"):
            for src in ds[key]:
                src["path"] = str(synth_dir / src["path"])
    doc.update(representations=["STATS", "IAT", "IAT-FFT", "STATS+header"], detectors=["KDE", "PCA"],
               output_dir=str(tmp_path / "out"))
    doc.update(over)
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps(doc))
    return path


class TestManifest:
    def base(self):
        return {"schema": 1, "datasets": [{
            "name": "a", "monitored_src": ["10.0.0.1"], "train_files": ["t.pcap"],
            "test_files": [{"path": "n.pcap", "label": "normal"}, {"path": "x.pcap", "label": "novel"}]}]}

    def test_defaults_and_relative_paths(self, tmp_path):
        m = Manifest.from_dict(self.base(), tmp_path)
        assert m.tuning == ("OPT", "Default") and len(m.representations) == 12 and len(m.detectors) == 6
        assert m.datasets[0].train[0].path == tmp_path / "t.pcap"
        assert m.output_dir == tmp_path / "results"

    @pytest.mark.parametrize("mutate", [
        lambda d: d.update(schema=2),
        lambda d: d.update(datasets=[]),
        lambda d: d["datasets"].append(dict(d["datasets"][0])),
        lambda d: d.update(detectors=["LOF"]),
        lambda d: d.update(representations=["STATS-FFT"]),
        lambda d: d.update(tuning="best"),
        lambda d: d["datasets"][0].update(monitored_src=[]),
        lambda d: d["datasets"][0].update(monitored_src=["host"]),
        lambda d: d["datasets"][0]["test_files"].pop(),
        lambda d: d["datasets"][0].update(test_files=["n.pcap"]),
        lambda d: d["datasets"][0].update(train_files=[{"path": "t.pcap", "label": "novel"}]),
        lambda d: d["datasets"][0].pop("train_files"),
    ])
    def test_invalid(self, mutate):
        doc = self.base()
        mutate(doc)
        with pytest.raises(ManifestError):
            Manifest.from_dict(doc)

    def test_inline_synth_source(self):
        doc = self.base()
        doc["datasets"][0]["test_files"] = [{"synth": {"scenario": "ddos-syn", "part": "test-normal"}},
                                            {"synth": {"scenario": "ddos-syn", "part": "test-novel"}}]
        labels = [s.label.value for s in Manifest.from_dict(doc).datasets[0].test]
        assert labels == ["normal", "novel"]


class TestExtract:
    def test_d0_and_cap_recomputed_independently(self, synth_dir, tmp_path):
        m = Manifest.load(small_manifest(synth_dir, tmp_path))
        ds = extract_dataset(m.datasets[0]).flows
        hosts = scenario_hosts("ddos-syn")
        train = assemble_flows(parse_pcap((synth_dir / "ddos-syn-train.pcap").read_bytes()).packets, hosts)
        assert len(train) == 60
        cap = flow_duration_percentile(train)
        assert ds.max_duration == cap
        assert ds.d0 == flow_length_percentile(truncate_flows(train, cap))
        assert len(ds.test) <= 50 and ds.test_novel.any()

    def test_cli_extract_idempotent_and_store_round_trip(self, synth_dir, tmp_path, capsys):
        path = small_manifest(synth_dir, tmp_path)
        assert main(["extract", "--manifest", str(path)]) == 0
        store = tmp_path / "out" / "flows" / "ddos-syn.csv"
        first = store.read_bytes()
        assert main(["extract", "--manifest", str(path)]) == 0
        assert store.read_bytes() == first
        meta = json.loads((tmp_path / "out" / "flows" / "ddos-syn.meta.json").read_text())
        ds = extract_dataset(Manifest.load(path).datasets[0])
        assert meta["d0"] == ds.flows.d0
        train, test = read_flow_store(store)
        assert train == ds.flows.train and test == ds.flows.test
        assert "d0=" in capsys.readouterr().out

    def test_store_writer(self, synth_dir, tmp_path):
        ds = extract_dataset(Manifest.load(small_manifest(synth_dir, tmp_path)).datasets[0])
        csv_path, _ = write_flow_store(ds, tmp_path / "s")
        with open(csv_path) as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == sum(len(f) for f in ds.flows.train + ds.flows.test)


class TestFeatures:
    def test_widths(self, synth_dir, tmp_path):
        path = small_manifest(synth_dir, tmp_path, representations=["STATS", "STATS+header", "IAT", "IAT-FFT",
                                                                     "SAMP-NUM"])
        assert main(["features", "--manifest", str(path)]) == 0
        d0 = extract_dataset(Manifest.load(path).datasets[0]).flows.d0
        feat = tmp_path / "out" / "features" / "ddos-syn"

        def width(name):
            with open(feat / name) as fh:
                header = next(csv.reader(fh))
            assert header[-1] == "label"
            return len(header) - 1

        assert width("STATS_train.csv") == 10
        assert width("STATS_plus_header_test.csv") == 20
        assert width("IAT_train.csv") == d0 - 1 == width("IAT-FFT_train.csv")
        assert width("SAMP-NUM__dt0_train.csv") == d0 - 1
        assert all(p.resolve().is_relative_to((tmp_path / "out").resolve()) for p in (tmp_path / "out").rglob("*"))


class TestEvaluate:
    def test_both_tunings_and_rows(self, synth_dir, tmp_path, capsys):
        path = small_manifest(synth_dir, tmp_path)
        before = set(tmp_path.iterdir())
        assert main(["evaluate", "--manifest", str(path), "--no-figures"]) == 0
        assert set(tmp_path.iterdir()) == before | {tmp_path / "out"}
        out = tmp_path / "out"
        for name in ("report_opt.csv", "report_default.csv"):
            with open(out / name) as fh:
                rows = list(csv.DictReader(fh))
            assert len(rows) == 4 * 2
            assert list(rows[0]) == ["dataset", "representation", "fft", "header", "detector", "tuning",
                                     "hyper", "delta_t", "auc", "error_bar", "status"]
        assert "16/16 cells evaluated" in capsys.readouterr().out
        doc = json.loads((out / "report.json").read_text())
        assert doc["header_correlations"]["ddos-syn"][0]["feature"].startswith("flag_")

    def test_tuning_override(self, synth_dir, tmp_path):
        path = small_manifest(synth_dir, tmp_path, representations=["STATS"])
        assert main(["evaluate", "--manifest", str(path), "--tuning", "opt", "--no-figures"]) == 0
        assert (tmp_path / "out" / "report_opt.csv").exists()
        assert not (tmp_path / "out" / "report_default.csv").exists()

    def test_failed_cell_sets_exit_code(self, synth_dir, tmp_path, capsys):
        # one training flow cannot support a mode count or distance quantiles
        path = small_manifest(synth_dir, tmp_path, representations=["STATS"], detectors=["GMM"])
        doc = json.loads(path.read_text())
        doc["datasets"][0]["train_files"] = [{"synth": {"profiles": [{"n_flows": 1}]}, "label": "normal"}]
        doc["datasets"][0]["monitored_src"] = ["10.0.0.1", "10.0.0.2"]
        path.write_text(json.dumps(doc))
        assert main(["evaluate", "--manifest", str(path), "--no-figures"]) == 1
        assert "failed cell ddos-syn/STATS/GMM" in capsys.readouterr().err

    def test_bad_manifest_exit_two(self, tmp_path, capsys):
        p = tmp_path / "m.json"
        p.write_text("{")
        assert main(["evaluate", "--manifest", str(p)]) == 2
        assert "error:" in capsys.readouterr().err


def test_fit_and_score(synth_dir, tmp_path, capsys):
    path = small_manifest(synth_dir, tmp_path, representations=["STATS+header"])
    assert main(["features", "--manifest", str(path)]) == 0
    feat = tmp_path / "out" / "features" / "ddos-syn"
    model = tmp_path / "out" / "kde.json"
    assert main(["fit", "--features", str(feat / "STATS_plus_header_train.csv"), "--detector", "KDE",
                 "--out", str(model)]) == 0
    scores = tmp_path / "out" / "scores.csv"
    assert main(["score", "--model", str(model), "--features", str(feat / "STATS_plus_header_test.csv"),
                 "--out", str(scores)]) == 0
    assert "auc=" in capsys.readouterr().err
    with open(scores) as fh:
        rows = list(csv.DictReader(fh))
    assert {r["label"] for r in rows} == {"normal", "novel"}
    assert np.isfinite([float(r["score"]) for r in rows]).all()


def test_synth_command(tmp_path, capsys):
    assert main(["synth", "new-device", "--out", str(tmp_path), "--n-train", "20", "--n-test", "5"]) == 0
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == ["manifest.json", "new-device-test-normal.pcap", "new-device-test-novel.pcap",
                     "new-device-train.pcap"]
    Manifest.load(tmp_path / "manifest.json")
