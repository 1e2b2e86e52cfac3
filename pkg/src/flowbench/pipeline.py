"""Experiment manifests and the extract -> features -> evaluate pipeline."""

from __future__ import annotations

import csv
import json
import logging
import sys
from dataclasses import dataclass, field
from ipaddress import IPv4Address
from pathlib import Path

from .capture import (
    Flow,
    FlowKey,
    Label,
    Packet,
    assemble_flows,
    flags_from_byte,
    flow_duration_percentile,
    flow_length_percentile,
    parse_pcap,
    truncate_flows,
)
from .detect import FAMILIES
from .eval import DatasetFlows, EvalReport, flow_header_correlations, run_cells
from .eval.tuning import TUNING_MODES
from .exceptions import FlowbenchError, ManifestError
from .represent import Kind, RepresentationSpec, build_matrix, delta_t_candidates, usable_delta_t
from .synth import SCENARIOS, TrafficProfile, generate, generate_part, scenario_profiles

log = logging.getLogger(__name__)

MANIFEST_SCHEMA = 1
SCENARIO_PARTS = ("train", "test-normal", "test-novel")
DEFAULT_REPRESENTATIONS = (
    "STATS", "SIZE", "IAT", "IAT+SIZE", "SAMP-NUM", "SAMP-SIZE",
    "IAT-FFT", "SAMP-NUM-FFT", "SAMP-SIZE-FFT",
    "STATS+header", "IAT+SIZE+header", "SAMP-SIZE+header",
)
_TUNING_ALIASES = {"opt": ("OPT",), "default": ("Default",), "both": TUNING_MODES}


@dataclass
class Source:
    label: Label
    path: Path | None = None
    synth: dict | None = None

    def describe(self) -> str:
        return str(self.path) if self.path else f"synth:{json.dumps(self.synth, sort_keys=True)}"


@dataclass
class DatasetConfig:
    name: str
    monitored_src: list[str]
    train: list[Source]
    test: list[Source]


@dataclass
class Manifest:
    datasets: list[DatasetConfig]
    representations: list[RepresentationSpec] = field(default_factory=list)
    detectors: list[str] = field(default_factory=lambda: list(FAMILIES))
    tuning: tuple[str, ...] = TUNING_MODES
    seed: int = 0
    output_dir: Path = Path("results")

    @classmethod
    def load(cls, path) -> Manifest:
        path = Path(path)
        try:
            doc = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ManifestError(f"cannot read manifest {path}: {exc}") from None
        return cls.from_dict(doc, path.parent)

    @classmethod
    def from_dict(cls, doc: dict, base_dir=".") -> Manifest:
        base = Path(base_dir)
        if doc.get("schema") != MANIFEST_SCHEMA:
            raise ManifestError(f"manifest schema must be {MANIFEST_SCHEMA}, got {doc.get('schema')!r}")
        datasets = [_dataset(d, base) for d in doc.get("datasets", [])]
        if not datasets:
            raise ManifestError("manifest lists no datasets")
        names = [d.name for d in datasets]
        if len(set(names)) != len(names):
            raise ManifestError("dataset names must be unique")
        try:
            reps = [RepresentationSpec.parse(r) for r in doc.get("representations", DEFAULT_REPRESENTATIONS)]
        except (ValueError, KeyError) as exc:
            raise ManifestError(f"bad representation selector: {exc}") from None
        detectors = list(doc.get("detectors", FAMILIES))
        unknown = [d for d in detectors if d not in FAMILIES]
        if unknown:
            raise ManifestError(f"unknown detectors {unknown}; choose from {list(FAMILIES)}")
        out = Path(doc.get("output_dir", "results"))
        return cls(datasets, reps, detectors, parse_tuning(doc.get("tuning", "both")),
                   int(doc.get("seed", 0)), out if out.is_absolute() else base / out)


def parse_tuning(value: str) -> tuple[str, ...]:
    try:
        return _TUNING_ALIASES[str(value).lower()]
    except KeyError:
        raise ManifestError(f"tuning must be opt, default or both, got {value!r}") from None


def _source(entry, base: Path, default_label: str | None) -> Source:
    if isinstance(entry, str):
        entry = {"path": entry}
    if not isinstance(entry, dict):
        raise ManifestError(f"bad source entry {entry!r}")
    synth = entry.get("synth")
    label = entry.get("label", default_label)
    if synth is not None and label is None and synth.get("part") in SCENARIO_PARTS:
        label = "novel" if synth["part"] == "test-novel" else "normal"
    if label is None:
        raise ManifestError(f"test source {entry!r} needs a label")
    if synth is not None:
        if "scenario" in synth:
            if synth["scenario"] not in SCENARIOS or synth.get("part") not in SCENARIO_PARTS:
                raise ManifestError(f"synth source needs a scenario in {SCENARIOS} and part in {SCENARIO_PARTS}")
        elif "profiles" not in synth:
            raise ManifestError("synth source needs 'scenario'/'part' or 'profiles'")
        return Source(Label(label), synth=synth)
    path = Path(entry.get("path", entry.get("pcap", "")))
    if not str(path):
        raise ManifestError(f"source {entry!r} has neither path nor synth")
    return Source(Label(label), path=path if path.is_absolute() else base / path)


def _dataset(d: dict, base: Path) -> DatasetConfig:
    try:
        name = d["name"]
        monitored = list(d["monitored_src"])
        train = [_source(e, base, "normal") for e in d["train_files"]]
        test = [_source(e, base, None) for e in d["test_files"]]
    except KeyError as exc:
        raise ManifestError(f"dataset entry missing {exc}") from None
    if not monitored:
        raise ManifestError(f"{name}: monitored_src is empty")
    for ip in monitored:
        try:
            IPv4Address(ip)
        except ValueError:
            raise ManifestError(f"{name}: bad monitored address {ip!r}") from None
    if not train or any(s.label is not Label.NORMAL for s in train):
        raise ManifestError(f"{name}: needs at least one training source, all labeled normal")
    labels = {s.label for s in test}
    if not {Label.NORMAL, Label.NOVEL} <= labels:
        raise ManifestError(f"{name}: test sources must include both normal and novel")
    return DatasetConfig(name, monitored, train, test)


# ---------------------------------------------------------------- extract

@dataclass
class ExtractedDataset:
    flows: DatasetFlows
    skipped: int = 0
    truncated_files: list[str] = field(default_factory=list)

    def meta(self) -> dict:
        f = self.flows
        return {"name": f.name, "d0": f.d0, "max_duration": f.max_duration,
                "n_train": len(f.train), "n_test": len(f.test),
                "n_test_novel": int(f.test_novel.sum()), "skipped_frames": self.skipped,
                "truncated_files": self.truncated_files}


def _source_packets(src: Source, seed: int) -> tuple[list[Packet], int, bool]:
    if src.path is not None:
        try:
            with open(src.path, "rb") as fh:
                res = parse_pcap(fh)
        except OSError as exc:
            raise FlowbenchError(f"cannot read {src.path}: {exc}") from None
        return res.packets, res.skipped, res.truncated
    cfg = src.synth
    if "scenario" in cfg:
        parts = scenario_profiles(cfg["scenario"], int(cfg.get("n_train", 800)), int(cfg.get("n_test", 200)))
        part_index = SCENARIO_PARTS.index(cfg["part"])
        seed = int(cfg.get("seed", seed))
        return generate_part(parts[cfg["part"]], seed, part_index).packets, 0, False
    profiles = [TrafficProfile.from_dict(p) for p in cfg["profiles"]]
    return generate(profiles, int(cfg.get("seed", seed))).packets, 0, False


def extract_dataset(cfg: DatasetConfig, seed: int = 0) -> ExtractedDataset:
    """Assemble forward flows, truncate to the 90th-percentile training
    duration and fix ``d0`` from the truncated training flows."""
    skipped = 0
    truncated = []

    def flows_for(sources):
        out = []
        for src in sources:
            pkts, sk, tr = _source_packets(src, seed)
            nonlocal skipped
            skipped += sk
            if tr:
                truncated.append(src.describe())
            out += assemble_flows(pkts, cfg.monitored_src, label=src.label)
        return out

    train = flows_for(cfg.train)
    test = flows_for(cfg.test)
    if not train:
        raise FlowbenchError(f"{cfg.name}: no training flows from monitored hosts")
    if not any(f.label is Label.NOVEL for f in test) or not any(f.label is Label.NORMAL for f in test):
        raise FlowbenchError(f"{cfg.name}: test flows must include both classes")
    cap = flow_duration_percentile(train)
    if cap > 0:
        train = truncate_flows(train, cap)
        test = truncate_flows(test, cap)
    d0 = max(flow_length_percentile(train), 2)
    return ExtractedDataset(DatasetFlows(cfg.name, train, test, d0, cap), skipped, truncated)


STORE_COLUMNS = ("split", "flow_id", "src_ip", "src_port", "dst_ip", "dst_port", "protocol",
                 "label", "ts", "size", "ttl", "flags")


def write_flow_store(ds: ExtractedDataset, out_dir) -> tuple[Path, Path]:
    """Per-packet CSV (one row per packet, flows numbered per split) plus
    a JSON sidecar with ``d0`` and the duration cap."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{ds.flows.name}.csv"
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(STORE_COLUMNS)
        for split, flows in (("train", ds.flows.train), ("test", ds.flows.test)):
            for fid, flow in enumerate(flows):
                k = flow.key
                for p in flow.packets:
                    w.writerow((split, fid, k.src_ip, k.src_port, k.dst_ip, k.dst_port, k.protocol,
                                flow.label.value, repr(p.timestamp), p.payload_size, p.ttl, p.flags_byte))
    meta_path = out / f"{ds.flows.name}.meta.json"
    meta_path.write_text(json.dumps(ds.meta(), indent=2, sort_keys=True) + "\n")
    return csv_path, meta_path


def read_flow_store(csv_path) -> tuple[list[Flow], list[Flow]]:
    groups: dict[tuple[str, int], list] = {}
    with open(csv_path, newline="") as fh:
        for row in csv.DictReader(fh):
            key = FlowKey(IPv4Address(row["src_ip"]), int(row["src_port"]), IPv4Address(row["dst_ip"]),
                          int(row["dst_port"]), int(row["protocol"]))
            pkt = Packet(float(row["ts"]), key.src_ip, key.dst_ip, key.src_port, key.dst_port,
                         key.protocol, int(row["size"]), int(row["ttl"]), flags_from_byte(int(row["flags"])))
            entry = groups.setdefault((row["split"], int(row["flow_id"])), [key, Label(row["label"]), []])
            entry[2].append(pkt)
    out = {"train": [], "test": []}
    for (split, _), (key, label, pkts) in sorted(groups.items(), key=lambda kv: (kv[0][0], kv[0][1])):
        out[split].append(Flow(key, tuple(pkts), label))
    return out["train"], out["test"]


# ------------------------------------------------------------ subcommands

def cmd_extract(manifest: Manifest) -> list[ExtractedDataset]:
    store = manifest.output_dir / "flows"
    results = []
    for cfg in manifest.datasets:
        ds = extract_dataset(cfg, manifest.seed)
        write_flow_store(ds, store)
        log.info("%s: %d train / %d test flows, d0=%d", cfg.name, len(ds.flows.train), len(ds.flows.test), ds.flows.d0)
        results.append(ds)
    return results


def _safe(name: str) -> str:
    return name.replace("+", "_plus_").replace("/", "_")


def cmd_features(manifest: Manifest) -> list[Path]:
    """Raw (unstandardized) feature CSVs per dataset, representation and,
    for sampled kinds, window-length candidate."""
    written = []
    for cfg in manifest.datasets:
        ds = extract_dataset(cfg, manifest.seed).flows
        out = manifest.output_dir / "features" / cfg.name
        out.mkdir(parents=True, exist_ok=True)
        for rep in manifest.representations:
            spec = rep.base.with_params(d0=None if rep.kind is Kind.STATS else ds.d0)
            if spec.kind.sampled:
                d = ds.d0 - 1
                variants = [(f"__dt{i}", spec.with_params(delta_t=dt)) for i, dt in
                            enumerate(usable_delta_t(delta_t_candidates(ds.train, d), ds.train, d))]
            else:
                variants = [("", spec)]
            for suffix, full in variants:
                for split, flows in (("train", ds.train), ("test", ds.test)):
                    p = out / f"{_safe(rep.name)}{suffix}_{split}.csv"
                    build_matrix(flows, full).to_csv(p)
                    written.append(p)
    return written


def cmd_evaluate(manifest: Manifest, jobs: int = 1, figures: bool = True) -> EvalReport:
    extracted = [extract_dataset(cfg, manifest.seed) for cfg in manifest.datasets]
    datasets = [e.flows for e in extracted]
    cells = run_cells(datasets, manifest.representations, manifest.detectors,
                      manifest.tuning, manifest.seed, jobs)
    correlations = {}
    for ds in datasets:
        try:
            correlations[ds.name] = flow_header_correlations(ds.test)
        except FlowbenchError as exc:
            log.warning("%s: no header correlations (%s)", ds.name, exc)
    report = EvalReport(cells, {e.flows.name: e.meta() for e in extracted}, correlations, manifest.seed)
    report.write_all(manifest.output_dir, figures=figures)
    return report


def cmd_synth(scenario: str, seed: int, out_dir, n_train: int = 800, n_test: int = 200) -> Path:
    """Write the scenario's three captures and a manifest stub evaluating them."""
    from .synth import emit_pcap, scenario_hosts

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    parts = scenario_profiles(scenario, n_train, n_test)
    files = {}
    for i, part in enumerate(SCENARIO_PARTS):
        traffic = generate_part(parts[part], seed, i)
        files[part] = emit_pcap(traffic.packets, out / f"{scenario}-{part}.pcap").name
    manifest = {
        "schema": MANIFEST_SCHEMA,
        "seed": seed,
        "output_dir": "results",
        "tuning": "both",
        "detectors": list(FAMILIES),
        "representations": list(DEFAULT_REPRESENTATIONS),
        "datasets": [{
            "name": scenario,
            "monitored_src": scenario_hosts(scenario),
            "train_files": [{"path": files["train"], "label": "normal"}],
            "test_files": [{"path": files["test-normal"], "label": "normal"},
                           {"path": files["test-novel"], "label": "novel"}],
        }],
    }
    p = out / "manifest.json"
    p.write_text(json.dumps(manifest, indent=2) + "\n")
    return p


def report_failures(report: EvalReport, stream=None) -> int:
    stream = sys.stderr if stream is None else stream
    for c in report.failed:
        print(f"failed cell {'/'.join(c.key)}: {c.message}", file=stream)
    return 1 if report.failed else 0
