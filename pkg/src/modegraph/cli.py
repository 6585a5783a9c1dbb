"""Command line pipeline: ingest, test, decompose, transform, measure.

Subcommands
-----------
suitability
    Run the statistical test battery on the input series and write
    suitability.json; exit code 0 for a suitable verdict, 2 for
    marginal, 3 for unsuitable.
decompose
    Extract oscillatory modes and write imfs.csv, metrics.csv, and
    reconstruction.json.
transform
    Build the enabled graph types for every imfs.csv column and write
    edge lists, node features, and JSON under graphs/, plus params.csv
    with the resolved recurrence embedding parameters.
metrics
    Compute a topology report for every graph under graphs/ and write
    per-graph JSON plus topology_summary.csv.
run
    All four stages in order, plus run_manifest.json with a config
    snapshot, per-stage timings, and sha256 hashes of every output.

Configuration lives in an INI file with sections [input], [emd],
[transforms], [metrics], and [output]; unknown sections or keys are
rejected. Command line flags override file values. Defaults decompose
with eemd (max_imfs 14, sd_thresh 0.25, s_number 8, fixe_h 5, trials
100, noise_width 0.05, seed 0), build all three graph types, and cut
recurrence distances at the 10th percentile.
"""

import argparse
import configparser
import csv
import hashlib
import json
import sys
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np

from . import __version__
from .emd import EmdConfig, ceemdan, characterize, eemd, emd, validate_reconstruction
from .graphmetrics import topology_report
from .series import load_csv
from .stattests import suitability_report
from .ts2graph import Graph, hvg, nvg, recurrence_graph

__all__ = ["PipelineConfig", "RunManifest", "load_config", "main"]

METHODS = ("emd", "eemd", "ceemdan")
TRANSFORMS = ("nvg", "hvg", "recurrence")
VERDICT_EXIT = {"suitable": 0, "marginal": 2, "unsuitable": 3}

_SCHEMA = {
    "input": ("path", "column", "date_column"),
    "emd": (
        "method",
        "max_imfs",
        "sd_thresh",
        "s_number",
        "fixe_h",
        "trials",
        "noise_width",
        "seed",
    ),
    "transforms": ("methods", "percentile"),
    "metrics": ("enabled", "betweenness_sample"),
    "output": ("dir",),
}


@dataclass(frozen=True)
class PipelineConfig:
    """Everything one pipeline run depends on, resolvable to a file."""

    input_path: str = ""
    column: Union[str, int] = "close"
    date_column: Optional[str] = None
    method: str = "eemd"
    emd: EmdConfig = field(default_factory=EmdConfig)
    transforms: Tuple[str, ...] = TRANSFORMS
    percentile: float = 10.0
    metrics_enabled: bool = True
    betweenness_sample: Optional[int] = None
    out_dir: str = "out"

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(
                "method must be one of %s, got %r" % ("|".join(METHODS), self.method)
            )
        unknown = [t for t in self.transforms if t not in TRANSFORMS]
        if unknown:
            raise ValueError("unknown transforms %s" % unknown)
        # canonical order and deduplication keep output naming stable
        object.__setattr__(
            self,
            "transforms",
            tuple(t for t in TRANSFORMS if t in self.transforms),
        )
        if not 0.0 < self.percentile <= 100.0:
            raise ValueError("percentile must be in (0, 100]")
        if self.betweenness_sample is not None and self.betweenness_sample < 1:
            raise ValueError("betweenness_sample must be at least 1")

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["transforms"] = list(self.transforms)
        return doc


@dataclass(frozen=True)
class RunManifest:
    """Reproducibility record of one full pipeline run."""

    tool_version: str
    config: dict
    verdict: str
    stages: list  # [{"name", "seconds", "failures"|"skipped"}]
    files: dict  # relative path -> sha256 of content

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2)


# -- configuration ----------------------------------------------------------


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError("not a boolean: %r" % text)


def _parse_column(text: str) -> Union[str, int]:
    stripped = text.strip()
    return int(stripped) if stripped.isdigit() else stripped


def _parse_transforms(text: str) -> Tuple[str, ...]:
    parts = [p.strip() for p in text.split(",")]
    return tuple(p for p in parts if p)


def load_config(path: str) -> dict:
    """Parse an INI config file into PipelineConfig field overrides.

    Unknown sections or keys raise ValueError; missing file raises
    FileNotFoundError. Only keys present in the file appear in the
    result, so defaults and flag overrides survive layering.
    """
    parser = configparser.ConfigParser(interpolation=None)
    with open(path) as fh:  # surfaces FileNotFoundError with the path
        parser.read_file(fh, source=path)
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ValueError("%s: unknown config section [%s]" % (path, section))
        for key in parser[section]:
            if key not in _SCHEMA[section]:
                raise ValueError(
                    "%s: unknown key %r in section [%s]" % (path, key, section)
                )

    updates = {}
    emd_updates = {}
    if parser.has_option("input", "path"):
        updates["input_path"] = parser.get("input", "path")
    if parser.has_option("input", "column"):
        updates["column"] = _parse_column(parser.get("input", "column"))
    if parser.has_option("input", "date_column"):
        text = parser.get("input", "date_column").strip()
        updates["date_column"] = text or None
    if parser.has_option("emd", "method"):
        updates["method"] = parser.get("emd", "method").strip()
    for key, cast in (
        ("max_imfs", int),
        ("sd_thresh", float),
        ("s_number", int),
        ("fixe_h", int),
        ("trials", int),
        ("noise_width", float),
        ("seed", int),
    ):
        if parser.has_option("emd", key):
            emd_updates[key] = cast(parser.get("emd", key))
    if emd_updates:
        updates["emd_updates"] = emd_updates
    if parser.has_option("transforms", "methods"):
        updates["transforms"] = _parse_transforms(parser.get("transforms", "methods"))
    if parser.has_option("transforms", "percentile"):
        updates["percentile"] = float(parser.get("transforms", "percentile"))
    if parser.has_option("metrics", "enabled"):
        updates["metrics_enabled"] = _parse_bool(parser.get("metrics", "enabled"))
    if parser.has_option("metrics", "betweenness_sample"):
        text = parser.get("metrics", "betweenness_sample").strip()
        updates["betweenness_sample"] = int(text) if text else None
    if parser.has_option("output", "dir"):
        updates["out_dir"] = parser.get("output", "dir")
    return updates


def _resolve_config(args) -> PipelineConfig:
    updates = load_config(args.config) if args.config else {}
    emd_updates = updates.pop("emd_updates", {})
    if args.input is not None:
        updates["input_path"] = args.input
    if args.out_dir is not None:
        updates["out_dir"] = args.out_dir
    if args.method is not None:
        updates["method"] = args.method
    if args.transforms is not None:
        updates["transforms"] = _parse_transforms(args.transforms)
    if args.percentile is not None:
        updates["percentile"] = args.percentile
    if args.seed is not None:
        emd_updates["seed"] = args.seed
    if args.trials is not None:
        emd_updates["trials"] = args.trials
    if args.noise_width is not None:
        emd_updates["noise_width"] = args.noise_width
    if emd_updates:
        updates["emd"] = replace(EmdConfig(), **emd_updates)
    return PipelineConfig(**updates)


# -- output plumbing --------------------------------------------------------


def _write(root: Path, relative: str, text: str, inventory: dict) -> None:
    if not text.endswith("\n"):
        text += "\n"
    target = root / relative
    target.parent.mkdir(parents=True, exist_ok=True)
    data = text.encode("utf-8")
    target.write_bytes(data)
    inventory[relative] = hashlib.sha256(data).hexdigest()


def _load_series(cfg: PipelineConfig):
    if not cfg.input_path:
        raise ValueError("an input CSV is required (--input or [input] path)")
    return load_csv(cfg.input_path, cfg.column, cfg.date_column)


def _component_sort_key(name: str):
    if name.startswith("imf_") and name[4:].isdigit():
        return (0, int(name[4:]), "")
    if name == "residue":
        return (2, 0, "")
    return (1, 0, name)


# -- stages ------------------------------------------------------------------


def stage_suitability(cfg: PipelineConfig, out: Path, inventory: dict) -> str:
    report = suitability_report(_load_series(cfg))
    _write(out, "suitability.json", report.to_json(), inventory)
    return report.verdict


def stage_decompose(cfg: PipelineConfig, out: Path, inventory: dict):
    series = _load_series(cfg)
    decompose = {"emd": emd, "eemd": eemd, "ceemdan": ceemdan}[cfg.method]
    decomposition = decompose(series.values, cfg.emd)
    if decomposition.imfs:
        characterize(decomposition)
    _write(out, "imfs.csv", decomposition.to_csv(), inventory)

    lines = ["component,energy,variance,frequency_cycles,mean_amplitude,std"]
    for imf in decomposition.imfs:
        metrics = imf.metrics
        lines.append(
            "imf_%d,%s,%s,%d,%s,%s"
            % (
                imf.index,
                repr(metrics.energy),
                repr(metrics.variance),
                metrics.dominant_frequency_cycles,
                repr(metrics.mean_amplitude),
                repr(metrics.std),
            )
        )
    _write(out, "metrics.csv", "\n".join(lines), inventory)

    report = validate_reconstruction(decomposition, series.values)
    _write(
        out,
        "reconstruction.json",
        json.dumps(asdict(report), sort_keys=True, indent=2),
        inventory,
    )
    return decomposition


def _read_imfs_csv(path: Path):
    if not path.exists():
        raise ValueError("%s not found; run decompose first" % path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [row for row in reader if row]
    data = np.array(rows, dtype=float)
    return [(name, data[:, k]) for k, name in enumerate(header)]


def stage_transform(cfg: PipelineConfig, out: Path, inventory: dict):
    columns = _read_imfs_csv(out / "imfs.csv")
    failures = []
    params_rows = []
    for name, values in columns:
        for method in cfg.transforms:
            try:
                if method == "nvg":
                    graph = nvg(values, provenance=name)
                elif method == "hvg":
                    graph = hvg(values, provenance=name)
                else:
                    graph, params = recurrence_graph(
                        values, percentile=cfg.percentile, provenance=name
                    )
                    params_rows.append(
                        "%s,%d,%d,%s"
                        % (name, params.tau, params.dim, repr(params.epsilon))
                    )
            except Exception as exc:  # per-item fault isolation
                failures.append(
                    {"component": name, "method": method, "error": str(exc)}
                )
                continue
            stem = "graphs/%s.%s" % (name, method)
            _write(out, stem + ".edges.csv", graph.edges_csv(), inventory)
            _write(out, stem + ".features.csv", graph.features_csv(), inventory)
            _write(out, stem + ".json", graph.to_json(), inventory)
    if "recurrence" in cfg.transforms:
        _write(
            out,
            "params.csv",
            "\n".join(["component,tau,dim,epsilon"] + params_rows),
            inventory,
        )
    return failures


def stage_metrics(cfg: PipelineConfig, out: Path, inventory: dict):
    graph_dir = out / "graphs"
    files = sorted(graph_dir.glob("*.json"))
    if not files:
        raise ValueError("no graph files under %s; run transform first" % graph_dir)

    def order(path):
        component, method = path.name[: -len(".json")].rsplit(".", 1)
        rank = TRANSFORMS.index(method) if method in TRANSFORMS else len(TRANSFORMS)
        return (_component_sort_key(component), rank)

    failures = []
    header = None
    rows = []
    for path in sorted(files, key=order):
        component, method = path.name[: -len(".json")].rsplit(".", 1)
        try:
            graph = Graph.from_json(path.read_text())
            report = topology_report(
                graph, betweenness_sample=cfg.betweenness_sample
            )
        except Exception as exc:  # per-item fault isolation
            failures.append(
                {"component": component, "method": method, "error": str(exc)}
            )
            continue
        _write(
            out,
            "topology/%s.%s.topology.json" % (component, method),
            report.to_json(),
            inventory,
        )
        rep_header, rep_row, _ = report.to_csv().split("\n")
        header = "component,method," + rep_header
        rows.append("%s,%s,%s" % (component, method, rep_row))
    if header is not None:
        _write(out, "topology_summary.csv", "\n".join([header] + rows), inventory)
    return failures


# -- subcommands --------------------------------------------------------------


def cmd_suitability(cfg: PipelineConfig) -> int:
    inventory = {}
    verdict = stage_suitability(cfg, Path(cfg.out_dir), inventory)
    print("verdict: %s" % verdict)
    return VERDICT_EXIT[verdict]


def cmd_decompose(cfg: PipelineConfig) -> int:
    inventory = {}
    decomposition = stage_decompose(cfg, Path(cfg.out_dir), inventory)
    print(
        "%s: %d IMFs + residue -> %s"
        % (cfg.method, len(decomposition.imfs), cfg.out_dir)
    )
    return 0


def _report_failures(failures) -> None:
    for failure in failures:
        print(
            "warning: %(component)s/%(method)s failed: %(error)s" % failure,
            file=sys.stderr,
        )


def cmd_transform(cfg: PipelineConfig) -> int:
    inventory = {}
    failures = stage_transform(cfg, Path(cfg.out_dir), inventory)
    _report_failures(failures)
    print("wrote %d graph files to %s/graphs" % (len(inventory), cfg.out_dir))
    return 0


def cmd_metrics(cfg: PipelineConfig) -> int:
    if not cfg.metrics_enabled:
        print("metrics disabled by configuration", file=sys.stderr)
        return 0
    inventory = {}
    failures = stage_metrics(cfg, Path(cfg.out_dir), inventory)
    _report_failures(failures)
    print("wrote %d metric files to %s" % (len(inventory), cfg.out_dir))
    return 0


def cmd_run(cfg: PipelineConfig) -> int:
    out = Path(cfg.out_dir)
    inventory = {}
    stages = []
    verdict = ""
    plan = [
        ("suitability", lambda: stage_suitability(cfg, out, inventory)),
        ("decompose", lambda: stage_decompose(cfg, out, inventory)),
        ("transform", lambda: stage_transform(cfg, out, inventory)),
        ("metrics", lambda: stage_metrics(cfg, out, inventory)),
    ]
    for name, run_stage in plan:
        if name == "metrics" and not cfg.metrics_enabled:
            stages.append({"name": name, "skipped": True})
            continue
        started = time.perf_counter()
        try:
            result = run_stage()
        except Exception as exc:
            raise RuntimeError("stage %s failed: %s" % (name, exc)) from exc
        entry = {"name": name, "seconds": time.perf_counter() - started}
        if name == "suitability":
            verdict = result
        if name in ("transform", "metrics"):
            entry["failures"] = result
        stages.append(entry)
    manifest = RunManifest(
        tool_version=__version__,
        config=cfg.to_dict(),
        verdict=verdict,
        stages=stages,
        files=inventory,
    )
    (out / "run_manifest.json").write_text(manifest.to_json() + "\n")
    print("verdict: %s; %d files -> %s" % (verdict, len(inventory), cfg.out_dir))
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="modegraph",
        description="Decompose a time series into oscillatory modes and "
        "transform the components into graphs with topological reports.",
    )
    parser.add_argument(
        "--version", action="version", version="modegraph " + __version__
    )
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "suitability": "run the statistical test battery",
        "decompose": "extract oscillatory modes",
        "transform": "build graphs from decomposed components",
        "metrics": "compute topology reports for built graphs",
        "run": "full pipeline with a reproducibility manifest",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--input", help="input CSV path")
        p.add_argument("--config", help="INI configuration file")
        p.add_argument("--out-dir", help="output directory (default: out)")
        p.add_argument("--seed", type=int, help="ensemble noise seed")
        p.add_argument("--method", choices=METHODS, help="decomposition method")
        p.add_argument("--trials", type=int, help="ensemble size")
        p.add_argument("--noise-width", type=float, help="noise std fraction")
        p.add_argument("--percentile", type=float, help="recurrence cutoff")
        p.add_argument(
            "--transforms", help="comma separated subset of nvg,hvg,recurrence"
        )
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    dispatch = {
        "suitability": cmd_suitability,
        "decompose": cmd_decompose,
        "transform": cmd_transform,
        "metrics": cmd_metrics,
        "run": cmd_run,
    }
    try:
        cfg = _resolve_config(args)
        return dispatch[args.command](cfg)
    except Exception as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
