"""Benchmark stages: data generation, training, attribution, reporting.

Every stage is resumable: outputs already recorded in the manifest with a
matching checksum are skipped, so an interrupted run picks up where it left
off.  All results are deterministic given the config (worker count and
output location never influence content).
"""

from __future__ import annotations

import inspect
import json
import multiprocessing
import time
import zlib
from dataclasses import asdict
from pathlib import Path

import numpy as np

from ..attribution import METHODS, AttributionMap
from ..attribution.masking import MaskPolicy
from ..data import generate, import_jsonl, export_jsonl, task_spec
from ..data.records import PatientRecord
from ..errors import CheckpointError, MethodNotApplicableError, TrainingDivergedError
from ..faithfulness import (
    EXTRAPOLATION_POPULATIONS,
    FaithfulnessResult,
    build_report,
    extrapolate_hours,
    faithfulness_scores,
    win_matrix,
)
from ..models import SequenceClassifier, evaluate, load_checkpoint, save_checkpoint
from .config import BenchConfig
from .manifest import Manifest

# ---------------------------------------------------------------------------
# helpers


def _fmt(x) -> str:
    """Deterministic CSV cell: shortest round-trip repr, empty for NaN."""
    if x is None:
        return ""
    if isinstance(x, float) and np.isnan(x):
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _write_csv(path: Path, header, rows, config_hash: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"# config_hash={config_hash}", ",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(c) for c in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _derive_seed(base: int, *labels: str) -> int:
    """Stable per-(stage, pair) seed: independent of iteration order."""
    mix = np.random.SeedSequence([base] + [zlib.crc32(l.encode()) for l in labels])
    return int(mix.generate_state(1)[0])


def _match(value: str, allowed) -> bool:
    return allowed is None or value in allowed


def _data_paths(task: str) -> dict:
    return {split: f"data/{task}/{split}.jsonl" for split in ("train", "test", "interpret")}


def _ckpt_path(arch: str, task: str) -> str:
    return f"checkpoints/{arch}__{task}.npz"


def _attr_path(method: str, arch: str, task: str) -> str:
    return f"attributions/{method}__{arch}__{task}.jsonl"


def build_attributor(name: str, settings: dict, bench_seed: int, lab_fill: float):
    """Instantiate a registered method, wiring seed/mask defaults when the
    method accepts them."""
    cls = METHODS[name]
    kwargs = dict(settings)
    params = inspect.signature(cls.__init__).parameters
    if "seed" in params:
        kwargs.setdefault("seed", bench_seed)
    if "lab_fill" in params:
        kwargs.setdefault("lab_fill", lab_fill)
    return cls(**kwargs)


# ---------------------------------------------------------------------------
# worker fan-out (records are independent; per-record seeds hang off the
# record id, so results do not depend on worker count or completion order)

_ATTR_STATE: dict = {}
_FAITH_STATE: dict = {}


def _init_attr_worker(ckpt_path, method, settings, bench_seed, lab_fill):
    _ATTR_STATE["model"] = load_checkpoint(ckpt_path)
    _ATTR_STATE["attributor"] = build_attributor(method, settings, bench_seed, lab_fill)


def _attr_one(record_dict: dict) -> dict:
    record = PatientRecord.from_dict(record_dict)
    t0 = time.perf_counter()
    amap = _ATTR_STATE["attributor"].explain(_ATTR_STATE["model"], record)
    elapsed = time.perf_counter() - t0
    out = amap.to_dict()
    out["runtime_s"] = elapsed
    return out


def _init_faith_worker(ckpt_path, records_blob, k_grid, lab_fill):
    _FAITH_STATE["model"] = load_checkpoint(ckpt_path)
    _FAITH_STATE["records"] = {
        d["record_id"]: PatientRecord.from_dict(d) for d in records_blob
    }
    _FAITH_STATE["k_grid"] = tuple(k_grid)
    _FAITH_STATE["policy"] = MaskPolicy(lab_fill=lab_fill)


def _faith_one(map_dict: dict) -> dict:
    amap = AttributionMap.from_dict(map_dict)
    record = _FAITH_STATE["records"][amap.record_id]
    res = faithfulness_scores(
        _FAITH_STATE["model"], record, amap,
        k_grid=_FAITH_STATE["k_grid"], policy=_FAITH_STATE["policy"],
    )
    return res.to_dict()


def _map_with_workers(workers: int, init, initargs, fn, items):
    """Run ``fn`` over items, in-process for workers=1, else in a fork pool.

    Results come back in submission order either way.
    """
    if workers <= 1 or len(items) <= 1:
        init(*initargs)
        return [fn(item) for item in items]
    ctx = multiprocessing.get_context("fork")
    with ctx.Pool(processes=workers, initializer=init, initargs=initargs) as pool:
        return pool.map(fn, items, chunksize=max(1, len(items) // (workers * 4)))


# ---------------------------------------------------------------------------
# stage: gen-data


def stage_gen_data(cfg: BenchConfig, only_tasks=None) -> None:
    manifest = Manifest.load(cfg.output_dir, cfg.config_hash)
    dc = cfg.data_config()
    n_train, n_test = cfg.dataset["n_train"], cfg.dataset["n_test"]
    n_interpret = cfg.dataset["n_interpret"]
    for task in cfg.tasks:
        if not _match(task, only_tasks):
            continue
        paths = _data_paths(task)
        if all(manifest.is_current(p) for p in paths.values()):
            print(f"[gen-data] {task}: up to date")
            continue
        seed = _derive_seed(cfg.seeds["data"], task)
        pool = generate(task_spec(task), n_train + n_test, seed=seed, config=dc)
        train, test = pool[:n_train], pool[n_train:]
        # The interpretation subset: a without-replacement draw from the pool.
        pick_rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
        idx = np.sort(pick_rng.choice(len(pool), size=n_interpret, replace=False))
        interpret = [pool[i] for i in idx]
        for split, records in (("train", train), ("test", test), ("interpret", interpret)):
            rel = paths[split]
            export_jsonl(records, cfg.output_dir / rel)
            manifest.mark_file(rel, "gen-data")
        print(f"[gen-data] {task}: wrote {n_train}/{n_test}/{n_interpret} records")


# ---------------------------------------------------------------------------
# stage: train

_METRIC_HEADER = [
    "model", "task", "pr_auc", "roc_auc", "accuracy", "f1",
    "f1_weighted", "f1_macro", "f1_micro", "n_test",
]


def _metrics_row(arch, task, m: dict | None):
    if m is None:
        return [arch, task] + [None] * 7 + [0]
    return [
        arch, task,
        m["pr_auc"], m["roc_auc"], m["accuracy"], m["f1"],
        m["f1_weighted"], m["f1_macro"], m["f1_micro"], m["n"],
    ]


def stage_train(cfg: BenchConfig, only_models=None, only_tasks=None) -> None:
    manifest = Manifest.load(cfg.output_dir, cfg.config_hash)
    rows = []
    for arch in cfg.models:
        if not _match(arch, only_models):
            continue
        for task in cfg.tasks:
            if not _match(task, only_tasks):
                continue
            rel = _ckpt_path(arch, task)
            if manifest.is_current(rel):
                print(f"[train] {arch} on {task}: up to date")
                rows.append(_metrics_row(arch, task, manifest.extra(rel).get("metrics")))
                continue
            if manifest.status(rel) == "diverged":
                print(f"[train] {arch} on {task}: previously diverged, skipping")
                rows.append(_metrics_row(arch, task, None))
                continue
            spec = task_spec(task)
            train_recs = import_jsonl(cfg.output_dir / _data_paths(task)["train"])
            test_recs = import_jsonl(cfg.output_dir / _data_paths(task)["test"])
            model = SequenceClassifier(
                arch=arch,
                vocab_size=cfg.dataset["vocab_size"],
                n_labs=cfg.dataset["n_labs"],
                n_classes=spec.n_classes,
                embed_dim=cfg.model["embed_dim"],
                hidden_dim=cfg.model["hidden_dim"],
                n_layers=cfg.model["n_layers"],
                n_heads=cfg.model["n_heads"],
                ff_dim=cfg.model["ff_dim"],
                max_visits=cfg.dataset["max_visits"],
                max_codes=cfg.dataset["max_codes_per_visit"],
                epochs=cfg.training["epochs"],
                batch_size=cfg.training["batch_size"],
                lr=cfg.training["lr"],
                val_fraction=cfg.training["val_fraction"],
                lab_fill=cfg.lab_fill,
                seed=_derive_seed(cfg.seeds["train"], arch, task),
            )
            try:
                model.fit(train_recs)
            except TrainingDivergedError as e:
                print(f"[train] {arch} on {task}: DIVERGED ({e})")
                manifest.mark_status(rel, "train", "diverged", extra={"error": str(e)})
                rows.append(_metrics_row(arch, task, None))
                continue
            metrics = asdict(evaluate(model, test_recs))
            save_checkpoint(model, cfg.output_dir / rel)
            manifest.mark_file(rel, "train", extra={"metrics": metrics})
            rows.append(_metrics_row(arch, task, metrics))
            shown = metrics["roc_auc"] if spec.kind == "binary" else metrics["f1_macro"]
            print(f"[train] {arch} on {task}: done (held-out {shown:.3f})")
    rel = "reports/train_metrics.csv"
    _write_csv(cfg.output_dir / rel, _METRIC_HEADER, rows, cfg.config_hash)
    manifest.mark_file(rel, "train")


# ---------------------------------------------------------------------------
# stage: attribute


def stage_attribute(cfg: BenchConfig, only_methods=None, only_models=None, only_tasks=None) -> None:
    manifest = Manifest.load(cfg.output_dir, cfg.config_hash)
    interpret_cache: dict = {}
    for method in cfg.method_names():
        if not _match(method, only_methods):
            continue
        settings = cfg.method_settings(method)
        for arch in cfg.models:
            if not _match(arch, only_models):
                continue
            for task in cfg.tasks:
                if not _match(task, only_tasks):
                    continue
                rel = _attr_path(method, arch, task)
                if manifest.is_current(rel):
                    print(f"[attribute] {method} / {arch} / {task}: up to date")
                    continue
                if manifest.status(rel) == "not-applicable":
                    print(f"[attribute] {method} / {arch} / {task}: not applicable")
                    continue
                ckpt = cfg.output_dir / _ckpt_path(arch, task)
                if not ckpt.exists():
                    if manifest.status(_ckpt_path(arch, task)) == "diverged":
                        manifest.mark_status(rel, "attribute", "skipped-diverged")
                        print(f"[attribute] {method} / {arch} / {task}: skipped (training diverged)")
                        continue
                    raise CheckpointError(
                        f"missing checkpoint for ({arch}, {task}); run the train stage first"
                    )
                if task not in interpret_cache:
                    interpret_cache[task] = import_jsonl(
                        cfg.output_dir / _data_paths(task)["interpret"]
                    )
                records = interpret_cache[task]
                initargs = (str(ckpt), method, settings, cfg.seeds["bench"], cfg.lab_fill)

                # Probe the first record in-process: inapplicable methods
                # declare themselves before any fan-out.
                _init_attr_worker(*initargs)
                try:
                    first = _attr_one(records[0].to_dict())
                except MethodNotApplicableError as e:
                    manifest.mark_status(rel, "attribute", "not-applicable", extra={"reason": str(e)})
                    print(f"[attribute] {method} / {arch} / {task}: not applicable ({e})")
                    continue
                rest = _map_with_workers(
                    cfg.workers, _init_attr_worker, initargs, _attr_one,
                    [r.to_dict() for r in records[1:]],
                )
                lines = [first] + rest
                path = cfg.output_dir / rel
                path.parent.mkdir(parents=True, exist_ok=True)
                envelope = {
                    "kind": "attribution-set",
                    "config_hash": cfg.config_hash,
                    "method": method,
                    "model": arch,
                    "task": task,
                    "n_records": len(lines),
                }
                with open(path, "w", encoding="utf-8") as fh:
                    fh.write(json.dumps(envelope, sort_keys=True, separators=(",", ":")) + "\n")
                    for line in lines:
                        fh.write(json.dumps(line, sort_keys=True, separators=(",", ":")) + "\n")
                manifest.mark_file(rel, "attribute")
                mean_rt = float(np.mean([l["runtime_s"] for l in lines]))
                print(
                    f"[attribute] {method} / {arch} / {task}: "
                    f"{len(lines)} records, {mean_rt * 1e3:.1f} ms/record"
                )


# ---------------------------------------------------------------------------
# stage: report


def _read_attribution_file(path: Path):
    with open(path, "r", encoding="utf-8") as fh:
        envelope = json.loads(fh.readline())
        rows = [json.loads(line) for line in fh if line.strip()]
    return envelope, rows


def stage_report(cfg: BenchConfig, only_methods=None, only_models=None, only_tasks=None) -> None:
    from . import plots  # deferred: pulls in matplotlib

    manifest = Manifest.load(cfg.output_dir, cfg.config_hash)
    attr_dir = cfg.output_dir / "attributions"
    expected, available, gaps = [], [], []
    for method in cfg.method_names():
        if not _match(method, only_methods):
            continue
        for arch in cfg.models:
            if not _match(arch, only_models):
                continue
            for task in cfg.tasks:
                if not _match(task, only_tasks):
                    continue
                rel = _attr_path(method, arch, task)
                expected.append((method, arch, task))
                if (cfg.output_dir / rel).exists():
                    available.append((method, arch, task))
                elif manifest.status(rel) == "not-applicable":
                    pass  # explicit, legitimate gap: excluded from the grid
                else:
                    gaps.append((method, arch, task))
    if not available:
        raise RuntimeError("no attribution outputs found; run the attribute stage first")

    record_rows = []  # per-record faithfulness
    reports = []
    unit_means: dict = {}
    for method, arch, task in available:
        envelope, rows = _read_attribution_file(attr_dir / f"{method}__{arch}__{task}.jsonl")
        records = import_jsonl(cfg.output_dir / _data_paths(task)["interpret"])
        runtimes = [r.pop("runtime_s", float("nan")) for r in rows]
        initargs = (
            str(cfg.output_dir / _ckpt_path(arch, task)),
            [r.to_dict() for r in records],
            cfg.k_grid,
            cfg.lab_fill,
        )
        results_d = _map_with_workers(cfg.workers, _init_faith_worker, initargs, _faith_one, rows)
        results = [
            FaithfulnessResult(
                record_id=d["record_id"],
                method=d["method"],
                target_class=d["target_class"],
                comprehensiveness=d["comprehensiveness"],
                sufficiency=d["sufficiency"],
                composite=d["composite"],
                p_full=d["p_full"],
            )
            for d in results_d
        ]
        report = build_report(method, arch, task, results, runtimes, cfg.k_grid)
        reports.append(report)
        unit_means.setdefault(method, {})[(arch, task)] = report.composite
        for r in results:
            record_rows.append(
                [method, arch, task, r.record_id, r.target_class,
                 r.comprehensiveness, r.sufficiency, r.composite]
            )
        print(f"[report] {method} / {arch} / {task}: composite {report.composite:.4f}")

    out = cfg.output_dir / "reports"
    record_rows.sort(key=lambda r: (r[0], r[1], r[2], r[3]))
    _write_csv(
        out / "faithfulness_records.csv",
        ["method", "model", "task", "record_id", "target_class",
         "comprehensiveness", "sufficiency", "composite"],
        record_rows,
        cfg.config_hash,
    )
    manifest.mark_file("reports/faithfulness_records.csv", "report")

    reports.sort(key=lambda r: (r.method, r.model, r.task))
    _write_csv(
        out / "faithfulness.csv",
        ["method", "model", "task", "comprehensiveness", "sufficiency",
         "composite", "n_records", "k_grid"],
        [
            [r.method, r.model, r.task, r.comprehensiveness, r.sufficiency,
             r.composite, r.n_records, "|".join(repr(k) for k in r.k_grid)]
            for r in reports
        ],
        cfg.config_hash,
    )
    manifest.mark_file("reports/faithfulness.csv", "report")

    # Wall-clock values are inherently nondeterministic, so the runtime
    # profile lives in its own JSON artifact; every CSV report stays
    # byte-identical across reruns of the same config.
    runtime_rows = [
        {
            "method": r.method,
            "model": r.model,
            "task": r.task,
            "n_records": r.n_records,
            "seconds_per_record": r.runtime_per_record,
            "extrapolated_hours": (
                extrapolate_hours(r.runtime_per_record, EXTRAPOLATION_POPULATIONS[r.task])
                if r.task in EXTRAPOLATION_POPULATIONS else None
            ),
        }
        for r in reports
    ]
    (out / "runtime_profile.json").write_text(
        json.dumps({"config_hash": cfg.config_hash, "rows": runtime_rows}, indent=2) + "\n",
        encoding="utf-8",
    )
    manifest.mark_file("reports/runtime_profile.json", "report")

    methods_present = sorted(unit_means)
    wm = win_matrix(unit_means, methods=methods_present)
    _write_csv(
        out / "win_matrix.csv",
        ["method", "opponent", "wins", "comparisons"],
        [[r["method"], r["opponent"], r["wins"], r["comparisons"]] for r in wm.to_csv_rows()],
        cfg.config_hash,
    )
    manifest.mark_file("reports/win_matrix.csv", "report")

    md = ["# Head-to-head wins", "",
          "Cell = row method beats column method on w of d model-task pairs (ties excluded).", "",
          wm.to_markdown()]
    if gaps:
        md += ["", "Missing grid cells (no attribution output):", ""]
        md += [f"- {m} / {a} / {t}" for m, a, t in sorted(gaps)]
    md += ["", f"Config hash: {cfg.config_hash}", ""]
    (out / "win_matrix.md").write_text("\n".join(md), encoding="utf-8")
    manifest.mark_file("reports/win_matrix.md", "report")

    plot_dir = out / "plots"
    for task in sorted({r.task for r in reports}):
        rel = f"reports/plots/faithfulness_{task}.svg"
        plots.faithfulness_scatter(
            [r for r in reports if r.task == task], task, cfg.output_dir / rel, cfg.config_hash
        )
        manifest.mark_file(rel, "report")
    rel = "reports/plots/runtime_vs_comprehensiveness.svg"
    plots.runtime_scatter(reports, cfg.output_dir / rel, cfg.config_hash)
    manifest.mark_file(rel, "report")
    print(f"[report] wrote reports for {len(reports)} method/model/task cells "
          f"({len(gaps)} missing)")


# ---------------------------------------------------------------------------


def run_all(cfg: BenchConfig, only_methods=None, only_models=None, only_tasks=None) -> None:
    stage_gen_data(cfg, only_tasks)
    stage_train(cfg, only_models, only_tasks)
    stage_attribute(cfg, only_methods, only_models, only_tasks)
    stage_report(cfg, only_methods, only_models, only_tasks)
