"""Acceptance gate: ten pass/fail checks covering the whole pipeline.

Each test prints exactly one ``[criterion N] PASS|FAIL — detail`` line outside
pytest's capture, so a plain ``pytest tests/test_acceptance.py`` run shows the
verdict for every criterion:

 1. exact Kernel SHAP reproduces brute-force Shapley enumeration
 2. integrated gradients satisfies completeness on every trained model
 3. the reference-multiplier method satisfies summation-to-delta
 4. tape gradients match central finite differences
 5. the tempered-backward method degenerates to gradient-x-input when no
    gates are rerouted and the graph has no softmax/normalization
 6. planted-signal separation: oracle + every gradient-based method beats
    the random baseline on faithfulness composites for all model-task pairs
 7. per-record runtime ordering (attention relevance < IG < LIME < SHAP)
    and a measured-rate projection of the full default benchmark under the
    two-hour budget on an eight-core machine
 8. win-matrix mechanics on synthetic composites with a known dominance
    order, including partial-coverage denominators and tie exclusion
 9. two end-to-end runs with identical config produce byte-identical CSVs
 10. LIME recovers the coefficients of an exactly-linear model

The shared ``bundle`` fixture trains nine small models (three architectures
by three tasks) on short synthetic sequences; criteria 2, 3, 5, and 6 reuse
it.  The whole module takes roughly fifteen to twenty-five minutes.
"""

import time

import numpy as np
import pytest
import yaml

from test_autodiff import _eval, build_probe, finite_difference_grad, max_rel_err

from seqattr.attribution import (
    CheferAttributor,
    DeepLiftAttributor,
    GimAttributor,
    GradientXInputAttributor,
    IntegratedGradientsAttributor,
    KernelShapAttributor,
    LimeAttributor,
    OracleAttributor,
    RandomBaselineAttributor,
)
from seqattr.attribution.perturbation import (
    brute_force_shapley,
    kernel_shap_values,
    lime_values,
)
from seqattr.autodiff.backward import backward
from seqattr.bench import build_attributor, load_config, run_all
from seqattr.data.generator import DataConfig, generate, task_spec
from seqattr.faithfulness.compare import paired_sign_test, win_matrix
from seqattr.faithfulness.metrics import faithfulness_scores
from seqattr.models import SequenceClassifier

ARCHS = ("transformer", "stage-recurrent", "stage-attn")
TASKS = ("mortality-like", "dka-like", "los-like")

# Evaluation bundle: short sequences keep the 9-model grid trainable in tens
# of seconds while every task still plants its full rule structure.
DATA_CFG = DataConfig(
    vocab_size=120, n_labs=5, min_visits=3, max_visits=8, max_codes_per_visit=6
)
N_TRAIN = 600
N_INTERPRET = 500


def _verdict(capsys, criterion: int, ok: bool, detail: str) -> None:
    with capsys.disabled():
        print(f"[criterion {criterion}] {'PASS' if ok else 'FAIL'} — {detail}")


def _spec(task: str):
    # The rare-outcome task keeps its rule mechanics but is generated balanced
    # here: at its natural 0.5% prevalence a 500-record evaluation draw would
    # contain almost no planted signal to separate methods on.
    if task == "dka-like":
        return task_spec(task, positive_rate=0.5)
    return task_spec(task)


def _interpretation_draw(task: str, n: int = N_INTERPRET) -> list:
    """Evaluation records: half rule-positive for binary tasks (separation
    needs the planted signal present), natural draw for the multiclass one."""
    pool = generate(_spec(task), 4 * n, seed=9, config=DATA_CFG)
    if task == "los-like":
        return pool[:n]
    pos = [r for r in pool if r.meta["rule"]["satisfied"]]
    neg = [r for r in pool if not r.meta["rule"]["satisfied"]]
    half = n // 2
    assert len(pos) >= half and len(neg) >= n - half, "draw pool too small"
    return pos[:half] + neg[: n - half]


@pytest.fixture(scope="module")
def bundle():
    models, interp = {}, {}
    for task in TASKS:
        spec = _spec(task)
        train = generate(spec, N_TRAIN, seed=1, config=DATA_CFG)
        interp[task] = _interpretation_draw(task)
        for arch in ARCHS:
            model = SequenceClassifier(
                arch=arch,
                vocab_size=DATA_CFG.vocab_size,
                n_labs=DATA_CFG.n_labs,
                n_classes=spec.n_classes,
                embed_dim=16,
                hidden_dim=16,
                n_layers=1,
                n_heads=2,
                ff_dim=32,
                max_visits=DATA_CFG.max_visits,
                max_codes=DATA_CFG.max_codes_per_visit,
                epochs=28,
                batch_size=32,
                lr=3e-3,
                seed=5,
            )
            model.fit(train)
            models[arch, task] = model
    return {"models": models, "interp": interp}


# ---------------------------------------------------------------------------
# 1. Shapley oracle equivalence


def test_criterion_1_shapley_oracle_equivalence(capsys):
    t0 = time.perf_counter()
    worst = 0.0
    for i in range(20):
        rng = np.random.default_rng(100 + i)
        d = int(rng.integers(3, 11))  # 3..10 features
        lin = rng.normal(size=d)
        quad = rng.normal(size=(d, d)) / d
        bias = float(rng.normal())

        def value_fn(z, lin=lin, quad=quad, bias=bias):
            z = np.asarray(z, dtype=float)
            return bias + float(lin @ z) + float(z @ quad @ z)

        phi_ref = brute_force_shapley(value_fn, d)
        phi, meta = kernel_shap_values(value_fn, d)
        assert meta["mode"] == "exact"
        worst = max(worst, float(np.max(np.abs(phi - phi_ref))))
    runtime = time.perf_counter() - t0
    ok = worst < 1e-6 and runtime < 60.0
    _verdict(
        capsys, 1,
        ok, f"20 toy models (d<=10): max|Δφ|={worst:.2e} (<1e-6), {runtime:.1f}s (<60s)",
    )
    assert ok


# ---------------------------------------------------------------------------
# 2. Integrated-gradients completeness on every trained model


def test_criterion_2_ig_completeness(bundle, capsys):
    ig_200 = IntegratedGradientsAttributor(n_steps=200)
    ig_5 = IntegratedGradientsAttributor(n_steps=5)
    worst_ratio, worst_frac, worst_pair = 0.0, 1.0, ""
    for (arch, task), model in bundle["models"].items():
        records = bundle["interp"][task][:100]
        res_hi, res_lo, deltas = [], [], []
        for r in records:
            hi = ig_200.explain(model, r)
            lo = ig_5.explain(model, r)
            res_hi.append(hi.meta["completeness_residual"])
            res_lo.append(lo.meta["completeness_residual"])
            deltas.append(abs(hi.meta["delta"]))
        ratio = float(np.mean(res_hi)) / max(float(np.mean(deltas)), 1e-300)
        frac = float(np.mean(np.asarray(res_hi) < np.asarray(res_lo)))
        if ratio > worst_ratio:
            worst_ratio, worst_pair = ratio, f"{arch}/{task}"
        worst_frac = min(worst_frac, frac)
    ok = worst_ratio < 0.01 and worst_frac >= 0.9
    _verdict(
        capsys, 2,
        ok,
        f"9 pairs x 100 records: worst mean-residual/mean|ΔF| = {worst_ratio:.2%}"
        f" ({worst_pair}, <1%), residual shrinks 5→200 steps in ≥{worst_frac:.0%}"
        " of records (need ≥90%)",
    )
    assert ok


# ---------------------------------------------------------------------------
# 3. Summation-to-delta


def test_criterion_3_summation_to_delta(bundle, capsys):
    method = DeepLiftAttributor()
    worst, worst_pair = 0.0, ""
    for (arch, task), model in bundle["models"].items():
        for r in bundle["interp"][task][:100]:
            gap = method.explain(model, r).meta["summation_gap"]
            if gap > worst:
                worst, worst_pair = gap, f"{arch}/{task}"
    ok = worst < 1e-5
    _verdict(
        capsys, 3,
        ok, f"9 models x 100 records: max |Σattr − ΔF| = {worst:.2e} ({worst_pair}, <1e-5)",
    )
    assert ok


# ---------------------------------------------------------------------------
# 4. Gradients vs central finite differences


def test_criterion_4_gradient_correctness(capsys):
    worst = 0.0
    for seed in range(100):
        run, x0, tape, out = build_probe(seed)
        g_ad = backward(tape, out)[tape.leaf_ids[0]].ravel()
        g_fd = finite_difference_grad(lambda xv, r=run: _eval(r, xv), x0)
        worst = max(worst, max_rel_err(g_ad, g_fd))
    ok = worst < 1e-4
    _verdict(capsys, 4, ok, f"100 randomized probes: max rel err = {worst:.2e} (<1e-4)")
    assert ok


# ---------------------------------------------------------------------------
# 5. Tempered backward degenerates to gradient-x-input without gate flags


def test_criterion_5_gim_degeneracy(bundle, capsys):
    gim = GimAttributor(gate_flags=())
    gxi = GradientXInputAttributor()
    worst = 0.0
    for task in TASKS:
        model = bundle["models"]["stage-recurrent", task]
        for r in bundle["interp"][task][:100]:
            a = gim.explain(model, r)
            b = gxi.explain(model, r)
            worst = max(worst, float(np.max(np.abs(a.scores - b.scores))))
    ok = worst < 1e-8
    _verdict(
        capsys, 5,
        ok, f"stage-recurrent, 3 tasks x 100 records: max |gim − gxi| = {worst:.2e} (<1e-8)",
    )
    assert ok


# ---------------------------------------------------------------------------
# 6. Planted-signal separation from the random baseline


def test_criterion_6_planted_signal_separation(bundle, capsys):
    methods = {
        "oracle": OracleAttributor(),
        "gradient-x-input": GradientXInputAttributor(),
        # completeness is criterion 2's job; a short path keeps this test
        # tractable without changing which features rank on top
        "integrated-gradients": IntegratedGradientsAttributor(n_steps=8),
        "deeplift": DeepLiftAttributor(),
        "gim": GimAttributor(),
        "chefer": CheferAttributor(),
    }
    random_baseline = RandomBaselineAttributor(seed=0)
    failures, worst_p, worst_label, n_pairs = [], 0.0, "", 0
    for (arch, task), model in bundle["models"].items():
        records = bundle["interp"][task]
        rand_scores = np.array(
            [
                faithfulness_scores(model, r, random_baseline.explain(model, r)).composite
                for r in records
            ]
        )
        for name, attributor in methods.items():
            if name == "chefer" and arch == "stage-recurrent":
                continue
            scores = np.array(
                [
                    faithfulness_scores(model, r, attributor.explain(model, r)).composite
                    for r in records
                ]
            )
            test = paired_sign_test(scores, rand_scores)
            ok_pair = (
                float(scores.mean()) > float(rand_scores.mean())
                and test["p_value"] < 0.01
            )
            n_pairs += 1
            label = f"{name}@{arch}/{task}"
            if not ok_pair:
                failures.append(f"{label} p={test['p_value']:.2g}")
            if test["p_value"] > worst_p:
                worst_p, worst_label = test["p_value"], label
    ok = not failures
    detail = (
        f"{n_pairs} method-model-task pairs x {N_INTERPRET} records: all beat random"
        f" (worst p={worst_p:.2g} at {worst_label}, need <0.01)"
        if ok
        else f"failing pairs: {', '.join(failures)}"
    )
    _verdict(capsys, 6, ok, detail)
    assert ok


# ---------------------------------------------------------------------------
# 7. Runtime ordering and the two-hour default-benchmark budget


def _default_dim_model(arch: str, cfg) -> SequenceClassifier:
    return SequenceClassifier(
        arch=arch,
        vocab_size=cfg.dataset["vocab_size"],
        n_labs=cfg.dataset["n_labs"],
        embed_dim=cfg.model["embed_dim"],
        hidden_dim=cfg.model["hidden_dim"],
        n_layers=cfg.model["n_layers"],
        n_heads=cfg.model["n_heads"],
        ff_dim=cfg.model["ff_dim"],
        max_visits=cfg.dataset["max_visits"],
        max_codes=cfg.dataset["max_codes_per_visit"],
        seed=0,
    ).initialize()


def test_criterion_7_runtime_ordering_and_budget(capsys):
    cfg = load_config(None)  # shipped defaults
    long_cfg = DataConfig(
        vocab_size=cfg.dataset["vocab_size"],
        n_labs=cfg.dataset["n_labs"],
        min_visits=28,
        max_visits=cfg.dataset["max_visits"],
        max_codes_per_visit=cfg.dataset["max_codes_per_visit"],
    )
    records = [
        r
        for r in generate(task_spec("mortality-like"), 30, seed=42, config=long_cfg)
        if r.n_features >= 168
    ][:8]
    assert len(records) == 8

    transformer = _default_dim_model("transformer", cfg)
    timed = {
        "chefer": CheferAttributor(),
        "integrated-gradients": IntegratedGradientsAttributor(n_steps=50),
        "lime": LimeAttributor(n_samples=200),
        "kernel-shap": KernelShapAttributor(),
    }
    per_record, min_coalitions = {}, None
    for name, method in timed.items():
        method.explain(transformer, records[0])  # warm-up
        t0 = time.perf_counter()
        for r in records:
            amap = method.explain(transformer, r)
            if name == "kernel-shap":
                n_coal = int(amap.meta["n_coalitions"])
                min_coalitions = n_coal if min_coalitions is None else min(min_coalitions, n_coal)
        per_record[name] = (time.perf_counter() - t0) / len(records)

    t = per_record
    ordering_ok = (
        t["chefer"] < t["integrated-gradients"] < t["lime"] < t["kernel-shap"]
    )
    ratio = t["integrated-gradients"] / t["chefer"]
    coalition_ok = min_coalitions >= 254

    # Projection of the full default benchmark from rates measured on this
    # machine: per-method explain rates and the forward rate per architecture
    # (on the longest records, an overestimate), training and generation
    # rates from short probes.  The attribute and report stages fan records
    # out over a fork pool, so they divide by the configured worker count at
    # a conservative 75% parallel efficiency; generation and training stay
    # serial.  Faithfulness costs at most 2*len(k_grid)+1 forwards per map.
    probe = records[:3]
    method_rate, forward_rate = {}, {}
    for arch in ARCHS:
        model = transformer if arch == "transformer" else _default_dim_model(arch, cfg)
        model.predict_proba_record(probe[0])
        t0 = time.perf_counter()
        for _ in range(3):
            for r in probe:
                model.predict_proba_record(r)
        forward_rate[arch] = (time.perf_counter() - t0) / (3 * len(probe))
        for spec_m in cfg.methods:
            name = spec_m["name"]
            if name == "chefer" and arch == "stage-recurrent":
                continue
            method = build_attributor(
                name,
                {k: v for k, v in spec_m.items() if k != "name"},
                bench_seed=0,
                lab_fill=cfg.lab_fill,
            )
            method.explain(model, probe[0])
            t0 = time.perf_counter()
            for r in probe:
                method.explain(model, r)
            method_rate[arch, name] = (time.perf_counter() - t0) / len(probe)

    train_rate = {}
    short_train = generate(task_spec("mortality-like"), 128, seed=5, config=DataConfig(
        vocab_size=cfg.dataset["vocab_size"],
        n_labs=cfg.dataset["n_labs"],
        min_visits=cfg.dataset["min_visits"],
        max_visits=cfg.dataset["max_visits"],
        max_codes_per_visit=cfg.dataset["max_codes_per_visit"],
    ))
    for arch in ARCHS:
        model = SequenceClassifier(
            arch=arch,
            vocab_size=cfg.dataset["vocab_size"],
            n_labs=cfg.dataset["n_labs"],
            embed_dim=cfg.model["embed_dim"],
            hidden_dim=cfg.model["hidden_dim"],
            n_layers=cfg.model["n_layers"],
            n_heads=cfg.model["n_heads"],
            ff_dim=cfg.model["ff_dim"],
            max_visits=cfg.dataset["max_visits"],
            max_codes=cfg.dataset["max_codes_per_visit"],
            epochs=1,
            batch_size=cfg.training["batch_size"],
            lr=cfg.training["lr"],
            seed=0,
        )
        t0 = time.perf_counter()
        model.fit(short_train)
        train_rate[arch] = (time.perf_counter() - t0) / len(short_train)

    t0 = time.perf_counter()
    generate(task_spec("mortality-like"), 250, seed=7, config=DataConfig())
    gen_rate = (time.perf_counter() - t0) / 250

    n_tasks = len(cfg.tasks)
    n_interp = cfg.dataset["n_interpret"]
    attr_serial = sum(method_rate.values()) * n_interp * n_tasks
    forwards_per_map = 2 * len(cfg.k_grid) + 1
    faith_serial = sum(
        forwards_per_map * forward_rate[arch] * n_interp
        for (arch, _name) in method_rate
    ) * n_tasks
    train_serial = sum(train_rate.values()) * cfg.dataset["n_train"] * cfg.training["epochs"] * n_tasks
    gen_serial = gen_rate * (cfg.dataset["n_train"] + cfg.dataset["n_test"]) * n_tasks
    effective_workers = cfg.workers * 0.75
    projected = (
        gen_serial
        + train_serial
        + (attr_serial + faith_serial) / effective_workers
        + 120.0  # report assembly, plots, and manifest slack
    )
    budget_ok = cfg.workers <= 8 and projected < 7200.0

    ok = ordering_ok and ratio >= 10.0 and coalition_ok and budget_ok
    _verdict(
        capsys, 7,
        ok,
        "per-record ms chefer/IG/LIME/SHAP = "
        f"{t['chefer']*1e3:.1f}/{t['integrated-gradients']*1e3:.1f}/"
        f"{t['lime']*1e3:.1f}/{t['kernel-shap']*1e3:.1f}"
        f" (ordered={ordering_ok}), IG/chefer={ratio:.1f}x (≥10), "
        f"coalitions≥{min_coalitions} (≥254), projected full run "
        f"{projected/60:.0f} min on {cfg.workers} workers (<120)",
    )
    assert ok


# ---------------------------------------------------------------------------
# 8. Win-matrix mechanics on synthetic composites


def test_criterion_8_win_matrix_mechanics(capsys):
    units_all = [f"u{i}" for i in range(9)]
    units_attn = units_all[:6]  # a method that skips one architecture
    unit_means = {
        "strong": {u: 4.0 for u in units_all},
        "middle": {u: 3.0 for u in units_all},
        "weak": dict({u: 2.0 for u in units_all}, u0=3.0),  # one tie with middle
        "attn-only": {u: 3.5 for u in units_attn},
    }
    order = ["strong", "middle", "weak", "attn-only"]
    matrix = win_matrix(unit_means, methods=order)
    want_wins = np.array(
        [
            [0, 9, 9, 6],
            [0, 0, 8, 0],  # the tied unit is a win for neither side
            [0, 0, 0, 0],
            [0, 6, 6, 0],
        ],
        dtype=float,
    )
    want_comparisons = np.array(
        [
            [0, 9, 9, 6],
            [9, 0, 9, 6],
            [9, 9, 0, 6],
            [6, 6, 6, 0],
        ],
        dtype=float,
    )
    markdown = matrix.to_markdown()
    ok = (
        np.array_equal(matrix.wins, want_wins)
        and np.array_equal(matrix.comparisons, want_comparisons)
        and "| attn-only | 0/6 | 6/6 | 6/6 | — |" in markdown
        and "8/9" in markdown
    )
    _verdict(
        capsys, 8,
        ok,
        "synthetic dominance reproduced exactly; partial coverage denominates /6,"
        " tie excluded from wins but counted as a comparison",
    )
    assert ok


# ---------------------------------------------------------------------------
# 9. End-to-end determinism


def test_criterion_9_byte_identical_reports(tmp_path, capsys):
    raw = {
        "output_dir": "placeholder",  # overridden per run, excluded from hash
        "workers": 1,
        "seeds": {"data": 11, "train": 22, "bench": 33},
        "tasks": ["mortality-like"],
        "models": ["transformer", "stage-recurrent"],
        "methods": [
            {"name": "random"},
            {"name": "integrated-gradients", "n_steps": 4},
            {"name": "deeplift"},
            {"name": "chefer"},
            {"name": "kernel-shap", "n_coalitions": 32},
        ],
        "dataset": {
            "n_train": 60, "n_test": 24, "n_interpret": 16,
            "vocab_size": 30, "n_labs": 2, "min_visits": 2, "max_visits": 4,
            "max_codes_per_visit": 3,
        },
        "model": {"embed_dim": 8, "hidden_dim": 8, "n_layers": 1, "n_heads": 2, "ff_dim": 16},
        "training": {"epochs": 2, "batch_size": 16, "lr": 0.001, "val_fraction": 0.1},
        "k_grid": [0.1, 0.5],
        "mask_policy": {"lab_fill": 0.0},
    }
    path = tmp_path / "bench.yaml"
    path.write_text(yaml.safe_dump(raw), encoding="utf-8")
    out1, out2 = tmp_path / "run1", tmp_path / "run2"
    cfg1 = load_config(path, overrides={"output_dir": str(out1)})
    cfg2 = load_config(path, overrides={"output_dir": str(out2)})
    assert cfg1.config_hash == cfg2.config_hash
    run_all(cfg1)
    run_all(cfg2)
    csvs = sorted((out1 / "reports").glob("*.csv"))
    identical = [
        p.name
        for p in csvs
        if (out2 / "reports" / p.name).read_bytes() == p.read_bytes()
    ]
    ok = len(csvs) >= 3 and len(identical) == len(csvs)
    _verdict(
        capsys, 9,
        ok, f"two end-to-end runs: {len(identical)}/{len(csvs)} CSV reports byte-identical",
    )
    assert ok


# ---------------------------------------------------------------------------
# 10. LIME linear recovery


def test_criterion_10_lime_linear_recovery(capsys):
    rng = np.random.default_rng(11)
    d = 12
    w = rng.uniform(0.5, 2.0, size=d) * rng.choice([-1.0, 1.0], size=d)
    x = rng.normal(size=d)
    baseline = x - rng.uniform(0.5, 1.5, size=d) * rng.choice([-1.0, 1.0], size=d)
    true_coefs = w * (x - baseline)

    def value_fn(z):
        z = np.asarray(z, dtype=float)
        return float(w @ (baseline + z * (x - baseline)))

    coefs, _meta = lime_values(
        value_fn, d, n_samples=2000, ridge_lambda=1e-6, rng=np.random.default_rng(5)
    )
    rel = float(np.max(np.abs(coefs - true_coefs) / np.abs(true_coefs)))
    ok = rel < 0.02
    _verdict(
        capsys, 10,
        ok, f"linear model, 2000 samples, λ=1e-6: max coefficient rel err = {rel:.2%} (<2%)",
    )
    assert ok
