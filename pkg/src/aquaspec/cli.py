"""Command-line interface: generate, evaluate, train, predict, explain.

Every command takes a single --seed and derives all internal randomness from
it, writes its outputs once at the end, and drops a run manifest next to
them (timestamp, resolved configuration, input digests, output paths), so
any artifact can be regenerated from its manifest.

Exit codes: 0 success, 2 user or configuration error, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .exceptions import AquaspecError, ShapeError
from .explain import explain_pipeline, sample_background, shap_summary
from .metrics import mape, r2, rmse
from .modelsel import HyperRanges, nested_cv, summarize
from .pipeline import SoftSensorPipeline
from .seeding import derive_seed
from .spectra import (
    Dataset,
    load_dataset,
    save_dataset,
    split_features_targets,
    validate_dataset,
)
from . import synthgen


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(
    manifest_path: Path,
    command: str,
    config: dict,
    seed: int | None,
    inputs: list[Path],
    outputs: list[Path],
    extra: dict | None = None,
) -> None:
    doc = {
        "command": command,
        "toolkit_version": __version__,
        "timestamp_utc": datetime.now(timezone.utc).isoformat(),
        "seed": seed,
        "config": config,
        "input_digests": {str(p): _sha256(p) for p in inputs},
        "outputs": [str(p) for p in outputs],
    }
    if extra:
        doc.update(extra)
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def _sibling_manifest(out_path: Path) -> Path:
    return out_path.with_name(out_path.stem + ".manifest.json")


def _load_labeled_dataset(path: Path) -> Dataset:
    dataset = load_dataset(path)
    report = validate_dataset(dataset)
    if not report.is_clean:
        raise AquaspecError(
            f"dataset '{path}' failed validation:\n{report.format_issues()}"
        )
    return dataset


def _check_grid(dataset: Dataset, model: SoftSensorPipeline, data_path) -> None:
    if model.grid_ is None:
        return
    if dataset.grid != model.grid_:
        raise ShapeError(
            f"grid mismatch: data '{data_path}' has {dataset.grid}, "
            f"model expects {model.grid_}"
        )


# ---------------------------------------------------------------------------
# Commands


def cmd_generate(args) -> None:
    config = (
        synthgen.load_config(args.config) if args.config else synthgen.default_config()
    )
    if args.seed is not None:
        import dataclasses

        config = dataclasses.replace(config, seed=args.seed)
    dataset = synthgen.generate_dataset(config)
    out = Path(args.out)
    save_dataset(dataset, out)
    _write_manifest(
        _sibling_manifest(out),
        "generate",
        synthgen.config_to_dict(config),
        config.seed,
        inputs=[Path(args.config)] if args.config else [],
        outputs=[out],
    )
    print(f"wrote {len(dataset)} samples to {out}")


def cmd_evaluate(args) -> None:
    data_path = Path(args.data)
    dataset = _load_labeled_dataset(data_path)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    report = nested_cv(
        dataset,
        HyperRanges(),
        use_pca=args.pca == "on",
        k_components=args.components,
        n_trials=args.trials,
        seed=args.seed,
        max_epochs=args.max_epochs,
        patience=args.patience,
        n_jobs=args.n_jobs,
    )
    summary = summarize(report)

    report_path = out_dir / "report.json"
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2)
        fh.write("\n")
    summary_path = out_dir / "summary.csv"
    summary_path.write_text(summary.to_csv(), encoding="utf-8")

    scatter_paths = []
    for j, target in enumerate(report.target_names):
        rows = ["true,predicted"]
        for fold in report.folds:
            for yt, yp in zip(fold.y_true[:, j], fold.y_pred[:, j]):
                rows.append(f"{yt!r},{yp!r}")
        path = out_dir / f"pred_vs_actual_{target}.csv"
        path.write_text("\n".join(rows) + "\n", encoding="utf-8")
        scatter_paths.append(path)

    _write_manifest(
        out_dir / "manifest.json",
        "evaluate",
        {
            "pca": args.pca,
            "components": args.components,
            "trials": args.trials,
            "max_epochs": args.max_epochs,
            "patience": args.patience,
            "n_jobs": args.n_jobs,
        },
        args.seed,
        inputs=[data_path],
        outputs=[report_path, summary_path, *scatter_paths],
    )
    print(f"evaluation written to {out_dir}")


def _load_train_config(path: Path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise AquaspecError(f"train config is not valid JSON: {exc}") from None
    known = {
        "use_pca",
        "k_components",
        "hidden_layers",
        "hidden_units",
        "learning_rate",
        "weight_decay",
        "max_epochs",
        "patience",
    }
    unknown = set(doc) - known
    if unknown:
        raise AquaspecError(f"train config has unknown fields: {sorted(unknown)}")
    return doc


def cmd_train(args) -> None:
    data_path = Path(args.data)
    dataset = _load_labeled_dataset(data_path)
    config = _load_train_config(Path(args.config))
    if args.pca is not None:
        config["use_pca"] = args.pca == "on"
    if args.components is not None:
        config["k_components"] = args.components

    X, Y = split_features_targets(dataset)
    pipe = SoftSensorPipeline(
        use_pca=bool(config.get("use_pca", True)),
        n_components=int(config.get("k_components", 15)),
        hidden_layers=int(config.get("hidden_layers", 1)),
        hidden_units=int(config.get("hidden_units", 512)),
        learning_rate=float(config.get("learning_rate", 5e-4)),
        weight_decay=float(config.get("weight_decay", 1e-3)),
        max_epochs=int(config.get("max_epochs", 8000)),
        patience=int(config.get("patience", 200)),
        val_fraction=0.25,
        seed=args.seed,
    )
    pipe.fit(X, Y, grid=dataset.grid, target_names=dataset.target_names)
    pipe.provenance_["trial_config"] = config

    out = Path(args.out)
    pipe.save(out)
    _write_manifest(
        _sibling_manifest(out),
        "train",
        config,
        args.seed,
        inputs=[data_path, Path(args.config)],
        outputs=[out],
        extra={
            "best_epoch": pipe.history_.best_epoch,
            "stopped_epoch": pipe.history_.stopped_epoch,
        },
    )
    print(f"model written to {out}")


def cmd_predict(args) -> None:
    model = SoftSensorPipeline.load(Path(args.model))
    data_path = Path(args.data)
    dataset = load_dataset(data_path)
    _check_grid(dataset, model, data_path)

    X = np.stack([s.spectrum.absorbance for s in dataset.samples])
    preds = model.predict(X)

    out = Path(args.out)
    header = "id," + ",".join(f"pred:{t}" for t in model.target_names_)
    lines = [header]
    for sample, row in zip(dataset.samples, preds):
        lines.append(sample.id + "," + ",".join(repr(float(v)) for v in row))
    out.write_text("\n".join(lines) + "\n", encoding="utf-8")

    extra: dict = {}
    labeled = [i for i, s in enumerate(dataset.samples) if s.is_labeled]
    if labeled and tuple(dataset.target_names) == model.target_names_:
        Y = np.stack([dataset.samples[i].targets for i in labeled])
        P = preds[labeled]
        metrics: dict = {}
        for j, target in enumerate(model.target_names_):
            entry: dict = {"rmse": rmse(Y[:, j], P[:, j])}
            try:
                entry["r2"] = r2(Y[:, j], P[:, j])
            except ValueError:
                entry["r2"] = None
            try:
                entry["mape"] = mape(Y[:, j], P[:, j], exclude_zero_truth=True)
            except ValueError:
                entry["mape"] = None
            metrics[target] = entry
        extra = {"metrics": metrics, "n_labeled": len(labeled)}

    _write_manifest(
        _sibling_manifest(out),
        "predict",
        {"model": str(args.model)},
        None,
        inputs=[Path(args.model), data_path],
        outputs=[out],
        extra=extra,
    )
    print(f"predictions written to {out}")


def cmd_explain(args) -> None:
    model = SoftSensorPipeline.load(Path(args.model))
    data_path = Path(args.data)
    dataset = load_dataset(data_path)
    _check_grid(dataset, model, data_path)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    ids = list(dataset.ids())
    if args.instances == "all":
        wanted = ids
    else:
        wanted = [token.strip() for token in args.instances.split(",") if token.strip()]
        unknown = [w for w in wanted if w not in ids]
        if unknown:
            raise AquaspecError(f"unknown instance ids: {unknown}")

    X = np.stack([s.spectrum.absorbance for s in dataset.samples])
    background = sample_background(
        X, m=10, seed=derive_seed(args.seed, "background")
    )
    wavelengths = dataset.grid.wavelengths()

    by_id = {s.id: s for s in dataset.samples}
    explanations = []
    outputs = []
    for instance_id in wanted:
        explanation = explain_pipeline(
            model,
            by_id[instance_id].spectrum,
            background,
            n_samples=args.samples,
            seed=derive_seed(args.seed, "instance", instance_id),
            instance_id=instance_id,
        )
        explanations.append(explanation)

        csv_path = out_dir / f"shap_{instance_id}.csv"
        rows = ["wavelength_nm,target,phi"]
        for t, target in enumerate(explanation.target_names):
            for w, value in zip(wavelengths, explanation.phi[t]):
                rows.append(f"{w:g},{target},{value!r}")
        csv_path.write_text("\n".join(rows) + "\n", encoding="utf-8")

        sidecar = out_dir / f"shap_{instance_id}.json"
        with open(sidecar, "w", encoding="utf-8") as fh:
            json.dump(
                {
                    "instance_id": instance_id,
                    "base_values": {
                        t: float(v)
                        for t, v in zip(
                            explanation.target_names, explanation.base_values
                        )
                    },
                    "prediction": {
                        t: float(v)
                        for t, v in zip(explanation.target_names, explanation.prediction)
                    },
                    "local_accuracy_error": {
                        t: float(v)
                        for t, v in zip(
                            explanation.target_names,
                            explanation.local_accuracy_error(),
                        )
                    },
                    "n_coalitions": explanation.n_coalitions,
                    "n_samples": explanation.n_samples,
                    "seed": explanation.seed,
                    "exhaustive": explanation.exhaustive,
                },
                fh,
                indent=2,
            )
            fh.write("\n")
        outputs += [csv_path, sidecar]

    summary = shap_summary(explanations)
    summary_path = out_dir / "summary_shap.csv"
    rows = ["wavelength_nm,target,mean_abs_phi"]
    for t, target in enumerate(model.target_names_):
        for w, value in zip(wavelengths, summary[t]):
            rows.append(f"{w:g},{target},{value!r}")
    summary_path.write_text("\n".join(rows) + "\n", encoding="utf-8")
    outputs.append(summary_path)

    _write_manifest(
        out_dir / "manifest.json",
        "explain",
        {
            "model": str(args.model),
            "instances": args.instances,
            "samples": args.samples,
            "background_size": background.shape[0],
        },
        args.seed,
        inputs=[Path(args.model), data_path],
        outputs=outputs,
    )
    print(f"explanations written to {out_dir}")


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aquaspec",
        description="UV-Vis water quality soft sensor toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a synthetic labeled dataset")
    p.add_argument("--config", help="SynthConfig JSON (default: built-in six-target mix)")
    p.add_argument("--out", required=True, help="output dataset CSV path")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("evaluate", help="double k-fold evaluation with random search")
    p.add_argument("--data", required=True, help="labeled dataset CSV")
    p.add_argument("--pca", choices=["on", "off"], default="on")
    p.add_argument("--components", type=int, default=15)
    p.add_argument("--trials", type=int, default=128)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--max-epochs", type=int, default=8000)
    p.add_argument("--patience", type=int, default=200)
    p.add_argument("--n-jobs", type=int, default=1)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("train", help="fit one pipeline on a 75/25 split and save it")
    p.add_argument("--data", required=True)
    p.add_argument("--config", required=True, help="pipeline + trial config JSON")
    p.add_argument("--out", required=True, help="output model JSON path")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pca", choices=["on", "off"], default=None,
                   help="override use_pca from the config")
    p.add_argument("--components", type=int, default=None,
                   help="override k_components from the config")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="predict targets for a dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="output predictions CSV")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("explain", help="per-wavelength SHAP attributions")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--instances", default="all",
                   help="comma-separated sample ids, or 'all'")
    p.add_argument("--samples", type=int, default=2048)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_explain)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        args.func(args)
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:  # includes every AquaspecError
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
