"""Command-line entry point for reproducible end-to-end runs.

Commands: ``train``, ``evaluate``, ``predict``, ``augment``, ``synth``,
``diagnose``. A run is configured by one JSON document (see README);
``--seed`` and ``--out`` override the corresponding config fields. Every
output byte is a pure function of (config, seed): files carry no
timestamps, floats are serialized to full precision, and writes are atomic.

Exit codes: 0 success, 2 config error, 3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import hashlib
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import chainio
from . import data as data_mod
from .augmentation import AugmentPolicy, _variants, augment_dataset
from .diagnostics import chain_diagnostics
from .errors import ConfigError, DataError, DivergenceError
from .evaluation import confusion_matrix, metrics_from_confusion, roc_curve
from .features import ConvStackSpec, extract_features_batch
from .model import (
    ACTIVATIONS,
    Dataset,
    NetworkSpec,
    PriorSpec,
    param_count,
)
from .samplers import (
    HmcConfig,
    RandomWalkProposal,
    posterior_predict_batch,
    posterior_target,
    run_chains,
)

FORMAT_VERSION = 1
FLOAT_FORMAT = "%.17g"
MIN_RETAINED = 10  # diagnostics need at least this many retained samples
MAX_SEED = 2**64 - 1


# ---------------------------------------------------------------------------
# Config parsing (field-path error enumeration)


@dataclass(frozen=True)
class TrainConfig:
    dataset_kind: str
    dataset_path: Path
    dataset_path_raw: str
    conv_spec: ConvStackSpec | None
    augment: AugmentPolicy | None
    split: "data_mod.SplitSpec"
    hidden_dims: tuple[int, ...]
    activation: str
    prior: PriorSpec
    kernel: RandomWalkProposal | HmcConfig
    n_iter: int
    burn_in: int | None
    thin: int
    n_chains: int
    seed: int
    out_dir: Path


def _read_config(path) -> dict:
    try:
        raw = chainio.read_json(path)
    except DataError as exc:
        raise ConfigError(str(exc)) from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return raw


def _reject_unknown(section: dict, path: str, allowed, errors: list) -> None:
    for key in sorted(section):
        if key not in allowed:
            errors.append(f"{_join(path, key)}: unknown field")


def _join(path: str, key: str) -> str:
    return f"{path}.{key}" if path else key


_TYPE_CHECKS = {
    "int": lambda v: isinstance(v, int) and not isinstance(v, bool),
    "number": lambda v: isinstance(v, (int, float)) and not isinstance(v, bool),
    "bool": lambda v: isinstance(v, bool),
    "str": lambda v: isinstance(v, str),
    "list": lambda v: isinstance(v, list),
    "object": lambda v: isinstance(v, dict),
}


def _field(section: dict, key: str, path: str, expect: str, errors: list,
           required: bool = False, default=None):
    if key not in section:
        if required:
            errors.append(f"{_join(path, key)}: missing required field")
        return default
    value = section[key]
    if not _TYPE_CHECKS[expect](value):
        errors.append(
            f"{_join(path, key)}: expected {expect}, got {type(value).__name__}"
        )
        return default
    return value


def _seed_field(section: dict, path: str, errors: list, default: int) -> int:
    seed = _field(section, "seed", path, "int", errors, default=default)
    if seed is not None and not 0 <= seed <= MAX_SEED:
        errors.append(f"{_join(path, 'seed')}: must lie in [0, 2^64)")
        return default
    return seed


def _parse_conv(section, path, errors) -> ConvStackSpec | None:
    kwargs = {}
    stages = _field(section, "stages", path, "list", errors)
    if stages is not None:
        parsed = []
        for i, stage in enumerate(stages):
            if (
                not isinstance(stage, list)
                or len(stage) != 3
                or any(isinstance(v, bool) or not isinstance(v, int) for v in stage)
            ):
                errors.append(
                    f"{path}.stages[{i}]: expected [n_kernels, kernel_size, pool_size]"
                )
                return None
            parsed.append(tuple(stage))
        kwargs["stages"] = tuple(parsed)
    output_dim = _field(section, "output_dim", path, "int", errors)
    if output_dim is not None:
        kwargs["output_dim"] = output_dim
    kernel_seed = _field(section, "kernel_seed", path, "int", errors)
    if kernel_seed is not None:
        kwargs["kernel_seed"] = kernel_seed
    _reject_unknown(section, path, {"stages", "output_dim", "kernel_seed"}, errors)
    try:
        return ConvStackSpec(**kwargs)
    except ValueError as exc:
        errors.append(f"{path}: {exc}")
        return None


def _parse_augment(section, path, errors, default_seed) -> AugmentPolicy | None:
    allowed = {"rotations", "flips", "scales", "per_image_count", "seed"}
    _reject_unknown(section, path, allowed, errors)
    kwargs = {"seed": _seed_field(section, path, errors, default_seed)}
    for key in ("rotations", "flips", "scales"):
        value = _field(section, key, path, "list", errors)
        if value is not None:
            kwargs[key] = tuple(value)
    count = _field(section, "per_image_count", path, "int", errors)
    if count is not None:
        kwargs["per_image_count"] = count
    # The policy's field checks are independent, so probe each provided
    # value alone to report a precise field path.
    ok = True
    for key, value in kwargs.items():
        if key == "seed":
            continue
        try:
            AugmentPolicy(**{key: value})
        except (ValueError, TypeError) as exc:
            errors.append(f"{_join(path, key)}: {exc}")
            ok = False
    return AugmentPolicy(**kwargs) if ok else None


def _parse_kernel(section, path, errors):
    kind = _field(section, "kind", path, "str", errors, required=True)
    if kind == "rw":
        _reject_unknown(section, path, {"kind", "step_scale"}, errors)
        step_scale = _field(section, "step_scale", path, "number", errors,
                            required=True)
        if step_scale is None:
            return None
        try:
            return RandomWalkProposal(step_scale=float(step_scale))
        except ValueError as exc:
            errors.append(f"{_join(path, 'step_scale')}: {exc}")
    elif kind == "hmc":
        _reject_unknown(section, path, {"kind", "step_size", "n_leapfrog"}, errors)
        step_size = _field(section, "step_size", path, "number", errors,
                           required=True)
        n_leapfrog = _field(section, "n_leapfrog", path, "int", errors,
                            required=True)
        if step_size is None or n_leapfrog is None:
            return None
        try:
            return HmcConfig(step_size=float(step_size), n_leapfrog=n_leapfrog)
        except ValueError as exc:
            errors.append(f"{path}: {exc}")
    elif kind is not None:
        errors.append(f"{_join(path, 'kind')}: must be 'rw' or 'hmc', got {kind!r}")
    return None


def load_train_config(config_path, seed_override=None, out_override=None) -> TrainConfig:
    """Parse and validate a training config; problems are reported together,
    each tagged with its field path."""
    raw = _read_config(config_path)
    base = Path(config_path).resolve().parent
    errors: list[str] = []
    _reject_unknown(
        raw, "",
        {"dataset", "augmentation", "split", "network", "prior", "kernel",
         "chains", "out_dir"},
        errors,
    )

    chains_sec = _field(raw, "chains", "", "object", errors, required=True, default={})
    n_iter = _field(chains_sec, "n_iter", "chains", "int", errors, required=True)
    burn_in = _field(chains_sec, "burn_in", "chains", "int", errors)
    thin = _field(chains_sec, "thin", "chains", "int", errors, default=1)
    n_chains = _field(chains_sec, "n_chains", "chains", "int", errors, default=1)
    seed = _seed_field(chains_sec, "chains", errors, 0)
    _reject_unknown(chains_sec, "chains",
                    {"n_iter", "burn_in", "thin", "n_chains", "seed"}, errors)
    if seed_override is not None:
        if not 0 <= seed_override <= MAX_SEED:
            errors.append("--seed: must lie in [0, 2^64)")
        else:
            seed = seed_override
    if n_iter is not None and n_iter < 1:
        errors.append("chains.n_iter: must be >= 1")
    if burn_in is not None and n_iter is not None and not 0 <= burn_in < n_iter:
        errors.append(
            f"chains.burn_in: need 0 <= burn_in < n_iter, got {burn_in} with "
            f"n_iter={n_iter}"
        )
    if thin is not None and thin < 1:
        errors.append("chains.thin: must be >= 1")
    if n_chains is not None and n_chains < 1:
        errors.append("chains.n_chains: must be >= 1")
    if None not in (n_iter, thin) and n_iter >= 1 and thin >= 1:
        effective_burn = burn_in if burn_in is not None else n_iter // 5
        if 0 <= effective_burn < n_iter:
            retained = (n_iter - effective_burn) // thin
            if retained < MIN_RETAINED:
                errors.append(
                    f"chains: n_iter/burn_in/thin retain only {retained} samples; "
                    f"need at least {MIN_RETAINED}"
                )

    dataset_sec = _field(raw, "dataset", "", "object", errors, required=True, default={})
    kind = _field(dataset_sec, "kind", "dataset", "str", errors, required=True)
    path_raw = _field(dataset_sec, "path", "dataset", "str", errors, required=True)
    _reject_unknown(dataset_sec, "dataset", {"kind", "path", "features"}, errors)
    conv_spec = None
    dataset_path = Path()
    if kind is not None and kind not in ("csv", "image_dir"):
        errors.append(f"dataset.kind: must be 'csv' or 'image_dir', got {kind!r}")
        kind = None
    if path_raw is not None:
        dataset_path = Path(path_raw)
        if not dataset_path.is_absolute():
            dataset_path = base / dataset_path
        if kind == "csv" and not dataset_path.is_file():
            errors.append(f"dataset.path: no such file: {dataset_path}")
        if kind == "image_dir" and not dataset_path.is_dir():
            errors.append(f"dataset.path: no such directory: {dataset_path}")
    features_sec = _field(dataset_sec, "features", "dataset", "object", errors)
    if kind == "csv" and "features" in dataset_sec:
        errors.append("dataset.features: only valid for image_dir datasets")
    elif kind == "image_dir":
        conv_spec = (
            _parse_conv(features_sec, "dataset.features", errors)
            if features_sec is not None
            else ConvStackSpec()
        )

    augment = None
    if raw.get("augmentation") is not None:
        augment_sec = _field(raw, "augmentation", "", "object", errors, default={})
        if kind == "csv":
            errors.append("augmentation: only valid for image_dir datasets")
        else:
            augment = _parse_augment(augment_sec, "augmentation", errors, seed)

    split_sec = _field(raw, "split", "", "object", errors, required=True, default={})
    test_fraction = _field(split_sec, "test_fraction", "split", "number", errors,
                           required=True)
    stratified = _field(split_sec, "stratified", "split", "bool", errors, default=True)
    split_seed = _seed_field(split_sec, "split", errors, seed)
    _reject_unknown(split_sec, "split", {"test_fraction", "stratified", "seed"}, errors)
    split = None
    if test_fraction is not None:
        try:
            split = data_mod.SplitSpec(
                test_fraction=float(test_fraction), seed=split_seed,
                stratified=stratified,
            )
        except ValueError as exc:
            errors.append(f"split.test_fraction: {exc}")

    network_sec = _field(raw, "network", "", "object", errors, default={})
    hidden = _field(network_sec, "hidden_dims", "network", "list", errors, default=[])
    activation = _field(network_sec, "activation", "network", "str", errors,
                        default="relu")
    _reject_unknown(network_sec, "network", {"hidden_dims", "activation"}, errors)
    hidden_dims: tuple[int, ...] = ()
    if hidden is not None:
        if any(isinstance(h, bool) or not isinstance(h, int) or h < 1 for h in hidden):
            errors.append("network.hidden_dims: must be a list of integers >= 1")
        else:
            hidden_dims = tuple(hidden)
    if activation is not None and activation not in ACTIVATIONS:
        errors.append(
            f"network.activation: must be one of {ACTIVATIONS}, got {activation!r}"
        )

    prior_sec = _field(raw, "prior", "", "object", errors, default={})
    variance = _field(prior_sec, "variance", "prior", "number", errors, default=1.0)
    _reject_unknown(prior_sec, "prior", {"variance"}, errors)
    prior = PriorSpec()
    if variance is not None:
        try:
            prior = PriorSpec(variance=float(variance))
        except ValueError as exc:
            errors.append(f"prior.variance: {exc}")

    kernel_sec = _field(raw, "kernel", "", "object", errors, required=True, default={})
    kernel = _parse_kernel(kernel_sec, "kernel", errors)

    out_raw = _field(raw, "out_dir", "", "str", errors,
                     required=out_override is None)
    if out_override is not None:
        out_dir = Path(out_override)
    elif out_raw is not None:
        out_dir = Path(out_raw)
        if not out_dir.is_absolute():
            out_dir = base / out_dir
    else:
        out_dir = Path()

    if errors:
        raise ConfigError(
            f"{config_path}: {len(errors)} problem(s):\n  " + "\n  ".join(errors)
        )
    return TrainConfig(
        dataset_kind=kind,
        dataset_path=dataset_path,
        dataset_path_raw=path_raw,
        conv_spec=conv_spec,
        augment=augment,
        split=split,
        hidden_dims=hidden_dims,
        activation=activation,
        prior=prior,
        kernel=kernel,
        n_iter=n_iter,
        burn_in=burn_in,
        thin=thin,
        n_chains=n_chains,
        seed=seed,
        out_dir=out_dir,
    )


def _resolved_config_dict(cfg: TrainConfig, spec: NetworkSpec) -> dict:
    """The run's configuration with every default made explicit. The output
    directory is deliberately excluded so that run identity (and the config
    hash) does not depend on where artifacts land."""
    dataset: dict = {"kind": cfg.dataset_kind, "path": cfg.dataset_path_raw}
    if cfg.conv_spec is not None:
        dataset["features"] = {
            "stages": [list(s) for s in cfg.conv_spec.stages],
            "output_dim": cfg.conv_spec.output_dim,
            "kernel_seed": cfg.conv_spec.kernel_seed,
        }
    augmentation = None
    if cfg.augment is not None:
        augmentation = {
            "rotations": list(cfg.augment.rotations),
            "flips": list(cfg.augment.flips),
            "scales": list(cfg.augment.scales),
            "per_image_count": cfg.augment.per_image_count,
            "seed": cfg.augment.seed,
        }
    return {
        "dataset": dataset,
        "augmentation": augmentation,
        "split": {
            "test_fraction": cfg.split.test_fraction,
            "stratified": cfg.split.stratified,
            "seed": cfg.split.seed,
        },
        "network": {
            "input_dim": spec.input_dim,
            "hidden_dims": list(spec.hidden_dims),
            "n_classes": spec.n_classes,
            "activation": spec.activation,
        },
        "prior": {"variance": cfg.prior.variance},
        "kernel": (
            {"kind": "hmc", "step_size": cfg.kernel.step_size,
             "n_leapfrog": cfg.kernel.n_leapfrog}
            if isinstance(cfg.kernel, HmcConfig)
            else {"kind": "rw", "step_scale": cfg.kernel.step_scale}
        ),
        "chains": {
            "n_iter": cfg.n_iter,
            "burn_in": cfg.burn_in if cfg.burn_in is not None else cfg.n_iter // 5,
            "thin": cfg.thin,
            "n_chains": cfg.n_chains,
            "seed": cfg.seed,
        },
    }


# ---------------------------------------------------------------------------
# Run-directory loading (shared by evaluate/predict/diagnose)


def _load_run_config(run_dir: Path) -> dict:
    return chainio.read_json(run_dir / "run_config.json")


def _network_from_run(rc: dict, run_dir: Path) -> NetworkSpec:
    try:
        net = rc["network"]
        return NetworkSpec(
            input_dim=int(net["input_dim"]),
            hidden_dims=tuple(int(h) for h in net["hidden_dims"]),
            n_classes=int(net["n_classes"]),
            activation=str(net["activation"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(
            f"{run_dir / 'run_config.json'}: invalid network section ({exc})"
        ) from exc


def _load_chains(run_dir: Path, spec: NetworkSpec):
    need = param_count(spec)
    chains = []
    for path in chainio.chain_table_paths(run_dir):
        chain = chainio.read_chain(path)
        if chain.dim != need:
            raise DataError(
                f"{path}: samples have {chain.dim} columns but the network "
                f"needs {need} parameters"
            )
        chains.append(chain)
    return chains


def _standardizer_from_run(run_dir: Path, n_features: int) -> "data_mod.StandardizationParams":
    obj = chainio.read_json(run_dir / "standardizer.json")
    try:
        params = data_mod.StandardizationParams(
            mean=np.asarray(obj["mean"], dtype=np.float64),
            sd=np.asarray(obj["sd"], dtype=np.float64),
            constant_mask=np.asarray(obj["constant_mask"], dtype=bool),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{run_dir / 'standardizer.json'}: {exc}") from exc
    if params.mean.shape != (n_features,):
        raise DataError(
            f"{run_dir / 'standardizer.json'}: has {params.mean.shape[0]} features, "
            f"network expects {n_features}"
        )
    return params


def _class_names_from_run(run_dir: Path, n_classes: int) -> list[str]:
    report = run_dir / "report.json"
    if report.is_file():
        names = chainio.read_json(report).get("class_names")
        if isinstance(names, list) and len(names) == n_classes:
            return [str(n) for n in names]
    return [str(k) for k in range(n_classes)]


# ---------------------------------------------------------------------------
# Commands


def cmd_train(args) -> int:
    cfg = load_train_config(args.config, args.seed, args.out)

    if cfg.dataset_kind == "csv":
        ds = data_mod.load_csv(cfg.dataset_path)
        labels_all = ds.labels
        n_classes = ds.n_classes
        class_names = [str(k) for k in range(n_classes)]
    else:
        images, labels_all, class_names = data_mod.load_image_dir(cfg.dataset_path)
        n_classes = len(class_names)
    if n_classes < 2:
        raise DataError(
            f"{cfg.dataset_path}: found {n_classes} class(es); need at least 2"
        )

    train_idx, test_idx = data_mod.split_indices(labels_all, cfg.split)
    y_train = labels_all[train_idx]
    y_test = labels_all[test_idx]
    if cfg.dataset_kind == "csv":
        X_train_raw = ds.features[train_idx]
        X_test_raw = ds.features[test_idx]
    else:
        train_images = [images[i] for i in train_idx]
        test_images = [images[i] for i in test_idx]
        if cfg.augment is not None:
            train_images, y_train = augment_dataset(train_images, y_train, cfg.augment)
        try:
            X_train_raw = extract_features_batch(train_images, cfg.conv_spec)
            X_test_raw = extract_features_batch(test_images, cfg.conv_spec)
        except ValueError as exc:
            raise ConfigError(f"dataset.features: {exc}") from exc

    params = data_mod.fit_standardizer_matrix(X_train_raw)
    train_ds = Dataset(data_mod.standardize_matrix(params, X_train_raw),
                       y_train, n_classes)
    test_ds = Dataset(data_mod.standardize_matrix(params, X_test_raw),
                      y_test, n_classes)

    spec = NetworkSpec(
        input_dim=train_ds.n_features,
        hidden_dims=cfg.hidden_dims,
        n_classes=n_classes,
        activation=cfg.activation,
    )
    target = posterior_target(spec, train_ds, cfg.prior)
    chains = run_chains(
        target,
        cfg.kernel,
        np.zeros(param_count(spec)),
        n_iter=cfg.n_iter,
        burn_in=cfg.burn_in,
        thin=cfg.thin,
        seed=cfg.seed,
        n_chains=cfg.n_chains,
    )

    pooled = np.vstack([c.samples for c in chains])
    probs, _ = posterior_predict_batch(spec, pooled, test_ds.features)
    test_accuracy = float((probs.argmax(axis=1) == test_ds.labels).mean())
    diag = chain_diagnostics(chains)
    n_divergent = sum(c.n_divergent for c in chains)
    divergence_rate = n_divergent / (cfg.n_iter * cfg.n_chains)
    warnings = []
    if divergence_rate > 0.5:
        warnings.append(
            f"divergence rate {divergence_rate:.2f} exceeds 0.50; "
            "samples are unreliable, reduce the step size"
        )

    out = cfg.out_dir
    (out / "chains").mkdir(parents=True, exist_ok=True)
    config_text = chainio.dump_json(_resolved_config_dict(cfg, spec))
    chainio.atomic_write_text(out / "run_config.json", config_text)
    from . import __version__

    chainio.write_json(out / "manifest.json", {
        "config_sha256": hashlib.sha256(config_text.encode("utf-8")).hexdigest(),
        "seed": cfg.seed,
        "format_version": FORMAT_VERSION,
        "package": "mcbnn",
        "package_version": __version__,
    })
    chainio.write_json(out / "standardizer.json", {
        "mean": [float(v) for v in params.mean],
        "sd": [float(v) for v in params.sd],
        "constant_mask": [bool(v) for v in params.constant_mask],
    })
    data_mod.save_csv(train_ds, out / "train.csv")
    data_mod.save_csv(test_ds, out / "test.csv")
    for i, chain in enumerate(chains):
        chainio.write_chain(out / "chains" / f"chain_{i:02d}.csv", chain)
    chainio.write_json(out / "diagnostics.json", diag.to_dict())
    chainio.write_json(out / "report.json", {
        "n_train": train_ds.n_samples,
        "n_test": test_ds.n_samples,
        "n_features": train_ds.n_features,
        "n_classes": n_classes,
        "class_names": class_names,
        "param_count": param_count(spec),
        "retained_per_chain": chains[0].n_retained,
        "acceptance_rates": [float(v) for v in diag.acceptance_rates],
        "n_divergent": n_divergent,
        "divergence_rate": divergence_rate,
        "test_accuracy": test_accuracy,
        "warnings": warnings,
    })

    rates = " ".join(f"{r:.2f}" for r in diag.acceptance_rates)
    print(f"train: {train_ds.n_samples} samples, test: {test_ds.n_samples}, "
          f"features: {train_ds.n_features}, classes: {n_classes}")
    print(f"chains: {cfg.n_chains} x {chains[0].n_retained} retained, "
          f"acceptance: {rates}, divergent: {n_divergent}")
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(f"test accuracy: {test_accuracy:.2f}")
    print(f"wrote {out}")
    return 0


def _write_roc_table(path, curve) -> None:
    lines = ["threshold,fpr,tpr"]
    for t, f, r in zip(curve.thresholds, curve.fpr, curve.tpr):
        lines.append(",".join(FLOAT_FORMAT % v for v in (t, f, r)))
    chainio.atomic_write_text(path, "\n".join(lines) + "\n")


def cmd_evaluate(args) -> int:
    run_dir = Path(args.run)
    rc = _load_run_config(run_dir)
    spec = _network_from_run(rc, run_dir)
    chains = _load_chains(run_dir, spec)
    pooled = np.vstack([c.samples for c in chains])

    data_path = Path(args.data) if args.data else run_dir / "test.csv"
    ds = data_mod.load_csv(data_path)
    if ds.n_features != spec.input_dim:
        raise DataError(
            f"{data_path}: has {ds.n_features} features, network expects "
            f"{spec.input_dim}"
        )
    if ds.n_classes > spec.n_classes:
        raise DataError(
            f"{data_path}: labels reach {ds.n_classes - 1}, network has "
            f"{spec.n_classes} classes"
        )
    ds = Dataset(ds.features, ds.labels, spec.n_classes)

    probs, entropy = posterior_predict_batch(spec, pooled, ds.features)
    pred = probs.argmax(axis=1)
    cm = confusion_matrix(ds.labels, pred, spec.n_classes)
    report = metrics_from_confusion(cm)

    curves = {}
    try:
        if spec.n_classes == 2:
            curves["roc.csv"] = roc_curve(probs[:, 1], (ds.labels == 1).astype(int))
        else:
            for k in range(spec.n_classes):
                curves[f"roc_class_{k}.csv"] = roc_curve(
                    probs[:, k], (ds.labels == k).astype(int)
                )
    except ValueError as exc:
        raise DataError(f"{data_path}: ROC needs every class present ({exc})") from exc
    aucs = [c.auc for c in curves.values()]
    macro_auc = float(np.mean(aucs))

    out = Path(args.out) if args.out else run_dir / "eval"
    out.mkdir(parents=True, exist_ok=True)
    metrics = report.to_dict()
    metrics.update({
        "confusion_matrix": cm.tolist(),
        "auc": {name.removesuffix(".csv"): float(c.auc) for name, c in curves.items()},
        "macro_auc": macro_auc,
        "n_samples": ds.n_samples,
        "mean_entropy": float(entropy.mean()),
    })
    chainio.write_json(out / "metrics.json", metrics)
    for name, curve in curves.items():
        _write_roc_table(out / name, curve)

    print(f"accuracy: {report.accuracy:.2f}  precision: {report.macro_precision:.2f}  "
          f"recall: {report.macro_recall:.2f}  f1: {report.macro_f1:.2f}  "
          f"auc: {macro_auc:.2f}")
    print(f"wrote {out / 'metrics.json'} and {len(curves)} ROC table(s)")
    return 0


def _read_feature_rows(path, n_features: int) -> np.ndarray:
    """Unlabeled prediction input: header ``f0,f1,...``, one row per sample."""
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise DataError(f"{path}: {exc}") from exc
    expected = ",".join(f"f{i}" for i in range(n_features))
    if not lines or lines[0] != expected:
        raise DataError(f"{path}:1: header must be '{expected}'")
    if len(lines) < 2:
        raise DataError(f"{path}: no feature rows")
    rows = np.empty((len(lines) - 1, n_features))
    for i, line in enumerate(lines[1:]):
        cells = line.split(",")
        if len(cells) != n_features:
            raise DataError(
                f"{path}:{i + 2}: expected {n_features} cells, got {len(cells)}"
            )
        try:
            rows[i] = [float(c) for c in cells]
        except ValueError:
            raise DataError(f"{path}:{i + 2}: non-numeric cell") from None
    if not np.all(np.isfinite(rows)):
        raise DataError(f"{path}: non-finite feature value")
    return rows


def cmd_predict(args) -> int:
    run_dir = Path(args.run)
    rc = _load_run_config(run_dir)
    spec = _network_from_run(rc, run_dir)
    chains = _load_chains(run_dir, spec)
    pooled = np.vstack([c.samples for c in chains])
    params = _standardizer_from_run(run_dir, spec.input_dim)
    class_names = _class_names_from_run(run_dir, spec.n_classes)

    input_path = Path(args.input)
    if input_path.suffix.lower() == ".pgm":
        dataset_cfg = rc.get("dataset", {})
        if dataset_cfg.get("kind") != "image_dir":
            raise ConfigError(
                "this run was trained on tabular features; provide a CSV input"
            )
        try:
            conv = ConvStackSpec(
                stages=tuple(tuple(s) for s in dataset_cfg["features"]["stages"]),
                output_dim=int(dataset_cfg["features"]["output_dim"]),
                kernel_seed=int(dataset_cfg["features"]["kernel_seed"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(
                f"{run_dir / 'run_config.json'}: invalid features section ({exc})"
            ) from exc
        X_raw = extract_features_batch([data_mod.read_pgm(input_path)], conv)
    else:
        X_raw = _read_feature_rows(input_path, spec.input_dim)

    X = data_mod.standardize_matrix(params, X_raw)
    probs, entropy = posterior_predict_batch(spec, pooled, X)
    records = []
    for i in range(X.shape[0]):
        k = int(probs[i].argmax())
        records.append({
            "class": k,
            "class_name": class_names[k],
            "probabilities": [float(p) for p in probs[i]],
            "entropy": float(entropy[i]),
        })
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        chainio.write_json(out / "predictions.json", {"predictions": records})
    for i, rec in enumerate(records):
        print(f"row {i}: class {rec['class']} ({rec['class_name']})  "
              f"p={max(rec['probabilities']):.2f}  entropy={rec['entropy']:.2f}")
    if args.out:
        print(f"wrote {Path(args.out) / 'predictions.json'}")
    return 0


def cmd_augment(args) -> int:
    in_dir = Path(args.input_dir)
    policy = AugmentPolicy()
    if args.config is not None:
        raw = _read_config(args.config)
        errors: list[str] = []
        section = _field(raw, "augmentation", "", "object", errors, default={})
        if section is None:
            section = {}
        parsed = _parse_augment(section, "augmentation", errors,
                                args.seed if args.seed is not None else 0)
        if errors:
            raise ConfigError(
                f"{args.config}: {len(errors)} problem(s):\n  " + "\n  ".join(errors)
            )
        policy = parsed
    elif args.seed is not None:
        policy = AugmentPolicy(seed=args.seed)

    images, _, _ = data_mod.load_image_dir(in_dir)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    index = 0
    n_variants = 0
    for class_dir in sorted(d for d in in_dir.iterdir() if d.is_dir()):
        (out_dir / class_dir.name).mkdir(exist_ok=True)
        for f in sorted(class_dir.glob("*.pgm")):
            chainio.atomic_write_bytes(out_dir / class_dir.name / f.name,
                                       f.read_bytes())
            for j, variant in enumerate(_variants(images[index], policy, index)):
                data_mod.write_pgm(
                    out_dir / class_dir.name / f"{f.stem}_aug{j:02d}.pgm", variant
                )
                n_variants += 1
            index += 1
    print(f"copied {index} originals, wrote {n_variants} variants to {out_dir}")
    return 0


def cmd_synth(args) -> int:
    raw = _read_config(args.config)
    errors: list[str] = []
    section = _field(raw, "synth", "", "object", errors, required=True, default={})
    n_per_class = _field(section, "n_per_class", "synth", "int", errors, required=True)
    n_classes = _field(section, "n_classes", "synth", "int", errors, required=True)
    n_features = _field(section, "n_features", "synth", "int", errors, required=True)
    separation = _field(section, "separation", "synth", "number", errors, required=True)
    noise_sd = _field(section, "noise_sd", "synth", "number", errors, required=True)
    seed = _seed_field(section, "synth", errors, 0)
    _reject_unknown(section, "synth",
                    {"n_per_class", "n_classes", "n_features", "separation",
                     "noise_sd", "seed"}, errors)
    if args.seed is not None:
        seed = args.seed
    ds = None
    if not errors:
        try:
            ds = data_mod.synth_blobs(
                n_per_class=n_per_class,
                n_classes=n_classes,
                n_features=n_features,
                separation=float(separation),
                noise_sd=float(noise_sd),
                seed=seed,
            )
        except ValueError as exc:
            errors.append(f"synth: {exc}")
    if errors:
        raise ConfigError(
            f"{args.config}: {len(errors)} problem(s):\n  " + "\n  ".join(errors)
        )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    data_mod.save_csv(ds, out / "data.csv")
    print(f"wrote {out / 'data.csv'}: {ds.n_samples} samples, "
          f"{ds.n_features} features, {ds.n_classes} classes")
    return 0


def cmd_diagnose(args) -> int:
    if args.run is not None:
        paths = chainio.chain_table_paths(args.run)
    elif args.chain_files:
        paths = [Path(p) for p in args.chain_files]
    else:
        raise ConfigError("provide --run <dir> or chain table paths")
    chains = [chainio.read_chain(p) for p in paths]
    dims = {c.dim for c in chains}
    lengths = {c.n_retained for c in chains}
    if len(dims) > 1 or len(lengths) > 1:
        raise DataError(
            f"chains disagree in shape: dims {sorted(dims)}, lengths {sorted(lengths)}"
        )
    if min(lengths) < MIN_RETAINED:
        raise DataError(
            f"chains retain {min(lengths)} samples; diagnostics need at least "
            f"{MIN_RETAINED}"
        )
    diag = chain_diagnostics(chains)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        chainio.write_json(out / "diagnostics.json", diag.to_dict())
    rates = " ".join(f"{r:.2f}" for r in diag.acceptance_rates)
    finite = diag.rhat_per_dim[np.isfinite(diag.rhat_per_dim)]
    max_rhat = f"{finite.max():.2f}" if finite.size else "n/a"
    print(f"chains: {len(chains)}, retained: {chains[0].n_retained} each, "
          f"dims: {chains[0].dim}")
    print(f"acceptance: {rates}  divergent: {diag.n_divergent}")
    print(f"min ESS: {diag.ess_per_dim.min():.1f}  max R-hat: {max_rhat}  "
          f"degenerate dims: {int(diag.rhat_degenerate_mask.sum())}")
    if args.out:
        print(f"wrote {Path(args.out) / 'diagnostics.json'}")
    return 0


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mcbnn",
        description="Bayesian neural network classification via MCMC sampling",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="sample the weight posterior end to end")
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--seed", type=int, help="override chains.seed")
    p.add_argument("--out", help="override out_dir")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score a finished run on a labelled table")
    p.add_argument("--run", required=True, help="run directory written by train")
    p.add_argument("--data", help="labelled csv (default: <run>/test.csv)")
    p.add_argument("--out", help="output directory (default: <run>/eval)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("predict", help="posterior-predictive class probabilities")
    p.add_argument("--run", required=True, help="run directory written by train")
    p.add_argument("--input", required=True,
                   help="feature csv (header f0,f1,...) or .pgm image")
    p.add_argument("--out", help="write predictions.json here")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("augment", help="expand an image directory by the policy")
    p.add_argument("--in", dest="input_dir", required=True,
                   help="input directory (class subdirectories of .pgm files)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--config", help="JSON config with an 'augmentation' section")
    p.add_argument("--seed", type=int, help="override the policy seed")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("synth", help="generate a Gaussian-blob csv dataset")
    p.add_argument("--config", required=True, help="JSON config with a 'synth' section")
    p.add_argument("--seed", type=int, help="override synth.seed")
    p.add_argument("--out", required=True, help="output directory for data.csv")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("diagnose", help="convergence diagnostics for chain tables")
    p.add_argument("chain_files", nargs="*", help="chain sample tables")
    p.add_argument("--run", help="run directory (reads <run>/chains/chain_*.csv)")
    p.add_argument("--out", help="write diagnostics.json here")
    p.set_defaults(func=cmd_diagnose)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except (DivergenceError, FloatingPointError, OverflowError, ZeroDivisionError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
