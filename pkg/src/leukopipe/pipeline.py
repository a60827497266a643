"""End-to-end orchestration: ingest, preprocess, extract, graph, select,
train, evaluate, report.

Every stage is a plain function that takes in-memory data and writes its
artifacts under the output directory, so a full run and the stage-wise
CLI produce the same files. One root seed feeds documented substreams;
two runs with the same config are byte-identical in every data artifact
(the manifest records wall-clock timings and is exempt).

Splits are computed once at ingest and tagged; augmentation touches the
training split only, the selector sees train/val only, and the test split
is read exactly once, at evaluation.
"""

from __future__ import annotations

import csv
import hashlib
import math
import time
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__, gmod, hdlc, smod
from . import grafr as grafr_mod
from . import tensor as T
from .container import load_tensors, save_tensors
from .errors import DataError, IngestionError, ParameterError, ReportError, StageError
from .grafr import grafr_apply
from .preprocess import Image, augment_balance, clahe, read_image, resize, sharpen, write_png
from .seeding import derive_seed, substream
from .selector import ABHCConfig, FitnessSpec, SCAConfig, run_selection
from .smod import SModConfig
from .tensor import Tensor

SPLIT_NAMES = ("train", "val", "test")


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class PipelineConfig:
    dataset_path: str = ""
    dataset_format: str = "image-dir"          # image-dir | feature-csv
    classes: dict = field(default_factory=lambda: {"normal": 0, "blast": 1})
    train_fraction: float = 0.7
    val_fraction: float = 0.15
    test_fraction: float = 0.15
    split_seed: int = 0
    enhance: bool = True
    augment: bool = True
    use_grafr: bool = True
    use_selection: bool = True
    clahe_clip: float = 2.0
    clahe_tiles: int = 8
    image_side: int = 32
    image_channels: int = 1
    gmod_patch: int = 4
    gmod_dim: int = 64
    gmod_depth: int = 4
    gmod_heads: int = 4
    gmod_mlp_hidden: int = 128
    grafr_k_fraction: float = 0.1
    sca_pop: int = 20
    sca_iters: int = 30
    sca_alpha: float = 2.0
    sparsity_weight: float = 0.01
    abhc_iters: int = 30
    abhc_shape: float = 2.0
    abhc_beta_min: float = 0.01
    abhc_beta_max: float = 0.1
    hdlc_widths: tuple = (128, 64, 32, 16, 8, 1)
    hdlc_epochs: int = 60
    hdlc_lr: float = 0.02
    hdlc_batch: int = 32
    threshold: float = 0.5
    seed: int = 0
    out_dir: str = "out"

    def __post_init__(self):
        total = self.train_fraction + self.val_fraction + self.test_fraction
        if min(self.train_fraction, self.val_fraction, self.test_fraction) <= 0:
            raise ParameterError("split fractions must be positive")
        if abs(total - 1.0) > 1e-9:
            raise ParameterError(f"split fractions must sum to 1, got {total}")
        if self.dataset_format not in ("image-dir", "feature-csv"):
            raise ParameterError(f"unknown dataset format '{self.dataset_format}'")


# keys of the flat `key = value` config format, mapped to dataclass fields
_CONFIG_KEYS = {
    "dataset.path": ("dataset_path", str),
    "dataset.format": ("dataset_format", str),
    "dataset.classes": ("classes", "classes"),
    "split.train": ("train_fraction", float),
    "split.val": ("val_fraction", float),
    "split.test": ("test_fraction", float),
    "split.seed": ("split_seed", int),
    "stage.enhance": ("enhance", "bool"),
    "stage.augment": ("augment", "bool"),
    "stage.grafr": ("use_grafr", "bool"),
    "stage.selection": ("use_selection", "bool"),
    "clahe.clip": ("clahe_clip", float),
    "clahe.tiles": ("clahe_tiles", int),
    "image.side": ("image_side", int),
    "image.channels": ("image_channels", int),
    "gmod.patch": ("gmod_patch", int),
    "gmod.dim": ("gmod_dim", int),
    "gmod.depth": ("gmod_depth", int),
    "gmod.heads": ("gmod_heads", int),
    "gmod.mlp_hidden": ("gmod_mlp_hidden", int),
    "grafr.k_fraction": ("grafr_k_fraction", float),
    "sca.pop": ("sca_pop", int),
    "sca.iters": ("sca_iters", int),
    "sca.alpha": ("sca_alpha", float),
    "sca.lambda": ("sparsity_weight", float),
    "abhc.iters": ("abhc_iters", int),
    "abhc.p": ("abhc_shape", float),
    "abhc.beta_min": ("abhc_beta_min", float),
    "abhc.beta_max": ("abhc_beta_max", float),
    "hdlc.widths": ("hdlc_widths", "ints"),
    "hdlc.epochs": ("hdlc_epochs", int),
    "hdlc.lr": ("hdlc_lr", float),
    "hdlc.batch": ("hdlc_batch", int),
    "eval.threshold": ("threshold", float),
    "seed": ("seed", int),
    "out": ("out_dir", str),
}

_FIELD_TO_KEY = {spec[0]: key for key, spec in _CONFIG_KEYS.items()}


def _parse_bool(raw: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("on", "true", "1", "yes"):
        return True
    if lowered in ("off", "false", "0", "no"):
        return False
    raise DataError(f"cannot parse boolean value '{raw}'")


def _parse_classes(raw: str) -> dict:
    out = {}
    for part in raw.split(","):
        name, _, label = part.strip().partition(":")
        if not name or label not in ("0", "1"):
            raise DataError(f"bad class mapping '{part.strip()}'; expected name:0|1")
        out[name] = int(label)
    return out


def parse_config(text: str) -> PipelineConfig:
    """Parse the flat ``key = value`` config format with ``#`` comments."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        key, eq, raw = stripped.partition("=")
        if not eq:
            raise DataError(f"config line {lineno}: expected 'key = value', got '{line}'")
        key = key.strip()
        raw = raw.strip()
        if key not in _CONFIG_KEYS:
            raise DataError(f"config line {lineno}: unknown key '{key}'")
        field_name, kind = _CONFIG_KEYS[key]
        if kind == "bool":
            values[field_name] = _parse_bool(raw)
        elif kind == "classes":
            values[field_name] = _parse_classes(raw)
        elif kind == "ints":
            values[field_name] = tuple(int(v) for v in raw.split(","))
        else:
            values[field_name] = kind(raw)
    return PipelineConfig(**values)


def load_config(path: str | Path) -> PipelineConfig:
    return parse_config(Path(path).read_text())


def config_text(config: PipelineConfig) -> str:
    """Canonical serialization; parsing it back reproduces the config."""
    lines = []
    for f in fields(PipelineConfig):
        key = _FIELD_TO_KEY[f.name]
        value = getattr(config, f.name)
        if isinstance(value, bool):
            rendered = "on" if value else "off"
        elif isinstance(value, dict):
            rendered = ",".join(f"{k}:{v}" for k, v in sorted(value.items()))
        elif isinstance(value, tuple):
            rendered = ",".join(str(v) for v in value)
        elif isinstance(value, float):
            rendered = repr(value)
        else:
            rendered = str(value)
        lines.append(f"{key} = {rendered}")
    return "\n".join(lines) + "\n"


def config_hash(config: PipelineConfig) -> str:
    return hashlib.sha256(config_text(config).encode()).hexdigest()


# ---------------------------------------------------------------------------
# dataset model


@dataclass
class Sample:
    uid: str
    label: int
    image: Image | None = None
    features: np.ndarray | None = None


@dataclass
class Splits:
    train: list[Sample] = field(default_factory=list)
    val: list[Sample] = field(default_factory=list)
    test: list[Sample] = field(default_factory=list)

    def named(self):
        return zip(SPLIT_NAMES, (self.train, self.val, self.test))


def _stratified_split(samples: list[Sample], config: PipelineConfig) -> Splits:
    splits = Splits()
    by_label: dict[int, list[Sample]] = {}
    for sample in samples:
        by_label.setdefault(sample.label, []).append(sample)
    for label in sorted(by_label):
        group = by_label[label]
        order = substream(config.split_seed, "split", label).permutation(len(group))
        shuffled = [group[i] for i in order]
        n = len(shuffled)
        n_train = math.floor(config.train_fraction * n)
        n_val = math.floor(config.val_fraction * n)
        splits.train.extend(shuffled[:n_train])
        splits.val.extend(shuffled[n_train:n_train + n_val])
        splits.test.extend(shuffled[n_train + n_val:])
    return splits


def ingest(config: PipelineConfig) -> Splits:
    """Read the dataset and produce seeded stratified splits."""
    root = Path(config.dataset_path)
    if not root.exists():
        raise IngestionError(f"dataset path does not exist: {root}")
    if config.dataset_format == "image-dir":
        samples = []
        for class_name in sorted(config.classes):
            label = config.classes[class_name]
            class_dir = root / class_name
            if not class_dir.is_dir():
                raise IngestionError(f"missing class directory: {class_dir}")
            entries = sorted(p for p in class_dir.iterdir() if p.is_file())
            if not entries:
                raise IngestionError(f"class directory is empty: {class_dir}")
            for path in entries:
                image = read_image(path)
                if image.channels != config.image_channels:
                    raise IngestionError(
                        f"{path}: has {image.channels} channels, config expects "
                        f"{config.image_channels}")
                samples.append(Sample(uid=f"{class_name}/{path.name}", label=label,
                                      image=image))
    else:
        samples = _read_feature_csv(root)
    splits = _stratified_split(samples, config)
    return splits


def _read_feature_csv(path: Path) -> list[Sample]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestionError(f"{path}: empty file") from None
        d = len(header) - 2
        if d < 1 or header[:2] != ["id", "label"] or \
                header[2:] != [f"f{i}" for i in range(d)]:
            raise IngestionError(f"{path}: header must be id,label,f0..f{{d-1}}, "
                                 f"got {header[:4]}...")
        samples = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise IngestionError(f"{path}: row {lineno} has {len(row)} fields, "
                                     f"expected {len(header)}")
            if row[1] not in ("0", "1"):
                raise IngestionError(f"{path}: row {lineno} label '{row[1]}' is not 0/1")
            try:
                feats = np.array([float(v) for v in row[2:]])
            except ValueError as exc:
                raise IngestionError(f"{path}: row {lineno}: {exc}") from None
            samples.append(Sample(uid=row[0], label=int(row[1]), features=feats))
    return samples


# ---------------------------------------------------------------------------
# csv artifact helpers


def _fmt(x: float) -> str:
    return repr(float(x))


def write_feature_csv(path: Path, samples: list[Sample]) -> None:
    d = len(samples[0].features)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "label"] + [f"f{i}" for i in range(d)])
        for s in samples:
            writer.writerow([s.uid, s.label] + [_fmt(v) for v in s.features])


def read_feature_rows(path: Path) -> list[Sample]:
    return _read_feature_csv(Path(path))


# ---------------------------------------------------------------------------
# stages


def stage_preprocess(splits: Splits, config: PipelineConfig, out: Path) -> Splits:
    """Enhancement and resizing for every split; balancing for train only."""
    def process(image: Image) -> Image:
        if config.enhance:
            image = sharpen(clahe(image, config.clahe_clip,
                                  (config.clahe_tiles, config.clahe_tiles)))
        return resize(image, (config.image_side, config.image_side))

    result = Splits()
    for name, samples in splits.named():
        bucket = getattr(result, name)
        for s in samples:
            bucket.append(Sample(uid=s.uid, label=s.label, image=process(s.image)))
    if config.augment:
        pairs = [(s.image, s.label) for s in result.train]
        balanced = augment_balance(pairs, derive_seed(config.seed, "augment"))
        for i, (image, label) in enumerate(balanced[len(pairs):]):
            result.train.append(Sample(uid=f"aug/{i}", label=label, image=image))

    img_dir = out / "preprocessed"
    img_dir.mkdir(parents=True, exist_ok=True)
    with open(out / "splits.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["split", "uid", "label", "filename"])
        for name, samples in result.named():
            for i, s in enumerate(samples):
                filename = f"{name}_{i:05d}.png"
                write_png(img_dir / filename, s.image)
                writer.writerow([name, s.uid, s.label, filename])
    return result


def load_preprocessed(config: PipelineConfig, out: Path) -> Splits:
    listing = out / "splits.csv"
    if not listing.exists():
        raise ReportError(f"missing {listing}; run the preprocess stage first")
    splits = Splits()
    with open(listing, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            sample = Sample(uid=row["uid"], label=int(row["label"]),
                            image=read_image(out / "preprocessed" / row["filename"]))
            getattr(splits, row["split"]).append(sample)
    return splits


def _extractor_configs(config: PipelineConfig):
    gmod_config = gmod.GModConfig(
        image_height=config.image_side, image_width=config.image_side,
        channels=config.image_channels, patch_size=config.gmod_patch,
        embed_dim=config.gmod_dim, depth=config.gmod_depth,
        heads=config.gmod_heads, mlp_hidden=config.gmod_mlp_hidden)
    grid = config.image_side // config.gmod_patch
    smod_config = SModConfig(in_channels=config.gmod_dim, grid=grid)
    return gmod_config, smod_config


def stage_extract(splits: Splits, config: PipelineConfig, out: Path) -> Splits:
    """Global + spatial features per sample from the seeded extractors."""
    gmod_config, smod_config = _extractor_configs(config)
    gmod_params = gmod.init_params(gmod_config, substream(config.seed, "gmod-init"),
                                   requires_grad=False)
    smod_params = smod.init_params(smod_config, substream(config.seed, "smod-init"),
                                   requires_grad=False)
    drop_rng = substream(config.seed, "smod-dropout")  # unused at inference
    result = Splits()
    with T.no_grad():
        for name, samples in splits.named():
            bucket = getattr(result, name)
            for s in samples:
                image = Tensor(s.image.pixels.astype(np.float64) / 255.0)
                tokens = gmod.gmod_tokens(image, gmod_config, gmod_params)
                f_global = tokens[0].data
                grid = smod.token_grid(tokens[1:])
                f_spatial = smod.smod_forward(grid, smod_config, smod_params,
                                              drop_rng, training=False).data
                bucket.append(Sample(uid=s.uid, label=s.label,
                                     features=np.concatenate([f_global, f_spatial])))
    save_tensors(out / "gmod.ctcn",
                 {k: v.data for k, v in gmod.named_parameters(gmod_params).items()})
    save_tensors(out / "smod.ctcn", smod.state_arrays(smod_params))
    for name, samples in result.named():
        write_feature_csv(out / f"features_{name}.csv", samples)
    return result


def stage_graph(splits: Splits, config: PipelineConfig, out: Path,
                diagnostics: bool = False) -> Splits:
    """Similarity-graph reconstruction per split; identity when disabled."""
    n_global = config.gmod_dim
    result = Splits()
    for name, samples in splits.named():
        bucket = getattr(result, name)
        if not config.use_grafr:
            bucket.extend(Sample(uid=s.uid, label=s.label, features=s.features.copy())
                          for s in samples)
        else:
            matrix = np.vstack([s.features for s in samples])
            k = max(1, math.ceil(config.grafr_k_fraction * len(samples)))
            res = grafr_apply(matrix[:, :n_global], matrix[:, n_global:], k=k)
            for s, row in zip(samples, res.reconstructed):
                bucket.append(Sample(uid=s.uid, label=s.label, features=row))
            if diagnostics:
                selected = set(res.hidden.indices)
                with open(out / f"grafr_{name}.csv", "w", newline="") as fh:
                    writer = csv.writer(fh)
                    writer.writerow(["node_index", "mean_similarity", "selected"])
                    for i, score in enumerate(res.mean_similarities):
                        writer.writerow([i, _fmt(score), int(i in selected)])
        write_feature_csv(out / f"reconstructed_{name}.csv", getattr(result, name))
    return result


def stage_select(splits: Splits, config: PipelineConfig, out: Path) -> np.ndarray:
    """Sine-cosine search plus hill-climbing refinement on train/val."""
    dim = len(splits.train[0].features)
    if not config.use_selection:
        mask = np.ones(dim, dtype=bool)
    else:
        spec = FitnessSpec(
            train_features=np.vstack([s.features for s in splits.train]),
            train_labels=np.array([s.label for s in splits.train]),
            val_features=np.vstack([s.features for s in splits.val]),
            val_labels=np.array([s.label for s in splits.val]),
            sparsity_weight=config.sparsity_weight)
        sca_config = SCAConfig(population_size=config.sca_pop,
                               iterations=config.sca_iters,
                               alpha=config.sca_alpha,
                               seed=derive_seed(config.seed, "selector"))
        abhc_config = ABHCConfig(iterations=config.abhc_iters,
                                 shape=config.abhc_shape,
                                 beta_min=config.abhc_beta_min,
                                 beta_max=config.abhc_beta_max)
        result = run_selection(spec, sca_config, abhc_config)
        mask = result.best.mask.copy()
        if not mask.any():
            mask = np.ones(dim, dtype=bool)  # degenerate search; keep everything
        with open(out / "fitness_trace.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iteration", "best_fitness", "mean_fitness",
                             "selected_count"])
            for row in result.trace:
                writer.writerow([row.iteration, _fmt(row.best_fitness),
                                 _fmt(row.mean_fitness), row.selected_count])
    with open(out / "mask.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["feature_index", "selected"])
        for i, bit in enumerate(mask):
            writer.writerow([i, int(bit)])
    return mask


def read_mask(out: Path) -> np.ndarray:
    path = out / "mask.csv"
    if not path.exists():
        raise ReportError(f"missing {path}; run the select stage first")
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return np.array([row["selected"] == "1" for row in rows])


@dataclass
class TrainedClassifier:
    """Classifier plus the train-split standardization it was fit under."""

    model: hdlc.HDLCModel
    mean: np.ndarray
    std: np.ndarray


def load_classifier(config: PipelineConfig, mask: np.ndarray,
                    out: Path) -> TrainedClassifier:
    values = load_tensors(out / "hdlc.ctcn")
    model_config = hdlc.HDLCConfig(input_dim=int(mask.sum()),
                                   dense_widths=tuple(config.hdlc_widths))
    return TrainedClassifier(model=hdlc.load_model(model_config, values),
                             mean=values["hdlc.scaler.mean"],
                             std=values["hdlc.scaler.std"])


def stage_train(splits: Splits, mask: np.ndarray, config: PipelineConfig,
                out: Path) -> TrainedClassifier:
    features = np.vstack([s.features for s in splits.train])[:, mask]
    labels = np.array([s.label for s in splits.train])
    mean = features.mean(axis=0)
    std = features.std(axis=0)
    std = np.where(std == 0.0, 1.0, std)
    model_config = hdlc.HDLCConfig(input_dim=int(mask.sum()),
                                   dense_widths=tuple(config.hdlc_widths))
    model = hdlc.init_model(model_config, substream(config.seed, "hdlc-init"))
    trace = hdlc.train(model, (features - mean) / std, labels,
                       hdlc.TrainConfig(epochs=config.hdlc_epochs,
                                        learning_rate=config.hdlc_lr,
                                        batch_size=config.hdlc_batch),
                       substream(config.seed, "hdlc-train"))
    arrays = {k: v.data for k, v in hdlc.named_parameters(model).items()}
    arrays["hdlc.scaler.mean"] = mean
    arrays["hdlc.scaler.std"] = std
    save_tensors(out / "hdlc.ctcn", arrays)
    with open(out / "loss_trace.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "loss"])
        for epoch, loss in enumerate(trace):
            writer.writerow([epoch, _fmt(loss)])
    return TrainedClassifier(model=model, mean=mean, std=std)


def stage_eval(splits: Splits, mask: np.ndarray, trained: TrainedClassifier,
               config: PipelineConfig, out: Path) -> hdlc.MetricsReport:
    features = np.vstack([s.features for s in splits.test])[:, mask]
    labels = np.array([s.label for s in splits.test])
    probs = hdlc.predict(trained.model, (features - trained.mean) / trained.std)
    report = hdlc.metrics(hdlc.confusion(probs, labels, config.threshold))
    roc, auc = hdlc.roc_auc(probs, labels)
    with open(out / "metrics.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "value"])
        for name in ("accuracy", "precision", "recall", "f1"):
            writer.writerow([name, _fmt(getattr(report, name))])
        writer.writerow(["auc", _fmt(auc)])
    with open(out / "roc.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["threshold", "fpr", "tpr"])
        for threshold, fpr, tpr in roc:
            writer.writerow([_fmt(threshold), _fmt(fpr), _fmt(tpr)])
    return report


# ---------------------------------------------------------------------------
# full run


@dataclass
class RunArtifacts:
    out_dir: Path
    metrics: hdlc.MetricsReport
    mask: np.ndarray
    timings: dict


def run_pipeline(config: PipelineConfig, diagnostics: bool = False) -> RunArtifacts:
    """Execute every enabled stage in order and emit all artifacts.

    On failure a FAILED marker naming the stage is left in the output
    directory and a :class:`StageError` is raised.
    """
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    failed_marker = out / "FAILED"
    if failed_marker.exists():
        failed_marker.unlink()
    timings: dict[str, float] = {}
    current = {"stage": "ingest"}

    def run_stage(name, fn):
        current["stage"] = name
        start = time.perf_counter()
        value = fn()
        timings[name] = time.perf_counter() - start
        return value

    try:
        splits = run_stage("ingest", lambda: ingest(config))
        if config.dataset_format == "image-dir":
            splits = run_stage("preprocess",
                               lambda: stage_preprocess(splits, config, out))
            splits = run_stage("extract", lambda: stage_extract(splits, config, out))
        else:
            # feature-csv input skips the image stages entirely
            for name, samples in splits.named():
                write_feature_csv(out / f"features_{name}.csv", samples)
        feats = run_stage("graph",
                          lambda: stage_graph(splits, config, out,
                                              diagnostics=diagnostics))
        mask = run_stage("select", lambda: stage_select(feats, config, out))
        trained = run_stage("train", lambda: stage_train(feats, mask, config, out))
        report = run_stage("eval",
                           lambda: stage_eval(feats, mask, trained, config, out))
    except Exception as exc:
        failed_marker.write_text(f"stage = {current['stage']}\ncause = {exc}\n")
        raise StageError(current["stage"], exc) from exc

    manifest = [
        f"version = {__version__}",
        f"config_hash = {config_hash(config)}",
        "",
        config_text(config).rstrip(),
        "",
    ]
    manifest += [f"timing.{name} = {seconds:.3f}s" for name, seconds in timings.items()]
    (out / "manifest.txt").write_text("\n".join(manifest) + "\n")
    return RunArtifacts(out_dir=out, metrics=report, mask=mask, timings=timings)


# ---------------------------------------------------------------------------
# report


def report_text(out_dir: str | Path) -> str:
    """Human-readable summary assembled from the emitted artifacts."""
    out = Path(out_dir)
    failed = out / "FAILED"
    if failed.exists():
        raise ReportError(f"run failed: {failed.read_text().strip()}")
    metrics_path = out / "metrics.csv"
    if not metrics_path.exists():
        raise ReportError(f"missing {metrics_path}")
    lines = []
    with open(metrics_path, newline="") as fh:
        for row in csv.DictReader(fh):
            lines.append(f"{row['metric']} {float(row['value']):.4f}")
    mask_path = out / "mask.csv"
    if mask_path.exists():
        mask = read_mask(out)
        lines.append(f"selected_features {int(mask.sum())} of {len(mask)}")
    manifest = out / "manifest.txt"
    if manifest.exists():
        for line in manifest.read_text().splitlines():
            if line.startswith("timing."):
                lines.append(line.replace(" = ", " ").replace("timing.", "time_"))
    return "\n".join(lines)
