"""Training variants, the optimization loop, checkpoints, and extraction.

Variant ids follow the system table:

    M0  pretrained import only, no fine-tune (evaluation baseline)
    M1  plain fine-tune
    M2  contrastive Siamese pairs (lambda 0.5)
    M3  parameter-free attention disentanglement (lambda 0.5)
    M4  M3 plus Siamese pairs (lambda 1.0 / 1.5)
    M5  trainable attention disentanglement (lambda 0.5)
    M6  M5 plus Siamese pairs (lambda 1.0 / 1.5)

Every training run is a pure function of (config, manifest): batch indices,
crops and noise draws all derive from (seed, step), so reruns are
bit-identical on the same platform.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np
import torch

from .bcst import BCSTConfig, bcst_total, pair_loss, sample_pairs
from .ddal import DDALConfig, LossError, ddal_loss
from .frontend import (
    AudioError,
    LogMelConfig,
    NoisePolicy,
    Waveform,
    augment,
    crop_or_pad,
    log_mel,
    mean_normalize,
    read_wav,
)
from .manifest import Manifest, UtteranceRecord
from .model import BackboneConfig
from .network import VerificationNet, domain_label_tensor

log = logging.getLogger(__name__)

VARIANTS = ("M0", "M1", "M2", "M3", "M4", "M5", "M6")

CHECKPOINT_FORMAT_VERSION = 1

LOSS_LOG_COLUMNS = ("step", "L_id", "L_cls1", "L_cls2", "L_uttS", "L_uttST", "L_pair", "total", "lr")


class ConfigError(ValueError):
    """Raised for invalid or inconsistent training configuration."""


class CheckpointError(RuntimeError):
    """Raised for unreadable or incompatible checkpoints."""


class DivergenceError(RuntimeError):
    """Raised when the objective goes non-finite during training."""

    def __init__(self, step: int, last_report: "LossReport | None", cause: str):
        self.step = step
        self.last_report = last_report
        detail = f"training diverged at step {step}: {cause}"
        if last_report is not None:
            detail += f"; last finite report at step {last_report.step} (total {last_report.total:.6f})"
        super().__init__(detail)


@dataclass(frozen=True)
class VariantSpec:
    variant: str
    trainable: bool
    ddal_variant: str
    bcst_enabled: bool
    lambda_ddal: float
    lambda_bcst: float


_VARIANT_TABLE = {
    "M0": VariantSpec("M0", False, "none", False, 0.0, 0.0),
    "M1": VariantSpec("M1", True, "none", False, 0.0, 0.0),
    "M2": VariantSpec("M2", True, "none", True, 0.0, 0.5),
    "M3": VariantSpec("M3", True, "simam", False, 0.5, 0.0),
    "M4": VariantSpec("M4", True, "simam", True, 1.0, 1.5),
    "M5": VariantSpec("M5", True, "asp", False, 0.5, 0.0),
    "M6": VariantSpec("M6", True, "asp", True, 1.0, 1.5),
}


def resolve_variant(variant: str) -> VariantSpec:
    """Attention/Siamese settings implied by a variant id."""
    try:
        return _VARIANT_TABLE[variant]
    except KeyError:
        raise ConfigError(f"unknown variant {variant!r}, expected one of {VARIANTS}") from None


@dataclass
class TrainConfig:
    """Everything a training run needs besides the manifest and audio root.

    ``variant`` fixes the attention variant and pair-training switch; the
    ``ddal``/``bcst`` blocks may override the loss weights and diagnostic
    switches but not contradict the variant. A config built directly from
    low-level blocks can use variant "custom".
    """

    variant: str = "M1"
    n_steps: int = 1000
    batch_size: int = 64
    initial_lr: float = 1e-3
    lr_milestones: tuple[int, ...] = ()
    lr_gamma: float = 0.1
    momentum: float = 0.9
    weight_decay: float = 1e-4
    crop_s: float = 2.0
    seed: int = 0
    margin: float = 0.2
    arc_scale: float = 32.0
    augment_snr_db: tuple[float, float] | None = None
    init_checkpoint: str | None = None
    checkpoint_interval: int = 0
    eval_interval: int = 0
    log_every: int = 50
    backbone: BackboneConfig = field(default_factory=BackboneConfig)
    ddal: DDALConfig | None = None
    bcst: BCSTConfig | None = None

    def __post_init__(self) -> None:
        if self.variant != "custom":
            spec = resolve_variant(self.variant)
            if self.ddal is None:
                self.ddal = DDALConfig(
                    variant=spec.ddal_variant,
                    lambda_weight=spec.lambda_ddal,
                )
            elif self.ddal.variant != spec.ddal_variant:
                raise ConfigError(
                    f"variant {self.variant} implies attention {spec.ddal_variant!r}, "
                    f"config says {self.ddal.variant!r}"
                )
            if self.bcst is None:
                self.bcst = BCSTConfig(enabled=spec.bcst_enabled, lambda_weight=spec.lambda_bcst)
            elif self.bcst.enabled != spec.bcst_enabled:
                raise ConfigError(
                    f"variant {self.variant} implies bcst.enabled={spec.bcst_enabled}, "
                    f"config says {self.bcst.enabled}"
                )
        else:
            if self.ddal is None:
                self.ddal = DDALConfig()
            if self.bcst is None:
                self.bcst = BCSTConfig()
        if self.n_steps < 1:
            raise ConfigError(f"n_steps must be >= 1, got {self.n_steps}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.initial_lr <= 0:
            raise ConfigError(f"initial_lr must be positive, got {self.initial_lr}")
        if self.crop_s <= 0:
            raise ConfigError(f"crop_s must be positive, got {self.crop_s}")
        self.lr_milestones = tuple(int(m) for m in self.lr_milestones)


def config_to_mapping(config: TrainConfig) -> dict[str, Any]:
    """Plain nested dict echo of a config, for checkpoints and YAML."""
    out = asdict(config)
    out["lr_milestones"] = list(config.lr_milestones)
    out["augment_snr_db"] = list(config.augment_snr_db) if config.augment_snr_db else None
    out["backbone"]["block_counts"] = list(config.backbone.block_counts)
    out["backbone"]["channel_widths"] = list(config.backbone.channel_widths)
    return out


_DDAL_KEY_MAP = {
    "variant": "variant",
    "lambda": "lambda_weight",
    "lambda_weight": "lambda_weight",
    "grl_scale": "grl_scale",
    "backbone_grad_from_cls1": "backbone_grad_from_cls1",
    "detach_branches": "detach_branches",
}

_BCST_KEY_MAP = {
    "enabled": "enabled",
    "lambda": "lambda_weight",
    "lambda_weight": "lambda_weight",
}


def _unflatten(mapping: Mapping[str, Any]) -> dict[str, Any]:
    nested: dict[str, Any] = {}
    for key, value in mapping.items():
        parts = key.split(".")
        node = nested
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"config key {key!r} conflicts with a scalar")
        if isinstance(value, Mapping):
            node.setdefault(parts[-1], {}).update(value)
        else:
            node[parts[-1]] = value
    return nested


def train_config_from_mapping(mapping: Mapping[str, Any]) -> TrainConfig:
    """Build a TrainConfig from a YAML-style dict.

    Accepts nested blocks (``ddal: {lambda: 1.0}``) and dotted keys
    (``ddal.lambda: 1.0``). Unknown keys raise ConfigError.
    """
    nested = _unflatten(dict(mapping))
    kwargs: dict[str, Any] = {}
    ddal_raw = nested.pop("ddal", {})
    bcst_raw = nested.pop("bcst", {})
    backbone_raw = nested.pop("backbone", {})
    scalar_fields = {
        "variant", "n_steps", "batch_size", "initial_lr", "lr_milestones", "lr_gamma",
        "momentum", "weight_decay", "crop_s", "seed", "margin", "arc_scale",
        "augment_snr_db", "init_checkpoint", "checkpoint_interval", "eval_interval",
        "log_every",
    }
    unknown = set(nested) - scalar_fields
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    kwargs.update(nested)
    if "lr_milestones" in kwargs and kwargs["lr_milestones"] is not None:
        kwargs["lr_milestones"] = tuple(kwargs["lr_milestones"])
    if kwargs.get("augment_snr_db") is not None:
        lo, hi = kwargs["augment_snr_db"]
        kwargs["augment_snr_db"] = (float(lo), float(hi))
    if backbone_raw:
        bb = dict(backbone_raw)
        for key in ("block_counts", "channel_widths"):
            if key in bb:
                bb[key] = tuple(bb[key])
        try:
            kwargs["backbone"] = BackboneConfig(**bb)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad backbone config: {exc}") from exc
    variant = kwargs.get("variant", "M1" if not (ddal_raw or bcst_raw) else "custom")
    kwargs["variant"] = variant
    spec = resolve_variant(variant) if variant != "custom" else None
    if ddal_raw or spec is not None:
        ddal_kwargs: dict[str, Any] = {}
        if spec is not None:
            ddal_kwargs = {"variant": spec.ddal_variant, "lambda_weight": spec.lambda_ddal}
        for key, value in dict(ddal_raw).items():
            if key not in _DDAL_KEY_MAP:
                raise ConfigError(f"unknown ddal config key {key!r}")
            ddal_kwargs[_DDAL_KEY_MAP[key]] = value
        try:
            kwargs["ddal"] = DDALConfig(**ddal_kwargs)
        except ValueError as exc:
            raise ConfigError(f"bad ddal config: {exc}") from exc
    if bcst_raw or spec is not None:
        bcst_kwargs = {}
        if spec is not None:
            bcst_kwargs = {"enabled": spec.bcst_enabled, "lambda_weight": spec.lambda_bcst}
        for key, value in dict(bcst_raw).items():
            if key not in _BCST_KEY_MAP:
                raise ConfigError(f"unknown bcst config key {key!r}")
            bcst_kwargs[_BCST_KEY_MAP[key]] = value
        try:
            kwargs["bcst"] = BCSTConfig(**bcst_kwargs)
        except ValueError as exc:
            raise ConfigError(f"bad bcst config: {exc}") from exc
    try:
        return TrainConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"bad config: {exc}") from exc


@dataclass
class LossReport:
    """One step's loss components; totals recompute from the parts.

    Plain runs: total = L_id + lambda_ddal * (L_cls1 + L_cls2), composed in
    float64 from the logged float32 components. Pair runs: each leg total is
    that same composition, and total = L_uttS + L_uttST + lambda_bcst * L_pair.
    """

    step: int
    l_id: float
    l_cls1: float | None
    l_cls2: float | None
    l_utt_s: float | None
    l_utt_st: float | None
    l_pair: float | None
    total: float
    lr: float

    def csv_row(self) -> list[str]:
        def fmt(v: float | None) -> str:
            return "" if v is None else repr(float(v))

        return [str(self.step)] + [
            fmt(v)
            for v in (
                self.l_id, self.l_cls1, self.l_cls2,
                self.l_utt_s, self.l_utt_st, self.l_pair,
                self.total, self.lr,
            )
        ]


def load_loss_log(path: str | Path) -> list[LossReport]:
    reports = []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if header != list(LOSS_LOG_COLUMNS):
            raise ConfigError(f"{path}: unexpected loss log header {header}")
        for line in fh:
            cells = line.rstrip("\n").split(",")
            vals = [None if c == "" else float(c) for c in cells[1:]]
            reports.append(LossReport(int(cells[0]), *vals))
    return reports


@dataclass
class TrainResult:
    reports: list[LossReport]
    final_checkpoint: Path
    best_checkpoint: Path
    best_eer: float | None
    loss_log: Path


def save_checkpoint(
    path: str | Path,
    model: VerificationNet,
    config: TrainConfig,
    speaker_ids: Sequence[str],
) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(
        {
            "format_version": CHECKPOINT_FORMAT_VERSION,
            "config": config_to_mapping(config),
            "speaker_ids": list(speaker_ids),
            "state_dict": model.state_dict(),
        },
        path,
    )


def load_checkpoint(path: str | Path) -> tuple[VerificationNet, TrainConfig, list[str]]:
    """Rebuild the network a checkpoint was saved from."""
    try:
        payload = torch.load(path, map_location="cpu", weights_only=True)
    except Exception as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    for key in ("format_version", "config", "speaker_ids", "state_dict"):
        if key not in payload:
            raise CheckpointError(f"{path}: missing checkpoint key {key!r}")
    if payload["format_version"] != CHECKPOINT_FORMAT_VERSION:
        raise CheckpointError(
            f"{path}: format_version {payload['format_version']} unsupported "
            f"(expected {CHECKPOINT_FORMAT_VERSION})"
        )
    config = train_config_from_mapping(payload["config"])
    speaker_ids = list(payload["speaker_ids"])
    model = build_model(config, len(speaker_ids))
    model.load_state_dict(payload["state_dict"])
    return model, config, speaker_ids


def build_model(config: TrainConfig, n_speakers: int) -> VerificationNet:
    return VerificationNet(
        n_speakers,
        backbone=config.backbone,
        ddal=config.ddal,
        margin=config.margin,
        scale=config.arc_scale,
    )


def _load_partial_state(model: VerificationNet, path: str) -> tuple[int, int]:
    """Load a checkpoint's tensors where names and shapes match."""
    try:
        payload = torch.load(path, map_location="cpu", weights_only=True)
    except Exception as exc:
        raise CheckpointError(f"cannot read init checkpoint {path}: {exc}") from exc
    state = payload["state_dict"] if isinstance(payload, dict) and "state_dict" in payload else payload
    own = model.state_dict()
    usable = {k: v for k, v in state.items() if k in own and own[k].shape == v.shape}
    model.load_state_dict(usable, strict=False)
    return len(usable), len(state)


class _FeatureLoader:
    """Loads, crops, augments and featurizes batches with a per-call rng."""

    def __init__(self, audio_root: str | Path, crop_s: float, noise: NoisePolicy):
        self.audio_root = Path(audio_root)
        self.crop_s = crop_s
        self.noise = noise
        self.logmel = LogMelConfig()
        self._cache: dict[str, Waveform] = {}

    def waveform(self, rec: UtteranceRecord) -> Waveform:
        cached = self._cache.get(rec.utt_id)
        if cached is None:
            path = Path(rec.audio_path)
            if not path.is_absolute():
                path = self.audio_root / path
            cached = read_wav(path)
            self._cache[rec.utt_id] = cached
        return cached

    def batch(self, records: Sequence[UtteranceRecord], rng: np.random.Generator) -> torch.Tensor:
        feats = []
        for rec in records:
            wav = crop_or_pad(self.waveform(rec), self.crop_s, rng)
            wav = augment(wav, self.noise, rng)
            feats.append(mean_normalize(log_mel(wav, self.logmel)))
        stacked = np.stack(feats).astype(np.float32)
        return torch.from_numpy(stacked).unsqueeze(1)

    def full_features(self, rec: UtteranceRecord) -> torch.Tensor:
        feats = mean_normalize(log_mel(self.waveform(rec), self.logmel)).astype(np.float32)
        return torch.from_numpy(feats).reshape(1, 1, *feats.shape)


def _f(value: torch.Tensor) -> float:
    return float(value.detach().item())


def train(
    config: TrainConfig,
    manifest: Manifest,
    audio_root: str | Path,
    run_dir: str | Path,
    valid_manifest: Manifest | None = None,
    valid_trials=None,
) -> TrainResult:
    """Run one training job and leave checkpoints plus a loss log in run_dir.

    Writes ``loss_log.csv``, ``step-<k>.ckpt`` at the configured interval
    and at the final step, and ``best.ckpt`` (lowest validation EER when a
    validation set is given, otherwise the final model).
    """
    spec = resolve_variant(config.variant) if config.variant != "custom" else None
    if spec is not None and not spec.trainable:
        raise ConfigError(
            f"variant {config.variant} is evaluation-only (no fine-tune); "
            "train one of M1-M6 or extract embeddings from an imported checkpoint"
        )
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    speaker_ids = manifest.speakers()
    if len(speaker_ids) < 2:
        raise ConfigError(f"need at least 2 training speakers, got {len(speaker_ids)}")
    label_map = {spk: i for i, spk in enumerate(speaker_ids)}
    records = list(manifest)

    torch.manual_seed(config.seed)
    model = build_model(config, len(speaker_ids))
    if config.init_checkpoint:
        loaded, total = _load_partial_state(model, config.init_checkpoint)
        log.info("initialized %d/%d tensors from %s", loaded, total, config.init_checkpoint)
    model.train()

    optimizer = torch.optim.SGD(
        model.parameters(),
        lr=config.initial_lr,
        momentum=config.momentum,
        weight_decay=config.weight_decay,
    )
    scheduler = None
    if config.lr_milestones:
        scheduler = torch.optim.lr_scheduler.MultiStepLR(
            optimizer, milestones=list(config.lr_milestones), gamma=config.lr_gamma
        )

    loader = _FeatureLoader(audio_root, config.crop_s, NoisePolicy(config.augment_snr_db))
    loss_log_path = run_dir / "loss_log.csv"
    reports: list[LossReport] = []
    best_eer: float | None = None
    best_path = run_dir / "best.ckpt"
    final_path = run_dir / f"step-{config.n_steps}.ckpt"

    def flush_log() -> None:
        with open(loss_log_path, "w", encoding="utf-8") as fh:
            fh.write(",".join(LOSS_LOG_COLUMNS) + "\n")
            for report in reports:
                fh.write(",".join(report.csv_row()) + "\n")

    for step in range(1, config.n_steps + 1):
        rng = np.random.default_rng([config.seed, 3, step])
        lr_now = optimizer.param_groups[0]["lr"]
        try:
            if config.bcst.enabled:
                pairs = sample_pairs(manifest, config.batch_size, rng)
                st_recs = [p[0] for p in pairs]
                s_recs = [p[1] for p in pairs]
                labels = torch.tensor([label_map[r.speaker_id] for r in st_recs])
                feats_st = loader.batch(st_recs, rng)
                feats_s = loader.batch(s_recs, rng)
                # one shared forward for both Siamese legs, so batch-norm
                # statistics cover both domains like any plain batch would
                n_pairs = len(pairs)
                z_id, z_domain = model.train_embeddings(torch.cat([feats_st, feats_s]))
                domains = domain_label_tensor(
                    [r.domain for r in st_recs] + [r.domain for r in s_recs]
                ) if config.ddal.enabled else None
                out_st = model.losses_from_embeddings(
                    z_id[:n_pairs],
                    z_domain[:n_pairs] if z_domain is not None else None,
                    labels,
                    domains[:n_pairs] if domains is not None else None,
                )
                out_s = model.losses_from_embeddings(
                    z_id[n_pairs:],
                    z_domain[n_pairs:] if z_domain is not None else None,
                    labels,
                    domains[n_pairs:] if domains is not None else None,
                )
                l_utt_st = ddal_loss(out_st.l_id, out_st.l_cls1, out_st.l_cls2, config.ddal)
                l_utt_s = ddal_loss(out_s.l_id, out_s.l_cls1, out_s.l_cls2, config.ddal)
                l_pair = pair_loss(out_st.z_id, out_s.z_id)
                total = bcst_total(l_utt_s, l_utt_st, l_pair, config.bcst.lambda_weight)
                lam = config.ddal.lambda_weight
                utt_s64 = _f(out_s.l_id) + (lam * (_f(out_s.l_cls1) + _f(out_s.l_cls2)) if config.ddal.enabled else 0.0)
                utt_st64 = _f(out_st.l_id) + (lam * (_f(out_st.l_cls1) + _f(out_st.l_cls2)) if config.ddal.enabled else 0.0)
                report = LossReport(
                    step=step,
                    l_id=_f(out_s.l_id) + _f(out_st.l_id),
                    l_cls1=(_f(out_s.l_cls1) + _f(out_st.l_cls1)) if config.ddal.enabled else None,
                    l_cls2=(_f(out_s.l_cls2) + _f(out_st.l_cls2)) if config.ddal.enabled else None,
                    l_utt_s=utt_s64,
                    l_utt_st=utt_st64,
                    l_pair=_f(l_pair),
                    total=utt_s64 + utt_st64 + config.bcst.lambda_weight * _f(l_pair),
                    lr=lr_now,
                )
            else:
                idx = rng.integers(0, len(records), size=config.batch_size)
                batch_recs = [records[int(i)] for i in idx]
                labels = torch.tensor([label_map[r.speaker_id] for r in batch_recs])
                feats = loader.batch(batch_recs, rng)
                domains = domain_label_tensor([r.domain for r in batch_recs]) if config.ddal.enabled else None
                out = model.forward_train(feats, labels, domains)
                total = ddal_loss(out.l_id, out.l_cls1, out.l_cls2, config.ddal)
                lam = config.ddal.lambda_weight
                total64 = _f(out.l_id) + (lam * (_f(out.l_cls1) + _f(out.l_cls2)) if config.ddal.enabled else 0.0)
                report = LossReport(
                    step=step,
                    l_id=_f(out.l_id),
                    l_cls1=_f(out.l_cls1) if config.ddal.enabled else None,
                    l_cls2=_f(out.l_cls2) if config.ddal.enabled else None,
                    l_utt_s=None,
                    l_utt_st=None,
                    l_pair=None,
                    total=total64,
                    lr=lr_now,
                )
            if not torch.isfinite(total):
                raise LossError(f"total is non-finite: {total}")
        except LossError as exc:
            flush_log()
            last = reports[-1] if reports else None
            raise DivergenceError(step, last, str(exc)) from exc

        optimizer.zero_grad()
        total.backward()
        optimizer.step()
        if scheduler is not None:
            scheduler.step()
        reports.append(report)

        if config.log_every and step % config.log_every == 0:
            log.info("step %d/%d total %.4f lr %.2e", step, config.n_steps, report.total, lr_now)
        if config.checkpoint_interval and step % config.checkpoint_interval == 0:
            save_checkpoint(run_dir / f"step-{step}.ckpt", model, config, speaker_ids)
        if (
            config.eval_interval
            and valid_manifest is not None
            and valid_trials is not None
            and step % config.eval_interval == 0
        ):
            eer = _validation_eer(model, valid_manifest, valid_trials, audio_root)
            log.info("step %d validation EER %.4f", step, eer)
            if best_eer is None or eer < best_eer:
                best_eer = eer
                save_checkpoint(best_path, model, config, speaker_ids)
            model.train()

    save_checkpoint(final_path, model, config, speaker_ids)
    if best_eer is None:
        save_checkpoint(best_path, model, config, speaker_ids)
    flush_log()
    return TrainResult(
        reports=reports,
        final_checkpoint=final_path,
        best_checkpoint=best_path,
        best_eer=best_eer,
        loss_log=loss_log_path,
    )


def _validation_eer(model, valid_manifest, valid_trials, audio_root) -> float:
    from .metrics import compute_eer
    from .trials import score_trials

    embeddings, errors = extract_embeddings(model, valid_manifest, audio_root)
    if errors:
        raise CheckpointError(f"validation audio unreadable: {sorted(errors)[:3]}")
    scores = score_trials(valid_trials, embeddings)
    labels = np.array([int(t.is_target) for t in valid_trials])
    return compute_eer(scores, labels)


def extract_embeddings(
    model: VerificationNet,
    manifest: Manifest,
    audio_root: str | Path,
) -> tuple[dict[str, np.ndarray], dict[str, str]]:
    """Full-length identity embeddings for every utterance in the manifest.

    Unreadable or too-short audio is skipped and reported in the second
    return value as utt_id -> reason.
    """
    loader = _FeatureLoader(audio_root, crop_s=1.0, noise=NoisePolicy(None))
    model.eval()
    embeddings: dict[str, np.ndarray] = {}
    errors: dict[str, str] = {}
    with torch.no_grad():
        for rec in manifest:
            try:
                feats = loader.full_features(rec)
            except AudioError as exc:
                errors[rec.utt_id] = str(exc)
                continue
            embeddings[rec.utt_id] = model.embed(feats).squeeze(0).numpy().astype(np.float32)
    return embeddings, errors


def save_embeddings(path: str | Path, embeddings: Mapping[str, np.ndarray]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savez(path, **{k: np.asarray(v) for k, v in embeddings.items()})


def load_embeddings(path: str | Path) -> dict[str, np.ndarray]:
    with np.load(path) as data:
        return {k: data[k] for k in data.files}
