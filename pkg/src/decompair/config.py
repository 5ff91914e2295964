"""Pipeline configuration: per-dataset presets, config files, validation."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import yaml

from .dataset import DEFAULT_EXCLUDED_FLAGS, FLAGS

# (max source len, max asm len, source vocab, asm vocab) per published dataset
PRESETS = {
    "C-S": (271, 1776, 7104, 4040),
    "Go-S": (254, 6350, 8688, 4848),
    "Fortran-S": (398, 5408, 8352, 3056),
    "OCaml-S": (192, 5939, 23184, 17288),
    "C-L": (271, 1776, 11176, 11608),
    "OCaml-L": (271, 1776, 10960, 11680),
}

LANGUAGE_PRESETS = {"c": "C-S", "go": "Go-S", "fortran": "Fortran-S", "ocaml": "OCaml-S"}


class ConfigError(ValueError):
    pass


@dataclass
class PipelineConfig:
    language: str = "c"
    asm_root: Optional[str] = None
    source_root: Optional[str] = None
    out_dir: str = "out"
    name: str = ""
    preset: Optional[str] = None
    source_vocab: int = 7104
    asm_vocab: int = 4040
    max_source_len: int = 271
    max_asm_len: int = 1776
    test_fraction: float = 0.1
    seed: int = 0
    max_tokens: int = 10000
    flag_policy: list = field(default_factory=lambda: list(DEFAULT_EXCLUDED_FLAGS))
    tokenizer_mode: str = "bpe"
    keep_directives: bool = False
    workers: int = 1
    eta_bins: int = 20
    profiles_file: Optional[str] = None

    def validate(self) -> "PipelineConfig":
        for name in ("source_vocab", "asm_vocab", "max_source_len", "max_asm_len", "max_tokens", "workers", "eta_bins"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or value <= 0:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        if not 0 < self.test_fraction < 1:
            raise ConfigError(f"test_fraction must be in (0, 1), got {self.test_fraction}")
        if self.tokenizer_mode not in ("bpe", "char"):
            raise ConfigError(f"tokenizer_mode must be 'bpe' or 'char', got {self.tokenizer_mode!r}")
        unknown = set(self.flag_policy) - set(FLAGS)
        if unknown:
            raise ConfigError(f"unknown flags in flag_policy: {sorted(unknown)}")
        paths = [Path(p).resolve() for p in (self.asm_root, self.source_root, self.out_dir) if p]
        # asm and source commonly share one tree; only the output must be separate
        out = Path(self.out_dir).resolve()
        if sum(1 for p in paths if p == out) > 1:
            raise ConfigError("out_dir must differ from the input roots")
        return self

    @property
    def dataset_name(self) -> str:
        return self.name or self.preset or LANGUAGE_PRESETS.get(self.language, self.language)

    def to_dict(self) -> dict:
        return asdict(self)


def preset_values(preset: str) -> dict:
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
    src_len, asm_len, src_vocab, asm_vocab = PRESETS[preset]
    return {
        "max_source_len": src_len,
        "max_asm_len": asm_len,
        "source_vocab": src_vocab,
        "asm_vocab": asm_vocab,
    }


def load_config_file(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        doc = yaml.safe_load(fh) or {}
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: expected a mapping at top level")
    known = {f.name for f in fields(PipelineConfig)}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
    return doc


def resolve_config(flags: dict, config_file: Optional[str] = None) -> PipelineConfig:
    """Merge settings with precedence flags > config file > preset.

    ``flags`` entries set to None count as absent.
    """
    file_values = load_config_file(config_file) if config_file else {}
    explicit = {k: v for k, v in flags.items() if v is not None}
    layered = {**file_values, **explicit}

    language = str(layered.get("language", "c")).lower()
    preset = layered.get("preset") or LANGUAGE_PRESETS.get(language)
    values = preset_values(preset) if preset else {}
    values.update(layered)
    values["language"] = language
    if "preset" in layered:
        values["preset"] = layered["preset"]
    return PipelineConfig(**values).validate()
