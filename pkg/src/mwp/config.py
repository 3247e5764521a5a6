"""Hyperparameter configs for the neural solvers and experiments."""
from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field


@dataclass
class ClassifierConfig:
    embed_dim: int = 128
    hidden_dim: int = 256
    dropout: float = 0.3
    dropout_embeddings: bool = False
    dropout_encoder_output: bool = True
    dropout_classifier_input: bool = True
    # structured self-attention
    attn_dim: int = 64
    hops: int = 4
    penalty: float = 1.0
    # optimisation
    lr: float = 1.0
    clip_norm: float = 5.0
    batch_size: int = 32
    epochs: int = 20
    unk_min_freq: int = 2
    init_scale: float = 0.08
    seed: int = 0

    @classmethod
    def full_size(cls, **overrides):
        return cls(**{"embed_dim": 500, "hidden_dim": 500, **overrides})

    @classmethod
    def fixture(cls, **overrides):
        """Small settings for the bundled paraphrase fixture (one CPU core, seconds)."""
        return cls(**{"embed_dim": 64, "hidden_dim": 64, "batch_size": 2, "epochs": 50, **overrides})


@dataclass
class Seq2SeqConfig:
    embed_dim: int = 500
    hidden_dim: int = 500
    dropout: float = 0.3
    lr: float = 1.0
    clip_norm: float = 5.0
    batch_size: int = 32
    epochs: int = 20
    unk_min_freq: int = 2
    init_scale: float = 0.08
    max_decode_len: int = 50
    seed: int = 0

    @classmethod
    def fixture(cls, **overrides):
        return cls(
            **{"embed_dim": 64, "hidden_dim": 128, "batch_size": 1, "lr": 0.3, "epochs": 60, **overrides}
        )


@dataclass
class SNITaggerConfig:
    window: int = 4
    embed_dim: int = 32
    hidden_dim: int = 32
    lr: float = 1.0
    clip_norm: float = 5.0
    batch_size: int = 16
    epochs: int = 10
    unk_min_freq: int = 2
    init_scale: float = 0.08
    threshold: float = 0.5
    seed: int = 0


SOLVERS = ("jaccard", "cosine", "bilstm", "self_attn", "seq2seq")


@dataclass
class ExperimentConfig:
    solver: str
    data: str
    seed: int = 0
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1)
    sni: str = "rules"  # rules | learned
    embeddings: str | None = None
    init_embeddings: bool = False  # classifier W_E from the embedding file
    strict_oracle_bound: bool = True
    classifier: ClassifierConfig = field(default_factory=ClassifierConfig)
    seq2seq: Seq2SeqConfig = field(default_factory=Seq2SeqConfig)
    sni_tagger: SNITaggerConfig = field(default_factory=SNITaggerConfig)

    def __post_init__(self):
        if self.solver not in SOLVERS:
            raise ValueError(f"unknown solver {self.solver!r}; choose from {', '.join(SOLVERS)}")
        if self.solver == "cosine" and not self.embeddings:
            raise ValueError("the cosine solver needs an embedding file")
        if self.init_embeddings and not self.embeddings:
            raise ValueError("init_embeddings needs an embedding file")
        if self.sni not in ("rules", "learned"):
            raise ValueError(f"unknown SNI backend {self.sni!r}")
        self.ratios = tuple(float(r) for r in self.ratios)
        if len(self.ratios) != 3 or abs(sum(self.ratios) - 1.0) > 1e-9 or min(self.ratios) < 0:
            raise ValueError(f"split ratios must be three non-negative numbers summing to 1, got {self.ratios}")
        # the model seeds follow the experiment seed
        self.classifier.seed = self.seed
        self.seq2seq.seed = self.seed
        self.sni_tagger.seed = self.seed

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]


def apply_overrides(cfg, overrides: dict):
    """Set dataclass fields from strings ("key=value"), coercing by the field's current type."""
    for key, raw in overrides.items():
        if not hasattr(cfg, key):
            raise KeyError(f"unknown hyperparameter {key!r}")
        current = getattr(cfg, key)
        if isinstance(current, bool):
            value = str(raw).lower() in ("1", "true", "yes", "on")
        elif isinstance(current, int):
            value = int(raw)
        elif isinstance(current, float):
            value = float(raw)
        else:
            value = raw
        setattr(cfg, key, value)
    return cfg


PRESETS = ("default", "full", "fixture")


def parse_key_values(lines) -> dict[str, str]:
    """``key = value`` lines; blank lines and ``#`` comments are skipped."""
    out = {}
    for n, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {n}: expected key = value, got {line!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def build_experiment(settings: dict) -> ExperimentConfig:
    """ExperimentConfig from flat string settings.

    Top-level keys name ExperimentConfig fields (plus ``preset``); dotted keys
    such as ``classifier.hidden_dim`` reach into the nested configs.
    """
    settings = dict(settings)
    preset = settings.pop("preset", "default")
    if preset not in PRESETS:
        raise ValueError(f"unknown preset {preset!r}; choose from {', '.join(PRESETS)}")
    factory = {"default": lambda c: c(), "full": lambda c: getattr(c, "full_size", c)(),
               "fixture": lambda c: getattr(c, "fixture", c)()}[preset]
    nested = {"classifier": factory(ClassifierConfig), "seq2seq": factory(Seq2SeqConfig),
              "sni_tagger": SNITaggerConfig()}
    top: dict = {}
    for key, value in settings.items():
        if "." in key:
            group, name = key.split(".", 1)
            if group not in nested:
                raise KeyError(f"unknown config group {group!r}")
            apply_overrides(nested[group], {name: value})
        elif key == "ratios":
            top[key] = tuple(float(r) for r in str(value).replace(",", " ").split())
        elif key == "seed":
            top[key] = int(value)
        elif key in ("init_embeddings", "strict_oracle_bound"):
            top[key] = value if isinstance(value, bool) else str(value).lower() in ("1", "true", "yes", "on")
        elif key in ("solver", "data", "sni", "embeddings"):
            top[key] = value
        else:
            raise KeyError(f"unknown setting {key!r}")
    if "solver" not in top or "data" not in top:
        raise KeyError("settings must name a solver and a dataset")
    return ExperimentConfig(**top, **nested)
