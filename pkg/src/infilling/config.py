"""RunConfig: one versioned document governing a full experiment.

Every section is validated by its consumer; unknown keys are rejected.
"""

from __future__ import annotations

import json

from pydantic import BaseModel, ConfigDict, ValidationError

from .errors import ConfigInvalid

RUN_CONFIG_VERSION = 1


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class CorpusSection(_Strict):
    train_path: str
    val_path: str
    test_path: str
    format: str = "jsonl"


class MaskSection(_Strict):
    subtree_prob: float = 0.03
    word_vs_ngram_prob: float = 0.5
    max_ngram: int = 8


class VocabSection(_Strict):
    target_size: int = 512


class ModelSection(_Strict):
    n_layers: int = 2
    n_heads: int = 4
    d_model: int = 64
    d_ff: int = 256
    max_seq_len: int = 256
    dropout: float = 0.0


class TrainSection(_Strict):
    batch_size: int = 24
    lr: float = 3e-4
    warmup_steps: int = 100
    weight_decay: float = 0.01
    max_steps: int = 2000
    eval_every: int = 200
    early_stop_patience: int = 5
    loss_scope: str = "all"


class EvalSection(_Strict):
    granularities: list[str] = ["document", "paragraph", "sentence", "ngram", "word"]
    mixture: bool = True


class DecodeSection(_Strict):
    method: str = "nucleus"
    temperature: float = 1.0
    top_k: int = 40
    top_p: float = 0.95
    max_new_tokens: int = 64


class RunConfig(_Strict):
    version: int = RUN_CONFIG_VERSION
    seed: int = 0
    corpus: CorpusSection
    mask: MaskSection = MaskSection()
    vocab: VocabSection = VocabSection()
    model: ModelSection = ModelSection()
    train: TrainSection = TrainSection()
    eval: EvalSection = EvalSection()
    decode: DecodeSection = DecodeSection()

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        try:
            cfg = cls(**data)
        except ValidationError as exc:
            offending = sorted({".".join(str(p) for p in e["loc"]) for e in exc.errors()})
            raise ConfigInvalid(f"invalid run config keys: {', '.join(offending)}") from exc
        if cfg.version != RUN_CONFIG_VERSION:
            raise ConfigInvalid(f"unsupported run config version {cfg.version}")
        return cfg
