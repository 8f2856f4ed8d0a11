"""Small decoder-only causal transformer: forward, training, decoding,
checkpointing.

Pre-norm residual blocks with learned absolute positional embeddings.
Training is AdamW with linear warmup, early stopping on masked-token
validation PPL, and is deterministic given the seed (single-threaded math
in deterministic mode).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict, field
from typing import Callable, Optional, Sequence

import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import (
    ContextOverflow,
    FingerprintMismatch,
    NonFiniteLoss,
    SequenceTooLong,
    ShapeMismatch,
)

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    n_layers: int = 2
    n_heads: int = 4
    d_model: int = 64
    d_ff: int = 256
    max_seq_len: int = 256
    dropout: float = 0.0
    init_seed: int = 0

    def __post_init__(self):
        if self.d_model % self.n_heads != 0:
            raise ValueError("d_model must be divisible by n_heads")


@dataclass
class TrainConfig:
    batch_size: int = 24
    lr: float = 3e-4
    warmup_steps: int = 100
    weight_decay: float = 0.01
    max_steps: int = 2000
    eval_every: int = 200
    early_stop_patience: int = 5
    loss_scope: str = "all"  # or "targets_only"
    seed: int = 0
    deterministic: bool = True

    def __post_init__(self):
        for name in ("batch_size", "warmup_steps", "max_steps", "eval_every",
                     "early_stop_patience"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.loss_scope not in ("all", "targets_only"):
            raise ValueError("loss_scope must be 'all' or 'targets_only'")


class Block(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.n_heads = cfg.n_heads
        self.d_head = cfg.d_model // cfg.n_heads
        self.ln1 = nn.LayerNorm(cfg.d_model)
        self.ln2 = nn.LayerNorm(cfg.d_model)
        self.qkv = nn.Linear(cfg.d_model, 3 * cfg.d_model)
        self.proj = nn.Linear(cfg.d_model, cfg.d_model)
        self.ff = nn.Sequential(
            nn.Linear(cfg.d_model, cfg.d_ff),
            nn.GELU(),
            nn.Linear(cfg.d_ff, cfg.d_model),
        )
        self.drop = nn.Dropout(cfg.dropout)

    def forward(self, x):
        b, t, d = x.shape
        h = self.ln1(x)
        q, k, v = self.qkv(h).chunk(3, dim=-1)
        q = q.view(b, t, self.n_heads, self.d_head).transpose(1, 2)
        k = k.view(b, t, self.n_heads, self.d_head).transpose(1, 2)
        v = v.view(b, t, self.n_heads, self.d_head).transpose(1, 2)
        scores = q @ k.transpose(-2, -1) / math.sqrt(self.d_head)
        causal = torch.triu(torch.ones(t, t, dtype=torch.bool, device=x.device), 1)
        scores = scores.masked_fill(causal, float("-inf"))
        att = self.drop(torch.softmax(scores, dim=-1))
        out = (att @ v).transpose(1, 2).reshape(b, t, d)
        x = x + self.drop(self.proj(out))
        x = x + self.drop(self.ff(self.ln2(x)))
        return x


class TransformerLM(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        torch.manual_seed(cfg.init_seed)
        self.tok_emb = nn.Embedding(cfg.vocab_size, cfg.d_model)
        self.pos_emb = nn.Embedding(cfg.max_seq_len, cfg.d_model)
        self.blocks = nn.ModuleList(Block(cfg) for _ in range(cfg.n_layers))
        self.ln_f = nn.LayerNorm(cfg.d_model)
        self.head = nn.Linear(cfg.d_model, cfg.vocab_size)
        self.drop = nn.Dropout(cfg.dropout)

    def forward(self, tokens: torch.Tensor) -> torch.Tensor:
        """Per-position next-token log-probabilities, shape (B, T, V)."""
        if tokens.dim() != 2:
            raise ShapeMismatch(f"expected (batch, time) tokens, got {tuple(tokens.shape)}")
        b, t = tokens.shape
        if t > self.cfg.max_seq_len:
            raise SequenceTooLong(t, self.cfg.max_seq_len)
        if tokens.numel() and int(tokens.max()) >= self.cfg.vocab_size:
            raise ShapeMismatch("token id out of range for vocab_size")
        pos = torch.arange(t, device=tokens.device).unsqueeze(0)
        x = self.drop(self.tok_emb(tokens) + self.pos_emb(pos))
        for block in self.blocks:
            x = block(x)
        x = self.ln_f(x)
        return F.log_softmax(self.head(x), dim=-1)


@dataclass
class Checkpoint:
    config: ModelConfig
    model: TransformerLM
    vocab_fingerprint: str
    step: int = 0
    optimizer_state: Optional[dict] = None

    def save(self, path) -> None:
        torch.save(
            {
                "version": CHECKPOINT_VERSION,
                "config": asdict(self.config),
                "state_dict": self.model.state_dict(),
                "vocab_fingerprint": self.vocab_fingerprint,
                "step": self.step,
                "optimizer_state": self.optimizer_state,
            },
            path,
        )

    @classmethod
    def load(cls, path) -> "Checkpoint":
        data = torch.load(path, map_location="cpu", weights_only=False)
        if data.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {data.get('version')}")
        cfg = ModelConfig(**data["config"])
        model = TransformerLM(cfg)
        model.load_state_dict(data["state_dict"])
        model.eval()
        return cls(
            config=cfg,
            model=model,
            vocab_fingerprint=data["vocab_fingerprint"],
            step=data["step"],
            optimizer_state=data.get("optimizer_state"),
        )


# --- batching ---------------------------------------------------------------


def make_batch(examples, pad_id: int, loss_scope: str = "all"):
    """Pad a list of InfillExamples into (tokens, loss_mask) tensors.

    The loss mask marks *target* positions for the shifted LM loss: position t
    is marked when token t should be predicted (so position 0 never is).
    """
    max_len = max(len(ex.tokens) for ex in examples)
    tokens = torch.full((len(examples), max_len), pad_id, dtype=torch.long)
    mask = torch.zeros((len(examples), max_len), dtype=torch.bool)
    for i, ex in enumerate(examples):
        n = len(ex.tokens)
        tokens[i, :n] = torch.tensor(ex.tokens, dtype=torch.long)
        if loss_scope == "targets_only":
            for s, e in ex.target_spans:
                mask[i, s:e] = True
        else:
            mask[i, :n] = torch.tensor(ex.loss_mask, dtype=torch.bool)
        mask[i, 0] = False  # no context to predict the first token from
    return tokens, mask


def batch_loss(model: TransformerLM, tokens: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    """Mean negative log-likelihood over masked target positions."""
    logp = model(tokens)
    # predict token t from position t-1
    pred = logp[:, :-1, :]
    tgt = tokens[:, 1:]
    tgt_mask = mask[:, 1:]
    nll = -pred.gather(-1, tgt.unsqueeze(-1)).squeeze(-1)
    denom = tgt_mask.sum()
    if denom == 0:
        return torch.zeros((), dtype=logp.dtype)
    return (nll * tgt_mask).sum() / denom


def masked_token_nll(model: TransformerLM, examples, pad_id: int,
                     batch_size: int = 32) -> tuple[float, int]:
    """Total NLL and token count over target-span positions only."""
    total = 0.0
    count = 0
    model.eval()
    with torch.no_grad():
        for i in range(0, len(examples), batch_size):
            chunk = examples[i:i + batch_size]
            tokens, mask = make_batch(chunk, pad_id, loss_scope="targets_only")
            logp = model(tokens)
            pred = logp[:, :-1, :]
            tgt = tokens[:, 1:]
            tgt_mask = mask[:, 1:]
            nll = -pred.gather(-1, tgt.unsqueeze(-1)).squeeze(-1)
            total += float((nll * tgt_mask).sum())
            count += int(tgt_mask.sum())
    return total, count


def train(model: TransformerLM, dataset: Sequence, cfg: TrainConfig, pad_id: int,
          vocab_fingerprint: str, validation: Sequence = (),
          dataset_fingerprint: Optional[str] = None) -> tuple[Checkpoint, list[dict]]:
    """Train the model; returns the best checkpoint and a JSONL-able log."""
    if not dataset:
        raise ValueError("dataset is empty")
    if dataset_fingerprint is not None and dataset_fingerprint != vocab_fingerprint:
        raise FingerprintMismatch("dataset vocab fingerprint does not match model's")
    if cfg.deterministic:
        torch.set_num_threads(1)
    torch.manual_seed(cfg.seed)
    rng = torch.Generator().manual_seed(cfg.seed)

    decay, no_decay = [], []
    for name, p in model.named_parameters():
        (no_decay if p.dim() < 2 else decay).append(p)
    opt = torch.optim.AdamW(
        [{"params": decay, "weight_decay": cfg.weight_decay},
         {"params": no_decay, "weight_decay": 0.0}],
        lr=cfg.lr,
    )
    sched = torch.optim.lr_scheduler.LambdaLR(
        opt, lambda step: min(1.0, (step + 1) / cfg.warmup_steps)
    )

    log: list[dict] = []
    best_val = float("inf")
    best_state = None
    bad_evals = 0
    step = 0
    model.train()
    while step < cfg.max_steps:
        order = torch.randperm(len(dataset), generator=rng).tolist()
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            batch = [dataset[j] for j in idx]
            tokens, mask = make_batch(batch, pad_id, cfg.loss_scope)
            loss = batch_loss(model, tokens, mask)
            if not torch.isfinite(loss):
                raise NonFiniteLoss(f"loss became non-finite at step {step}")
            opt.zero_grad()
            loss.backward()
            opt.step()
            sched.step()
            step += 1
            entry = {"step": step, "loss": float(loss.detach())}
            if validation and step % cfg.eval_every == 0:
                total, count = masked_token_nll(model, validation, pad_id)
                val_ppl = math.exp(total / count) if count else float("nan")
                entry["val_ppl"] = val_ppl
                model.train()
                if val_ppl < best_val:
                    best_val = val_ppl
                    best_state = {k: v.clone() for k, v in model.state_dict().items()}
                    bad_evals = 0
                else:
                    bad_evals += 1
            log.append(entry)
            if step >= cfg.max_steps or bad_evals >= cfg.early_stop_patience:
                break
        if bad_evals >= cfg.early_stop_patience:
            break
    if best_state is not None:
        model.load_state_dict(best_state)
    model.eval()
    return Checkpoint(model.cfg, model, vocab_fingerprint, step=step), log


# --- decoding ---------------------------------------------------------------


@dataclass(frozen=True)
class DecodeConfig:
    method: str = "nucleus"  # greedy | temperature | top_k | nucleus
    temperature: float = 1.0
    top_k: int = 40
    top_p: float = 0.95
    max_new_tokens: int = 64
    seed: int = 0

    def __post_init__(self):
        if self.method not in ("greedy", "temperature", "top_k", "nucleus"):
            raise ValueError(f"unknown decode method {self.method!r}")


def _sample_from(logp: torch.Tensor, decode: DecodeConfig, gen: torch.Generator) -> int:
    if decode.method == "greedy" or (
        decode.method == "temperature" and decode.temperature == 0.0
    ):
        return int(torch.argmax(logp))
    if decode.method == "temperature":
        probs = torch.softmax(logp / decode.temperature, dim=-1)
    elif decode.method == "top_k":
        k = min(decode.top_k, logp.numel())
        vals, idx = torch.topk(logp, k)
        probs = torch.zeros_like(logp)
        probs[idx] = torch.softmax(vals / decode.temperature, dim=-1)
    else:  # nucleus
        probs = torch.softmax(logp / decode.temperature, dim=-1)
        sorted_probs, sorted_idx = torch.sort(probs, descending=True)
        cum = torch.cumsum(sorted_probs, dim=-1)
        keep = cum - sorted_probs < decode.top_p  # always keep the top token
        sorted_probs = sorted_probs * keep
        probs = torch.zeros_like(probs)
        probs[sorted_idx] = sorted_probs / sorted_probs.sum()
    return int(torch.multinomial(probs, 1, generator=gen))


def generate(checkpoint: Checkpoint, prefix: Sequence[int], decode: DecodeConfig,
             eos_id: int, stop_fn: Optional[Callable[[list[int]], bool]] = None) -> list[int]:
    """Autoregressively extend prefix; returns only the generated tokens."""
    model = checkpoint.model
    max_len = checkpoint.config.max_seq_len
    if len(prefix) >= max_len:
        raise ContextOverflow(f"prefix of {len(prefix)} tokens fills the context ({max_len})")
    gen = torch.Generator().manual_seed(decode.seed)
    tokens = list(prefix)
    out: list[int] = []
    model.eval()
    with torch.no_grad():
        for _ in range(decode.max_new_tokens):
            if len(tokens) >= max_len:
                break
            logp = model(torch.tensor([tokens], dtype=torch.long))[0, -1]
            nxt = _sample_from(logp, decode, gen)
            tokens.append(nxt)
            out.append(nxt)
            if nxt == eos_id:
                break
            if stop_fn is not None and stop_fn(out):
                break
    return out
