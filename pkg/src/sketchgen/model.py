"""Small autoregressive Transformers over the three token encodings.

Three models share the same block: pre-LN multihead self-attention plus a
2-layer MLP. The vertex model is a plain decoder-only LM; the curve model
encodes the vertex list and decodes pointer tokens whose logits are dot
products against the encoded vertices (plus two learned marker vectors);
the turtle model reads and emits fixed-width 7-branch rows.

All computation is CPU torch; training is deterministic given a seed.
"""

from __future__ import annotations

import copy
import json
from dataclasses import asdict, dataclass, field

import numpy as np
import torch
from torch import nn

from .geometry import GRID_SIZE
from .tokens import (
    COMMAND_IDS,
    COORD_VOCAB,
    PAD,
    ROW_WIDTH,
    STOP_TOKEN,
)

CHECKPOINT_VERSION = 1
VERTEX_VOCAB = GRID_SIZE + 1  # 257: coordinates + stop
N_COMMANDS = len(COMMAND_IDS)


class ModelError(ValueError):
    pass


class DivergenceError(RuntimeError):
    pass


@dataclass
class ModelConfig:
    kind: str  # "vertex" | "curve" | "turtle"
    blocks: int = 2
    heads: int = 4
    hidden_dim: int = 128  # MLP inner width
    output_dim: int = 64  # transformer width
    dropout: float = 0.0
    max_len: int = 220
    max_vertices: int = 110  # curve model: encoder capacity
    vocab: int | None = None  # vertex model override; None = 257
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("vertex", "curve", "turtle"):
            raise ModelError(f"unknown model kind {self.kind!r}")
        if self.hidden_dim % self.heads or self.output_dim % self.heads:
            raise ModelError("hidden_dim and output_dim must divide by heads")
        if not (0.0 <= self.dropout < 1.0):
            raise ModelError("dropout must be in [0, 1)")


class _Attention(nn.Module):
    def __init__(self, dim, heads, dropout):
        super().__init__()
        self.heads = heads
        self.dim = dim
        self.q = nn.Linear(dim, dim)
        # no k bias: it adds a per-query constant to every score, which
        # softmax cancels, leaving an exactly-zero gradient direction
        self.k = nn.Linear(dim, dim, bias=False)
        self.v = nn.Linear(dim, dim)
        self.out = nn.Linear(dim, dim)
        self.drop = nn.Dropout(dropout)

    def forward(self, x, memory=None, causal=False):
        src = x if memory is None else memory
        L, S = x.shape[0], src.shape[0]
        hd = self.dim // self.heads
        q = self.q(x).view(L, self.heads, hd).transpose(0, 1)
        k = self.k(src).view(S, self.heads, hd).transpose(0, 1)
        v = self.v(src).view(S, self.heads, hd).transpose(0, 1)
        scores = q @ k.transpose(-2, -1) / hd ** 0.5
        if causal:
            mask = torch.triu(
                torch.ones(L, S, dtype=torch.bool, device=x.device), 1
            )
            scores = scores.masked_fill(mask, float("-inf"))
        attn = torch.softmax(scores, dim=-1)
        attn = self.drop(attn)
        y = (attn @ v).transpose(0, 1).reshape(L, self.dim)
        return self.out(y)


class _Block(nn.Module):
    def __init__(self, cfg: ModelConfig, cross: bool):
        super().__init__()
        d = cfg.output_dim
        self.ln1 = nn.LayerNorm(d)
        self.attn = _Attention(d, cfg.heads, cfg.dropout)
        self.cross = None
        if cross:
            self.ln_cross = nn.LayerNorm(d)
            self.cross = _Attention(d, cfg.heads, cfg.dropout)
        self.ln2 = nn.LayerNorm(d)
        self.mlp = nn.Sequential(
            nn.Linear(d, cfg.hidden_dim),
            nn.GELU(),
            nn.Linear(cfg.hidden_dim, d),
        )
        self.drop = nn.Dropout(cfg.dropout)

    def forward(self, x, memory=None, causal=True):
        x = x + self.attn(self.ln1(x), causal=causal)
        if self.cross is not None and memory is not None:
            x = x + self.cross(self.ln_cross(x), memory=memory)
        x = x + self.drop(self.mlp(self.ln2(x)))
        return x


def _positions(n, emb):
    return emb(torch.arange(n))


class _Base(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        torch.manual_seed(cfg.seed)

    # --- generic helpers -------------------------------------------------
    def nll_item(self, item) -> torch.Tensor:
        raise NotImplementedError

    def nll(self, item) -> float:
        """Total negative log likelihood of one sequence, in nats."""
        self.eval()
        with torch.no_grad():
            return float(self.nll_item(item))


class VertexModel(_Base):
    """Decoder-only LM over flattened vertex coordinate tokens."""

    def __init__(self, cfg: ModelConfig):
        super().__init__(cfg)
        d = cfg.output_dim
        self.vocab = cfg.vocab or VERTEX_VOCAB
        self.token_emb = nn.Embedding(self.vocab + 1, d)  # + BOS row
        self.pos_emb = nn.Embedding(cfg.max_len + 1, d)
        self.blocks = nn.ModuleList(
            _Block(cfg, cross=False) for _ in range(cfg.blocks)
        )
        self.ln_f = nn.LayerNorm(d)
        self.head = nn.Linear(d, self.vocab)
        self.bos = self.vocab

    def logits(self, prefix) -> torch.Tensor:
        """Next-token logits at every position 0..len(prefix)."""
        if len(prefix) > self.cfg.max_len:
            raise ModelError("sequence longer than max_len")
        toks = torch.tensor([self.bos] + [int(t) for t in prefix])
        if toks[1:].numel() and (toks[1:].max() >= self.vocab or toks[1:].min() < 0):
            raise ModelError("token out of vocabulary")
        x = self.token_emb(toks) + _positions(len(toks), self.pos_emb)
        for blk in self.blocks:
            x = blk(x, causal=True)
        return self.head(self.ln_f(x))

    def step_distributions(self, prefix) -> list[np.ndarray]:
        """p(token_t | tokens_<t) for t = 0..len(prefix)."""
        self.eval()
        with torch.no_grad():
            probs = torch.softmax(self.logits(prefix), dim=-1)
        return [p.numpy() for p in probs]

    def nll_item(self, seq) -> torch.Tensor:
        seq_t = torch.tensor([int(t) for t in seq])
        logits = self.logits(list(seq[:-1]))  # positions 0..L-1 predict seq
        return nn.functional.cross_entropy(logits, seq_t, reduction="sum")

    def sample(self, top_p, seed, max_len=None):
        max_len = max_len or self.cfg.max_len
        rng = np.random.default_rng(seed)
        seq: list[int] = []
        truncated = True
        self.eval()
        with torch.no_grad():
            for _ in range(max_len):
                probs = torch.softmax(self.logits(seq)[-1], dim=-1).numpy()
                tok = _nucleus_pick(probs, top_p, rng)
                seq.append(tok)
                if tok == STOP_TOKEN:
                    truncated = False
                    break
        return SampleResult(seq, truncated)


class CurveModel(_Base):
    """Pointer-network curve model conditioned on the vertex list."""

    def __init__(self, cfg: ModelConfig):
        super().__init__(cfg)
        d = cfg.output_dim
        self.x_emb = nn.Embedding(GRID_SIZE, d)
        self.y_emb = nn.Embedding(GRID_SIZE, d)
        self.enc_pos = nn.Embedding(cfg.max_vertices, d)
        self.encoder = nn.ModuleList(
            _Block(cfg, cross=False) for _ in range(cfg.blocks)
        )
        self.enc_ln = nn.LayerNorm(d)
        self.markers = nn.Parameter(torch.randn(2, d) * 0.02)  # EOC, EOS
        self.dec_pos = nn.Embedding(cfg.max_len + 1, d)
        self.bos_vec = nn.Parameter(torch.randn(d) * 0.02)
        self.decoder = nn.ModuleList(
            _Block(cfg, cross=True) for _ in range(cfg.blocks)
        )
        self.dec_ln = nn.LayerNorm(d)

    def _encode(self, vertices):
        if len(vertices) > self.cfg.max_vertices:
            raise ModelError("too many vertices for encoder")
        xs = torch.tensor([int(v[0]) for v in vertices])
        ys = torch.tensor([int(v[1]) for v in vertices])
        x = self.x_emb(xs) + self.y_emb(ys) + _positions(len(xs), self.enc_pos)
        for blk in self.encoder:
            x = blk(x, causal=False)
        enc = self.enc_ln(x)
        candidates = torch.cat([enc, self.markers], dim=0)
        return enc, candidates

    def logits(self, vertices, prefix) -> torch.Tensor:
        if len(prefix) > self.cfg.max_len:
            raise ModelError("sequence longer than max_len")
        enc, candidates = self._encode(vertices)
        n_cand = candidates.shape[0]
        embs = [self.bos_vec]
        for t in prefix:
            t = int(t)
            if not (0 <= t < n_cand):
                raise ModelError(f"pointer token {t} out of range")
            embs.append(candidates[t])
        x = torch.stack(embs) + _positions(len(embs), self.dec_pos)
        for blk in self.decoder:
            x = blk(x, memory=enc, causal=True)
        h = self.dec_ln(x)
        return h @ candidates.t()

    def step_distributions(self, vertices, prefix) -> list[np.ndarray]:
        self.eval()
        with torch.no_grad():
            probs = torch.softmax(self.logits(vertices, prefix), dim=-1)
        return [p.numpy() for p in probs]

    def nll_item(self, item) -> torch.Tensor:
        vertices, seq = item
        seq_t = torch.tensor([int(t) for t in seq])
        logits = self.logits(vertices, list(seq))[: len(seq)]
        return nn.functional.cross_entropy(logits, seq_t, reduction="sum")

    def sample(self, vertices, top_p, seed, max_len=None):
        max_len = max_len or self.cfg.max_len
        rng = np.random.default_rng(seed)
        eos = len(vertices) + 1
        seq: list[int] = []
        truncated = True
        self.eval()
        with torch.no_grad():
            for _ in range(max_len):
                probs = torch.softmax(
                    self.logits(vertices, seq)[-1], dim=-1
                ).numpy()
                tok = _nucleus_pick(probs, top_p, rng)
                seq.append(tok)
                if tok == eos:
                    truncated = False
                    break
        return SampleResult(seq, truncated)


class TurtleModel(_Base):
    """Seven-branch row model over turtle command sequences."""

    def __init__(self, cfg: ModelConfig):
        super().__init__(cfg)
        d = cfg.output_dim
        self.cmd_emb = nn.Embedding(N_COMMANDS, d)
        self.coord_embs = nn.ModuleList(
            nn.Embedding(COORD_VOCAB, d) for _ in range(ROW_WIDTH - 1)
        )
        self.in_proj = nn.Linear(ROW_WIDTH * d, d)
        self.pos_emb = nn.Embedding(cfg.max_len + 1, d)
        self.blocks = nn.ModuleList(
            _Block(cfg, cross=False) for _ in range(cfg.blocks)
        )
        self.ln_f = nn.LayerNorm(d)
        self.cmd_head = nn.Linear(d, N_COMMANDS)
        self.coord_heads = nn.ModuleList(
            nn.Linear(d, COORD_VOCAB) for _ in range(ROW_WIDTH - 1)
        )

    def _embed_rows(self, rows):
        parts = [self.cmd_emb(torch.tensor([int(r[0]) for r in rows]))]
        for i in range(ROW_WIDTH - 1):
            parts.append(
                self.coord_embs[i](
                    torch.tensor([int(r[1 + i]) for r in rows])
                )
            )
        return self.in_proj(torch.cat(parts, dim=-1))

    def branch_logits(self, prefix_rows):
        """Per-branch next-row logits at positions 0..len(prefix)-1.

        Row 0 must be the start row; it doubles as the BOS, so position t
        predicts row t+1.
        """
        rows = list(prefix_rows)
        if not rows:
            raise ModelError("turtle prefix must include the start row")
        if len(rows) > self.cfg.max_len:
            raise ModelError("sequence longer than max_len")
        for r in rows:
            if len(r) != ROW_WIDTH:
                raise ModelError("malformed row")
            if not (0 <= int(r[0]) < N_COMMANDS):
                raise ModelError("command token out of vocabulary")
            for c in r[1:]:
                if not (0 <= int(c) < COORD_VOCAB):
                    raise ModelError("coordinate token out of vocabulary")
        x = self._embed_rows(rows) + _positions(len(rows), self.pos_emb)
        for blk in self.blocks:
            x = blk(x, causal=True)
        h = self.ln_f(x)
        return [self.cmd_head(h)] + [head(h) for head in self.coord_heads]

    def step_distributions(self, prefix_rows):
        """One tuple of 7 branch distributions per position."""
        self.eval()
        with torch.no_grad():
            logits = self.branch_logits(prefix_rows)
            probs = [torch.softmax(l, dim=-1).numpy() for l in logits]
        return [
            tuple(probs[b][t] for b in range(ROW_WIDTH))
            for t in range(len(prefix_rows))
        ]

    def nll_item(self, rows) -> torch.Tensor:
        rows = list(rows)
        if len(rows) < 2:
            raise ModelError("need at least start and end rows")
        logits = self.branch_logits(rows[:-1])
        total = torch.zeros((), dtype=logits[0].dtype)
        targets = rows[1:]
        for b in range(ROW_WIDTH):
            tgt = torch.tensor([int(r[b]) for r in targets])
            total = total + nn.functional.cross_entropy(
                logits[b], tgt, reduction="sum"
            )
        return total

    def sample(self, top_p, seed, max_len=None):
        max_len = max_len or self.cfg.max_len
        rng = np.random.default_rng(seed)
        rows = [(COMMAND_IDS["start"],) + (PAD,) * (ROW_WIDTH - 1)]
        truncated = True
        self.eval()
        with torch.no_grad():
            for _ in range(max_len - 1):
                logits = self.branch_logits(rows)
                row = []
                for b in range(ROW_WIDTH):
                    probs = torch.softmax(logits[b][-1], dim=-1).numpy()
                    row.append(_nucleus_pick(probs, top_p, rng))
                rows.append(tuple(row))
                if row[0] == COMMAND_IDS["end"]:
                    truncated = False
                    break
        return SampleResult(rows, truncated)


@dataclass
class SampleResult:
    tokens: list
    truncated: bool


def build_model(cfg: ModelConfig) -> _Base:
    cls = {"vertex": VertexModel, "curve": CurveModel, "turtle": TurtleModel}
    return cls[cfg.kind](cfg)


# --- nucleus sampling ----------------------------------------------------

def nucleus_filter(probs, top_p):
    """Keep the smallest probability-sorted prefix with mass >= top_p,
    renormalized; zeros elsewhere."""
    if not (0.0 < top_p <= 1.0):
        raise ModelError("top_p must be in (0, 1]")
    p = np.asarray(probs, dtype=float)
    order = np.argsort(-p, kind="stable")
    csum = np.cumsum(p[order])
    cut = int(np.searchsorted(csum, top_p - 1e-12)) + 1
    keep = order[:cut]
    out = np.zeros_like(p)
    out[keep] = p[keep]
    total = out.sum()
    if total <= 0:
        raise ModelError("empty nucleus")
    return out / total


def _nucleus_pick(probs, top_p, rng) -> int:
    filtered = nucleus_filter(probs, top_p)
    return int(rng.choice(len(filtered), p=filtered))


# --- training ------------------------------------------------------------

@dataclass
class TrainResult:
    losses: list[float] = field(default_factory=list)
    val_losses: list[float] = field(default_factory=list)
    best_val: float | None = None


def train(
    model: _Base,
    corpus,
    steps,
    lr=5e-4,
    seed=0,
    batch_size=8,
    val_corpus=None,
    val_every=50,
    plateau_factor=None,
    plateau_patience=3,
) -> TrainResult:
    """Adam training on mean sequence nll; deterministic per seed.

    With a validation corpus, the parameters with the lowest validation
    loss are restored at the end. plateau_factor optionally decays the
    learning rate when validation loss stops improving.
    """
    if not corpus:
        raise ModelError("empty training corpus")
    torch.manual_seed(seed)
    rng = np.random.default_rng(seed)
    opt = torch.optim.Adam(model.parameters(), lr=lr)
    sched = None
    if plateau_factor is not None:
        sched = torch.optim.lr_scheduler.ReduceLROnPlateau(
            opt, factor=plateau_factor, patience=plateau_patience
        )
    result = TrainResult()
    best_state = None
    model.train()
    for step in range(steps):
        idx = rng.choice(len(corpus), size=min(batch_size, len(corpus)), replace=False)
        loss = sum(model.nll_item(corpus[int(i)]) for i in idx) / len(idx)
        if not torch.isfinite(loss):
            raise DivergenceError(f"loss diverged at step {step}")
        opt.zero_grad()
        loss.backward()
        opt.step()
        result.losses.append(float(loss.detach()))
        if val_corpus and (step + 1) % val_every == 0:
            model.eval()
            with torch.no_grad():
                val = float(
                    sum(model.nll_item(it) for it in val_corpus)
                ) / len(val_corpus)
            model.train()
            result.val_losses.append(val)
            if sched is not None:
                sched.step(val)
            if result.best_val is None or val < result.best_val:
                result.best_val = val
                best_state = copy.deepcopy(model.state_dict())
    if best_state is not None:
        model.load_state_dict(best_state)
    model.eval()
    return result


# --- gradient checking ---------------------------------------------------

def gradient_check(model: _Base, item, eps=1e-3) -> float:
    """Max per-tensor relative error between autograd and central finite
    differences of the sequence nll. Runs in float64."""
    model.double()
    model.eval()
    loss = model.nll_item(item)
    model.zero_grad()
    loss.backward()
    worst = 0.0
    for name, param in model.named_parameters():
        if param.grad is None:
            continue
        analytic = param.grad.detach().clone()
        fd = torch.zeros_like(analytic)
        flat = param.data.view(-1)
        fd_flat = fd.view(-1)
        for i in range(flat.numel()):
            orig = float(flat[i])
            with torch.no_grad():
                flat[i] = orig + eps
                hi = float(model.nll_item(item))
                flat[i] = orig - eps
                lo = float(model.nll_item(item))
                flat[i] = orig
            fd_flat[i] = (hi - lo) / (2 * eps)
        scale = float(analytic.abs().max())
        diff = float((analytic - fd).abs().max())
        rel = diff / max(scale, 1e-8)
        worst = max(worst, rel)
    return worst


# --- checkpoints ---------------------------------------------------------

def save_checkpoint(model: _Base, path):
    """Versioned .npz: JSON meta (config + format version) plus the flat
    parameter arrays keyed by parameter name."""
    meta = {"version": CHECKPOINT_VERSION, "config": asdict(model.cfg)}
    arrays = {
        k: v.detach().cpu().numpy() for k, v in model.state_dict().items()
    }
    np.savez(path, __meta__=np.array(json.dumps(meta)), **arrays)


def load_checkpoint(path) -> _Base:
    data = np.load(path, allow_pickle=False)
    if "__meta__" not in data:
        raise ModelError("not a model checkpoint (missing meta)")
    meta = json.loads(str(data["__meta__"]))
    if meta.get("version") != CHECKPOINT_VERSION:
        raise ModelError(f"unsupported checkpoint version {meta.get('version')}")
    cfg = ModelConfig(**meta["config"])
    model = build_model(cfg)
    state = {
        k: torch.from_numpy(data[k]) for k in data.files if k != "__meta__"
    }
    model.load_state_dict(state)
    model.eval()
    return model


# --- functional wrappers -------------------------------------------------

def forward(model: _Base, seq_prefix):
    """Next-token distributions for every position of the prefix."""
    if isinstance(model, CurveModel):
        raise ModelError("curve model forward needs vertices; call "
                         "model.step_distributions(vertices, prefix)")
    return model.step_distributions(seq_prefix)


def nll(model: _Base, seq) -> float:
    return model.nll(seq)


def sample_nucleus(model: _Base, top_p, seed, max_len=None, **kw):
    return model.sample(top_p=top_p, seed=seed, max_len=max_len, **kw)
