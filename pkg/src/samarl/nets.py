"""Actor and critic architectures.

Two families live here. The MLP family (``MlpActor``, ``MlpCritic``) is the
conventional per-agent setup: each network sees a flat vector. The attention
family (``CriticNet``, ``AttentionActor``) consumes a ``[batch, agent,
features]`` layout and shares one set of weights across the agent axis; with
no positional encoding anywhere, permuting the agents permutes the outputs
and nothing else, which is what makes per-agent credit from a shared critic
well defined.

All weights initialize uniform in +-1/sqrt(fan_in). Networks are plain
parameter containers: construct with a ``numpy.random.Generator`` and an
optional dtype (float64 is used by the gradient-check suite).
"""

from __future__ import annotations

import copy
from typing import Sequence

import numpy as np

from . import ndmath as nd
from .ndmath import Tensor


def _uniform_init(rng: np.random.Generator, shape, fan_in: int, dtype,
                  bound: float | None = None) -> Tensor:
    if bound is None:
        bound = 1.0 / np.sqrt(fan_in)
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True, dtype=dtype)


# Action heads start near zero so the tanh is far from saturation when the
# critic's early gradients are still noise; without this, deterministic-policy
# training locks the actors against the action bounds before the critic has
# learned anything worth following.
ACTION_HEAD_INIT = 1e-3


class Linear:
    """Affine map ``x @ w + b``."""

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator,
                 dtype=np.float32, init_bound: float | None = None):
        self.w = _uniform_init(rng, (in_dim, out_dim), in_dim, dtype, init_bound)
        self.b = _uniform_init(rng, (out_dim,), in_dim, dtype, init_bound)

    def __call__(self, x: Tensor) -> Tensor:
        return nd.matmul(x, self.w) + self.b

    def named_parameters(self, prefix: str = ""):
        return [(prefix + "w", self.w), (prefix + "b", self.b)]


class MlpActor:
    """Per-agent deterministic policy: observation vector -> tanh action."""

    def __init__(self, obs_dim: int, act_dim: int, rng: np.random.Generator, *,
                 hidden_dim: int = 64, hidden_layers: int = 3, dtype=np.float32):
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        dims = [obs_dim] + [hidden_dim] * hidden_layers
        self.hidden = [Linear(dims[i], dims[i + 1], rng, dtype)
                       for i in range(hidden_layers)]
        self.out = Linear(dims[-1], act_dim, rng, dtype,
                          init_bound=ACTION_HEAD_INIT)

    def forward(self, obs: Tensor) -> Tensor:
        x = obs
        for layer in self.hidden:
            x = nd.leaky_relu(layer(x))
        return nd.tanh(self.out(x))

    def act(self, obs: np.ndarray) -> np.ndarray:
        """Inference path on raw numpy; used in the rollout hot loop."""
        x = obs
        for layer in self.hidden:
            x = x @ layer.w.data + layer.b.data
            x = np.where(x >= 0, x, 0.01 * x)
        return np.tanh(x @ self.out.w.data + self.out.b.data)

    def named_parameters(self, prefix: str = ""):
        out = []
        for i, layer in enumerate(self.hidden):
            out += layer.named_parameters(f"{prefix}hidden.{i}.")
        out += self.out.named_parameters(prefix + "out.")
        return out


class MlpCritic:
    """Flat-input Q function: concat(observations, actions) -> scalar."""

    def __init__(self, input_dim: int, rng: np.random.Generator, *,
                 hidden_dim: int = 64, hidden_layers: int = 3, dtype=np.float32):
        self.input_dim = input_dim
        dims = [input_dim] + [hidden_dim] * hidden_layers
        self.hidden = [Linear(dims[i], dims[i + 1], rng, dtype)
                       for i in range(hidden_layers)]
        self.out = Linear(dims[-1], 1, rng, dtype)

    def forward(self, x: Tensor) -> Tensor:
        for layer in self.hidden:
            x = nd.leaky_relu(layer(x))
        q = self.out(x)  # (B, 1)
        return nd.reshape(q, (q.shape[0],))

    def named_parameters(self, prefix: str = ""):
        out = []
        for i, layer in enumerate(self.hidden):
            out += layer.named_parameters(f"{prefix}hidden.{i}.")
        out += self.out.named_parameters(prefix + "out.")
        return out


class SelfAttentionBlock:
    """Multi-head self-attention over the agent axis.

    Scores are the raw bilinear products of queries and keys (no scaling
    term), heads are concatenated and mixed by an output projection, then a
    residual connection and layer normalization are applied. There is no
    positional encoding: the block commutes with any permutation of the
    agent axis.
    """

    def __init__(self, dim: int, rng: np.random.Generator, *, heads: int = 4,
                 head_dim: int | None = None, dtype=np.float32,
                 residual: bool = True, normalize: bool = True):
        if head_dim is None:
            if dim % heads:
                raise ValueError(f"dim {dim} not divisible by heads {heads}")
            head_dim = dim // heads
        self.dim = dim
        self.heads = heads
        self.head_dim = head_dim
        self.residual = residual
        self.normalize = normalize
        self.wq = _uniform_init(rng, (dim, heads * head_dim), dim, dtype)
        self.wk = _uniform_init(rng, (dim, heads * head_dim), dim, dtype)
        self.wv = _uniform_init(rng, (dim, heads * head_dim), dim, dtype)
        self.wout = _uniform_init(rng, (heads * head_dim, dim), heads * head_dim, dtype)
        self.ln_gain = Tensor(np.ones(dim), requires_grad=True, dtype=dtype)
        self.ln_bias = Tensor(np.zeros(dim), requires_grad=True, dtype=dtype)

    def _split_heads(self, x: Tensor, batch: int, n: int) -> Tensor:
        return nd.swapaxes(nd.reshape(x, (batch, n, self.heads, self.head_dim)), 1, 2)

    def forward(self, x: Tensor) -> Tensor:
        batch, n, dim = x.shape
        if dim != self.dim:
            raise nd.ShapeError(f"block expects feature dim {self.dim}, got {dim}")
        q = self._split_heads(nd.matmul(x, self.wq), batch, n)  # (B, h, n, dk)
        k = self._split_heads(nd.matmul(x, self.wk), batch, n)
        v = self._split_heads(nd.matmul(x, self.wv), batch, n)
        scores = nd.matmul(q, nd.swapaxes(k, -1, -2))            # (B, h, n, n)
        attended = nd.matmul(nd.softmax(scores, axis=-1), v)     # (B, h, n, dk)
        merged = nd.reshape(nd.swapaxes(attended, 1, 2),
                            (batch, n, self.heads * self.head_dim))
        out = nd.matmul(merged, self.wout)
        if self.residual:
            out = out + x
        if self.normalize:
            out = nd.layer_norm(out, self.ln_gain, self.ln_bias)
        return out

    def named_parameters(self, prefix: str = ""):
        pairs = [("wq", self.wq), ("wk", self.wk), ("wv", self.wv),
                 ("wout", self.wout), ("ln_gain", self.ln_gain),
                 ("ln_bias", self.ln_bias)]
        return [(prefix + name, t) for name, t in pairs]


class CriticNet:
    """Shared attention critic: per-agent (obs, action) -> per-agent Q.

    One embedding, one attention stack, and one position-wise Q head are
    shared across every agent slot, so the per-agent outputs are exactly
    equivariant under agent permutations. ``positional_bias=True`` injects a
    learned per-slot offset after the embedding; it exists purely as a
    negative control for that property and is never used in training.
    """

    def __init__(self, obs_dim: int, act_dim: int, rng: np.random.Generator, *,
                 hidden_dim: int = 64, heads: int = 4, blocks: int = 2,
                 dtype=np.float32, positional_bias: bool = False,
                 n_agents: int | None = None):
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        self.embed = Linear(obs_dim + act_dim, hidden_dim, rng, dtype)
        self.blocks = [SelfAttentionBlock(hidden_dim, rng, heads=heads, dtype=dtype)
                       for _ in range(blocks)]
        self.q_hidden = Linear(hidden_dim, hidden_dim, rng, dtype)
        self.q_out = Linear(hidden_dim, 1, rng, dtype)
        self.pos_bias: Tensor | None = None
        if positional_bias:
            if n_agents is None:
                raise ValueError("positional_bias requires n_agents")
            self.pos_bias = Tensor(rng.normal(size=(n_agents, hidden_dim)),
                                   requires_grad=True, dtype=dtype)

    def forward(self, obs: Tensor, act: Tensor) -> Tensor:
        if obs.shape[:2] != act.shape[:2]:
            raise nd.ShapeError(
                f"observation/action agent layouts disagree: {obs.shape} vs {act.shape}")
        x = nd.leaky_relu(self.embed(nd.concat([obs, act], axis=-1)))
        if self.pos_bias is not None:
            x = x + self.pos_bias
        for block in self.blocks:
            x = block.forward(x)
        q = self.q_out(nd.leaky_relu(self.q_hidden(x)))  # (B, n, 1)
        return nd.reshape(q, q.shape[:2])

    def named_parameters(self, prefix: str = ""):
        out = self.embed.named_parameters(prefix + "embed.")
        for i, block in enumerate(self.blocks):
            out += block.named_parameters(f"{prefix}blocks.{i}.")
        out += self.q_hidden.named_parameters(prefix + "q_hidden.")
        out += self.q_out.named_parameters(prefix + "q_out.")
        if self.pos_bias is not None:
            out.append((prefix + "pos_bias", self.pos_bias))
        return out


class DoubleCritic:
    """Two independent critics of identical architecture; never share weights."""

    def __init__(self, first, second):
        if first is second:
            raise ValueError("double critic needs two distinct critic instances")
        self.critics = [first, second]

    def min_q(self, *inputs) -> Tensor:
        return nd.minimum(self.critics[0].forward(*inputs),
                          self.critics[1].forward(*inputs))

    def named_parameters(self, prefix: str = ""):
        out = []
        for i, c in enumerate(self.critics):
            out += c.named_parameters(f"{prefix}critic{i + 1}.")
        return out


def double_min(dc: DoubleCritic, *inputs) -> Tensor:
    """Elementwise minimum of the two critics' outputs."""
    return dc.min_q(*inputs)


class AttentionActor:
    """Centralized policy: all observations in, all actions out.

    A single weight set embeds each agent's observation, runs the attention
    stack, and decodes a tanh action per slot; like the critic, the network
    is permutation equivariant over agents.
    """

    def __init__(self, obs_dim: int, act_dim: int, rng: np.random.Generator, *,
                 hidden_dim: int = 64, heads: int = 4, blocks: int = 2,
                 dtype=np.float32):
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        self.embed = Linear(obs_dim, hidden_dim, rng, dtype)
        self.blocks = [SelfAttentionBlock(hidden_dim, rng, heads=heads, dtype=dtype)
                       for _ in range(blocks)]
        self.head_hidden = Linear(hidden_dim, hidden_dim, rng, dtype)
        self.head_out = Linear(hidden_dim, act_dim, rng, dtype,
                               init_bound=ACTION_HEAD_INIT)

    def forward(self, obs: Tensor) -> Tensor:
        x = nd.leaky_relu(self.embed(obs))
        for block in self.blocks:
            x = block.forward(x)
        return nd.tanh(self.head_out(nd.leaky_relu(self.head_hidden(x))))

    def act(self, obs_all: np.ndarray) -> np.ndarray:
        """Joint action for one world state, shape (n, act_dim)."""
        with nd.no_grad():
            out = self.forward(Tensor(obs_all[None, ...], dtype=self.embed.w.dtype))
        return out.data[0]

    def named_parameters(self, prefix: str = ""):
        out = self.embed.named_parameters(prefix + "embed.")
        for i, block in enumerate(self.blocks):
            out += block.named_parameters(f"{prefix}blocks.{i}.")
        out += self.head_hidden.named_parameters(prefix + "head_hidden.")
        out += self.head_out.named_parameters(prefix + "head_out.")
        return out


def total_q(q: Tensor) -> Tensor:
    """Sum per-agent Q values of one type into the decomposed total."""
    if q.shape[-1] < 1:
        raise nd.ShapeError("total_q needs at least one agent")
    return nd.tsum(q, axis=-1)


def parameters(net) -> list[Tensor]:
    return [t for _, t in net.named_parameters()]


def clone(net):
    """Deep copy used to spawn target networks."""
    return copy.deepcopy(net)


def copy_params(dst, src) -> None:
    for (name_d, d), (name_s, s) in zip(dst.named_parameters(), src.named_parameters()):
        if name_d != name_s or d.data.shape != s.data.shape:
            raise nd.ShapeError(
                f"parameter mismatch: {name_d}{d.data.shape} vs {name_s}{s.data.shape}")
        d.data[...] = s.data
