"""Trainer family: replay buffer, exploration, targets, and network updates.

One ``Trainer`` class covers the whole algorithm grid. ``AlgoKind`` reads as
a set of switches:

  double Q        -- two critics, Bellman target takes their minimum
  delayed         -- policy (and target) updates every Nth critic update
  smoothing       -- clipped Gaussian noise on target actions
  attention critic-- one shared per-type critic over the agent axis, with
                     the per-agent Q values summed into a total Q that is
                     regressed against the joint reward
  attention actor -- one centralized policy mapping all observations to all
                     actions (no decentralized execution)

The baseline kinds (MADDPG, MATD3) keep per-agent MLP critics on the flat
concat of everyone's observations and actions and update one policy at a
time against its own critic (one-to-one). The attention kinds regenerate
every agent's action from its current policy and update all policies from a
single evaluation of the shared critic (one-to-all).

In the predator-prey scenario only the predator type trains; prey actions
come from the scripted flee policy or a loaded prey actor checkpoint.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import ndmath as nd
from . import nets
from .checkpoint import load_checkpoint, restore_into, save_checkpoint
from .envs import COOP_NAV, PREDATOR_PREY, ParticleWorld, ScenarioConfig, scripted_prey
from .ndmath import Adam, Tensor, backward, clip_grad_norm, no_grad

PREY_ACTOR_PREFIX = "prey_actor."


class NonFiniteLossError(RuntimeError):
    """Training produced a NaN/inf loss; carries batch diagnostics."""


class AlgoKind(enum.Enum):
    MADDPG = "maddpg"
    MATD3 = "matd3"
    SA_MADDPG = "sa-maddpg"
    SA_MATD3 = "sa-matd3"
    DSA_MADDPG = "dsa-maddpg"
    DSA_MATD3 = "dsa-matd3"

    @classmethod
    def parse(cls, name: str) -> "AlgoKind":
        try:
            return cls(name.strip().lower())
        except ValueError:
            options = ", ".join(k.value for k in cls)
            raise ValueError(f"unknown algorithm '{name}' (expected one of {options})")

    @property
    def attention_critic(self) -> bool:
        return self in (AlgoKind.SA_MADDPG, AlgoKind.SA_MATD3,
                        AlgoKind.DSA_MADDPG, AlgoKind.DSA_MATD3)

    @property
    def attention_actor(self) -> bool:
        return self in (AlgoKind.DSA_MADDPG, AlgoKind.DSA_MATD3)

    @property
    def double_q(self) -> bool:
        return self in (AlgoKind.MATD3, AlgoKind.SA_MATD3, AlgoKind.DSA_MATD3)

    @property
    def delayed(self) -> bool:
        return self.double_q

    @property
    def smoothing(self) -> bool:
        return self.double_q

    @property
    def one_to_all(self) -> bool:
        return self.attention_critic

    @property
    def total_q(self) -> bool:
        return self.attention_critic


@dataclass
class TrainConfig:
    """Hyperparameters; defaults follow the published training setup."""

    gamma: float = 0.95
    tau: float = 0.01
    batch_size: int = 512
    train_start_episodes: int = 10_000
    train_frequency: int = 5
    delay_frequency: int = 2
    action_noise_std: float = 0.002   # tiny by design; override via config if needed
    critic_noise_std: float = 0.001
    mlp_lr: float = 1e-3
    attention_lr: float = 1e-4
    grad_clip: float = 1.0
    action_low: float = -1.0
    action_high: float = 1.0
    replay_capacity: int = 100_000
    hidden_dim: int = 64
    hidden_layers: int = 3
    attention_heads: int = 4
    attention_blocks: int = 2
    dtype: str = "float32"

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must be in [0, 1], got {self.gamma}")
        if not 0.0 < self.tau <= 1.0:
            raise ValueError(f"tau must be in (0, 1], got {self.tau}")
        for name in ("mlp_lr", "attention_lr", "grad_clip", "batch_size",
                     "train_frequency", "delay_frequency", "replay_capacity"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.action_noise_std < 0 or self.critic_noise_std < 0:
            raise ValueError("noise standard deviations must be non-negative")
        if self.action_low >= self.action_high:
            raise ValueError("action_low must be below action_high")

    @property
    def np_dtype(self):
        return {"float32": np.float32, "float64": np.float64}[self.dtype]


@dataclass
class Transition:
    """One environment step for the trainable agents."""

    obs: list[np.ndarray]
    act: np.ndarray            # (n, act_dim)
    rew: np.ndarray            # (n_types,)
    next_obs: list[np.ndarray]
    done: bool


class ReplayBuffer:
    """Fixed-capacity FIFO ring with uniform, within-batch-unique sampling."""

    def __init__(self, capacity: int, obs_dims: Sequence[int], act_dim: int,
                 n_types: int, rng: np.random.Generator):
        self.capacity = capacity
        self.rng = rng
        self.obs = [np.zeros((capacity, d), dtype=np.float32) for d in obs_dims]
        self.next_obs = [np.zeros((capacity, d), dtype=np.float32) for d in obs_dims]
        self.act = np.zeros((capacity, len(obs_dims), act_dim), dtype=np.float32)
        self.rew = np.zeros((capacity, n_types), dtype=np.float32)
        self.done = np.zeros(capacity, dtype=np.float32)
        self.size = 0
        self.cursor = 0

    def __len__(self) -> int:
        return self.size

    def push(self, tr: Transition) -> None:
        i = self.cursor
        for k, o in enumerate(tr.obs):
            self.obs[k][i] = o
        for k, o in enumerate(tr.next_obs):
            self.next_obs[k][i] = o
        self.act[i] = tr.act
        self.rew[i] = tr.rew
        self.done[i] = float(tr.done)
        self.cursor = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size: int) -> "Batch":
        if batch_size > self.size:
            raise ValueError(
                f"cannot sample {batch_size} transitions from a buffer of {self.size}")
        idx = self.rng.choice(self.size, size=batch_size, replace=False)
        return Batch(
            obs=[o[idx] for o in self.obs],
            act=self.act[idx],
            rew=self.rew[idx],
            next_obs=[o[idx] for o in self.next_obs],
            done=self.done[idx],
        )


@dataclass
class Batch:
    obs: list[np.ndarray]
    act: np.ndarray
    rew: np.ndarray
    next_obs: list[np.ndarray]
    done: np.ndarray


def soft_update(target_params: Sequence[Tensor], main_params: Sequence[Tensor],
                tau: float) -> None:
    """Move target parameters toward main ones: t <- tau*m + (1-tau)*t."""
    if not 0.0 < tau <= 1.0:
        raise ValueError(f"tau must be in (0, 1], got {tau}")
    for t, m in zip(target_params, main_params):
        if t.data.shape != m.data.shape:
            raise nd.ShapeError(
                f"target/main shapes disagree: {t.data.shape} vs {m.data.shape}")
        t.data *= 1.0 - tau
        t.data += tau * m.data


def explore_action(actor, obs: np.ndarray, noise_std: float,
                   bounds: tuple[float, float], rng: np.random.Generator) -> np.ndarray:
    """Deterministic policy output plus clipped Gaussian exploration noise."""
    action = actor.act(obs)
    if noise_std > 0:
        action = action + rng.normal(0.0, noise_std, size=action.shape)
    return np.clip(action, bounds[0], bounds[1])


def smoothed_target_actions(target_actors, next_obs: Sequence[np.ndarray],
                            noise_std: float, bounds: tuple[float, float],
                            rng: np.random.Generator) -> np.ndarray:
    """Target-policy actions with smoothing noise, stacked to (B, n, act)."""
    cols = [actor.act(o) for actor, o in zip(target_actors, next_obs)]
    acts = np.stack(cols, axis=1)
    if noise_std > 0:
        acts = acts + rng.normal(0.0, noise_std, size=acts.shape)
    return np.clip(acts, bounds[0], bounds[1])


def train_step_scheduler(episode: int, cfg: TrainConfig,
                         kind: AlgoKind) -> tuple[bool, bool]:
    """(do_critic_update, do_policy_update) for a just-finished episode index."""
    start, freq = cfg.train_start_episodes, cfg.train_frequency
    do_critic = episode >= start and episode % freq == 0
    if not do_critic:
        return False, False
    if not kind.delayed:
        return True, True
    first = ((start + freq - 1) // freq) * freq
    ordinal = (episode - first) // freq + 1   # 1-based critic-update count
    return True, ordinal % cfg.delay_frequency == 0


class Trainer:
    """One algorithm bound to one scenario; owns networks, buffer, and RNGs.

    The global seed fans out into named streams (init, env, exploration,
    critic smoothing, buffer sampling) so individual components replay
    identically across runs with the same seed.
    """

    def __init__(self, scenario: ScenarioConfig, kind: AlgoKind,
                 cfg: TrainConfig | None = None, seed: int = 0,
                 prey_policy: str | object = "scripted"):
        self.kind = kind
        self.cfg = cfg or TrainConfig()
        self.scenario = scenario
        self.seed = seed

        init_ss, env_ss, explore_ss, smooth_ss, buffer_ss = \
            np.random.SeedSequence(seed).spawn(5)
        self.init_rng = np.random.default_rng(init_ss)
        self.explore_rng = np.random.default_rng(explore_ss)
        self.smooth_rng = np.random.default_rng(smooth_ss)

        self.env = ParticleWorld(scenario, seed=env_ss)
        if scenario.kind == COOP_NAV:
            self.n = scenario.n_agents
        else:
            self.n = scenario.n_predators
        self.obs_dims = self.env.obs_dims[: self.n]
        self.act_dim = 2
        self.reward_type = 0  # trainable agents are always type 0

        self.buffer = ReplayBuffer(self.cfg.replay_capacity, self.obs_dims,
                                   self.act_dim, self.env.n_types,
                                   np.random.default_rng(buffer_ss))
        self._build_networks()
        self._setup_prey(prey_policy)
        self.episodes_seen = 0
        self.critic_updates = 0
        self.policy_updates = 0

    # -- construction ----------------------------------------------------------

    def _build_networks(self) -> None:
        cfg, kind, rng = self.cfg, self.kind, self.init_rng
        dt = cfg.np_dtype
        n_critics = 2 if kind.double_q else 1

        if kind.attention_actor:
            if len(set(self.obs_dims)) != 1:
                raise ValueError("centralized attention actor needs one agent type")
            self.attention_actor = nets.AttentionActor(
                self.obs_dims[0], self.act_dim, rng, hidden_dim=cfg.hidden_dim,
                heads=cfg.attention_heads, blocks=cfg.attention_blocks, dtype=dt)
            self.target_attention_actor = nets.clone(self.attention_actor)
            self.actor_optims = [Adam(nets.parameters(self.attention_actor),
                                      cfg.attention_lr)]
            self.actors = None
            self.target_actors = None
        else:
            self.attention_actor = None
            self.target_attention_actor = None
            self.actors = [nets.MlpActor(d, self.act_dim, rng,
                                         hidden_dim=cfg.hidden_dim,
                                         hidden_layers=cfg.hidden_layers, dtype=dt)
                           for d in self.obs_dims]
            self.target_actors = [nets.clone(a) for a in self.actors]
            self.actor_optims = [Adam(nets.parameters(a), cfg.mlp_lr)
                                 for a in self.actors]

        if kind.attention_critic:
            if len(set(self.obs_dims)) != 1:
                raise ValueError("shared attention critic needs one agent type")
            bank = [nets.CriticNet(self.obs_dims[0], self.act_dim, rng,
                                   hidden_dim=cfg.hidden_dim,
                                   heads=cfg.attention_heads,
                                   blocks=cfg.attention_blocks, dtype=dt)
                    for _ in range(n_critics)]
            self.critic_banks = [bank]
            self.critic_lr = cfg.attention_lr
        else:
            flat_dim = sum(self.obs_dims) + self.n * self.act_dim
            self.critic_banks = [
                [nets.MlpCritic(flat_dim, rng, hidden_dim=cfg.hidden_dim,
                                hidden_layers=cfg.hidden_layers, dtype=dt)
                 for _ in range(n_critics)]
                for _ in range(self.n)]
            self.critic_lr = cfg.mlp_lr
        self.target_critic_banks = [[nets.clone(c) for c in bank]
                                    for bank in self.critic_banks]
        self.critic_optims = [[Adam(nets.parameters(c), self.critic_lr)
                               for c in bank]
                              for bank in self.critic_banks]

    def _setup_prey(self, prey_policy) -> None:
        self.prey_actor = None
        if self.scenario.kind != PREDATOR_PREY:
            return
        if prey_policy == "scripted" or prey_policy is None:
            return
        if hasattr(prey_policy, "act"):
            self.prey_actor = prey_policy
            return
        _, tensors = load_checkpoint(prey_policy)
        prey_obs_dim = self.env.obs_dims[self.n]
        actor = nets.MlpActor(prey_obs_dim, self.act_dim, self.init_rng,
                              hidden_dim=self.cfg.hidden_dim,
                              hidden_layers=self.cfg.hidden_layers)
        restore_into(actor, tensors, prefix=PREY_ACTOR_PREFIX)
        self.prey_actor = actor

    # -- rollout ---------------------------------------------------------------

    def _trainable_actions(self, obs: list[np.ndarray], noise_std: float) -> np.ndarray:
        bounds = (self.cfg.action_low, self.cfg.action_high)
        if self.attention_actor is not None:
            joint = self.attention_actor.act(
                np.stack(obs[: self.n]).astype(self.cfg.np_dtype))
            if noise_std > 0:
                joint = joint + self.explore_rng.normal(0.0, noise_std, joint.shape)
            return np.clip(joint, bounds[0], bounds[1])
        return np.stack([
            explore_action(actor, o.astype(self.cfg.np_dtype), noise_std, bounds,
                           self.explore_rng)
            for actor, o in zip(self.actors, obs[: self.n])])

    def _prey_actions(self, env: ParticleWorld, obs: list[np.ndarray]) -> np.ndarray:
        cfg = self.scenario
        rows = []
        for j in range(cfg.n_predators, cfg.n_agents):
            if self.prey_actor is not None:
                rows.append(np.clip(self.prey_actor.act(
                    obs[j].astype(np.float32)), -1.0, 1.0))
            else:
                rows.append(scripted_prey(env, j))
        return np.stack(rows)

    def run_episode(self, explore: bool = True, store: bool | None = None,
                    env: ParticleWorld | None = None) -> np.ndarray:
        """Roll one full episode; returns the per-type summed reward.

        Pass a dedicated ``env`` for evaluation so the training environment's
        RNG stream is left untouched.
        """
        if env is None:
            env = self.env
        if store is None:
            store = explore
        noise = self.cfg.action_noise_std if explore else 0.0
        obs = env.reset()
        totals = np.zeros(env.n_types)
        for _ in range(self.scenario.episode_length):
            acts = self._trainable_actions(obs, noise)
            if self.scenario.kind == PREDATOR_PREY:
                full = np.concatenate([acts, self._prey_actions(env, obs)], axis=0)
            else:
                full = acts
            next_obs, rewards, done, _ = env.step(full)
            if store:
                self.buffer.push(Transition(
                    obs=obs[: self.n], act=acts, rew=rewards,
                    next_obs=next_obs[: self.n], done=done))
            totals += rewards
            obs = next_obs
        return totals

    # -- updates ---------------------------------------------------------------

    def _stack_obs(self, cols: list[np.ndarray]) -> np.ndarray:
        return np.stack(cols, axis=1).astype(self.cfg.np_dtype)

    def _target_actions(self, batch: Batch) -> np.ndarray:
        noise = self.cfg.critic_noise_std if self.kind.smoothing else 0.0
        bounds = (self.cfg.action_low, self.cfg.action_high)
        with no_grad():
            if self.target_attention_actor is not None:
                acts = self.target_attention_actor.forward(
                    Tensor(self._stack_obs(batch.next_obs))).data
                if noise > 0:
                    acts = acts + self.smooth_rng.normal(0.0, noise, acts.shape)
                return np.clip(acts, bounds[0], bounds[1])
            return smoothed_target_actions(self.target_actors, batch.next_obs,
                                           noise, bounds, self.smooth_rng)

    def compute_target_y(self, batch: Batch) -> np.ndarray | list[np.ndarray]:
        """Bellman targets, detached from every main-network parameter.

        Attention kinds return one (B,) array of total-Q targets; baseline
        kinds return one (B,) array per agent.
        """
        cfg = self.cfg
        target_acts = self._target_actions(batch)
        r = batch.rew[:, self.reward_type].astype(np.float64)
        cont = cfg.gamma * (1.0 - batch.done.astype(np.float64))

        with no_grad():
            if self.kind.attention_critic:
                obs_t = Tensor(self._stack_obs(batch.next_obs))
                act_t = Tensor(target_acts.astype(cfg.np_dtype))
                totals = [nets.total_q(c.forward(obs_t, act_t)).data
                          for c in self.target_critic_banks[0]]
                q = totals[0] if len(totals) == 1 else np.minimum(*totals)
                return (r + cont * q).astype(cfg.np_dtype)

            flat = np.concatenate(
                [o for o in batch.next_obs]
                + [target_acts.reshape(len(r), -1)], axis=1).astype(cfg.np_dtype)
            flat_t = Tensor(flat)
            ys = []
            for bank in self.target_critic_banks:
                qs = [c.forward(flat_t).data for c in bank]
                q = qs[0] if len(qs) == 1 else np.minimum(*qs)
                ys.append((r + cont * q).astype(cfg.np_dtype))
            return ys

    def critic_update(self, batch: Batch, y=None) -> float:
        """One Adam step on every critic toward the Bellman targets."""
        cfg = self.cfg
        if y is None:
            y = self.compute_target_y(batch)
        losses = []

        if self.kind.attention_critic:
            obs_t = Tensor(self._stack_obs(batch.obs))
            act_t = Tensor(batch.act.astype(cfg.np_dtype))
            y_t = Tensor(np.asarray(y), dtype=cfg.np_dtype)
            for critic, opt in zip(self.critic_banks[0], self.critic_optims[0]):
                diff = nets.total_q(critic.forward(obs_t, act_t)) - y_t
                loss = nd.tmean(nd.mul(diff, diff))
                losses.append(self._step_net(loss, critic, opt))
        else:
            flat = np.concatenate(
                list(batch.obs) + [batch.act.reshape(batch.act.shape[0], -1)],
                axis=1).astype(cfg.np_dtype)
            flat_t = Tensor(flat)
            for i, (bank, opts) in enumerate(zip(self.critic_banks,
                                                 self.critic_optims)):
                y_t = Tensor(np.asarray(y[i]), dtype=cfg.np_dtype)
                for critic, opt in zip(bank, opts):
                    diff = critic.forward(flat_t) - y_t
                    loss = nd.tmean(nd.mul(diff, diff))
                    losses.append(self._step_net(loss, critic, opt))

        self.critic_updates += 1
        return float(np.mean(losses))

    def _step_net(self, loss: Tensor, net, opt: Adam) -> float:
        value = loss.item()
        if not np.isfinite(value):
            raise NonFiniteLossError(
                f"non-finite critic loss at update {self.critic_updates}: {value}")
        params = nets.parameters(net)
        backward(loss, params=params)
        clip_grad_norm([p.grad for p in params], self.cfg.grad_clip)
        opt.step()
        return value

    def policy_update(self, batch: Batch, mode: str | None = None) -> list[float]:
        """Update policies against critic #1; returns per-actor gradient norms.

        ``mode`` defaults to the kind's native update style; it exists so the
        two styles can be compared on an identical trainer.
        """
        if mode is None:
            mode = "one_to_all" if self.kind.one_to_all else "one_to_one"
        if mode == "one_to_all":
            norms = self._policy_update_one_to_all(batch)
        elif mode == "one_to_one":
            norms = self._policy_update_one_to_one(batch)
        else:
            raise ValueError(f"unknown policy update mode '{mode}'")
        self.policy_updates += 1
        self._soft_update_all()
        return norms

    def _actor_params(self) -> list[list[Tensor]]:
        if self.attention_actor is not None:
            return [nets.parameters(self.attention_actor)]
        return [nets.parameters(a) for a in self.actors]

    def _policy_update_one_to_all(self, batch: Batch) -> list[float]:
        cfg = self.cfg
        obs_t = Tensor(self._stack_obs(batch.obs))
        if self.attention_actor is not None:
            fresh = self.attention_actor.forward(obs_t)
        else:
            cols = [actor.forward(Tensor(o.astype(cfg.np_dtype)))
                    for actor, o in zip(self.actors, batch.obs)]
            fresh = nd.stack(cols, axis=1)

        critic = self.critic_banks[0][0]
        if self.kind.attention_critic:
            q = nets.total_q(critic.forward(obs_t, fresh))
        else:
            flat = nd.concat([Tensor(o.astype(cfg.np_dtype)) for o in batch.obs]
                             + [nd.reshape(fresh, (fresh.shape[0], -1))], axis=-1)
            q = critic.forward(flat)
        loss = -nd.tmean(q)
        if not np.isfinite(loss.item()):
            raise NonFiniteLossError(f"non-finite policy loss: {loss.item()}")

        per_actor = self._actor_params()
        backward(loss, params=[p for ps in per_actor for p in ps])
        norms = []
        for params, opt in zip(per_actor, self.actor_optims):
            norms.append(clip_grad_norm([p.grad for p in params], cfg.grad_clip))
            opt.step()
        return norms

    def _policy_update_one_to_one(self, batch: Batch) -> list[float]:
        return [self.policy_update_agent(i, batch) for i in range(self.n)]

    def policy_update_agent(self, i: int, batch: Batch) -> float:
        """One-to-one update for agent ``i`` alone.

        Only agent ``i``'s action is regenerated from its current policy;
        every other action comes straight from the buffer, and only actor
        ``i`` takes an optimizer step. Returns the pre-clip gradient norm.
        """
        cfg = self.cfg
        if self.attention_actor is not None:
            raise ValueError("one-to-one updates need per-agent actors")
        actor, opt = self.actors[i], self.actor_optims[i]
        fresh_i = actor.forward(Tensor(batch.obs[i].astype(cfg.np_dtype)))
        cols = [fresh_i if j == i else Tensor(batch.act[:, j].astype(cfg.np_dtype))
                for j in range(self.n)]
        if self.kind.attention_critic:
            obs_t = Tensor(self._stack_obs(batch.obs))
            q = nd.select(self.critic_banks[0][0].forward(
                obs_t, nd.stack(cols, axis=1)), i, axis=-1)
        else:
            flat = nd.concat([Tensor(o.astype(cfg.np_dtype)) for o in batch.obs]
                             + cols, axis=-1)
            q = self.critic_banks[i][0].forward(flat)
        loss = -nd.tmean(q)
        if not np.isfinite(loss.item()):
            raise NonFiniteLossError(f"non-finite policy loss: {loss.item()}")
        params = nets.parameters(actor)
        backward(loss, params=params)
        norm = clip_grad_norm([p.grad for p in params], cfg.grad_clip)
        opt.step()
        return norm

    def _soft_update_all(self) -> None:
        tau = self.cfg.tau
        if self.attention_actor is not None:
            soft_update(nets.parameters(self.target_attention_actor),
                        nets.parameters(self.attention_actor), tau)
        else:
            for tgt, main in zip(self.target_actors, self.actors):
                soft_update(nets.parameters(tgt), nets.parameters(main), tau)
        for tbank, bank in zip(self.target_critic_banks, self.critic_banks):
            for tc, c in zip(tbank, bank):
                soft_update(nets.parameters(tc), nets.parameters(c), tau)

    def update_from_batch(self, batch: Batch, do_policy: bool) -> dict:
        stats = {"critic_loss": self.critic_update(batch)}
        if do_policy:
            norms = self.policy_update(batch)
            stats["actor_grad_norm"] = float(np.mean(norms))
        return stats

    def train_episode(self) -> tuple[np.ndarray, dict]:
        """Roll one episode, then run whatever updates the schedule calls for."""
        rewards = self.run_episode(explore=True)
        episode = self.episodes_seen
        self.episodes_seen += 1
        do_critic, do_policy = train_step_scheduler(episode, self.cfg, self.kind)
        stats: dict = {}
        if do_critic and len(self.buffer) >= self.cfg.batch_size:
            batch = self.buffer.sample(self.cfg.batch_size)
            stats = self.update_from_batch(batch, do_policy)
        return rewards, stats

    # -- persistence -----------------------------------------------------------

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        out: list[tuple[str, Tensor]] = []
        if self.attention_actor is not None:
            out += self.attention_actor.named_parameters("attention_actor.")
        else:
            for i, actor in enumerate(self.actors):
                out += actor.named_parameters(f"actor.{i}.")
        if self.kind.attention_critic:
            for j, critic in enumerate(self.critic_banks[0]):
                out += critic.named_parameters(f"shared_critic.{j + 1}.")
        else:
            for i, bank in enumerate(self.critic_banks):
                for j, critic in enumerate(bank):
                    out += critic.named_parameters(f"agent_critic.{i}.{j + 1}.")
        return out

    def save(self, directory, episode: int):
        return save_checkpoint(directory, self.named_parameters(),
                               algo=self.kind.value, scenario=self.scenario.kind,
                               agents=self.scenario.n_agents, episode=episode)

    def restore(self, directory) -> int:
        manifest, tensors = load_checkpoint(directory)
        if manifest.scenario != self.scenario.kind:
            raise ValueError(
                f"checkpoint scenario '{manifest.scenario}' does not match "
                f"'{self.scenario.kind}'")
        if manifest.agents != self.scenario.n_agents:
            raise ValueError(
                f"checkpoint has {manifest.agents} agents, scenario has "
                f"{self.scenario.n_agents}")
        for name, param in self.named_parameters():
            if name not in tensors:
                raise ValueError(f"checkpoint is missing tensor '{name}'")
            param.data[...] = tensors[name].astype(param.data.dtype)
        self._sync_targets()
        return manifest.episode

    def _sync_targets(self) -> None:
        if self.attention_actor is not None:
            nets.copy_params(self.target_attention_actor, self.attention_actor)
        else:
            for tgt, main in zip(self.target_actors, self.actors):
                nets.copy_params(tgt, main)
        for tbank, bank in zip(self.target_critic_banks, self.critic_banks):
            for tc, c in zip(tbank, bank):
                nets.copy_params(tc, c)
