"""Trainer mechanics: buffer, scheduler, targets, updates, baseline oracle."""

import numpy as np
import pytest

from samarl import ndmath as nd
from samarl import nets
from samarl.algo import (
    AlgoKind,
    Batch,
    NonFiniteLossError,
    ReplayBuffer,
    TrainConfig,
    Trainer,
    Transition,
    explore_action,
    smoothed_target_actions,
    soft_update,
    train_step_scheduler,
)
from samarl.envs import ScenarioConfig
from samarl.ndmath import Tensor


def small_cfg(**overrides):
    defaults = dict(hidden_dim=8, attention_heads=2, attention_blocks=2,
                    batch_size=16, replay_capacity=500, train_start_episodes=0,
                    train_frequency=1)
    defaults.update(overrides)
    return TrainConfig(**defaults)


def fill_buffer(trainer, count, seed=0):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        trainer.buffer.push(Transition(
            obs=[rng.normal(size=d).astype(np.float32) for d in trainer.obs_dims],
            act=rng.uniform(-1, 1, size=(trainer.n, 2)).astype(np.float32),
            rew=rng.normal(size=trainer.env.n_types).astype(np.float32),
            next_obs=[rng.normal(size=d).astype(np.float32) for d in trainer.obs_dims],
            done=bool(rng.random() < 0.2),
        ))


def snapshot(named):
    return {name: t.data.copy() for name, t in named}


class ConstantQCritic:
    """Stub: fixed per-agent Q values regardless of input."""

    def __init__(self, per_agent_values):
        self.values = np.asarray(per_agent_values, dtype=np.float32)

    def forward(self, obs_t, act_t):
        return Tensor(np.tile(self.values, (obs_t.shape[0], 1)))

    def named_parameters(self, prefix=""):
        return []


class ActionSumCritic:
    """Stub: Q_i = sum of agent i's action components (differentiable)."""

    def forward(self, obs_t, act_t):
        return nd.tsum(act_t, axis=-1)

    def named_parameters(self, prefix=""):
        return []


class TestAlgoKind:
    def test_switch_matrix(self):
        k = AlgoKind
        assert not k.MADDPG.double_q and not k.MADDPG.attention_critic
        assert k.MATD3.double_q and k.MATD3.delayed and k.MATD3.smoothing
        assert not k.MATD3.attention_critic
        assert k.SA_MADDPG.attention_critic and k.SA_MADDPG.one_to_all
        assert not k.SA_MADDPG.double_q and not k.SA_MADDPG.attention_actor
        assert k.SA_MATD3.attention_critic and k.SA_MATD3.double_q
        assert k.DSA_MADDPG.attention_actor and not k.DSA_MADDPG.double_q
        assert k.DSA_MATD3.attention_actor and k.DSA_MATD3.double_q
        for kind in k:
            assert kind.one_to_all == kind.attention_critic == kind.total_q

    def test_parse(self):
        assert AlgoKind.parse("SA-MATD3") is AlgoKind.SA_MATD3
        with pytest.raises(ValueError, match="unknown algorithm"):
            AlgoKind.parse("qmix")


class TestTrainConfig:
    def test_defaults_follow_published_setup(self):
        cfg = TrainConfig()
        assert cfg.gamma == 0.95
        assert cfg.tau == 0.01
        assert cfg.batch_size == 512
        assert cfg.train_start_episodes == 10_000
        assert cfg.train_frequency == 5
        assert cfg.action_noise_std == 0.002
        assert cfg.critic_noise_std == 0.001
        assert cfg.mlp_lr == 1e-3
        assert cfg.attention_lr == 1e-4
        assert cfg.grad_clip == 1.0
        assert cfg.replay_capacity == 100_000
        assert cfg.hidden_dim == 64
        assert cfg.hidden_layers == 3
        assert cfg.attention_heads == 4

    @pytest.mark.parametrize("bad", [dict(gamma=1.5), dict(tau=0.0),
                                     dict(mlp_lr=-1.0), dict(action_noise_std=-0.1),
                                     dict(action_low=1.0, action_high=-1.0)])
    def test_validation(self, bad):
        with pytest.raises(ValueError):
            TrainConfig(**bad)


class TestReplayBuffer:
    def _buffer(self, capacity=5, seed=0):
        return ReplayBuffer(capacity, obs_dims=[3], act_dim=2, n_types=1,
                            rng=np.random.default_rng(seed))

    def _tr(self, tag):
        return Transition(obs=[np.full(3, tag, dtype=np.float32)],
                          act=np.zeros((1, 2), dtype=np.float32),
                          rew=np.array([tag], dtype=np.float32),
                          next_obs=[np.zeros(3, dtype=np.float32)],
                          done=False)

    def test_fifo_eviction(self):
        buf = self._buffer(capacity=5)
        for tag in range(6):
            buf.push(self._tr(float(tag)))
        assert len(buf) == 5
        stored = set(buf.rew[:, 0].tolist())
        assert 0.0 not in stored  # oldest evicted
        assert stored == {1.0, 2.0, 3.0, 4.0, 5.0}

    def test_sample_shapes_and_bounds(self):
        buf = self._buffer(capacity=10)
        for tag in range(7):
            buf.push(self._tr(float(tag)))
        batch = buf.sample(4)
        assert batch.obs[0].shape == (4, 3)
        assert batch.act.shape == (4, 1, 2)
        assert set(batch.rew[:, 0].tolist()) <= {float(t) for t in range(7)}

    def test_no_duplicates_within_batch(self):
        buf = self._buffer(capacity=20)
        for tag in range(20):
            buf.push(self._tr(float(tag)))
        for _ in range(50):
            batch = buf.sample(10)
            tags = batch.rew[:, 0].tolist()
            assert len(set(tags)) == len(tags)

    def test_underfilled_sampling_rejected(self):
        buf = self._buffer()
        buf.push(self._tr(1.0))
        with pytest.raises(ValueError, match="cannot sample"):
            buf.sample(2)

    def test_uniformity_chi_square(self):
        m, k, trials = 50, 10, 2000
        buf = self._buffer(capacity=m, seed=123)
        for tag in range(m):
            buf.push(self._tr(float(tag)))
        counts = np.zeros(m)
        for _ in range(trials):
            batch = buf.sample(k)
            for tag in batch.rew[:, 0]:
                counts[int(tag)] += 1
        p = k / m
        expected = trials * p
        sigma = np.sqrt(trials * p * (1 - p))
        z = (counts - expected) / sigma
        assert np.max(np.abs(z)) < 3.0
        chi2 = float(np.sum((counts - expected) ** 2 / (sigma ** 2)))
        # chi-square 0.999 quantile at 49 dof is ~85.35
        assert chi2 < 85.35


class TestSoftUpdate:
    def test_published_rate(self):
        tgt = [Tensor(np.zeros(3))]
        main = [Tensor(np.ones(3))]
        soft_update(tgt, main, tau=0.01)
        assert np.allclose(tgt[0].data, 0.01)

    def test_hard_copy(self):
        tgt = [Tensor(np.zeros(3))]
        main = [Tensor(np.full(3, 7.0))]
        soft_update(tgt, main, tau=1.0)
        assert np.array_equal(tgt[0].data, main[0].data)

    def test_fixed_point(self):
        vals = np.array([1.0, -2.0])
        tgt = [Tensor(vals.copy())]
        main = [Tensor(vals.copy())]
        soft_update(tgt, main, tau=0.3)
        assert np.allclose(tgt[0].data, vals)

    def test_shape_mismatch(self):
        with pytest.raises(nd.ShapeError):
            soft_update([Tensor(np.zeros(3))], [Tensor(np.zeros(4))], 0.5)


class TestScheduler:
    def test_no_update_before_start(self):
        cfg = TrainConfig()
        assert train_step_scheduler(9_999, cfg, AlgoKind.SA_MATD3) == (False, False)

    def test_first_update_at_start(self):
        cfg = TrainConfig()
        assert train_step_scheduler(10_000, cfg, AlgoKind.SA_MATD3) == (True, False)
        assert train_step_scheduler(10_005, cfg, AlgoKind.SA_MATD3) == (True, True)

    def test_delay_halves_policy_updates(self):
        cfg = TrainConfig()
        critic = policy = 0
        for ep in range(100_000):
            c, p = train_step_scheduler(ep, cfg, AlgoKind.SA_MATD3)
            critic += c
            policy += p
        assert critic == 18_000
        assert policy == 9_000  # floor(K / delay)

    def test_non_delayed_kind_updates_policy_every_time(self):
        cfg = TrainConfig()
        for ep in range(10_000, 11_000):
            c, p = train_step_scheduler(ep, cfg, AlgoKind.MADDPG)
            assert c == p


class TestExploration:
    def _actor(self):
        return nets.MlpActor(4, 2, np.random.default_rng(0), hidden_dim=8)

    def test_zero_noise_is_exact(self):
        actor = self._actor()
        obs = np.ones(4, dtype=np.float32)
        rng = np.random.default_rng(1)
        out = explore_action(actor, obs, 0.0, (-1, 1), rng)
        assert np.array_equal(out, actor.act(obs))

    def test_always_within_bounds(self):
        actor = self._actor()
        rng = np.random.default_rng(2)
        for _ in range(50):
            out = explore_action(actor, rng.normal(size=4).astype(np.float32),
                                 5.0, (-1, 1), rng)
            assert np.all(out >= -1) and np.all(out <= 1)

    def test_noise_std_matches_request(self):
        actor = self._actor()
        obs = np.tile(0.1 * np.ones(4, dtype=np.float32), (50_000, 1))
        clean = actor.act(obs)
        rng = np.random.default_rng(3)
        noisy = explore_action(actor, obs, 0.002, (-1, 1), rng)
        measured = float(np.std(noisy - clean))
        assert abs(measured - 0.002) / 0.002 < 0.05

    def test_smoothed_targets_zero_noise(self):
        actors = [self._actor(), self._actor()]
        obs = [np.ones((6, 4), dtype=np.float32)] * 2
        rng = np.random.default_rng(4)
        acts = smoothed_target_actions(actors, obs, 0.0, (-1, 1), rng)
        assert acts.shape == (6, 2, 2)
        for i, actor in enumerate(actors):
            assert np.array_equal(acts[:, i], actor.act(obs[i]))

    def test_smoothed_targets_noise_std(self):
        actors = [self._actor()]
        obs = [np.tile(0.1 * np.ones(4, dtype=np.float32), (100_000, 1))]
        clean = actors[0].act(obs[0])
        rng = np.random.default_rng(5)
        acts = smoothed_target_actions(actors, obs, 0.001, (-1, 1), rng)
        measured = float(np.std(acts[:, 0] - clean))
        assert abs(measured - 0.001) / 0.001 < 0.05


def make_trainer(kind=AlgoKind.SA_MATD3, n=2, seed=0, scenario="coop_nav", **cfg_over):
    if scenario == "coop_nav":
        scen = ScenarioConfig.coop_nav(n)
    else:
        scen = ScenarioConfig.predator_prey(n)
    return Trainer(scen, kind, small_cfg(**cfg_over), seed=seed)


def manual_batch(trainer, batch_size=8, seed=11, reward=None, done=None):
    rng = np.random.default_rng(seed)
    rew = rng.normal(size=(batch_size, trainer.env.n_types)).astype(np.float32)
    if reward is not None:
        rew[:] = reward
    d = np.zeros(batch_size, dtype=np.float32)
    if done is not None:
        d[:] = done
    return Batch(
        obs=[rng.normal(size=(batch_size, dd)).astype(np.float32)
             for dd in trainer.obs_dims],
        act=rng.uniform(-1, 1, size=(batch_size, trainer.n, 2)).astype(np.float32),
        rew=rew,
        next_obs=[rng.normal(size=(batch_size, dd)).astype(np.float32)
                  for dd in trainer.obs_dims],
        done=d,
    )


class TestComputeTargetY:
    def test_arithmetic_with_stub_critics(self):
        trainer = make_trainer(AlgoKind.SA_MATD3)
        trainer.target_critic_banks = [[ConstantQCritic([1.5, 0.5]),   # total 2.0
                                        ConstantQCritic([2.0, 3.0])]]  # total 5.0
        batch = manual_batch(trainer, reward=1.0, done=0.0)
        y = trainer.compute_target_y(batch)
        assert np.allclose(y, 1.0 + 0.95 * 2.0)

    def test_terminal_ignores_q(self):
        trainer = make_trainer(AlgoKind.SA_MATD3)
        trainer.target_critic_banks = [[ConstantQCritic([100.0, 100.0]),
                                        ConstantQCritic([100.0, 100.0])]]
        batch = manual_batch(trainer, reward=-3.0, done=1.0)
        y = trainer.compute_target_y(batch)
        assert np.allclose(y, -3.0)

    def test_double_q_dominance(self):
        trainer = make_trainer(AlgoKind.SA_MATD3, critic_noise_std=0.0)
        batch = manual_batch(trainer)
        y = np.asarray(trainer.compute_target_y(batch))
        target_acts = trainer._target_actions(batch)
        r = batch.rew[:, 0].astype(np.float64)
        cont = trainer.cfg.gamma * (1.0 - batch.done.astype(np.float64))
        with nd.no_grad():
            obs_t = Tensor(trainer._stack_obs(batch.next_obs))
            act_t = Tensor(target_acts.astype(np.float32))
            for critic in trainer.target_critic_banks[0]:
                y_single = r + cont * nets.total_q(critic.forward(obs_t, act_t)).data
                assert np.all(y <= y_single + 1e-6)

    def test_targets_are_detached_numpy(self):
        trainer = make_trainer(AlgoKind.SA_MATD3)
        y = trainer.compute_target_y(manual_batch(trainer))
        assert isinstance(y, np.ndarray)

    def test_baseline_returns_per_agent_targets(self):
        trainer = make_trainer(AlgoKind.MATD3)
        ys = trainer.compute_target_y(manual_batch(trainer))
        assert isinstance(ys, list) and len(ys) == trainer.n


class TestCriticUpdate:
    def test_exact_fit_leaves_parameters_unchanged(self):
        trainer = make_trainer(AlgoKind.SA_MATD3)
        batch = manual_batch(trainer)
        with nd.no_grad():
            obs_t = Tensor(trainer._stack_obs(batch.obs))
            act_t = Tensor(batch.act.astype(np.float32))
            y = nets.total_q(trainer.critic_banks[0][0].forward(obs_t, act_t)).data
        before = snapshot(trainer.critic_banks[0][0].named_parameters())
        # feed critic #1's own predictions back as the target
        trainer.critic_update(batch, y=y)
        after = snapshot(trainer.critic_banks[0][0].named_parameters())
        for name in before:
            assert np.allclose(before[name], after[name], atol=1e-7), name

    def test_both_critics_updated_in_one_call(self):
        trainer = make_trainer(AlgoKind.SA_MATD3)
        batch = manual_batch(trainer)
        before = [snapshot(c.named_parameters()) for c in trainer.critic_banks[0]]
        trainer.critic_update(batch)
        for critic, prev in zip(trainer.critic_banks[0], before):
            after = snapshot(critic.named_parameters())
            assert any(not np.array_equal(prev[k], after[k]) for k in prev)

    def test_scalar_mse_descent_oracle(self):
        # Q(w) = w, target 0, w = 2: gradient is 2w = 4, clipped to 1, so the
        # first Adam step moves w down by ~lr
        w = Tensor(np.array([2.0]), requires_grad=True, dtype=np.float64)
        opt = nd.Adam([w], lr=0.01)
        q = nd.tsum(w)
        loss = nd.tmean(nd.mul(q, q))
        nd.backward(loss, params=[w])
        assert w.grad[0] == pytest.approx(4.0)
        nd.clip_grad_norm([w.grad], 1.0)
        opt.step()
        assert w.data[0] == pytest.approx(2.0 - 0.01, abs=1e-6)

    def test_non_finite_loss_raises(self):
        trainer = make_trainer(AlgoKind.SA_MATD3)
        batch = manual_batch(trainer)
        with pytest.raises(NonFiniteLossError):
            trainer.critic_update(batch, y=np.full(8, np.nan, dtype=np.float32))


class TestPolicyUpdateOneToAll:
    def test_every_actor_gets_gradient_from_one_critic_pass(self):
        trainer = make_trainer(AlgoKind.SA_MATD3, n=3)
        norms = trainer.policy_update(manual_batch(trainer), mode="one_to_all")
        assert len(norms) == 3
        assert all(n > 0 for n in norms)

    def test_stub_critic_pushes_actions_toward_high_q(self):
        # ascending Q_i = sum(a_i) must move every action component up
        trainer = make_trainer(AlgoKind.SA_MATD3, n=2)
        trainer.critic_banks = [[ActionSumCritic(), ActionSumCritic()]]
        batch = manual_batch(trainer)
        obs = [Tensor(o) for o in batch.obs]
        before = [a.forward(o).data.copy() for a, o in zip(trainer.actors, obs)]
        for _ in range(30):
            trainer.policy_update(batch, mode="one_to_all")
        after = [a.forward(o).data for a, o in zip(trainer.actors, obs)]
        for b, a in zip(before, after):
            assert np.all(a.mean(axis=0) > b.mean(axis=0))

    def test_critic_parameters_frozen(self):
        trainer = make_trainer(AlgoKind.SA_MATD3)
        before = snapshot(trainer.critic_banks[0][0].named_parameters())
        trainer.policy_update(manual_batch(trainer), mode="one_to_all")
        after = snapshot(trainer.critic_banks[0][0].named_parameters())
        for name in before:
            assert np.array_equal(before[name], after[name])

    def test_every_adam_counter_advances_once(self):
        trainer = make_trainer(AlgoKind.SA_MATD3, n=3)
        trainer.policy_update(manual_batch(trainer))
        assert [opt.t for opt in trainer.actor_optims] == [1, 1, 1]


class TestPolicyUpdateOneToOne:
    def test_only_agent_i_steps(self):
        trainer = make_trainer(AlgoKind.MADDPG, n=2)
        batch = manual_batch(trainer)
        before = [snapshot(a.named_parameters()) for a in trainer.actors]
        trainer.policy_update_agent(0, batch)
        after = [snapshot(a.named_parameters()) for a in trainer.actors]
        assert any(not np.array_equal(before[0][k], after[0][k]) for k in before[0])
        for k in before[1]:
            assert np.array_equal(before[1][k], after[1][k])

    def test_stub_critic_moves_only_agent_i(self):
        trainer = make_trainer(AlgoKind.SA_MADDPG, n=2)
        trainer.critic_banks = [[ActionSumCritic()]]
        batch = manual_batch(trainer)
        obs = [Tensor(o) for o in batch.obs]
        before = [a.forward(o).data.copy() for a, o in zip(trainer.actors, obs)]
        for _ in range(30):
            trainer.policy_update_agent(0, batch)
        after = [a.forward(o).data for a, o in zip(trainer.actors, obs)]
        assert np.all(after[0].mean(axis=0) > before[0].mean(axis=0))
        assert np.array_equal(after[1], before[1])

    def test_single_agent_equivalence_of_modes(self):
        batches = []
        trainers = []
        for _ in range(2):
            trainer = make_trainer(AlgoKind.SA_MADDPG, n=1, seed=7)
            fill_buffer(trainer, 32, seed=9)
            batches.append(trainer.buffer.sample(16))
            trainers.append(trainer)
        trainers[0].policy_update(batches[0], mode="one_to_all")
        trainers[1].policy_update(batches[1], mode="one_to_one")
        p0 = snapshot(trainers[0].actors[0].named_parameters())
        p1 = snapshot(trainers[1].actors[0].named_parameters())
        for name in p0:
            assert np.allclose(p0[name], p1[name], atol=1e-12), name


class TestTrainerInvariants:
    def test_targets_trail_within_convex_hull(self):
        trainer = make_trainer(AlgoKind.SA_MATD3, n=2)
        mains = trainer.named_parameters()
        lo = {k: v.data.copy() for k, v in mains}
        hi = {k: v.data.copy() for k, v in mains}
        for step in range(5):
            batch = manual_batch(trainer, seed=100 + step)
            trainer.update_from_batch(batch, do_policy=True)
            for k, v in mains:
                np.minimum(lo[k], v.data, out=lo[k])
                np.maximum(hi[k], v.data, out=hi[k])
        target_named = []
        for j, critic in enumerate(trainer.target_critic_banks[0]):
            target_named += critic.named_parameters(f"shared_critic.{j + 1}.")
        for i, actor in enumerate(trainer.target_actors):
            target_named += actor.named_parameters(f"actor.{i}.")
        for k, v in target_named:
            assert np.all(v.data >= lo[k] - 1e-6), k
            assert np.all(v.data <= hi[k] + 1e-6), k

    def test_no_gradient_reaches_targets(self):
        trainer = make_trainer(AlgoKind.SA_MATD3)
        batch = manual_batch(trainer)
        trainer.critic_update(batch)
        for critic in trainer.target_critic_banks[0]:
            for _, p in critic.named_parameters():
                assert p.grad is None
        for actor in trainer.target_actors:
            for _, p in actor.named_parameters():
                assert p.grad is None

    def test_permutation_consistency_of_losses(self):
        # relabeling agents coherently (batch column + actor move together)
        # must leave both losses unchanged
        trainer = make_trainer(AlgoKind.SA_MATD3, n=3, critic_noise_std=0.0)
        batch = manual_batch(trainer)
        perm = [2, 0, 1]

        def critic_loss(order):
            with nd.no_grad():
                tacts = [trainer.target_actors[i].act(batch.next_obs[i])
                         for i in order]
                obs_next = Tensor(trainer._stack_obs(
                    [batch.next_obs[i] for i in order]))
                act_next = Tensor(np.stack(tacts, axis=1).astype(np.float32))
                totals = [nets.total_q(c.forward(obs_next, act_next)).data
                          for c in trainer.target_critic_banks[0]]
                y = batch.rew[:, 0] + trainer.cfg.gamma * (1 - batch.done) \
                    * np.minimum(*totals)
                obs_t = Tensor(trainer._stack_obs([batch.obs[i] for i in order]))
                act_t = Tensor(batch.act[:, order].astype(np.float32))
                q = nets.total_q(trainer.critic_banks[0][0].forward(obs_t, act_t)).data
            return float(np.mean((q - y) ** 2))

        def policy_loss(order):
            with nd.no_grad():
                fresh = [trainer.actors[i].forward(Tensor(batch.obs[i])).data
                         for i in order]
                obs_t = Tensor(trainer._stack_obs([batch.obs[i] for i in order]))
                act_t = Tensor(np.stack(fresh, axis=1))
                return -float(np.mean(
                    nets.total_q(trainer.critic_banks[0][0].forward(obs_t, act_t)).data))

        assert critic_loss([0, 1, 2]) == pytest.approx(critic_loss(perm), abs=1e-5)
        assert policy_loss([0, 1, 2]) == pytest.approx(policy_loss(perm), abs=1e-5)

    def test_predator_prey_trains_predators_only(self):
        trainer = make_trainer(AlgoKind.SA_MATD3, n=6, scenario="predator_prey")
        assert trainer.n == 4
        assert len(trainer.obs_dims) == 4
        rewards = trainer.run_episode(explore=True)
        assert rewards.shape == (2,)
        assert len(trainer.buffer) == 20

    def test_scheduler_gates_training(self):
        trainer = make_trainer(AlgoKind.SA_MATD3, train_start_episodes=50,
                               train_frequency=5)
        _, stats = trainer.train_episode()
        assert stats == {}  # episode 0 < start


class TestBaselineRecovery:
    """Hand-stepped MADDPG Eq.-style update vs the framework, to 1e-8."""

    B1, B2, EPS = 0.9, 0.999, 1e-8

    def _adam(self, p, g, lr, t=1):
        m = (1 - self.B1) * g
        v = (1 - self.B2) * g * g
        return p - lr * (m / (1 - self.B1 ** t)) / (
            np.sqrt(v / (1 - self.B2 ** t)) + self.EPS)

    def _clip(self, grads, max_norm=1.0):
        norm = np.sqrt(sum(float(np.sum(g * g)) for g in grads))
        if norm > max_norm:
            grads = [g * (max_norm / norm) for g in grads]
        return grads

    def test_two_agent_linear_network_oracle(self):
        cfg = small_cfg(dtype="float64", hidden_layers=0, batch_size=8,
                        critic_noise_std=0.0)
        trainer = Trainer(ScenarioConfig.coop_nav(2), AlgoKind.MADDPG, cfg, seed=5)
        fill_buffer(trainer, 16, seed=6)
        batch = trainer.buffer.sample(8)
        n, B = trainer.n, 8
        gamma = cfg.gamma

        wa = [a.out.w.data.copy() for a in trainer.actors]
        ba = [a.out.b.data.copy() for a in trainer.actors]
        wc = [bank[0].out.w.data.copy() for bank in trainer.critic_banks]
        bc = [bank[0].out.b.data.copy() for bank in trainer.critic_banks]

        # --- oracle: targets (target nets equal main nets before any update)
        tgt_acts = np.stack([np.tanh(batch.next_obs[j] @ wa[j] + ba[j])
                             for j in range(n)], axis=1)
        x_next = np.concatenate(list(batch.next_obs) + [tgt_acts.reshape(B, -1)],
                                axis=1)
        r = batch.rew[:, 0].astype(np.float64)
        cont = gamma * (1.0 - batch.done.astype(np.float64))
        ys = [(r + cont * (x_next @ wc[i] + bc[i]).reshape(-1)) for i in range(n)]

        # --- oracle: critic MSE step per agent
        x = np.concatenate(list(batch.obs) + [batch.act.reshape(B, -1)], axis=1)
        x64 = x.astype(np.float64)
        wc_new, bc_new = [], []
        for i in range(n):
            q = (x64 @ wc[i] + bc[i]).reshape(-1)
            dq = 2.0 * (q - ys[i]) / B
            dw = x64.T @ dq[:, None]
            db = np.array([dq.sum()])
            dw, db = self._clip([dw, db], cfg.grad_clip)
            wc_new.append(self._adam(wc[i], dw, cfg.mlp_lr))
            bc_new.append(self._adam(bc[i], db, cfg.mlp_lr))

        # --- oracle: one-to-one policy step per agent (uses updated critic)
        obs_offset = sum(trainer.obs_dims)
        wa_new, ba_new = [], []
        for i in range(n):
            o64 = batch.obs[i].astype(np.float64)
            a_i = np.tanh(o64 @ wa[i] + ba[i])
            col = slice(obs_offset + 2 * i, obs_offset + 2 * i + 2)
            dq = np.full(B, -1.0 / B)
            da = dq[:, None] * wc_new[i][col, 0][None, :]
            dz = da * (1.0 - a_i * a_i)
            dw = o64.T @ dz
            db = dz.sum(axis=0)
            dw, db = self._clip([dw, db], cfg.grad_clip)
            wa_new.append(self._adam(wa[i], dw, cfg.mlp_lr))
            ba_new.append(self._adam(ba[i], db, cfg.mlp_lr))

        # --- framework path
        trainer.update_from_batch(batch, do_policy=True)

        for i in range(n):
            assert np.max(np.abs(trainer.critic_banks[i][0].out.w.data
                                 - wc_new[i])) < 1e-8
            assert np.max(np.abs(trainer.critic_banks[i][0].out.b.data
                                 - bc_new[i])) < 1e-8
            assert np.max(np.abs(trainer.actors[i].out.w.data - wa_new[i])) < 1e-8
            assert np.max(np.abs(trainer.actors[i].out.b.data - ba_new[i])) < 1e-8


class TestCheckpointFlow:
    def test_save_restore_round_trip(self, tmp_path):
        trainer = make_trainer(AlgoKind.SA_MATD3, n=2, seed=3)
        trainer.save(tmp_path / "ck", episode=42)
        other = make_trainer(AlgoKind.SA_MATD3, n=2, seed=99)
        episode = other.restore(tmp_path / "ck")
        assert episode == 42
        for (ka, pa), (kb, pb) in zip(trainer.named_parameters(),
                                      other.named_parameters()):
            assert ka == kb
            assert np.array_equal(pa.data, pb.data)

    def test_scenario_mismatch_rejected(self, tmp_path):
        trainer = make_trainer(AlgoKind.SA_MATD3, n=2)
        trainer.save(tmp_path / "ck", episode=0)
        other = make_trainer(AlgoKind.SA_MATD3, n=6, scenario="predator_prey")
        with pytest.raises(ValueError, match="agents|scenario"):
            other.restore(tmp_path / "ck")
