"""The outer training loop for I-HER and the HER baseline."""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .. import agent as ddpg
from .. import curiosity, dynamics, imagination
from ..envs import GoalEnv, VecGoalEnv, make_env
from ..replay import IMAG, REAL, Episode, EpisodeBuffer, dual_sample, her_relabel, imag_fraction
from .config import TrainConfig

log = logging.getLogger(__name__)


@dataclass
class MetricsRow:
    epoch: int
    real_steps_total: int
    imag_steps_total: int
    eval_success_rate: float
    mean_intrinsic_reward: float
    model_loss: float
    p_imag: float
    wall_clock_seconds: float


METRIC_FIELDS = [f.name for f in fields(MetricsRow)]


def _child_rngs(rng, n):
    return [np.random.default_rng(s) for s in rng.integers(0, 2**63 - 1, size=n)]


def run_episodes(env: GoalEnv, policy, n, rng, bits, explore, random_eps=0.3, noise_eps=0.2):
    """Roll ``n`` real episodes side by side; returns raw arrays."""
    venv = VecGoalEnv(env, n)
    s, ag, g = venv.reset(_child_rngs(rng, n))
    T = env.spec.episode_length
    obs = np.empty((n, T + 1, s.shape[1]))
    ags = np.empty((n, T + 1, ag.shape[1]))
    actions = np.empty((n, T, env.spec.action_dim))
    rewards = np.empty((n, T))
    obs[:, 0], ags[:, 0] = s, ag
    for t in range(T):
        a = policy.act(s, g, bits, explore, rng, random_eps, noise_eps)
        s, ag, r, _ = venv.step(a)
        obs[:, t + 1], ags[:, t + 1], actions[:, t], rewards[:, t] = s, ag, a, r
    return obs, ags, g, actions, rewards


def evaluate(policy, env: GoalEnv, n_episodes, seed) -> float:
    """Fraction of deterministic episodes (fed ``env_is_real = 1``) ending in success."""
    rng = np.random.default_rng(seed)
    _, ags, g, _, _ = run_episodes(env, policy, n_episodes, rng, 1.0, explore=False)
    return float(np.mean(env.is_success(ags[:, -1], g)))


class Trainer:
    """Owns every piece of cross-epoch state: buffers, networks, counters, RNG."""

    def __init__(self, config: TrainConfig):
        cfg = config.validate()
        self.config = cfg
        self.rng = np.random.default_rng(cfg.seed)
        self.env = make_env(cfg.task, episode_length=cfg.episode_length,
                            success_tolerance=cfg.success_tolerance)
        spec = self.env.spec
        lo = -1.0 / (1.0 - cfg.gamma)
        hi = ddpg.q_target_range(cfg.gamma, cfg.intrinsic_clip)[1] if cfg.effective_intrinsic_scale > 0 else 0.0
        self.agent = ddpg.DDPGAgent(spec.obs_dim, spec.goal_dim, spec.action_dim, cfg.agent_hidden,
                                    cfg.gamma, cfg.polyak, cfg.actor_lr, cfg.critic_lr, cfg.action_l2,
                                    cfg.clip_obs, (lo, hi), rng=self.rng)
        self.curiosity = curiosity.CuriosityConfig(cfg.effective_intrinsic_scale, cfg.intrinsic_clip,
                                                   cfg.variance_space)
        self.real_buffer = EpisodeBuffer(cfg.real_capacity, spec.episode_length, spec.obs_dim,
                                         spec.goal_dim, spec.action_dim, is_real=True)
        self.imag_buffer = EpisodeBuffer(cfg.imag_capacity, spec.episode_length, spec.obs_dim,
                                         spec.goal_dim, spec.action_dim, is_real=False)
        self.ensemble = None
        if cfg.uses_model:
            self.ensemble = dynamics.EnsembleModel(spec.obs_dim, spec.action_dim, cfg.ensemble_size,
                                                   cfg.model_hidden, cfg.model_lr, rng=self.rng)
        self.snapshots = imagination.PolicySnapshotStore()
        self.epoch = 0
        self.cycle_count = 0
        self.history: list[MetricsRow] = []
        self.elapsed = 0.0
        self.last_intrinsic: np.ndarray | None = None

    # ------------------------------------------------------------------ phases
    @property
    def buffers(self):
        return {REAL: self.real_buffer, IMAG: self.imag_buffer}

    def _bits(self, n, base):
        """Policy input bit per episode, with the mixing flip applied."""
        cfg = self.config
        if not cfg.distinguish:
            return np.ones(n)
        flip = self.rng.random(n) < cfg.flip_fraction
        return np.where(flip, 1.0 - base, float(base))

    def collect_real(self):
        cfg = self.config
        n = cfg.real_episodes
        bits = self._bits(n, 1)
        obs, ags, g, actions, rewards = run_episodes(self.env, self.agent.policy, n, self.rng, bits, True,
                                                     cfg.random_eps, cfg.noise_eps)
        for i in range(n):
            self.real_buffer.store_episode(Episode(obs[i], ags[i], g[i], actions[i], rewards[i], True,
                                                   self.epoch))
        goals = np.concatenate([np.repeat(g[:, None, :], obs.shape[1], axis=1), ags], axis=1)
        self.agent.update_normalizer(obs, goals)

    def _imag_request(self, n):
        cfg = self.config
        return imagination.ImagRolloutRequest(
            n, True, env_is_real_input=1 if not cfg.distinguish else 0,
            flip_fraction=cfg.flip_fraction if cfg.distinguish else 0.0,
            random_eps=cfg.random_eps, noise_eps=cfg.noise_eps, epoch=self.epoch)

    @property
    def initial_states(self):
        return self.real_buffer.obs[:, 0]

    def train_model(self):
        cfg = self.config
        return dynamics.train_models(self.ensemble, self.real_buffer, cfg.model_steps, cfg.model_batch_size,
                                     self.epoch, cfg.bias, self.rng)

    def regenerate(self):
        cfg = self.config
        return imagination.regenerate_imag_buffer(
            self.ensemble, self.imag_buffer, self.snapshots, self.agent.policy, cfg.cycles * cfg.imag_episodes,
            self.rng, self.initial_states, self.env, self._imag_request(0))

    def collect_imaginary(self):
        eps = imagination.rollout_imaginary(self.ensemble, self.agent.policy, self.initial_states, self.env,
                                            self._imag_request(self.config.imag_episodes), self.rng)
        for ep in eps:
            self.imag_buffer.store_episode(ep)

    def sample_batch(self):
        """Mixed, relabeled, curiosity-augmented batch plus its intrinsic rewards."""
        cfg = self.config
        imag = self.imag_buffer if cfg.uses_model else None
        batch = dual_sample(self.real_buffer, imag, cfg.batch_size, self.rng)
        batch = her_relabel(batch, self.buffers, cfg.replay_k, self.rng, self.env.compute_reward)
        if self.curiosity.scale > 0:
            return curiosity.augment_batch_rewards(batch, self.ensemble, self.curiosity)
        return batch, np.zeros(len(batch))

    def train_agent_cycle(self):
        intrinsic = []
        for _ in range(self.config.batches):
            batch, r_i = self.sample_batch()
            if not self.config.distinguish:
                batch.is_real = np.ones(len(batch), dtype=bool)
            ddpg.update(self.agent, batch, update_target=False)
            intrinsic.append(float(r_i.mean()))
            self.last_intrinsic = r_i
        ddpg.update_targets(self.agent)
        return intrinsic

    def evaluate(self):
        seed = np.random.SeedSequence([self.config.seed, self.epoch, 0xE7A1])
        return evaluate(self.agent.policy, self.env, self.config.eval_episodes, seed)

    # ------------------------------------------------------------------ loop
    def run_epoch(self) -> MetricsRow:
        cfg = self.config
        start = time.perf_counter()
        self.epoch += 1
        self.collect_real()
        model_loss = float("nan")
        if cfg.uses_model:
            model_loss = self.train_model().mean_loss_end
            if cfg.regenerate:
                self.regenerate()
        intrinsic = []
        for _ in range(cfg.cycles):
            if cfg.uses_model:
                self.collect_imaginary()
            intrinsic += self.train_agent_cycle()
            self.cycle_count += 1
            imagination.snapshot_policy(self.snapshots, self.agent.policy, self.cycle_count, cfg.snapshot_every)
        success = self.evaluate()
        self.elapsed += time.perf_counter() - start
        row = MetricsRow(self.epoch, self.real_buffer.n_total, self.imag_buffer.n_total, success,
                         float(np.mean(intrinsic)), model_loss,
                         imag_fraction(self.real_buffer.n_total, self.imag_buffer.n_total),
                         self.elapsed if cfg.record_wall_clock else 0.0)
        self.history.append(row)
        log.info("epoch %d real=%d success=%.3f p_imag=%.3f r_i=%.4f model_loss=%.4g",
                 row.epoch, row.real_steps_total, success, row.p_imag, row.mean_intrinsic_reward, model_loss)
        return row

    def run(self, metrics_path=None) -> list[MetricsRow]:
        cfg = self.config
        while self.epoch < cfg.epochs:
            row = self.run_epoch()
            if metrics_path is not None:
                write_metrics(self.history, metrics_path)
            if cfg.early_stop_success > 0 and row.eval_success_rate >= cfg.early_stop_success:
                break
        return self.history


def write_metrics(rows, path):
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRIC_FIELDS)
        for r in rows:
            w.writerow([getattr(r, f) if not isinstance(getattr(r, f), float) else repr(getattr(r, f))
                        for f in METRIC_FIELDS])


def read_metrics(path) -> list[MetricsRow]:
    with Path(path).open() as fh:
        rows = list(csv.DictReader(fh))
    return [MetricsRow(int(r["epoch"]), int(r["real_steps_total"]), int(r["imag_steps_total"]),
                       float(r["eval_success_rate"]), float(r["mean_intrinsic_reward"]),
                       float(r["model_loss"]), float(r["p_imag"]), float(r["wall_clock_seconds"]))
            for r in rows]


def train(config: TrainConfig, out_dir=None):
    """Run a full training job; writes metrics and a final checkpoint under ``out_dir``."""
    from .checkpoint import save_checkpoint

    trainer = Trainer(config)
    metrics_path = None
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        metrics_path = out_dir / "metrics.csv"
    trainer.run(metrics_path)
    if out_dir is not None:
        save_checkpoint(trainer, out_dir / "checkpoint.iher")
    return trainer


def steps_to_success(history, threshold):
    """Real steps at the first evaluation reaching ``threshold`` (None if never)."""
    for row in history:
        if row.eval_success_rate >= threshold:
            return row.real_steps_total
    return None
