"""Replay-buffer training of the critic and actor networks."""

from __future__ import annotations

import logging
import math
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .agent import NetworkScorer, Parser
from .config import RunConfig
from .core import TypeTable
from .embedding import Embedder
from .frequency import FrequencyTable
from .nn import AdaBelief, DenseResNet, LrSchedule, kaiming_init
from .replay import Memory, ReplayBuffer
from .reward import RewardConfig, integer_reward_constant

log = logging.getLogger(__name__)


def pairwise_policy_loss(A, A_star, V, V_star, beta: float = 0.5, epsilon: float = 0.1):
    """Pairwise policy loss and its gradients with respect to both logits.

    ``eta`` is a detached weight, so the loss ``eta * (A - A_star)`` has
    gradient ``+eta`` for the chosen logit and ``-eta`` for the better one.
    Works elementwise on arrays.
    """
    A = np.asarray(A, dtype=np.float64)
    A_star = np.asarray(A_star, dtype=np.float64)
    gap = np.maximum(0.0, np.asarray(V_star, dtype=np.float64) - np.asarray(V, dtype=np.float64))
    # 1 / (1 + e^x) computed without overflow
    p = 0.5 * (1.0 - np.tanh(0.5 * (A_star - A)))
    eta = gap * p ** beta / (epsilon / 2 + (1 - epsilon) * p)
    eta = np.where(gap > 0, eta, 0.0)
    loss = eta * (A - A_star)
    if loss.ndim == 0:
        return float(loss), float(eta), float(-eta)
    return loss, eta, -eta


def critic_loss(predicted, realized) -> float:
    d = np.asarray(predicted, dtype=np.float64) - np.asarray(realized, dtype=np.float64)
    return float(np.mean(d * d))


@dataclass
class StepLosses:
    critic: float
    policy: float


@contextmanager
def _frozen_stats(net: DenseResNet, frozen: bool):
    saved = [b.copy() for _, b in net.buffers()] if frozen else None
    try:
        yield
    finally:
        if saved is not None:
            for (_, b), old in zip(net.buffers(), saved):
                b[...] = old


def train_step(critic: DenseResNet, actor: DenseResNet, batch: Sequence[Memory],
               critic_opt: AdaBelief, actor_opt: AdaBelief, cfg: RunConfig,
               lr_critic: float | None = None, lr_actor: float | None = None) -> StepLosses:
    """One minibatch update of both networks.

    Expected values for the chosen and better actions are read from the critic
    in eval mode before it is updated and are treated as constants. A network
    whose learning rate is zero is left exactly as it was, batch-norm running
    statistics included, so zero-rate training never changes parsing.
    """
    if not batch:
        raise ValueError("empty batch")
    n = len(batch)
    rows = np.arange(n)
    x = np.stack([m.chosen_window for m in batch]).astype(critic.dtype)
    kinds = np.array([int(m.chosen_kind) for m in batch])
    target = np.array([m.realized_value for m in batch], dtype=np.float64)

    paired = [i for i, m in enumerate(batch) if m.has_better]
    if paired:
        xb = np.stack([batch[i].better_window for i in paired]).astype(critic.dtype)
        bkinds = np.array([int(batch[i].better_kind) for i in paired])
        _, q_eval = critic.forward(np.concatenate([x[paired], xb]), train=False)
        k = len(paired)
        v = q_eval[np.arange(k), kinds[paired]]
        v_star = q_eval[k + np.arange(k), bkinds]

    lr_critic = critic_opt.lr if lr_critic is None else lr_critic
    lr_actor = actor_opt.lr if lr_actor is None else lr_actor
    with _frozen_stats(critic, lr_critic == 0):
        _, q = critic.forward(x, train=True)
    pred = q[rows, kinds].astype(np.float64)
    c_loss = critic_loss(pred, target)
    if lr_critic != 0:
        d_q = np.zeros_like(q)
        d_q[rows, kinds] = 2.0 * (pred - target) / n
        critic_opt.step(critic.backward(d_q), lr_critic)

    p_loss = 0.0
    if paired:
        with _frozen_stats(actor, lr_actor == 0):
            _, qa = actor.forward(np.concatenate([x[paired], xb]), train=True)
        a = qa[np.arange(k), kinds[paired]]
        a_star = qa[k + np.arange(k), bkinds]
        loss, g_a, g_star = pairwise_policy_loss(a, a_star, v, v_star, cfg.beta, cfg.epsilon)
        p_loss = float(np.sum(loss) / n)
        if lr_actor != 0:
            d_qa = np.zeros_like(qa)
            d_qa[np.arange(k), kinds[paired]] = g_a / n
            d_qa[k + np.arange(k), bkinds] = g_star / n
            actor_opt.step(actor.backward(d_qa), lr_actor)
    return StepLosses(c_loss, p_loss)


@dataclass
class EpochMetrics:
    epoch: int
    critic_loss: float
    policy_loss: float
    mean_parse_reward: float
    atom_types: int

    def row(self) -> str:
        return (f"{self.epoch},{self.critic_loss!r},{self.policy_loss!r},"
                f"{self.mean_parse_reward!r},{self.atom_types}")


METRICS_HEADER = "epoch,critic_loss,policy_loss,mean_parse_reward,atom_types"


class Trainer:
    """Owns every piece of training state so it can be checkpointed and resumed."""

    def __init__(self, cfg: RunConfig, train_sentences: Sequence[str],
                 integer_reward: float | None = None) -> None:
        if not train_sentences and integer_reward is None:
            raise ValueError("training corpus is empty")
        self.cfg = cfg
        self.sentences = list(train_sentences)
        self.table = TypeTable()
        self.embedder = Embedder(cfg.embedding_seed, cfg.n_emb, cfg.theta_emb)
        self.critic = DenseResNet(cfg.input_width, cfg.hidden_width, cfg.n_blocks)
        self.actor = DenseResNet(cfg.input_width, cfg.hidden_width, cfg.n_blocks)
        kaiming_init(self.critic, cfg.seed * 2 + 0, cfg.context_atoms, cfg.n_emb)
        kaiming_init(self.actor, cfg.seed * 2 + 1, cfg.context_atoms, cfg.n_emb)
        self.critic_opt = AdaBelief([p for _, p in self.critic.parameters()], cfg.lr_critic)
        self.actor_opt = AdaBelief([p for _, p in self.actor.parameters()], cfg.lr_actor)
        self.freq = FrequencyTable(cfg.t_freq, cfg.n_freq)
        self.buffer = ReplayBuffer(cfg.buffer_capacity)
        self.rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 4]))
        if integer_reward is None:
            integer_reward = integer_reward_constant(self.sentences, cfg.t_freq, cfg.n_freq)
        self.reward_cfg = RewardConfig(cfg.alpha_anchor, cfg.alpha_subgrammar, cfg.lam,
                                       integer_reward)
        self.epoch = 0
        self.history: list[EpochMetrics] = []
        self.critic_schedule = LrSchedule(cfg.lr_critic, cfg.epochs)
        self.actor_schedule = LrSchedule(cfg.lr_actor, cfg.epochs)

    def scorer(self) -> NetworkScorer:
        return NetworkScorer(self.critic, self.actor, self.embedder)

    def parser(self) -> Parser:
        return Parser(self.table, self.scorer(), self.freq, self.reward_cfg,
                      self.cfg.context_atoms, self.embedder)

    def run_round(self, sentences: Sequence[str], parser: Parser, lr_c: float, lr_a: float):
        """Parse a group of sentences, commit observations, then train."""
        memories: list[Memory] = []
        observations = []
        for s in sentences:
            obs: list = []
            res = parser.parse(s, "explore", self.cfg.epsilon, self.rng, obs)
            memories.extend(res.memories)
            observations.append((len(s), obs))
        for n_chars, obs in observations:
            self.freq.advance(n_chars)
            for atype, count in obs:
                self.freq.observe(atype, count)
        self.freq.end_batch()
        self.buffer.extend(memories)
        losses = []
        for _ in range(math.ceil(2 * len(memories) / self.cfg.batch_size)):
            batch = self.buffer.sample(self.cfg.batch_size, self.rng)
            losses.append(train_step(self.critic, self.actor, batch, self.critic_opt,
                                     self.actor_opt, self.cfg, lr_c, lr_a))
        return memories, losses

    def run_epoch(self) -> EpochMetrics:
        cfg = self.cfg
        lr_c = self.critic_schedule.lr_at(self.epoch)
        lr_a = self.actor_schedule.lr_at(self.epoch)
        parser = self.parser()
        order = self.rng.permutation(len(self.sentences))
        c_losses, p_losses, values = [], [], []
        for start in range(0, len(order), cfg.round_size):
            group = [self.sentences[i] for i in order[start:start + cfg.round_size]]
            memories, losses = self.run_round(group, parser, lr_c, lr_a)
            values.extend(m.realized_value for m in memories)
            c_losses.extend(l.critic for l in losses)
            p_losses.extend(l.policy for l in losses)
        m = EpochMetrics(self.epoch,
                         float(np.mean(c_losses)) if c_losses else 0.0,
                         float(np.mean(p_losses)) if p_losses else 0.0,
                         float(np.mean(values)) if values else 0.0,
                         len(self.freq))
        self.history.append(m)
        self.epoch += 1
        return m

    def train(self, until_epoch: int | None = None,
              callback: Callable[[EpochMetrics], None] | None = None) -> list[EpochMetrics]:
        stop = self.cfg.epochs if until_epoch is None else min(until_epoch, self.cfg.epochs)
        out = []
        while self.epoch < stop:
            m = self.run_epoch()
            log.info("epoch %d critic %.4f policy %.4f reward %.3f types %d", m.epoch,
                     m.critic_loss, m.policy_loss, m.mean_parse_reward, m.atom_types)
            out.append(m)
            if callback is not None:
                callback(m)
        return out


def run_training(train_sentences: Sequence[str], cfg: RunConfig, seed: int | None = None,
                 callback=None) -> Trainer:
    if seed is not None:
        cfg = cfg.replace(seed=seed)
    trainer = Trainer(cfg, train_sentences)
    trainer.train(callback=callback)
    return trainer
