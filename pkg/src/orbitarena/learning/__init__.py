"""Reinforcement learning building blocks on plain numpy."""
from .buffers import ReplayBuffer, RolloutBuffer, TrajectoryBatch, gae_advantages, gae_direct
from .checkpoint import load_checkpoint, save_checkpoint
from .ddpg import DDPG_PRESETS, DdpgAgent, DdpgConfig, ddpg_actor_loss, ddpg_critic_loss, ddpg_targets
from .ddqn import DDQN_PRESETS, DdqnAgent, DdqnConfig, ddqn_loss, ddqn_targets, epsilon_greedy
from .federated import fedavg, fedavg_networks
from .mlp import Adam, Mlp, Normalizer, mlp_backward, mlp_forward, soft_update
from .noise import OuNoise, OuState, StepDecay, ou_step
from .ppo import PPO_PRESETS, PpoAgent, PpoConfig, clipped_surrogate, critic_loss, gaussian_log_prob, ppo_actor_loss

__all__ = [
    "Adam", "DDPG_PRESETS", "DDQN_PRESETS", "DdpgAgent", "DdpgConfig", "DdqnAgent", "DdqnConfig", "Mlp",
    "Normalizer", "OuNoise", "OuState", "PPO_PRESETS", "PpoAgent", "PpoConfig", "ReplayBuffer",
    "RolloutBuffer", "StepDecay", "TrajectoryBatch", "clipped_surrogate", "critic_loss", "ddpg_actor_loss",
    "ddpg_critic_loss", "ddpg_targets", "ddqn_loss", "ddqn_targets", "epsilon_greedy", "fedavg",
    "fedavg_networks", "gae_advantages", "gae_direct", "gaussian_log_prob", "load_checkpoint",
    "mlp_backward", "mlp_forward", "ou_step", "ppo_actor_loss", "save_checkpoint", "soft_update",
]
