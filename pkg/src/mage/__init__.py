"""Meta-episode adversarial training on small games: envs, opponents, returns,
advantages, policies and the training loop."""

__version__ = "0.1.0"
