"""Argumentation-based preference generalisation for maze reward learning.

Pipeline: rollout trajectories in a continuous maze, build a dissimilarity
attack graph over them, generalise a small pool of pairwise preferences
through maximal conflict-free extensions, train a pairwise reward model on
the generalised preferences, and train a Q-learning policy on the learned
reward.
"""

__version__ = "0.1.0"
