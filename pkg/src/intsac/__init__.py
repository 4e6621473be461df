"""Soft Actor-Critic with differentiable integer actions."""

__version__ = "0.1.0"
