"""Seedable text-based social-deduction simulator with LLM-agent tooling."""

__version__ = "0.1.0"
