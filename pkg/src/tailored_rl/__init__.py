"""Curriculum GRPO with hybrid Thinking/NoThinking prompting, at desk scale."""
__version__ = "0.1.0"
