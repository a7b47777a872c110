"""Policy generation, evaluation and the experiment runner."""
