"""Evolution of fairness in the ultimatum game with empathetic strategies."""

__version__ = "0.1.0"
